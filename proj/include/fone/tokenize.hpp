#pragma once

// Number-aware sequence encoders. FoNE, xVal and the direct-digit ablation
// replace every number by one [Num] token carrying a numeric payload; the
// digit-wise and subword baselines spell numbers out as tokens and predict
// the answer autoregressively.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fone/codec.hpp"
#include "fone/datagen.hpp"
#include "fone/number_format.hpp"

namespace fone {

enum class Scheme { fone, digitwise, subword, xval, direct };

std::string_view to_string(Scheme scheme) noexcept;
Scheme parse_scheme(std::string_view name);

/// True for schemes that emit one [Num] token per number.
bool is_single_token(Scheme scheme) noexcept;

inline constexpr std::string_view kNumToken = "[Num]";
inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kEosToken = "[EOS]";

class Vocabulary {
public:
    Vocabulary() = default;
    explicit Vocabulary(std::vector<std::string> tokens);

    /// Reserved tokens ([PAD], [Num], [EOS], + - * , = .) followed by the
    /// scheme's numeric tokens: digits for digit-wise, every 1-3 digit
    /// string for subword (1110 tokens), none otherwise.
    static Vocabulary for_scheme(Scheme scheme);

    std::size_t size() const noexcept { return tokens_.size(); }
    bool contains(std::string_view token) const;
    /// Throws invalid-argument for unknown tokens.
    int id(std::string_view token) const;
    const std::string& token(int id) const;
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

    int num_id() const { return id(kNumToken); }
    int eos_id() const { return id(kEosToken); }

    /// One token per line.
    std::string serialize() const;
    static Vocabulary deserialize(std::string_view text);

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
};

struct ExtractedNumbers {
    std::string template_text;         // numbers replaced by "[Num]"
    std::vector<std::string> numbers;  // left to right
};

/// Maximal digit runs, each optionally continued by one '.' and more digits.
ExtractedNumbers extract_numbers(std::string_view text);
std::string reinsert_numbers(const ExtractedNumbers& extracted);

struct EncodedSequence {
    Scheme scheme = Scheme::fone;
    std::vector<int> token_ids;
    /// Per position; non-empty exactly at [Num] tokens.
    std::vector<std::vector<double>> payloads;
    /// Next-token target per position, -1 where no token loss applies.
    std::vector<int> targets;
    /// Position whose final hidden state is decoded ('=' of the prompt).
    std::size_t answer_slot = 0;

    std::optional<DigitLabel> digit_label;  // fone
    std::optional<double> scalar_label;     // xval, normalised
    std::vector<double> digit_targets;      // direct, most-significant first
    std::optional<int> class_label;         // classification tasks

    std::size_t size() const noexcept { return token_ids.size(); }
    /// Tokens the model sees at inference: everything up to answer_slot.
    std::size_t prompt_length() const noexcept { return answer_slot + 1; }
};

/// Greedy left-to-right groups of at most three digits; the point, if any,
/// is its own token and the fraction is grouped separately.
std::vector<std::string> subword_pieces(std::string_view number);

/// Numeric tokens needed to spell `number` (the point is not counted).
std::size_t numeric_token_count(Scheme scheme, std::string_view number);

/// Largest answer a task can produce, e.g. "1998" for int-add-3.
std::string max_answer(const TaskSpec& spec);

/// Digits of `number` under `fmt`, most-significant first ("567" -> 5,6,7).
std::vector<double> direct_digits(std::string_view number, const NumberFormat& fmt);

/// Scheme-specific encoder for one task.
class Encoder {
public:
    Encoder(Scheme scheme, TaskSpec task, PeriodSet periods = {});

    Scheme scheme() const noexcept { return scheme_; }
    const TaskSpec& task() const noexcept { return task_; }
    const PeriodSet& periods() const noexcept { return periods_; }
    const Vocabulary& vocabulary() const noexcept { return vocab_; }

    /// Payload width per [Num] token (0 for spelled-out schemes).
    std::size_t payload_dim() const;
    /// xVal normalisation constant: 10^(answer integer digits).
    double xval_scale() const;
    /// Longest sequence this task can produce, answer included.
    std::size_t max_length() const;

    EncodedSequence encode(const ArithRecord& record) const;
    /// Text of the encoded record, answer included.
    std::string decode(const EncodedSequence& seq) const;

    /// Number -> payload for single-token schemes.
    std::vector<double> payload(std::string_view number) const;
    /// Payload -> canonical number string.
    std::string number_from_payload(const std::vector<double>& payload) const;

private:
    void append_number(EncodedSequence& seq, std::string_view number) const;
    void append_token(EncodedSequence& seq, std::string_view token) const;

    Scheme scheme_;
    TaskSpec task_;
    PeriodSet periods_;
    Vocabulary vocab_;
};

// Free-function forms of the per-scheme encoders.
EncodedSequence encode_fone(const ArithRecord& record, const TaskSpec& spec,
                            const PeriodSet& periods = {});
EncodedSequence encode_digitwise(const ArithRecord& record, const TaskSpec& spec);
EncodedSequence encode_subword(const ArithRecord& record, const TaskSpec& spec);
EncodedSequence encode_xval(const ArithRecord& record, const TaskSpec& spec);
EncodedSequence encode_direct_digits(const ArithRecord& record, const TaskSpec& spec);

}  // namespace fone
