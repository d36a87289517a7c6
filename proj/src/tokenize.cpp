#include "fone/tokenize.hpp"

#include <cmath>
#include <sstream>

#include "fone/decimal.hpp"
#include "fone/error.hpp"
#include "fone/fone_core.hpp"

namespace fone {
namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

const std::vector<std::string>& reserved_tokens() {
    static const std::vector<std::string> tokens{
        std::string(kPadToken), std::string(kNumToken), std::string(kEosToken),
        "+", "-", "*", ",", "=", "."};
    return tokens;
}

std::string max_operand(const TaskSpec& spec) {
    if (spec.kind == TaskKind::classify) {
        return std::to_string(spec.classify_max);
    }
    const int integer_digits = spec.operand_digits - spec.fractional_digits;
    std::string s(static_cast<std::size_t>(integer_digits), '9');
    if (spec.fractional_digits > 0) {
        s += "." + std::string(static_cast<std::size_t>(spec.fractional_digits), '9');
    }
    return s;
}

std::size_t spelled_length(Scheme scheme, std::string_view number) {
    if (scheme == Scheme::digitwise) {
        return number.size();
    }
    return subword_pieces(number).size();
}

}  // namespace

std::string_view to_string(Scheme scheme) noexcept {
    switch (scheme) {
        case Scheme::fone: return "fone";
        case Scheme::digitwise: return "digitwise";
        case Scheme::subword: return "subword";
        case Scheme::xval: return "xval";
        case Scheme::direct: return "direct";
    }
    return "unknown";
}

Scheme parse_scheme(std::string_view name) {
    if (name == "fone") return Scheme::fone;
    if (name == "digitwise" || name == "digit-wise") return Scheme::digitwise;
    if (name == "subword") return Scheme::subword;
    if (name == "xval") return Scheme::xval;
    if (name == "direct") return Scheme::direct;
    fail(ErrorKind::config_error, "unknown scheme \"" + std::string(name) + "\"");
}

bool is_single_token(Scheme scheme) noexcept {
    return scheme == Scheme::fone || scheme == Scheme::xval || scheme == Scheme::direct;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (std::size_t k = 0; k < tokens_.size(); ++k) {
        if (!ids_.emplace(tokens_[k], static_cast<int>(k)).second) {
            fail(ErrorKind::invalid_argument, "duplicate token \"" + tokens_[k] + "\"");
        }
    }
    for (const auto& r : reserved_tokens()) {
        if (!ids_.contains(r)) {
            fail(ErrorKind::invalid_argument, "vocabulary lacks reserved token \"" + r + "\"");
        }
    }
}

Vocabulary Vocabulary::for_scheme(Scheme scheme) {
    std::vector<std::string> tokens = reserved_tokens();
    if (scheme == Scheme::digitwise) {
        for (char c = '0'; c <= '9'; ++c) tokens.emplace_back(1, c);
    } else if (scheme == Scheme::subword) {
        for (int width = 1; width <= 3; ++width) {
            const int count = width == 1 ? 10 : (width == 2 ? 100 : 1000);
            for (int v = 0; v < count; ++v) {
                std::string s = std::to_string(v);
                s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
                tokens.push_back(std::move(s));
            }
        }
    }
    return Vocabulary(std::move(tokens));
}

bool Vocabulary::contains(std::string_view token) const {
    return ids_.contains(std::string(token));
}

int Vocabulary::id(std::string_view token) const {
    const auto it = ids_.find(std::string(token));
    if (it == ids_.end()) {
        fail(ErrorKind::invalid_argument, "token \"" + std::string(token) + "\" not in vocabulary");
    }
    return it->second;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
        fail(ErrorKind::invalid_argument, "token id " + std::to_string(id) + " out of range");
    }
    return tokens_[static_cast<std::size_t>(id)];
}

std::string Vocabulary::serialize() const {
    std::string out;
    for (const auto& t : tokens_) {
        out += t;
        out.push_back('\n');
    }
    return out;
}

Vocabulary Vocabulary::deserialize(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t start = 0;
    while (start < text.size()) {
        const auto end = text.find('\n', start);
        if (end == std::string_view::npos) {
            fail(ErrorKind::parse_error, "vocabulary text must end with a newline");
        }
        tokens.emplace_back(text.substr(start, end - start));
        start = end + 1;
    }
    return Vocabulary(std::move(tokens));
}

ExtractedNumbers extract_numbers(std::string_view text) {
    ExtractedNumbers out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_digit(text[i])) {
            out.template_text.push_back(text[i++]);
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && is_digit(text[j])) ++j;
        if (j + 1 < text.size() && text[j] == '.' && is_digit(text[j + 1])) {
            ++j;
            while (j < text.size() && is_digit(text[j])) ++j;
        }
        out.numbers.emplace_back(text.substr(i, j - i));
        out.template_text += kNumToken;
        i = j;
    }
    return out;
}

std::string reinsert_numbers(const ExtractedNumbers& extracted) {
    std::string out;
    std::size_t next = 0;
    std::size_t i = 0;
    const std::string& t = extracted.template_text;
    while (i < t.size()) {
        if (t.compare(i, kNumToken.size(), kNumToken) == 0 && next < extracted.numbers.size()) {
            out += extracted.numbers[next++];
            i += kNumToken.size();
        } else {
            out.push_back(t[i++]);
        }
    }
    return out;
}

std::vector<std::string> subword_pieces(std::string_view number) {
    const DecimalDigits parts = parse_decimal(number);
    std::vector<std::string> pieces;
    auto group = [&pieces](const std::string& digits) {
        for (std::size_t k = 0; k < digits.size(); k += 3) {
            pieces.push_back(digits.substr(k, 3));
        }
    };
    group(parts.integer_part);
    if (!parts.fraction_part.empty()) {
        pieces.emplace_back(".");
        group(parts.fraction_part);
    }
    return pieces;
}

std::size_t numeric_token_count(Scheme scheme, std::string_view number) {
    if (is_single_token(scheme)) {
        return 1;
    }
    const DecimalDigits parts = parse_decimal(number);
    if (scheme == Scheme::digitwise) {
        return parts.integer_part.size() + parts.fraction_part.size();
    }
    const auto groups = [](std::size_t n) { return (n + 2) / 3; };
    return groups(parts.integer_part.size()) + groups(parts.fraction_part.size());
}

std::string max_answer(const TaskSpec& spec) {
    const std::string top = max_operand(spec);
    switch (spec.kind) {
        case TaskKind::int_add:
        case TaskKind::decimal_add: return decimal::add(top, top);
        case TaskKind::int_sub: return top;
        case TaskKind::int_mul: return decimal::multiply(top, top);
        case TaskKind::classify: return "1";
    }
    return top;
}

std::vector<double> direct_digits(std::string_view number, const NumberFormat& fmt) {
    const std::string canonical = canonical_decimal(number, fmt);
    const auto point = canonical.find('.');
    std::string integer = canonical.substr(0, point);
    if (integer == "0") integer.clear();
    integer.insert(0, static_cast<std::size_t>(fmt.integer_digits) - integer.size(), '0');
    const std::string fraction = point == std::string::npos ? "" : canonical.substr(point + 1);
    std::vector<double> out;
    for (char c : integer + fraction) {
        out.push_back(c - '0');
    }
    return out;
}

Encoder::Encoder(Scheme scheme, TaskSpec task, PeriodSet periods)
    : scheme_(scheme), task_(std::move(task)), periods_(std::move(periods)),
      vocab_(Vocabulary::for_scheme(scheme)) {
    task_.validate();
}

std::size_t Encoder::payload_dim() const {
    switch (scheme_) {
        case Scheme::fone: return raw_fone_size(task_.number_format(), periods_);
        case Scheme::xval: return 1;
        case Scheme::direct: return static_cast<std::size_t>(task_.number_format().total_digits());
        default: return 0;
    }
}

double Encoder::xval_scale() const {
    return std::pow(10.0, task_.number_format().integer_digits);
}

std::size_t Encoder::max_length() const {
    const std::size_t count = task_.operand_count();
    if (is_single_token(scheme_)) {
        return 2 * count;
    }
    std::size_t length = count * spelled_length(scheme_, max_operand(task_)) + count;
    if (task_.kind != TaskKind::classify) {
        length += spelled_length(scheme_, max_answer(task_)) + 1;
    }
    return length;
}

std::vector<double> Encoder::payload(std::string_view number) const {
    const NumberFormat fmt = task_.number_format();
    switch (scheme_) {
        case Scheme::fone: return fone_encode(number, fmt, periods_).values;
        case Scheme::xval: return {std::stod(canonical_decimal(number, fmt)) / xval_scale()};
        case Scheme::direct: return direct_digits(number, fmt);
        default: fail(ErrorKind::invalid_argument, "scheme has no numeric payload");
    }
}

std::string Encoder::number_from_payload(const std::vector<double>& payload) const {
    const NumberFormat fmt = task_.number_format();
    switch (scheme_) {
        case Scheme::fone: {
            FoneVector v;
            v.values = payload;
            v.format = fmt;
            v.raw_size = payload.size();
            return recover_digits(v, fmt, periods_);
        }
        case Scheme::xval: {
            const double units = std::pow(10.0, fmt.fraction_digits);
            const long long scaled = std::llround(std::max(0.0, payload.at(0) * xval_scale() * units));
            std::string digits = std::to_string(scaled);
            const auto n = static_cast<std::size_t>(fmt.fraction_digits);
            if (n > 0) {
                if (digits.size() <= n) digits.insert(0, n + 1 - digits.size(), '0');
                digits.insert(digits.size() - n, ".");
            }
            return digits;
        }
        case Scheme::direct: {
            std::vector<int> lsf;
            for (std::size_t k = payload.size(); k-- > 0;) {
                lsf.push_back(static_cast<int>(std::clamp(std::lround(payload[k]), 0L, 9L)));
            }
            return assemble_digits(lsf, fmt);
        }
        default: fail(ErrorKind::invalid_argument, "scheme has no numeric payload");
    }
}

void Encoder::append_token(EncodedSequence& seq, std::string_view token) const {
    seq.token_ids.push_back(vocab_.id(token));
    seq.payloads.emplace_back();
    seq.targets.push_back(-1);
}

void Encoder::append_number(EncodedSequence& seq, std::string_view number) const {
    if (is_single_token(scheme_)) {
        append_token(seq, kNumToken);
        seq.payloads.back() = payload(number);
        return;
    }
    canonical_decimal(number, task_.number_format());  // format check
    if (scheme_ == Scheme::digitwise) {
        for (char c : number) append_token(seq, std::string(1, c));
    } else {
        for (const auto& piece : subword_pieces(number)) append_token(seq, piece);
    }
}

EncodedSequence Encoder::encode(const ArithRecord& record) const {
    if (record.operands.size() != task_.operand_count() || record.op != task_.op()) {
        fail(ErrorKind::task_mismatch, "record \"" + record.to_text() + "\" does not belong to " +
                                           task_.name());
    }
    EncodedSequence seq;
    seq.scheme = scheme_;
    for (std::size_t k = 0; k < record.operands.size(); ++k) {
        if (k > 0) append_token(seq, std::string(1, record.op));
        append_number(seq, record.operands[k]);
    }
    append_token(seq, "=");
    seq.answer_slot = seq.size() - 1;

    if (task_.kind == TaskKind::classify) {
        seq.class_label = record.label.value_or(record.answer == "1" ? 1 : 0);
        return seq;
    }
    switch (scheme_) {
        case Scheme::fone:
            seq.digit_label = DigitLabel::from_string(record.answer, task_.answer_format);
            break;
        case Scheme::xval:
            seq.scalar_label =
                std::stod(canonical_decimal(record.answer, task_.answer_format)) / xval_scale();
            break;
        case Scheme::direct:
            seq.digit_targets = direct_digits(record.answer, task_.answer_format);
            break;
        case Scheme::digitwise:
        case Scheme::subword: {
            const std::string answer = canonical_decimal(record.answer, task_.answer_format);
            if (scheme_ == Scheme::digitwise) {
                for (char c : answer) append_token(seq, std::string(1, c));
            } else {
                for (const auto& piece : subword_pieces(answer)) append_token(seq, piece);
            }
            append_token(seq, kEosToken);
            for (std::size_t p = seq.answer_slot; p + 1 < seq.size(); ++p) {
                seq.targets[p] = seq.token_ids[p + 1];
            }
            break;
        }
    }
    return seq;
}

std::string Encoder::decode(const EncodedSequence& seq) const {
    std::string text;
    for (std::size_t p = 0; p < seq.size(); ++p) {
        const std::string& token = vocab_.token(seq.token_ids[p]);
        if (token == kNumToken) {
            text += number_from_payload(seq.payloads.at(p));
        } else if (token != kEosToken && token != kPadToken) {
            text += token;
        }
    }
    if (seq.class_label) {
        text += std::to_string(*seq.class_label);
    } else if (seq.digit_label) {
        text += seq.digit_label->to_string();
    } else if (seq.scalar_label) {
        const TaskSpec& t = task_;
        const double units = std::pow(10.0, t.answer_format.fraction_digits);
        const long long scaled = std::llround(*seq.scalar_label * xval_scale() * units);
        std::vector<int> lsf;
        for (long long v = scaled; v > 0; v /= 10) lsf.push_back(static_cast<int>(v % 10));
        lsf.resize(static_cast<std::size_t>(t.answer_format.total_digits()), 0);
        text += assemble_digits(lsf, t.answer_format);
    } else if (!seq.digit_targets.empty()) {
        std::vector<int> lsf;
        for (std::size_t k = seq.digit_targets.size(); k-- > 0;) {
            lsf.push_back(static_cast<int>(std::lround(seq.digit_targets[k])));
        }
        text += assemble_digits(lsf, task_.answer_format);
    }
    return text;
}

EncodedSequence encode_fone(const ArithRecord& record, const TaskSpec& spec, const PeriodSet& periods) {
    return Encoder(Scheme::fone, spec, periods).encode(record);
}

EncodedSequence encode_digitwise(const ArithRecord& record, const TaskSpec& spec) {
    return Encoder(Scheme::digitwise, spec).encode(record);
}

EncodedSequence encode_subword(const ArithRecord& record, const TaskSpec& spec) {
    return Encoder(Scheme::subword, spec).encode(record);
}

EncodedSequence encode_xval(const ArithRecord& record, const TaskSpec& spec) {
    return Encoder(Scheme::xval, spec).encode(record);
}

EncodedSequence encode_direct_digits(const ArithRecord& record, const TaskSpec& spec) {
    return Encoder(Scheme::direct, spec).encode(record);
}

}  // namespace fone
