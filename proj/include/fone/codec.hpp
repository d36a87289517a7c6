#pragma once

// Digit-wise decoding head. A hidden state h carries digit i in the pair
// (h[2i], h[2i+1]); its logits are the dot products with the ten anchors
// φ(j, 10), so one cross-entropy per digit replaces a softmax over every
// representable number.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fone/fone_core.hpp"
#include "fone/number_format.hpp"

namespace fone {

using DigitLogits = std::array<double, 10>;

/// Row j of block k is circular_embed(j, bases[k]). With the default set
/// this is the 10 x 2 table φ(0,10) .. φ(9,10).
class AnchorTable {
public:
    explicit AnchorTable(const PeriodSet& periods = {});

    std::size_t blocks() const noexcept { return rows_.size(); }
    const CirclePoint& anchor(std::size_t block, int digit) const { return rows_.at(block).at(digit); }

private:
    std::vector<std::array<CirclePoint, 10>> rows_;
};

/// Digits of a label, least-significant first, m + n of them.
struct DigitLabel {
    std::vector<int> digits;
    NumberFormat format;

    /// Throws format-overflow if `answer` does not fit `fmt`.
    static DigitLabel from_string(std::string_view answer, const NumberFormat& fmt);
    /// Canonical decimal under `format`.
    std::string to_string() const;
    void validate() const;
};

/// Canonical decimal for least-significant-first digits under `fmt`.
std::string assemble_digits(std::span<const int> digits, const NumberFormat& fmt);

/// Head for one answer format and period set. The hidden state's first
/// 2 (m+n) |bases| entries are read, base-major like fone_encode.
class FourierHead {
public:
    explicit FourierHead(NumberFormat fmt, PeriodSet periods = {});

    const NumberFormat& format() const noexcept { return fmt_; }
    const PeriodSet& periods() const noexcept { return periods_; }
    std::size_t width() const noexcept;  // entries of h the head reads

    DigitLogits logits(std::span<const double> h, std::size_t i) const;
    double digit_loss(std::span<const double> h, const DigitLabel& y, std::size_t i) const;
    double final_loss(std::span<const double> h, const DigitLabel& y) const;

    /// final_loss and its gradient w.r.t. h (grad is resized to h.size()).
    double final_loss_grad(std::span<const double> h, const DigitLabel& y,
                           std::vector<double>& grad) const;

    /// Argmax, lowest digit on ties.
    int predict_digit(std::span<const double> h, std::size_t i) const;
    std::vector<int> predict_digits(std::span<const double> h) const;
    std::string final_predict(std::span<const double> h) const;

private:
    void check_index(std::span<const double> h, std::size_t i) const;
    void check_width(std::span<const double> h) const;

    NumberFormat fmt_;
    PeriodSet periods_;
    AnchorTable anchors_;
};

// Base-10 forms of the head operations.
DigitLogits digit_logits(std::span<const double> h, std::size_t i);
double digit_loss(std::span<const double> h, const DigitLabel& y, std::size_t i);
double final_loss(std::span<const double> h, const DigitLabel& y);
int digit_predict(std::span<const double> h, std::size_t i);
std::string final_predict(std::span<const double> h, const NumberFormat& fmt);

/// Numerically stable log-sum-exp minus the target logit.
double cross_entropy(std::span<const double> logits, std::size_t target);

}  // namespace fone
