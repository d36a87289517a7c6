#include "fone/codec.hpp"

#include <algorithm>
#include <cmath>

#include "fone/error.hpp"

namespace fone {
namespace {

const AnchorTable& base_ten_anchors() {
    static const AnchorTable table;
    return table;
}

DigitLogits pair_logits(double c, double s, const AnchorTable& anchors, std::size_t block,
                        DigitLogits acc) {
    for (int j = 0; j < 10; ++j) {
        const CirclePoint& a = anchors.anchor(block, j);
        acc[j] += c * a.cos_part + s * a.sin_part;
    }
    return acc;
}

// Logits equal up to rounding count as a tie; the relative tolerance keeps
// the choice invariant under positive scaling of h.
int argmax_lowest(const DigitLogits& logits) {
    double magnitude = 0.0;
    for (double z : logits) {
        magnitude = std::max(magnitude, std::fabs(z));
    }
    const double tie = 1e-12 * magnitude;
    int best = 0;
    for (int j = 1; j < 10; ++j) {
        if (logits[j] > logits[best] + tie) {
            best = j;
        }
    }
    return best;
}

void check_pair(std::span<const double> h, std::size_t i) {
    if (h.size() < 2 * i + 2) {
        fail(ErrorKind::invalid_index, "digit index " + std::to_string(i) + " needs " +
                                           std::to_string(2 * i + 2) + " entries, hidden state has " +
                                           std::to_string(h.size()));
    }
}

std::size_t label_digit(const DigitLabel& y, std::size_t i) {
    if (i >= y.digits.size()) {
        fail(ErrorKind::invalid_index, "label has no digit " + std::to_string(i));
    }
    return static_cast<std::size_t>(y.digits[i]);
}

}  // namespace

AnchorTable::AnchorTable(const PeriodSet& periods) {
    for (double base : periods.bases()) {
        std::array<CirclePoint, 10> row{};
        for (int j = 0; j < 10; ++j) {
            row[j] = circular_embed(j, base);
        }
        rows_.push_back(row);
    }
}

DigitLabel DigitLabel::from_string(std::string_view answer, const NumberFormat& fmt) {
    const std::string canonical = canonical_decimal(answer, fmt);
    DigitLabel label;
    label.format = fmt;
    const auto point = canonical.find('.');
    std::string integer = canonical.substr(0, point);
    const std::string fraction = point == std::string::npos ? "" : canonical.substr(point + 1);
    if (integer == "0") {
        integer.clear();
    }
    for (std::size_t k = fraction.size(); k-- > 0;) {
        label.digits.push_back(fraction[k] - '0');
    }
    for (std::size_t k = integer.size(); k-- > 0;) {
        label.digits.push_back(integer[k] - '0');
    }
    label.digits.resize(static_cast<std::size_t>(fmt.total_digits()), 0);
    return label;
}

void DigitLabel::validate() const {
    if (digits.size() != static_cast<std::size_t>(format.total_digits())) {
        fail(ErrorKind::invalid_format, "label has " + std::to_string(digits.size()) +
                                            " digits, format " + format.to_string() + " needs " +
                                            std::to_string(format.total_digits()));
    }
    for (int d : digits) {
        if (d < 0 || d > 9) {
            fail(ErrorKind::invalid_digit, "label digit " + std::to_string(d) + " is outside 0-9");
        }
    }
}

std::string DigitLabel::to_string() const {
    validate();
    return assemble_digits(digits, format);
}

std::string assemble_digits(std::span<const int> digits, const NumberFormat& fmt) {
    const std::size_t n = static_cast<std::size_t>(fmt.fraction_digits);
    std::string integer;
    for (std::size_t j = digits.size(); j-- > n;) {
        if (!integer.empty() || digits[j] != 0) {
            integer.push_back(static_cast<char>('0' + digits[j]));
        }
    }
    if (integer.empty()) {
        integer = "0";
    }
    if (n == 0) {
        return integer;
    }
    std::string fraction;
    for (std::size_t j = n; j-- > 0;) {
        fraction.push_back(static_cast<char>('0' + digits[j]));
    }
    return integer + "." + fraction;
}

double cross_entropy(std::span<const double> logits, std::size_t target) {
    const double peak = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) {
        sum += std::exp(z - peak);
    }
    return peak + std::log(sum) - logits[target];
}

FourierHead::FourierHead(NumberFormat fmt, PeriodSet periods)
    : fmt_(fmt), periods_(std::move(periods)), anchors_(periods_) {
    fmt_.validate(true);
}

std::size_t FourierHead::width() const noexcept {
    return 2 * static_cast<std::size_t>(fmt_.total_digits()) * periods_.size();
}

void FourierHead::check_index(std::span<const double> h, std::size_t i) const {
    const std::size_t places = static_cast<std::size_t>(fmt_.total_digits());
    if (i >= places) {
        fail(ErrorKind::invalid_index, "digit index " + std::to_string(i) + " outside format " +
                                           fmt_.to_string());
    }
    check_pair(h, (periods_.size() - 1) * places + i);
}

void FourierHead::check_width(std::span<const double> h) const {
    if (h.size() < width()) {
        fail(ErrorKind::invalid_format, "hidden state has " + std::to_string(h.size()) +
                                            " entries, format " + fmt_.to_string() + " needs " +
                                            std::to_string(width()));
    }
}

DigitLogits FourierHead::logits(std::span<const double> h, std::size_t i) const {
    check_index(h, i);
    const std::size_t places = static_cast<std::size_t>(fmt_.total_digits());
    DigitLogits acc{};
    for (std::size_t k = 0; k < anchors_.blocks(); ++k) {
        const std::size_t p = k * places + i;
        acc = pair_logits(h[2 * p], h[2 * p + 1], anchors_, k, acc);
    }
    return acc;
}

double FourierHead::digit_loss(std::span<const double> h, const DigitLabel& y, std::size_t i) const {
    const DigitLogits z = logits(h, i);
    return cross_entropy(z, label_digit(y, i));
}

double FourierHead::final_loss(std::span<const double> h, const DigitLabel& y) const {
    check_width(h);
    if (y.format != fmt_) {
        fail(ErrorKind::invalid_format, "label format " + y.format.to_string() +
                                            " differs from head format " + fmt_.to_string());
    }
    y.validate();
    double total = 0.0;
    for (std::size_t i = 0; i < y.digits.size(); ++i) {
        total += digit_loss(h, y, i);
    }
    return total / static_cast<double>(y.digits.size());
}

double FourierHead::final_loss_grad(std::span<const double> h, const DigitLabel& y,
                                    std::vector<double>& grad) const {
    check_width(h);
    if (y.format != fmt_) {
        fail(ErrorKind::invalid_format, "label format differs from head format");
    }
    y.validate();
    grad.assign(h.size(), 0.0);
    const std::size_t places = y.digits.size();
    const double scale = 1.0 / static_cast<double>(places);
    double total = 0.0;
    for (std::size_t i = 0; i < places; ++i) {
        const DigitLogits z = logits(h, i);
        const double peak = *std::max_element(z.begin(), z.end());
        DigitLogits prob{};
        double sum = 0.0;
        for (int j = 0; j < 10; ++j) {
            prob[j] = std::exp(z[j] - peak);
            sum += prob[j];
        }
        const auto target = static_cast<std::size_t>(y.digits[i]);
        total += peak + std::log(sum) - z[target];
        for (int j = 0; j < 10; ++j) {
            prob[j] /= sum;
        }
        prob[target] -= 1.0;
        for (std::size_t k = 0; k < anchors_.blocks(); ++k) {
            const std::size_t p = k * places + i;
            for (int j = 0; j < 10; ++j) {
                const CirclePoint& a = anchors_.anchor(k, j);
                grad[2 * p] += scale * prob[j] * a.cos_part;
                grad[2 * p + 1] += scale * prob[j] * a.sin_part;
            }
        }
    }
    return total * scale;
}

int FourierHead::predict_digit(std::span<const double> h, std::size_t i) const {
    return argmax_lowest(logits(h, i));
}

std::vector<int> FourierHead::predict_digits(std::span<const double> h) const {
    check_width(h);
    std::vector<int> digits(static_cast<std::size_t>(fmt_.total_digits()));
    for (std::size_t i = 0; i < digits.size(); ++i) {
        digits[i] = predict_digit(h, i);
    }
    return digits;
}

std::string FourierHead::final_predict(std::span<const double> h) const {
    return assemble_digits(predict_digits(h), fmt_);
}

DigitLogits digit_logits(std::span<const double> h, std::size_t i) {
    check_pair(h, i);
    return pair_logits(h[2 * i], h[2 * i + 1], base_ten_anchors(), 0, DigitLogits{});
}

double digit_loss(std::span<const double> h, const DigitLabel& y, std::size_t i) {
    const std::size_t target = label_digit(y, i);
    return cross_entropy(digit_logits(h, i), target);
}

double final_loss(std::span<const double> h, const DigitLabel& y) {
    return FourierHead(y.format).final_loss(h, y);
}

int digit_predict(std::span<const double> h, std::size_t i) {
    return argmax_lowest(digit_logits(h, i));
}

std::string final_predict(std::span<const double> h, const NumberFormat& fmt) {
    return FourierHead(fmt).final_predict(h);
}

}  // namespace fone
