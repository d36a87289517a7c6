#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace fone {

// Largest unchunked widths: a value with m + n <= 15 significant digits is
// exact in a double.
inline constexpr int kMaxIntegerDigits = 10;
inline constexpr int kMaxFractionDigits = 5;

/// Digit layout of a number: `integer_digits` before the point and
/// `fraction_digits` after it.
struct NumberFormat {
    int integer_digits = 1;
    int fraction_digits = 0;

    NumberFormat() = default;
    NumberFormat(int m, int n);

    int total_digits() const noexcept { return integer_digits + fraction_digits; }

    /// Throws invalid-format unless m + n >= 1 and both are non-negative.
    /// With `chunked == false` the 15-digit double bound is also enforced.
    void validate(bool chunked = false) const;

    std::string to_string() const;  // "m,n"
    static NumberFormat parse(const std::string& text);

    friend bool operator==(const NumberFormat&, const NumberFormat&) = default;
};

/// Base periods for the circular features. Digit index i (place 10^(i-1))
/// uses the full period `base * 10^(i-1)`; base 10 gives T_i = 10^i.
class PeriodSet {
public:
    PeriodSet();  // {10}
    explicit PeriodSet(std::vector<double> bases);

    const std::vector<double>& bases() const noexcept { return bases_; }
    std::size_t size() const noexcept { return bases_.size(); }

    /// Full period for `base_index` at digit index `i`.
    double period(std::size_t base_index, int i) const;

    /// Position of base 10 in the set, or -1.
    int index_of_ten() const noexcept;

    std::string to_string() const;  // "2,5,10"
    static PeriodSet parse(const std::string& text);

    friend bool operator==(const PeriodSet&, const PeriodSet&) = default;

private:
    std::vector<double> bases_;
};

}  // namespace fone
