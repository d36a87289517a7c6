#include "fone/decimal.hpp"

#include <algorithm>
#include <vector>

#include "fone/error.hpp"
#include "fone/fone_core.hpp"

namespace fone::decimal {
namespace {

// Value as an unsigned integer digit string times 10^-scale.
struct Scaled {
    std::string digits;
    std::size_t scale = 0;
};

Scaled to_scaled(std::string_view text) {
    const DecimalDigits parts = parse_decimal(text);
    return {parts.integer_part + parts.fraction_part, parts.fraction_part.size()};
}

void rescale(Scaled& s, std::size_t scale) {
    s.digits.append(scale - s.scale, '0');
    s.scale = scale;
}

std::string strip(std::string s) {
    const auto first = s.find_first_not_of('0');
    return first == std::string::npos ? "0" : s.substr(first);
}

int compare_integers(const std::string& a, const std::string& b) {
    const std::string x = strip(a);
    const std::string y = strip(b);
    if (x.size() != y.size()) {
        return x.size() < y.size() ? -1 : 1;
    }
    return x.compare(y) < 0 ? -1 : (x == y ? 0 : 1);
}

std::string add_integers(const std::string& a, const std::string& b) {
    std::string out;
    int carry = 0;
    for (std::size_t k = 0; k < std::max(a.size(), b.size()) || carry; ++k) {
        int sum = carry;
        if (k < a.size()) sum += a[a.size() - 1 - k] - '0';
        if (k < b.size()) sum += b[b.size() - 1 - k] - '0';
        out.push_back(static_cast<char>('0' + sum % 10));
        carry = sum / 10;
    }
    std::reverse(out.begin(), out.end());
    return strip(out);
}

std::string subtract_integers(const std::string& a, const std::string& b) {
    std::string out;
    int borrow = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        int diff = (a[a.size() - 1 - k] - '0') - borrow;
        if (k < b.size()) diff -= b[b.size() - 1 - k] - '0';
        borrow = diff < 0 ? 1 : 0;
        out.push_back(static_cast<char>('0' + diff + 10 * borrow));
    }
    std::reverse(out.begin(), out.end());
    return strip(out);
}

std::string multiply_integers(const std::string& a, const std::string& b) {
    std::vector<int> acc(a.size() + b.size(), 0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            acc[i + j + 1] += (a[i] - '0') * (b[j] - '0');
        }
    }
    for (std::size_t k = acc.size(); k-- > 1;) {
        acc[k - 1] += acc[k] / 10;
        acc[k] %= 10;
    }
    std::string out;
    for (int d : acc) out.push_back(static_cast<char>('0' + d));
    return strip(out);
}

std::string from_scaled(std::string digits, std::size_t scale) {
    if (digits.size() <= scale) {
        digits.insert(0, scale - digits.size() + 1, '0');
    }
    if (scale == 0) {
        return strip(digits);
    }
    const std::string integer = strip(digits.substr(0, digits.size() - scale));
    return integer + "." + digits.substr(digits.size() - scale);
}

}  // namespace

int compare(std::string_view a, std::string_view b) {
    Scaled x = to_scaled(a);
    Scaled y = to_scaled(b);
    const std::size_t scale = std::max(x.scale, y.scale);
    rescale(x, scale);
    rescale(y, scale);
    return compare_integers(x.digits, y.digits);
}

std::string add(std::string_view a, std::string_view b) {
    Scaled x = to_scaled(a);
    Scaled y = to_scaled(b);
    const std::size_t scale = std::max(x.scale, y.scale);
    rescale(x, scale);
    rescale(y, scale);
    return from_scaled(add_integers(x.digits, y.digits), scale);
}

std::string subtract(std::string_view a, std::string_view b) {
    Scaled x = to_scaled(a);
    Scaled y = to_scaled(b);
    const std::size_t scale = std::max(x.scale, y.scale);
    rescale(x, scale);
    rescale(y, scale);
    if (compare_integers(x.digits, y.digits) < 0) {
        fail(ErrorKind::invalid_argument,
             "subtraction would be negative: " + std::string(a) + " - " + std::string(b));
    }
    return from_scaled(subtract_integers(strip(x.digits), strip(y.digits)), scale);
}

std::string multiply(std::string_view a, std::string_view b) {
    const Scaled x = to_scaled(a);
    const Scaled y = to_scaled(b);
    return from_scaled(multiply_integers(x.digits, y.digits), x.scale + y.scale);
}

}  // namespace fone::decimal
