#include "fone/number_format.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "fone/error.hpp"

namespace fone {

NumberFormat::NumberFormat(int m, int n) : integer_digits(m), fraction_digits(n) {}

void NumberFormat::validate(bool chunked) const {
    if (integer_digits < 0 || fraction_digits < 0 || total_digits() < 1) {
        fail(ErrorKind::invalid_format, "format " + to_string() + " needs m, n >= 0 and m + n >= 1");
    }
    if (!chunked && (integer_digits > kMaxIntegerDigits || fraction_digits > kMaxFractionDigits)) {
        fail(ErrorKind::invalid_format,
             "format " + to_string() + " exceeds the unchunked bound (m <= 10, n <= 5)");
    }
}

std::string NumberFormat::to_string() const {
    return std::to_string(integer_digits) + "," + std::to_string(fraction_digits);
}

NumberFormat NumberFormat::parse(const std::string& text) {
    const auto comma = text.find(',');
    if (comma == std::string::npos) {
        fail(ErrorKind::invalid_format, "expected \"m,n\", got \"" + text + "\"");
    }
    try {
        std::size_t used_m = 0;
        std::size_t used_n = 0;
        const std::string m_text = text.substr(0, comma);
        const std::string n_text = text.substr(comma + 1);
        NumberFormat fmt(std::stoi(m_text, &used_m), std::stoi(n_text, &used_n));
        if (used_m != m_text.size() || used_n != n_text.size()) {
            throw std::invalid_argument("trailing characters");
        }
        fmt.validate(true);
        return fmt;
    } catch (const std::logic_error&) {
        fail(ErrorKind::invalid_format, "expected \"m,n\", got \"" + text + "\"");
    }
}

PeriodSet::PeriodSet() : bases_{10.0} {}

PeriodSet::PeriodSet(std::vector<double> bases) : bases_(std::move(bases)) {
    if (bases_.empty()) {
        fail(ErrorKind::invalid_argument, "period set must not be empty");
    }
    for (std::size_t k = 0; k < bases_.size(); ++k) {
        if (!std::isfinite(bases_[k]) || bases_[k] <= 1.0) {
            fail(ErrorKind::invalid_argument, "period bases must be finite and > 1");
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (bases_[j] == bases_[k]) {
                fail(ErrorKind::invalid_argument, "duplicate period base " + to_string());
            }
        }
    }
}

double PeriodSet::period(std::size_t base_index, int i) const {
    return bases_.at(base_index) * std::pow(10.0, i - 1);
}

int PeriodSet::index_of_ten() const noexcept {
    const auto it = std::find(bases_.begin(), bases_.end(), 10.0);
    return it == bases_.end() ? -1 : static_cast<int>(it - bases_.begin());
}

std::string PeriodSet::to_string() const {
    std::ostringstream out;
    for (std::size_t k = 0; k < bases_.size(); ++k) {
        if (k > 0) {
            out << ',';
        }
        out << bases_[k];
    }
    return out.str();
}

PeriodSet PeriodSet::parse(const std::string& text) {
    std::vector<double> bases;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        char* end = nullptr;
        const double value = std::strtod(item.c_str(), &end);
        if (item.empty() || end != item.c_str() + item.size()) {
            fail(ErrorKind::invalid_argument, "bad period base \"" + item + "\"");
        }
        bases.push_back(value);
    }
    return PeriodSet(std::move(bases));
}

}  // namespace fone
