#include "fone/fone_core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fone/error.hpp"

namespace fone {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kDegenerateNorm = 1e-9;
constexpr double kPhaseTolerance = 1e-6;

CirclePoint point_from_phase(double phase) {
    const double angle = kTwoPi * phase;
    return {std::cos(angle), std::sin(angle)};
}

bool all_digits(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::string strip_leading_zeros(std::string s) {
    const auto first = s.find_first_not_of('0');
    if (first == std::string::npos) {
        return "0";
    }
    return s.substr(first);
}

// Significant digits of `text` under `fmt` as one scaled integer x * 10^n.
double scaled_value(std::string_view text, const NumberFormat& fmt) {
    const std::string canonical = canonical_decimal(text, fmt);
    double value = 0.0;
    for (char c : canonical) {
        if (c != '.') {
            value = value * 10.0 + (c - '0');
        }
    }
    return value;
}

}  // namespace

CirclePoint circular_embed(double x, double period) {
    if (!std::isfinite(x)) {
        fail(ErrorKind::invalid_argument, "circular_embed needs a finite x");
    }
    if (!std::isfinite(period) || period <= 0.0) {
        fail(ErrorKind::invalid_argument, "circular_embed needs a positive period");
    }
    double residue = std::fmod(x, period);
    if (residue < 0.0) {
        residue += period;
    }
    return point_from_phase(residue / period);
}

double recover_phase(CirclePoint point, double fold_tol) {
    const double norm = std::hypot(point.cos_part, point.sin_part);
    if (!(norm >= kDegenerateNorm)) {
        fail(ErrorKind::degenerate_pair, "cannot read an angle from a point at the origin");
    }
    double phase = std::atan2(point.sin_part, point.cos_part) / kTwoPi;
    if (phase < 0.0) {
        phase += 1.0;
    }
    if (phase >= 1.0 - fold_tol) {
        phase = 0.0;
    }
    return phase;
}

double recover_mod(CirclePoint point, double period) {
    if (!std::isfinite(period) || period <= 0.0) {
        fail(ErrorKind::invalid_argument, "recover_mod needs a positive period");
    }
    const double residue = recover_phase(point) * period;
    return residue >= period ? 0.0 : residue;
}

DecimalDigits parse_decimal(std::string_view text) {
    if (text.empty()) {
        fail(ErrorKind::invalid_argument, "empty number");
    }
    if (text.front() == '-' || text.front() == '+') {
        fail(ErrorKind::unsupported_sign, "signed numbers are not supported: \"" + std::string(text) + "\"");
    }
    const auto point = text.find('.');
    DecimalDigits parts;
    parts.integer_part = std::string(text.substr(0, point));
    if (point != std::string_view::npos) {
        parts.fraction_part = std::string(text.substr(point + 1));
    }
    if (parts.integer_part.empty() || !all_digits(parts.integer_part) ||
        !all_digits(parts.fraction_part) ||
        (point != std::string_view::npos && parts.fraction_part.empty())) {
        fail(ErrorKind::invalid_argument, "not a non-negative decimal: \"" + std::string(text) + "\"");
    }
    return parts;
}

std::string canonical_decimal(std::string_view text, const NumberFormat& fmt) {
    DecimalDigits parts = parse_decimal(text);
    std::string integer = strip_leading_zeros(parts.integer_part);
    std::string fraction = parts.fraction_part;
    while (!fraction.empty() && fraction.back() == '0' &&
           static_cast<int>(fraction.size()) > fmt.fraction_digits) {
        fraction.pop_back();
    }
    const int integer_digits = integer == "0" ? 0 : static_cast<int>(integer.size());
    if (integer_digits > fmt.integer_digits ||
        static_cast<int>(fraction.size()) > fmt.fraction_digits) {
        fail(ErrorKind::format_overflow,
             "\"" + std::string(text) + "\" does not fit format " + fmt.to_string());
    }
    fraction.resize(static_cast<std::size_t>(fmt.fraction_digits), '0');
    return fraction.empty() ? integer : integer + "." + fraction;
}

EmbeddingAdapter EmbeddingAdapter::zero_pad(std::size_t target_dim) {
    EmbeddingAdapter adapter;
    adapter.mode_ = AdapterMode::zero_pad;
    adapter.target_dim_ = target_dim;
    return adapter;
}

EmbeddingAdapter EmbeddingAdapter::linear(std::size_t target_dim, std::size_t raw_dim,
                                          std::vector<double> weights) {
    if (target_dim == 0 || raw_dim == 0 || weights.size() != target_dim * raw_dim) {
        fail(ErrorKind::invalid_argument, "projection weights must be target_dim x raw_dim");
    }
    EmbeddingAdapter adapter;
    adapter.mode_ = AdapterMode::linear_projection;
    adapter.target_dim_ = target_dim;
    adapter.raw_dim_ = raw_dim;
    adapter.weights_ = std::move(weights);
    return adapter;
}

std::vector<double> EmbeddingAdapter::apply(std::span<const double> raw) const {
    if (mode_ == AdapterMode::zero_pad) {
        if (target_dim_ != 0 && target_dim_ < raw.size()) {
            fail(ErrorKind::invalid_argument, "zero-pad target " + std::to_string(target_dim_) +
                                                  " is shorter than the raw encoding (" +
                                                  std::to_string(raw.size()) + ")");
        }
        std::vector<double> out(raw.begin(), raw.end());
        out.resize(std::max(target_dim_, raw.size()), 0.0);
        return out;
    }
    if (raw.size() != raw_dim_) {
        fail(ErrorKind::invalid_argument, "projection expects " + std::to_string(raw_dim_) +
                                              " raw features, got " + std::to_string(raw.size()));
    }
    std::vector<double> out(target_dim_, 0.0);
    for (std::size_t r = 0; r < target_dim_; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < raw_dim_; ++c) {
            acc += weights_[r * raw_dim_ + c] * raw[c];
        }
        out[r] = acc;
    }
    return out;
}

std::size_t raw_fone_size(const NumberFormat& fmt, const PeriodSet& periods) {
    return 2 * static_cast<std::size_t>(fmt.total_digits()) * periods.size();
}

FoneVector fone_encode(std::string_view digits, const NumberFormat& fmt, const PeriodSet& periods,
                       const EmbeddingAdapter& adapter) {
    fmt.validate();
    const double scaled = scaled_value(digits, fmt);
    const int n = fmt.fraction_digits;
    const int m = fmt.integer_digits;

    std::vector<double> raw;
    raw.reserve(raw_fone_size(fmt, periods));
    for (double base : periods.bases()) {
        for (int i = -n + 1; i <= m; ++i) {
            // Period base * 10^(i-1) in units of 10^-n; fmod is exact here.
            const double scaled_period = base * std::pow(10.0, i - 1 + n);
            const CirclePoint p = point_from_phase(std::fmod(scaled, scaled_period) / scaled_period);
            raw.push_back(p.cos_part);
            raw.push_back(p.sin_part);
        }
    }

    FoneVector v;
    v.format = fmt;
    v.raw_size = raw.size();
    v.values = adapter.apply(raw);
    return v;
}

std::vector<int> recover_digit_list(std::span<const double> values, const NumberFormat& fmt,
                                    const PeriodSet& periods) {
    fmt.validate(true);
    const int ten = periods.index_of_ten();
    if (ten < 0) {
        fail(ErrorKind::invalid_argument, "digit recovery needs base 10 in the period set");
    }
    const std::size_t places = static_cast<std::size_t>(fmt.total_digits());
    const std::size_t offset = static_cast<std::size_t>(ten) * places;
    if (values.size() < 2 * (offset + places)) {
        fail(ErrorKind::invalid_format, "vector too short for format " + fmt.to_string());
    }

    // Level j carries x mod 10^(j+1) (in units of the lowest place) as a
    // turn p_j. Digit j satisfies p_j = (d_j + q_{j-1}) / 10 where q is the
    // exact turn rebuilt from the digits already read.
    std::vector<int> digits(places);
    double below = 0.0;
    for (std::size_t j = 0; j < places; ++j) {
        const std::size_t k = offset + j;
        const double phase = recover_phase({values[2 * k], values[2 * k + 1]});
        const double estimate = 10.0 * phase - below;
        const long rounded = std::lround(estimate);
        const int digit = static_cast<int>(((rounded % 10) + 10) % 10);
        const double expected = (digit + below) / 10.0;
        double gap = std::fabs(phase - expected);
        gap = std::min(gap, 1.0 - gap);
        if (rounded < 0 || rounded > 10 || gap > kPhaseTolerance) {
            fail(ErrorKind::recovery_failure,
                 "digit place " + std::to_string(j) + " is not an exact encoding");
        }
        digits[j] = digit;
        below = expected;
    }
    return digits;
}

std::string recover_digits(const FoneVector& v, const NumberFormat& fmt, const PeriodSet& periods) {
    const std::vector<int> digits = recover_digit_list(v.values, fmt, periods);
    const std::size_t n = static_cast<std::size_t>(fmt.fraction_digits);
    std::string integer;
    for (std::size_t j = digits.size(); j-- > n;) {
        integer.push_back(static_cast<char>('0' + digits[j]));
    }
    integer = strip_leading_zeros(integer);
    if (n == 0) {
        return integer;
    }
    std::string fraction;
    for (std::size_t j = n; j-- > 0;) {
        fraction.push_back(static_cast<char>('0' + digits[j]));
    }
    return integer + "." + fraction;
}

FoneVector anchor_encode(std::span<const int> digits, const NumberFormat& fmt,
                         const PeriodSet& periods) {
    fmt.validate(true);
    const std::size_t places = static_cast<std::size_t>(fmt.total_digits());
    if (digits.size() != places) {
        fail(ErrorKind::invalid_format, "expected " + std::to_string(places) + " digits for format " +
                                            fmt.to_string());
    }
    for (int d : digits) {
        if (d < 0 || d > 9) {
            fail(ErrorKind::invalid_digit, "digit " + std::to_string(d) + " is outside 0-9");
        }
    }
    FoneVector v;
    v.format = fmt;
    v.values.reserve(raw_fone_size(fmt, periods));
    for (double base : periods.bases()) {
        for (std::size_t j = 0; j < places; ++j) {
            const CirclePoint p = circular_embed(digits[places - 1 - j], base);
            v.values.push_back(p.cos_part);
            v.values.push_back(p.sin_part);
        }
    }
    v.raw_size = v.values.size();
    return v;
}

FoneVector chunk_encode(std::string_view digits, std::size_t chunk_size) {
    if (digits.empty()) {
        fail(ErrorKind::invalid_argument, "chunk_encode needs a non-empty digit string");
    }
    if (digits.front() == '-' || digits.front() == '+') {
        fail(ErrorKind::unsupported_sign, "signed numbers are not supported");
    }
    if (!all_digits(digits)) {
        fail(ErrorKind::invalid_argument, "chunked mode accepts integer digit strings only");
    }
    if (chunk_size == 0 || chunk_size > static_cast<std::size_t>(kMaxIntegerDigits)) {
        fail(ErrorKind::invalid_argument, "chunk size must be in 1..10");
    }
    const NumberFormat group_fmt(static_cast<int>(chunk_size), 0);

    FoneVector v;
    std::size_t groups = 0;
    for (std::size_t end = digits.size(); end > 0;) {
        const std::size_t begin = end > chunk_size ? end - chunk_size : 0;
        const FoneVector part = fone_encode(digits.substr(begin, end - begin), group_fmt);
        v.values.insert(v.values.end(), part.values.begin(), part.values.end());
        ++groups;
        end = begin;
    }
    v.format = NumberFormat(static_cast<int>(groups * chunk_size), 0);
    v.raw_size = v.values.size();
    v.chunk_size = chunk_size;
    return v;
}

std::string chunk_decode(const FoneVector& v) {
    if (v.chunk_size == 0) {
        fail(ErrorKind::invalid_argument, "vector was not produced by chunk_encode");
    }
    const std::size_t width = 2 * v.chunk_size;
    if (v.raw_size == 0 || v.raw_size % width != 0) {
        fail(ErrorKind::invalid_format, "chunked vector length is not a multiple of the group width");
    }
    const NumberFormat group_fmt(static_cast<int>(v.chunk_size), 0);
    std::string out;
    for (std::size_t g = v.raw_size / width; g-- > 0;) {
        const auto digits = recover_digit_list(std::span(v.values).subspan(g * width, width), group_fmt);
        for (std::size_t j = digits.size(); j-- > 0;) {
            out.push_back(static_cast<char>('0' + digits[j]));
        }
    }
    return strip_leading_zeros(out);
}

}  // namespace fone
