#pragma once

// Fourier number embedding: each digit place 10^(i-1) of a number x is
// carried by the point (cos 2πx/T_i, sin 2πx/T_i) with T_i = 10^i, so
// x mod T_i, and with it every digit, can be read back from the angles.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fone/number_format.hpp"

namespace fone {

struct CirclePoint {
    double cos_part = 1.0;
    double sin_part = 0.0;

    friend bool operator==(const CirclePoint&, const CirclePoint&) = default;
};

/// (cos 2πx/T, sin 2πx/T). x is reduced mod T before the trig call, so
/// x and x + kT give bit-identical points.
CirclePoint circular_embed(double x, double period);

/// x mod T in [0, T) from a point's angle. Scaled points are accepted.
double recover_mod(CirclePoint point, double period);

/// Fractional turn in [0, 1) of a point, folded to 0 within `fold_tol` of 1.
double recover_phase(CirclePoint point, double fold_tol = 0.0);

/// Non-negative decimal literal split at the point. Leading zeros kept.
struct DecimalDigits {
    std::string integer_part;   // at least one digit
    std::string fraction_part;  // possibly empty
};

/// Throws unsupported-sign for a leading '-' or '+', invalid-argument for
/// anything that is not digits with at most one point.
DecimalDigits parse_decimal(std::string_view text);

/// Canonical spelling under `fmt`: no leading zeros in the integer part,
/// exactly n fraction digits. Throws format-overflow when it does not fit.
std::string canonical_decimal(std::string_view text, const NumberFormat& fmt);

struct FoneVector {
    std::vector<double> values;
    NumberFormat format;
    std::size_t raw_size = 0;    // length before the adapter was applied
    std::size_t chunk_size = 0;  // 0 unless produced by chunk_encode

    std::size_t size() const noexcept { return values.size(); }
    std::span<const double> raw() const { return {values.data(), raw_size}; }
    CirclePoint pair(std::size_t k) const { return {values.at(2 * k), values.at(2 * k + 1)}; }
};

enum class AdapterMode { zero_pad, linear_projection };

/// Maps the raw 2(m+n)|bases| features to the model width d.
class EmbeddingAdapter {
public:
    /// Identity: no padding.
    EmbeddingAdapter() = default;

    static EmbeddingAdapter zero_pad(std::size_t target_dim);
    /// `weights` is target_dim x raw_dim, row-major.
    static EmbeddingAdapter linear(std::size_t target_dim, std::size_t raw_dim,
                                   std::vector<double> weights);

    AdapterMode mode() const noexcept { return mode_; }
    std::size_t target_dim() const noexcept { return target_dim_; }

    std::vector<double> apply(std::span<const double> raw) const;

private:
    AdapterMode mode_ = AdapterMode::zero_pad;
    std::size_t target_dim_ = 0;
    std::size_t raw_dim_ = 0;
    std::vector<double> weights_;
};

/// Length of the raw encoding: 2 (m+n) |bases|.
std::size_t raw_fone_size(const NumberFormat& fmt, const PeriodSet& periods);

/// Pairs are laid out base-major; within a base block digit index runs
/// i = -n+1 .. m, least-significant period first. The phase of every pair
/// is computed exactly from the decimal string, never from a binary float.
FoneVector fone_encode(std::string_view digits, const NumberFormat& fmt,
                       const PeriodSet& periods = {}, const EmbeddingAdapter& adapter = {});

/// Per-place digits of an exact base-10 encoding, least-significant first.
/// Throws recovery-failure when a phase difference does not round to 0..9.
std::vector<int> recover_digit_list(std::span<const double> values, const NumberFormat& fmt,
                                    const PeriodSet& periods = {});

/// Canonical decimal string (see canonical_decimal) of an exact encoding.
std::string recover_digits(const FoneVector& v, const NumberFormat& fmt,
                           const PeriodSet& periods = {});

/// Ideal per-digit representation: `digits` is most-significant first and
/// pair k is circular_embed(digit at place k, base), least-significant first.
FoneVector anchor_encode(std::span<const int> digits, const NumberFormat& fmt,
                         const PeriodSet& periods = {});

/// Integer strings of any length: groups of `chunk_size` digits taken from
/// the least-significant end, each encoded with format (chunk_size, 0),
/// concatenated least-significant group first.
FoneVector chunk_encode(std::string_view digits, std::size_t chunk_size = 5);

/// Inverse of chunk_encode, returned without leading zeros.
std::string chunk_decode(const FoneVector& v);

}  // namespace fone
