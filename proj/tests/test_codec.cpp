#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "fone/codec.hpp"
#include "test_util.hpp"

using namespace fone;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> anchors_of(std::vector<int> msd_first, int m, int n = 0) {
    return anchor_encode(msd_first, NumberFormat(m, n)).values;
}

// Softmax cross-entropy in long double, written out from the definition.
double reference_ce(const std::vector<long double>& z, int target) {
    long double sum = 0;
    for (long double v : z) sum += std::exp(v);
    return static_cast<double>(std::log(sum) - z[static_cast<std::size_t>(target)]);
}

std::vector<long double> reference_logits(double c, double s) {
    std::vector<long double> z;
    for (int j = 0; j < 10; ++j) {
        const long double ang = 2.0L * std::numbers::pi_v<long double> * j / 10.0L;
        z.push_back(c * std::cos(ang) + s * std::sin(ang));
    }
    return z;
}

int brute_argmax(double c, double s) {
    const auto z = reference_logits(c, s);
    int best = 0;
    for (int j = 1; j < 10; ++j) {
        if (z[j] > z[best]) best = j;
    }
    return best;
}

}  // namespace

TEST_CASE("anchor table") {
    const AnchorTable table;
    REQUIRE(table.blocks() == 1);
    double min_dist = 1e9;
    for (int a = 0; a < 10; ++a) {
        const auto p = table.anchor(0, a);
        CHECK(p.cos_part * p.cos_part + p.sin_part * p.sin_part == doctest::Approx(1.0).epsilon(1e-15));
        for (int b = a + 1; b < 10; ++b) {
            const auto q = table.anchor(0, b);
            min_dist = std::min(min_dist, std::hypot(p.cos_part - q.cos_part, p.sin_part - q.sin_part));
        }
    }
    CHECK(min_dist == doctest::Approx(2.0 * std::sin(std::numbers::pi / 10)).epsilon(1e-12));
}

TEST_CASE("digit_logits") {
    const auto h = anchors_of({7}, 1);
    const auto z = digit_logits(h, 0);
    const auto ref = reference_logits(h[0], h[1]);
    for (int j = 0; j < 10; ++j) CHECK(z[j] == doctest::Approx(static_cast<double>(ref[j])).epsilon(1e-14));
    CHECK(digit_predict(h, 0) == 7);

    const std::vector<double> zero(4, 0.0);
    for (double v : digit_logits(zero, 1)) CHECK(v == 0.0);

    std::vector<double> scaled = h;
    for (double& v : scaled) v *= 3.7;
    CHECK(digit_predict(scaled, 0) == 7);

    CHECK_KIND(digit_logits(h, 1), invalid_index);
}

TEST_CASE("digit_loss") {
    const std::vector<double> zero(2, 0.0);
    const auto y7 = DigitLabel::from_string("7", NumberFormat(1, 0));
    CHECK(digit_loss(zero, y7, 0) == doctest::Approx(std::log(10.0)).epsilon(1e-15));

    double prev = 1e9;
    for (double c : {1.0, 10.0, 100.0}) {
        auto h = anchors_of({7}, 1);
        for (double& v : h) v *= c;
        const double loss = digit_loss(h, y7, 0);
        CHECK(std::isfinite(loss));
        CHECK(loss >= 0.0);
        CHECK(loss < prev);
        CHECK(loss == doctest::Approx(reference_ce(reference_logits(h[0], h[1]), 7)).epsilon(1e-9));
        prev = loss;
    }
    // at scale 100 the nearest rivals trail by 100 (1 - cos 36deg)
    CHECK(prev == doctest::Approx(2.0 * std::exp(-100.0 * (1.0 - std::cos(kTwoPi / 10)))).epsilon(1e-3));

    // wrong label: digit 3 against an anchor of 8 scaled by 100
    auto h = anchors_of({8}, 1);
    for (double& v : h) v *= 100.0;
    const auto y3 = DigitLabel::from_string("3", NumberFormat(1, 0));
    const double loss = digit_loss(h, y3, 0);
    const double want = reference_ce(reference_logits(h[0], h[1]), 3);
    CHECK(loss == doctest::Approx(want).epsilon(1e-12));
    CHECK(loss > std::log(10.0));
    // anchor 3 sits opposite 8, so the gap is 100 (1 - cos π) = 200
    CHECK(loss == doctest::Approx(200.0).epsilon(1e-9));
}

TEST_CASE("final_loss") {
    const NumberFormat fmt(3, 0);
    const auto y = DigitLabel::from_string("567", fmt);
    CHECK(y.digits == std::vector<int>{7, 6, 5});

    const std::vector<double> zero(6, 0.0);
    CHECK(final_loss(zero, y) == std::log(10.0));

    auto perfect = anchors_of({5, 6, 7}, 3);
    for (double& v : perfect) v *= 200.0;
    CHECK(final_loss(perfect, y) < 1e-12);

    // one digit wrong: mean of the per-digit terms
    for (std::size_t wrong = 0; wrong < 3; ++wrong) {
        std::vector<int> msd = {5, 6, 7};
        msd[2 - wrong] = (msd[2 - wrong] + 4) % 10;
        auto h = anchors_of(msd, 3);
        for (double& v : h) v *= 5.0;
        double sum = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
            sum += reference_ce(reference_logits(h[2 * i], h[2 * i + 1]), y.digits[i]);
        }
        CHECK(final_loss(h, y) == doctest::Approx(sum / 3.0).epsilon(1e-12));
    }

    CHECK_KIND(final_loss(std::vector<double>(4, 0.0), y), invalid_format);
}

TEST_CASE("final_loss weights every digit place equally") {
    const NumberFormat fmt(4, 0);
    const auto y = DigitLabel::from_string("2719", fmt);
    std::vector<double> losses;
    for (std::size_t wrong = 0; wrong < 4; ++wrong) {
        std::vector<double> h;
        for (std::size_t i = 0; i < 4; ++i) {
            const int d = i == wrong ? (y.digits[i] + 3) % 10 : y.digits[i];
            const auto p = circular_embed(d, 10.0);
            h.push_back(4.0 * p.cos_part);
            h.push_back(4.0 * p.sin_part);
        }
        losses.push_back(final_loss(h, y));
    }
    for (double l : losses) CHECK(l == doctest::Approx(losses[0]).epsilon(1e-12));
}

TEST_CASE("final_loss gradient matches central differences") {
    std::mt19937_64 gen(9);
    std::normal_distribution<double> g(0.0, 1.5);
    for (const auto& [fmt, label, bases] :
         {std::tuple{NumberFormat(3, 0), std::string("406"), std::vector<double>{10}},
          std::tuple{NumberFormat(2, 2), std::string("31.58"), std::vector<double>{10}},
          std::tuple{NumberFormat(3, 0), std::string("972"), std::vector<double>{2, 5, 10}}}) {
        const FourierHead head(fmt, PeriodSet(bases));
        const auto y = DigitLabel::from_string(label, fmt);
        std::vector<double> h(head.width() + 3);
        for (double& v : h) v = g(gen);
        std::vector<double> grad;
        const double loss = head.final_loss_grad(h, y, grad);
        CHECK(loss == doctest::Approx(head.final_loss(h, y)).epsilon(1e-14));
        REQUIRE(grad.size() == h.size());
        const double step = 1e-4;
        for (std::size_t k = 0; k < h.size(); ++k) {
            auto hp = h, hm = h;
            hp[k] += step;
            hm[k] -= step;
            const double fd = (head.final_loss(hp, y) - head.final_loss(hm, y)) / (2 * step);
            const double denom = std::max({std::fabs(fd), std::fabs(grad[k]), 1e-8});
            if (k >= head.width()) {
                CHECK(grad[k] == 0.0);
            } else {
                CHECK_MESSAGE(std::fabs(fd - grad[k]) / denom < 1e-4, "entry ", k);
            }
        }
    }
}

TEST_CASE("digit_predict ties and scaling") {
    // halfway between anchors 1 and 2
    const double ang = kTwoPi * 0.15;
    const std::vector<double> h = {std::cos(ang), std::sin(ang)};
    const auto z = digit_logits(h, 0);
    CHECK(z[1] == doctest::Approx(z[2]).epsilon(1e-15));
    CHECK(digit_predict(h, 0) == 1);

    const int four[] = {4};
    auto a = anchor_encode(four, NumberFormat(1, 0)).values;
    CHECK(digit_predict(a, 0) == 4);
    for (double& v : a) v *= 0.01;
    CHECK(digit_predict(a, 0) == 4);

    CHECK(digit_predict(std::vector<double>{0.0, 0.0}, 0) == 0);
}

TEST_CASE("digit_predict is invariant under positive scaling") {
    std::mt19937_64 gen(77);
    std::uniform_real_distribution<double> ang(0.0, kTwoPi);
    std::uniform_real_distribution<double> logscale(-6.0, 6.0);
    int violations = 0, oracle_mismatch = 0;
    for (int t = 0; t < 10000; ++t) {
        const double a = ang(gen);
        const double r = std::pow(10.0, logscale(gen));
        const double s = std::pow(10.0, logscale(gen));
        const std::vector<double> h = {r * std::cos(a), r * std::sin(a)};
        const std::vector<double> hs = {s * h[0], s * h[1]};
        const int p = digit_predict(h, 0);
        if (p != digit_predict(hs, 0)) ++violations;
        if (p != brute_argmax(h[0], h[1])) ++oracle_mismatch;
    }
    CHECK(violations == 0);
    CHECK(oracle_mismatch == 0);
}

TEST_CASE("final_predict place values") {
    CHECK(final_predict(anchors_of({5, 6, 7}, 3), NumberFormat(3, 0)) == "567");
    CHECK(final_predict(anchors_of({0, 0, 0}, 3), NumberFormat(3, 0)) == "0");
    CHECK(final_predict(anchors_of({0, 0, 0, 0}, 1, 3), NumberFormat(1, 3)) == "0.000");
    CHECK(final_predict(anchors_of({0, 4, 1, 7}, 2, 2), NumberFormat(2, 2)) == "4.17");
    CHECK_KIND(final_predict(std::vector<double>(4, 1.0), NumberFormat(3, 0)), invalid_format);
}

TEST_CASE("anchor roundtrip exhaustive up to four digits") {
    for (const auto& fmt : {NumberFormat(1, 0), NumberFormat(2, 0), NumberFormat(3, 0), NumberFormat(4, 0),
                            NumberFormat(2, 2), NumberFormat(1, 3)}) {
        const int total = fmt.total_digits();
        int limit = 1;
        for (int k = 0; k < total; ++k) limit *= 10;
        int failures = 0;
        for (int v = 0; v < limit; ++v) {
            std::vector<int> msd(static_cast<std::size_t>(total));
            long long place_sum = 0;
            int rest = v;
            for (int k = total - 1; k >= 0; --k) {
                msd[static_cast<std::size_t>(k)] = rest % 10;
                rest /= 10;
            }
            for (int d : msd) place_sum = place_sum * 10 + d;
            // brute-force place-value oracle: scaled integer with n decimals
            std::string want = std::to_string(place_sum / static_cast<long long>(std::pow(10, fmt.fraction_digits)));
            if (fmt.fraction_digits > 0) {
                std::string frac = std::to_string(place_sum % static_cast<long long>(std::pow(10, fmt.fraction_digits)));
                want += "." + std::string(static_cast<std::size_t>(fmt.fraction_digits) - frac.size(), '0') + frac;
            }
            const auto h = anchor_encode(msd, fmt).values;
            if (final_predict(h, fmt) != want) ++failures;
        }
        CHECK_MESSAGE(failures == 0, "format ", fmt.to_string());
    }
}

TEST_CASE("anchor roundtrip on random labels") {
    std::mt19937_64 gen(4);
    const NumberFormat fmt(7, 3);
    int failures = 0;
    for (int t = 0; t < 10000; ++t) {
        const auto y = testutil::random_decimal(gen, 7, 3);
        const auto label = DigitLabel::from_string(y, fmt);
        std::vector<int> msd(label.digits.rbegin(), label.digits.rend());
        if (final_predict(anchor_encode(msd, fmt).values, fmt) != y) ++failures;
        if (label.to_string() != y) ++failures;
    }
    CHECK(failures == 0);
}

TEST_CASE("DigitLabel") {
    const auto y = DigitLabel::from_string("957454", NumberFormat(7, 0));
    CHECK(y.digits == std::vector<int>{4, 5, 4, 7, 5, 9, 0});
    CHECK(y.to_string() == "957454");
    CHECK(DigitLabel::from_string("4.1", NumberFormat(2, 2)).digits == std::vector<int>{0, 1, 4, 0});
    CHECK_KIND(DigitLabel::from_string("12345", NumberFormat(4, 0)), format_overflow);
    DigitLabel bad{{1, 2}, NumberFormat(3, 0)};
    CHECK_KIND(bad.validate(), invalid_format);
    bad.digits = {1, 2, 12};
    CHECK_KIND(bad.validate(), invalid_digit);
}

TEST_CASE("multi-base head sums logits over blocks") {
    const PeriodSet ps({2, 5, 10});
    const NumberFormat fmt(2, 0);
    const FourierHead head(fmt, ps);
    CHECK(head.width() == 12);
    const auto enc = anchor_encode(std::vector<int>{3, 8}, fmt, ps);
    const auto z = head.logits(enc.values, 0);
    for (int j = 0; j < 10; ++j) {
        double want = 0.0;
        for (std::size_t b = 0; b < 3; ++b) {
            const auto a = circular_embed(j, ps.bases()[b]);
            want += enc.values[2 * (b * 2)] * a.cos_part + enc.values[2 * (b * 2) + 1] * a.sin_part;
        }
        CHECK(z[j] == doctest::Approx(want).epsilon(1e-14));
    }
    CHECK(head.final_predict(enc.values) == "38");

    // base 5 alone cannot tell d from d + 5; the tie goes to the lower digit
    const FourierHead five(fmt, PeriodSet({5}));
    const auto e5 = anchor_encode(std::vector<int>{7, 9}, fmt, PeriodSet({5}));
    CHECK(five.predict_digits(e5.values) == std::vector<int>{4, 2});
}
