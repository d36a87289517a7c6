// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Pass criterion numbers as arguments to run a subset.
//
// Every desk-scale training run uses int-add-3, preset 1, 50k/5k/10k
// records, batch 512 and the same 30-epoch cap (early stop at 100%
// validation accuracy), so the scheme comparison sees an equal budget.

#include <boost/multiprecision/cpp_int.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fone/codec.hpp"
#include "fone/fone_core.hpp"
#include "fone/trainer.hpp"
#include "grad_check.hpp"

using namespace fone;
using Clock = std::chrono::steady_clock;

namespace {

constexpr int kDeskEpochs = 30;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string random_decimal(std::mt19937_64& gen, int m, int n) {
    std::uniform_int_distribution<int> digit(0, 9);
    std::string integer;
    for (int i = 0; i < m; ++i) integer.push_back(static_cast<char>('0' + digit(gen)));
    const auto nz = integer.find_first_not_of('0');
    integer = nz == std::string::npos ? "0" : integer.substr(nz);
    if (n == 0) return integer;
    std::string fraction;
    for (int i = 0; i < n; ++i) fraction.push_back(static_cast<char>('0' + digit(gen)));
    return integer + "." + fraction;
}

struct Verdict {
    bool pass = false;
    std::string detail;
};

// Desk runs are shared between criteria; each is trained once.
class DeskRuns {
public:
    const TrainResult& get(const std::string& key) {
        auto it = runs_.find(key);
        if (it != runs_.end()) return it->second;
        RunConfig run;
        run.task = TaskSpec::parse("int-add-3");
        run.preset = 1;
        run.sizes = desk_split_sizes();
        run.batch_size = kDefaultBatchSize;
        run.epochs = kDeskEpochs;
        run.seed = 0;
        if (key == "digitwise") run.scheme = Scheme::digitwise;
        if (key == "xval") run.scheme = Scheme::xval;
        if (key == "bases-5") run.periods = PeriodSet({5});
        if (key == "linear") run.adapter = Adapter::linear;
        if (const char* dir = std::getenv("FONE_ACCEPTANCE_OUT"); dir != nullptr && *dir != '\0') {
            run.output_dir = std::filesystem::path(dir) / key;
        }
        const auto t0 = Clock::now();
        TrainResult r = train(run);
        std::fprintf(stderr, "  [desk run %s: %d epochs, test exact match %.4f, %.0fs%s%s]\n", key.c_str(),
                     r.epochs_run, r.test.exact_match, since(t0), r.failure.empty() ? "" : ", failure: ",
                     r.failure.c_str());
        return runs_.emplace(key, std::move(r)).first->second;
    }

private:
    std::map<std::string, TrainResult> runs_;
};

Verdict criterion1() {
    const auto t0 = Clock::now();
    std::mt19937_64 gen(20250101);
    const NumberFormat f63(6, 3);
    int bad_random = 0;
    for (int s = 0; s < 100000; ++s) {
        const auto x = random_decimal(gen, 6, 3);
        if (recover_digits(fone_encode(x, f63), f63) != x) ++bad_random;
    }
    const NumberFormat f30(3, 0);
    int bad_exhaustive = 0;
    for (int v = 0; v < 1000; ++v) {
        const auto x = std::to_string(v);
        if (recover_digits(fone_encode(x, f30), f30) != x) ++bad_exhaustive;
    }
    const double secs = since(t0);
    return {bad_random == 0 && bad_exhaustive == 0 && secs < 10.0,
            "random (6,3) failures " + std::to_string(bad_random) + "/100000, exhaustive (3,0) failures " +
                std::to_string(bad_exhaustive) + "/1000, " + fmt("%.2fs", secs) + " (limit 10s)"};
}

Verdict criterion2() {
    long long labels = 0, bad = 0;
    for (int total = 1; total <= 4; ++total) {
        for (int n = 0; n <= total; ++n) {
            const NumberFormat f(total - n, n);
            const int limit = static_cast<int>(std::pow(10, total));
            for (int v = 0; v < limit; ++v) {
                std::vector<int> msd(static_cast<std::size_t>(total));
                int rest = v;
                for (int k = total - 1; k >= 0; --k, rest /= 10) msd[static_cast<std::size_t>(k)] = rest % 10;
                // label by place value with boost as the arithmetic
                boost::multiprecision::cpp_int scaled = v;
                const boost::multiprecision::cpp_int unit = boost::multiprecision::pow(boost::multiprecision::cpp_int(10), n);
                std::string want = boost::multiprecision::cpp_int(scaled / unit).str();
                if (n > 0) {
                    std::string frac = boost::multiprecision::cpp_int(scaled % unit).str();
                    want += "." + std::string(static_cast<std::size_t>(n) - frac.size(), '0') + frac;
                }
                ++labels;
                if (final_predict(anchor_encode(msd, f).values, f) != want) ++bad;
            }
        }
    }
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> ang(0.0, 2 * std::numbers::pi);
    std::uniform_real_distribution<double> logscale(-6.0, 6.0);
    int violations = 0;
    for (int t = 0; t < 10000; ++t) {
        const double a = ang(gen), r = std::pow(10.0, logscale(gen)), s = std::pow(10.0, logscale(gen));
        const std::vector<double> h = {r * std::cos(a), r * std::sin(a)};
        const std::vector<double> hs = {s * h[0], s * h[1]};
        if (digit_predict(h, 0) != digit_predict(hs, 0)) ++violations;
    }
    return {bad == 0 && violations == 0, "anchor roundtrip failures " + std::to_string(bad) + "/" +
                                             std::to_string(labels) + " labels, scale violations " +
                                             std::to_string(violations) + "/10000"};
}

Verdict criterion3(DeskRuns& runs) {
    double worst = 0.0;
    for (int d = 0; d < 5; ++d) {
        const auto a = circular_embed(d, 5.0), b = circular_embed(d + 5, 5.0);
        worst = std::max(worst, std::hypot(a.cos_part - b.cos_part, a.sin_part - b.sin_part));
    }
    const auto& r = runs.get("bases-5");
    const double share = r.test.error_share_at(5);
    const bool pass = worst < 1e-9 && r.failure.empty() && r.test.digit_errors() > 0 && share >= 0.9;
    return {pass, fmt("max |phi(d,5)-phi(d+5,5)| %.1e; ", worst) + "bases [5] run: exact match " +
                      fmt("%.4f", r.test.exact_match) + ", " + std::to_string(r.test.digit_errors()) +
                      " digit errors, share at |diff|=5 " + fmt("%.4f", share) + " (need >= 0.9)"};
}

Verdict criterion4() {
    const auto t0 = Clock::now();
    RunConfig run;
    run.task = TaskSpec::parse("int-add-3");
    ModelConfig plain = make_model_config(run, make_encoder(run));
    plain.num_layers = 2;
    run.adapter = Adapter::linear;
    ModelConfig projected = make_model_config(run, make_encoder(run));
    projected.num_layers = 2;
    projected.aux_outputs = 2;
    // room for the eight-token probe sequence
    plain.max_seq_len = projected.max_seq_len = 8;
    double worst = 0.0;
    std::size_t tensors = 0, fewest = static_cast<std::size_t>(-1);
    std::string worst_name;
    bool all_sampled = true;
    for (const auto& cfg : {plain, projected}) {
        for (const auto& r : gradcheck::run(cfg, 11, 100)) {
            ++tensors;
            fewest = std::min(fewest, r.coords);
            const auto& info = Transformer<double>(cfg).tensor(r.name);
            if (r.coords < std::min<std::size_t>(100, info.size())) all_sampled = false;
            if (r.max_rel > worst) {
                worst = r.max_rel;
                worst_name = r.name;
            }
        }
    }
    const double secs = since(t0);
    return {worst < 1e-4 && all_sampled && secs < 60.0,
            std::to_string(tensors) + " tensors, >= min(100, size) coordinates each, max rel err " +
                fmt("%.2e", worst) + " (" + worst_name + "), " + fmt("%.1fs", secs) + " (limit 60s)"};
}

Verdict criterion5(DeskRuns& runs) {
    const auto& r = runs.get("fone");
    const bool pass = r.failure.empty() && r.test.exact_match >= 0.99 && r.epochs_run <= 100;
    return {pass, "FoNE preset 1, int-add-3, 50k train / 10k test, batch 512: test exact match " +
                      fmt("%.4f", r.test.exact_match) + " after " + std::to_string(r.epochs_run) +
                      " epochs (need >= 0.99)"};
}

Verdict criterion6(DeskRuns& runs) {
    const auto& f = runs.get("fone");
    const auto& d = runs.get("digitwise");
    const auto& x = runs.get("xval");
    const auto task = TaskSpec::parse("int-add-3");
    const auto top = max_answer(task);
    const std::size_t fone_tokens = numeric_token_count(Scheme::fone, top);
    const std::size_t digit_tokens = numeric_token_count(Scheme::digitwise, top);
    // published token counts for the maximum answers
    bool table = true;
    const std::tuple<const char*, std::size_t, std::size_t> rows[] = {
        {"decimal-add-6", 7, 3}, {"int-sub-5", 5, 2}, {"int-mul-4", 8, 3}};
    for (const auto& [name, dw, sw] : rows) {
        const auto m = max_answer(TaskSpec::parse(name));
        table = table && numeric_token_count(Scheme::fone, m) == 1 && numeric_token_count(Scheme::digitwise, m) == dw &&
                numeric_token_count(Scheme::subword, m) == sw;
    }
    const bool order = f.test.exact_match >= d.test.exact_match && d.test.exact_match >= x.test.exact_match;
    const bool ok = f.failure.empty() && d.failure.empty() && x.failure.empty();
    return {order && ok && fone_tokens == 1 && digit_tokens >= 3 && table,
            "exact match fone " + fmt("%.4f", f.test.exact_match) + " >= digitwise " +
                fmt("%.4f", d.test.exact_match) + " >= xval " + fmt("%.4f", x.test.exact_match) +
                " (xval R^2 " + fmt("%.4f", x.test.r_squared) + "); tokens per number fone " +
                std::to_string(fone_tokens) + " vs digitwise " + std::to_string(digit_tokens) +
                "; 7/5/8 and 3/2/3 token table " + (table ? "matches" : "differs")};
}

Verdict criterion7() {
    std::mt19937_64 gen(3);
    std::normal_distribution<double> g(50.0, 20.0);
    int bad = 0;
    for (int t = 0; t < 100; ++t) {
        std::vector<double> y(static_cast<std::size_t>(10 + t));
        for (double& v : y) v = g(gen);
        long double sum = 0;
        for (double v : y) sum += v;
        const std::vector<double> mean(y.size(), static_cast<double>(sum / static_cast<long double>(y.size())));
        if (r_squared(y, y) != 1.0) ++bad;
        if (std::fabs(r_squared(y, mean)) > 1e-12) ++bad;
    }
    // integer example worked by hand: SS_res = 2, SS_tot = 10 -> 0.8
    if (std::fabs(r_squared(std::vector<double>{1, 2, 3, 4, 5}, std::vector<double>{1, 3, 3, 4, 4}) - 0.8) > 1e-15) ++bad;
    return {bad == 0, "100 synthetic sets: perfect -> 1, mean -> 0; worked example 0.8; mismatches " +
                          std::to_string(bad)};
}

Verdict criterion8() {
    std::mt19937_64 gen(60);
    std::uniform_int_distribution<int> digit(0, 9);
    int bad = 0;
    for (int t = 0; t < 10000; ++t) {
        std::string x;
        for (int k = 0; k < 60; ++k) x.push_back(static_cast<char>('0' + digit(gen)));
        const auto v = chunk_encode(x, 5);
        std::string rebuilt;
        for (std::size_t c = 0; c < 12; ++c) {
            const FoneVector part{{v.values.begin() + static_cast<std::ptrdiff_t>(c * 10),
                                   v.values.begin() + static_cast<std::ptrdiff_t>((c + 1) * 10)},
                                  NumberFormat(5, 0), 10, 0};
            std::string group = recover_digits(part, NumberFormat(5, 0));
            group.insert(0, 5 - group.size(), '0');
            rebuilt = group + rebuilt;
        }
        if (rebuilt != x) ++bad;
    }
    return {bad == 0, "60-digit chunked roundtrip failures " + std::to_string(bad) + "/10000"};
}

Verdict criterion9(DeskRuns& runs) {
    const auto& z = runs.get("fone");
    const auto& l = runs.get("linear");
    const double gap = std::fabs(z.test.exact_match - l.test.exact_match) * 100.0;
    const bool pass = z.failure.empty() && l.failure.empty() && z.test.exact_match >= 0.99 &&
                      l.test.exact_match >= 0.99 && gap <= 1.0;
    return {pass, "zero-pad " + fmt("%.4f", z.test.exact_match) + ", linear " + fmt("%.4f", l.test.exact_match) +
                      ", gap " + fmt("%.2f", gap) + " points (need both >= 0.99, gap <= 1)"};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> wanted;
    for (int k = 1; k < argc; ++k) wanted.insert(std::atoi(argv[k]));
    DeskRuns runs;
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
        {"recovery property", criterion1},
        {"anchor head roundtrip and scale invariance", criterion2},
        {"period ablation mechanism", [&] { return criterion3(runs); }},
        {"gradient gate", criterion4},
        {"desk-scale FoNE training", [&] { return criterion5(runs); }},
        {"baseline ordering and token counts", [&] { return criterion6(runs); }},
        {"metric correctness", criterion7},
        {"chunked encoding", criterion8},
        {"adapter ablation", [&] { return criterion9(runs); }},
    };
    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (!wanted.empty() && wanted.count(id) == 0) continue;
        Verdict v;
        try {
            v = criteria[k].second();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        failures += v.pass ? 0 : 1;
        std::printf("%s criterion %d (%s): %s\n", v.pass ? "PASS" : "FAIL", id, criteria[k].first, v.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
