// fone: dataset generation, training, evaluation, sweeps, ablations and
// encode/recover roundtrips.
//
// Exit codes: 0 ok, 2 usage, 3 data error, 4 run failure. Failures print one
// JSON object {"status":"error","kind":...,"message":...} on stderr.

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "fone/config.hpp"
#include "fone/datagen.hpp"
#include "fone/error.hpp"
#include "fone/fone_core.hpp"
#include "fone/rng.hpp"
#include "fone/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace fone;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitRun = 4;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config_error:
        case ErrorKind::invalid_format: return kExitUsage;
        case ErrorKind::parse_error:
        case ErrorKind::task_mismatch:
        case ErrorKind::format_overflow:
        case ErrorKind::unsupported_sign:
        case ErrorKind::invalid_argument:
        case ErrorKind::invalid_digit:
        case ErrorKind::io_error:
        case ErrorKind::size_error:
        case ErrorKind::exhausted_space: return kExitData;
        default: return kExitRun;
    }
}

int report_failure(const std::string& kind, const std::string& message, int code) {
    json j;
    j["status"] = "error";
    j["kind"] = kind;
    j["message"] = message;
    j["exit_code"] = code;
    std::cerr << j.dump() << std::endl;
    return code;
}

// Options shared by commands that train: each maps onto a RunConfig key.
struct RunOptions {
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
    std::string config_path;
    std::string data_dir;
    bool no_early_stop = false;
    bool verbose = false;

    void attach(CLI::App* app) {
        app->add_option("--config", config_path, "key=value file; flags override its entries");
        add(app, "task", "--task", "task name, e.g. int-add-3, decimal-add-6, int-mul-3, classify");
        add(app, "scheme", "--scheme", "fone | digitwise | subword | xval | direct");
        add(app, "preset", "--preset", "model size preset 1-6");
        add(app, "lr", "--lr", "learning rate (default 0.005, 0.0001 for xval)");
        add(app, "batch_size", "--batch-size", "batch size (default 512)");
        add(app, "epochs", "--epochs", "maximum epochs (default 100)");
        add(app, "train_size", "--train-size", "training records (default 50000)");
        add(app, "val_size", "--val-size", "validation records (default 5000)");
        add(app, "test_size", "--test-size", "test records (default 10000)");
        add(app, "seed", "--seed", "seed (falls back to FONE_SEED, then 0)");
        add(app, "out", "--out", "run directory");
        add(app, "periods", "--periods", "FoNE bases, e.g. 10 or 2,5,10");
        add(app, "adapter", "--adapter", "zero-pad | linear");
        app->add_flag("--no-early-stop", no_early_stop, "train all epochs even at 100% validation accuracy");
        app->add_flag("--verbose", verbose, "print one line per epoch");
        app->add_option("--data", data_dir, "dataset directory written by `fone generate`");
    }

    void add(CLI::App* app, const std::string& key, const std::string& flag, const std::string& help) {
        options[key] = app->add_option(flag, values[key], help);
    }

    /// Config file entries, then flags, then FONE_SEED for a missing seed.
    KeyValueConfig resolve() const {
        KeyValueConfig cfg;
        if (!config_path.empty()) cfg = KeyValueConfig::load(config_path);
        for (const auto& [key, opt] : options) {
            if (opt->count() > 0) cfg.set(key, values.at(key));
        }
        if (no_early_stop) cfg.set("early_stop", "false");
        if (verbose) cfg.set("verbose", "true");
        if (!cfg.has("seed")) {
            if (const char* env = std::getenv("FONE_SEED"); env != nullptr && *env != '\0') cfg.set("seed", env);
        }
        return cfg;
    }
};

KeyValueConfig without(const KeyValueConfig& cfg, const std::set<std::string>& keys) {
    KeyValueConfig out;
    for (const auto& [k, v] : cfg.entries()) {
        if (keys.count(k) == 0) out.set(k, v);
    }
    return out;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorKind::io_error, "cannot write " + path.string());
    out << text;
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

struct Dataset {
    TaskSpec task;
    DataSplits splits;
};

Dataset load_dataset(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) fail(ErrorKind::io_error, "no manifest.json in " + dir.string());
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        fail(ErrorKind::parse_error, std::string("bad manifest: ") + e.what());
    }
    Dataset d;
    d.task = TaskSpec::parse(manifest.at("task").get<std::string>());
    d.splits.train = read_records(dir / "train.txt");
    d.splits.val = read_records(dir / "val.txt");
    d.splits.test = read_records(dir / "test.txt");
    return d;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError("bad grid value \"" + item + "\"");
        }
    }
    return out;
}

// ---- generate -------------------------------------------------------------

struct GenerateArgs {
    std::string spec_path;
    std::string task;
    std::string out;
    std::string seed;
    bool desk = false;
    bool force = false;
    std::optional<std::size_t> train, val, test;
};

int cmd_generate(const GenerateArgs& a) {
    KeyValueConfig cfg;
    if (!a.spec_path.empty()) cfg = KeyValueConfig::load(a.spec_path);
    try {
        cfg.require_known({"task", "train_size", "val_size", "test_size", "seed", "profile"});
    } catch (const Error& e) {
        throw UsageError(std::string(e.what()) + " in " + a.spec_path);
    }
    if (!a.task.empty()) cfg.set("task", a.task);
    if (!a.seed.empty()) cfg.set("seed", a.seed);
    if (!cfg.has("seed")) {
        const char* env = std::getenv("FONE_SEED");
        cfg.set("seed", env != nullptr && *env != '\0' ? env : "0");
    }
    if (a.desk) cfg.set("profile", "desk");
    if (!cfg.has("task")) throw UsageError("generate needs --task or a spec file with task=");
    if (a.out.empty()) throw UsageError("generate needs --out");

    const TaskSpec task = TaskSpec::parse(*cfg.get("task"));
    const std::string profile = cfg.get("profile").value_or("full");
    if (profile != "full" && profile != "desk") throw UsageError("profile must be full or desk");
    SplitSizes sizes = profile == "desk" ? desk_split_sizes() : published_split_sizes(task);
    auto size_key = [&](const char* key, std::optional<std::size_t> flag, std::size_t& dst) {
        if (flag) cfg.set(key, std::to_string(*flag));
        if (auto v = cfg.get(key)) {
            try {
                dst = std::stoull(*v);
            } catch (const std::exception&) {
                throw UsageError(std::string("bad value for ") + key);
            }
        }
        cfg.set(key, std::to_string(dst));
    };
    size_key("train_size", a.train, sizes.train);
    size_key("val_size", a.val, sizes.val);
    size_key("test_size", a.test, sizes.test);
    cfg.set("profile", profile);
    std::uint64_t seed = 0;
    try {
        seed = std::stoull(*cfg.get("seed"));
    } catch (const std::exception&) {
        throw UsageError("bad seed");
    }

    const fs::path out(a.out);
    if (fs::exists(out) && !fs::is_empty(out) && !a.force) {
        fail(ErrorKind::io_error, "output directory " + out.string() + " is not empty (use --force)");
    }
    const DataSplits splits = generate_splits(task, sizes, seed);
    fs::create_directories(out);
    write_records(out / "train.txt", splits.train);
    write_records(out / "val.txt", splits.val);
    write_records(out / "test.txt", splits.test);
    cfg.save(out / "config.txt");
    json manifest;
    manifest["task"] = task.name();
    manifest["seed"] = seed;
    manifest["profile"] = profile;
    manifest["counts"] = {{"train", splits.train.size()}, {"val", splits.val.size()}, {"test", splits.test.size()}};
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(cfg.to_text())));
    manifest["spec_hash"] = hash;
    write_file(out / "manifest.json", manifest.dump(2) + "\n");
    std::cout << manifest.dump() << std::endl;
    return kExitOk;
}

// ---- train / eval ---------------------------------------------------------

int print_result(const TrainResult& r) {
    json j;
    j["status"] = r.failure.empty() ? "ok" : "error";
    j["epochs_run"] = r.epochs_run;
    j["best_epoch"] = r.best_epoch;
    j["early_stopped"] = r.early_stopped;
    j["test_exact_match"] = r.test.exact_match;
    j["test_r_squared"] = r.test.r_squared;
    j["tokens_per_number"] = r.test.tokens_per_number;
    if (!r.failure.empty()) {
        const auto colon = r.failure.find(':');
        return report_failure(r.failure.substr(0, colon), r.failure, kExitRun);
    }
    std::cout << j.dump() << std::endl;
    return kExitOk;
}

int cmd_train(const RunOptions& o) {
    const KeyValueConfig cfg = o.resolve();
    RunConfig run = RunConfig::from_config(cfg);
    TrainResult r;
    if (!o.data_dir.empty()) {
        Dataset d = load_dataset(o.data_dir);
        if (cfg.has("task") && d.task.name() != run.task.name()) {
            fail(ErrorKind::task_mismatch, "dataset holds " + d.task.name() + ", run asks for " + run.task.name());
        }
        run.task = d.task;
        run.sizes = {d.splits.train.size(), d.splits.val.size(), d.splits.test.size()};
        r = train(run, d.splits);
    } else {
        r = train(run);
    }
    return print_result(r);
}

struct EvalArgs {
    std::string checkpoint;
    std::string data_dir;
    std::string records;
    std::string task;
    std::string out;
};

int cmd_eval(const EvalArgs& a) {
    if (a.checkpoint.empty()) throw UsageError("eval needs --checkpoint");
    if (a.data_dir.empty() == a.records.empty()) throw UsageError("eval needs exactly one of --data or --records");
    const Checkpoint ckpt = load_checkpoint(a.checkpoint);
    std::vector<ArithRecord> records;
    std::optional<TaskSpec> task;
    if (!a.data_dir.empty()) {
        Dataset d = load_dataset(a.data_dir);
        records = std::move(d.splits.test);
        task = d.task;
    } else {
        records = read_records(a.records);
    }
    if (!a.task.empty()) task = TaskSpec::parse(a.task);
    const EvalReport rep = evaluate(ckpt, records, task);
    const std::string text = report_json(rep);
    if (!a.out.empty()) {
        fs::create_directories(fs::path(a.out).parent_path().empty() ? fs::path(".") : fs::path(a.out).parent_path());
        write_file(a.out, text + "\n");
    }
    std::cout << text << std::endl;
    return kExitOk;
}

// ---- sweep / ablate -------------------------------------------------------

int cmd_sweep(const RunOptions& o, const std::string& axis_flag, const std::string& grid_flag,
              const std::string& schemes_flag) {
    KeyValueConfig cfg = o.resolve();
    if (!axis_flag.empty()) cfg.set("axis", axis_flag);
    if (!grid_flag.empty()) cfg.set("grid", grid_flag);
    if (!schemes_flag.empty()) cfg.set("schemes", schemes_flag);
    if (!cfg.has("axis")) throw UsageError("sweep needs --axis data-size|model-size");
    const SweepAxis axis = parse_sweep_axis(*cfg.get("axis"));
    const std::vector<double> grid = parse_list(cfg.get("grid").value_or(""));
    std::vector<Scheme> schemes;
    {
        std::stringstream ss(cfg.get("schemes").value_or(""));
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!item.empty()) schemes.push_back(parse_scheme(item));
        }
    }
    const RunConfig base = RunConfig::from_config(without(cfg, {"axis", "grid", "schemes"}));
    if (!base.output_dir.empty()) {
        fs::create_directories(base.output_dir);
        cfg.save(base.output_dir / "config.txt");
    }
    const auto rows = sweep(axis, grid, base, schemes);
    const std::string table = sweep_csv(rows);
    if (!base.output_dir.empty()) write_file(base.output_dir / "sweep.csv", table);
    std::cout << table;
    for (const auto& r : rows) {
        if (!r.failure.empty()) return report_failure("run-failure", r.failure, kExitRun);
    }
    return kExitOk;
}

int cmd_ablate(const RunOptions& o, const std::string& kind_flag) {
    KeyValueConfig cfg = o.resolve();
    if (!kind_flag.empty()) cfg.set("kind", kind_flag);
    if (!cfg.has("kind")) throw UsageError("ablate needs --kind periods|adapter|direct");
    const AblationKind kind = parse_ablation_kind(*cfg.get("kind"));
    const RunConfig base = RunConfig::from_config(without(cfg, {"kind"}));
    if (!base.output_dir.empty()) {
        fs::create_directories(base.output_dir);
        cfg.save(base.output_dir / "config.txt");
    }
    const auto rows = run_ablation(kind, base);
    const std::string table = ablation_csv(rows);
    if (!base.output_dir.empty()) write_file(base.output_dir / "ablation.csv", table);
    std::cout << table;
    for (const auto& r : rows) {
        if (!r.failure.empty()) return report_failure("run-failure", r.failure, kExitRun);
    }
    return kExitOk;
}

// ---- roundtrip ------------------------------------------------------------

struct RoundtripArgs {
    std::vector<std::string> numbers;
    std::size_t random = 0;
    std::string format;
    std::string periods = "10";
    std::string seed;
    bool quiet = false;
};

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

int cmd_roundtrip(const RoundtripArgs& a) {
    if (a.numbers.empty() && a.random == 0) throw UsageError("roundtrip needs numbers or --random N");
    const PeriodSet periods = PeriodSet::parse(a.periods);
    std::optional<NumberFormat> fmt;
    if (!a.format.empty()) {
        fmt = NumberFormat::parse(a.format);
        fmt->validate(false);
    }
    std::vector<std::string> inputs = a.numbers;
    if (a.random > 0) {
        if (!fmt) throw UsageError("--random needs --format m,n");
        std::uint64_t seed = 0;
        const char* env = std::getenv("FONE_SEED");
        const std::string seed_text = !a.seed.empty() ? a.seed : (env != nullptr ? env : "0");
        try {
            seed = std::stoull(seed_text.empty() ? "0" : seed_text);
        } catch (const std::exception&) {
            throw UsageError("bad seed");
        }
        Rng rng(seed);
        for (std::size_t k = 0; k < a.random; ++k) {
            std::string s;
            for (int d = 0; d < fmt->integer_digits; ++d) s += static_cast<char>('0' + rng.below(10));
            if (s.empty()) s = "0";
            if (fmt->fraction_digits > 0) {
                s += '.';
                for (int d = 0; d < fmt->fraction_digits; ++d) s += static_cast<char>('0' + rng.below(10));
            }
            inputs.push_back(s);
        }
    }
    std::size_t failures = 0;
    for (const std::string& x : inputs) {
        if (x.empty()) throw UsageError("empty number");
        NumberFormat f;
        if (fmt) {
            f = *fmt;
        } else {
            const DecimalDigits parts = parse_decimal(x);
            f = {static_cast<int>(parts.integer_part.size()), static_cast<int>(parts.fraction_part.size())};
        }
        const FoneVector v = fone_encode(x, f, periods);
        std::string recovered;
        std::string problem;
        try {
            recovered = recover_digits(v, f, periods);
        } catch (const Error& e) {
            problem = e.what();
        }
        const std::string expected = canonical_decimal(x, f);
        const bool ok = problem.empty() && recovered == expected;
        failures += ok ? 0 : 1;
        if (!a.quiet || !ok) {
            std::string moduli;
            const int ten = periods.index_of_ten();
            if (ten >= 0) {
                const int digits = f.total_digits();
                for (int k = 0; k < digits; ++k) {
                    const int i = -f.fraction_digits + 1 + k;
                    const double T = periods.period(static_cast<std::size_t>(ten), i);
                    const std::size_t pair = static_cast<std::size_t>(ten * digits + k);
                    const double r = recover_mod(v.pair(pair), T);
                    moduli += (k ? ", " : "") + fixed(r, f.fraction_digits);
                }
            }
            std::cout << x << " -> " << (problem.empty() ? recovered : problem) << "  moduli [" << moduli << "]  "
                      << (ok ? "ok" : "FAIL") << "\n";
        }
    }
    std::cout << "roundtrip: " << inputs.size() - failures << "/" << inputs.size() << " passed" << std::endl;
    return failures == 0 ? kExitOk : kExitRun;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FoNE workbench: number embeddings, toy transformers and arithmetic benchmarks"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "write train/val/test record files and a manifest");
    g->add_option("--spec", gen.spec_path, "key=value file (task, train_size, val_size, test_size, seed, profile)");
    g->add_option("--task", gen.task, "task name");
    g->add_option("--out", gen.out, "output directory");
    g->add_option("--seed", gen.seed, "seed (falls back to FONE_SEED, then 0)");
    g->add_flag("--desk", gen.desk, "laptop profile: 50000 / 5000 / 10000");
    g->add_flag("--force", gen.force, "write into a non-empty directory");
    g->add_option("--train-size", gen.train, "training records");
    g->add_option("--val-size", gen.val, "validation records");
    g->add_option("--test-size", gen.test, "test records");

    RunOptions train_opts;
    auto* t = app.add_subcommand("train", "train one model and write a run directory");
    train_opts.attach(t);

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    e->add_option("--checkpoint", ev.checkpoint, "checkpoint file")->required();
    e->add_option("--data", ev.data_dir, "dataset directory (its test split is used)");
    e->add_option("--records", ev.records, "record file");
    e->add_option("--task", ev.task, "task of the record file");
    e->add_option("--out", ev.out, "write the JSON report here");

    RunOptions sweep_opts;
    std::string axis, grid, schemes;
    auto* s = app.add_subcommand("sweep", "one run per grid value and scheme, as a CSV table");
    sweep_opts.attach(s);
    s->add_option("--axis", axis, "data-size | model-size");
    s->add_option("--grid", grid, "comma-separated values, e.g. 3200,6400,12800 or 1,2,3");
    s->add_option("--schemes", schemes, "comma-separated schemes (default: --scheme)");

    RunOptions ablate_opts;
    std::string kind;
    auto* ab = app.add_subcommand("ablate", "period-set, adapter or direct-encoding comparison");
    ablate_opts.attach(ab);
    ab->add_option("--kind", kind, "periods | adapter | direct");

    RoundtripArgs rt;
    auto* r = app.add_subcommand("roundtrip", "encode numbers and recover them from the embedding");
    r->add_option("numbers", rt.numbers, "decimal numbers");
    r->add_option("--random", rt.random, "also test N random numbers");
    r->add_option("--format", rt.format, "m,n digits (required with --random)");
    r->add_option("--periods", rt.periods, "bases, must include 10 for recovery");
    r->add_option("--seed", rt.seed, "seed for --random");
    r->add_flag("--quiet", rt.quiet, "print failures and the summary only");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*g) return cmd_generate(gen);
        if (*t) return cmd_train(train_opts);
        if (*e) return cmd_eval(ev);
        if (*s) return cmd_sweep(sweep_opts, axis, grid, schemes);
        if (*ab) return cmd_ablate(ablate_opts, kind);
        if (*r) return cmd_roundtrip(rt);
    } catch (const UsageError& err) {
        return report_failure("usage", err.what(), kExitUsage);
    } catch (const Error& err) {
        const int code = exit_code_for(err.kind());
        return report_failure(std::string(to_string(err.kind())), err.what(), code);
    } catch (const std::exception& err) {
        return report_failure("internal", err.what(), kExitRun);
    }
    return kExitUsage;
}
