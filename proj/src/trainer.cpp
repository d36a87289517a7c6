#include "fone/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "fone/codec.hpp"
#include "fone/error.hpp"
#include "fone/fone_core.hpp"
#include "fone/rng.hpp"

namespace fone {
namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int argmax_lowest(const float* z, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < n; ++k) {
        if (z[k] > z[best]) best = k;
    }
    return static_cast<int>(best);
}

// softmax(z) - onehot(target), scaled; returns the cross-entropy
double softmax_xent(const float* z, std::size_t n, int target, double scale, float* grad) {
    double peak = z[0];
    for (std::size_t k = 1; k < n; ++k) peak = std::max(peak, static_cast<double>(z[k]));
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) sum += std::exp(static_cast<double>(z[k]) - peak);
    const double lse = peak + std::log(sum);
    for (std::size_t k = 0; k < n; ++k) {
        const double p = std::exp(static_cast<double>(z[k]) - lse);
        grad[k] += static_cast<float>(scale * (p - (static_cast<int>(k) == target ? 1.0 : 0.0)));
    }
    return lse - static_cast<double>(z[static_cast<std::size_t>(target)]);
}

bool is_decimal(std::string_view s) {
    if (s.empty()) return false;
    int points = 0;
    for (char c : s) {
        if (c == '.') {
            if (++points > 1) return false;
        } else if (c < '0' || c > '9') {
            return false;
        }
    }
    return s.front() != '.' && s.back() != '.';
}

std::string truth_string(const ArithRecord& r, const TaskSpec& task) {
    if (task.kind == TaskKind::classify) {
        return std::to_string(r.label.value_or(r.answer == "1" ? 1 : 0));
    }
    return canonical_decimal(r.answer, task.answer_format);
}

// Summed batch loss; parameter gradients of the batch mean go into `grad`.
double accumulate_batch(const Model& model, const Encoder& enc, std::span<const EncodedSequence* const> batch,
                        std::vector<float>& grad) {
    std::vector<SequenceView> views;
    views.reserve(batch.size());
    for (const EncodedSequence* s : batch) views.push_back(SequenceView::whole(*s));
    const ForwardPass<float> pass = model.forward(views);
    const ModelConfig& c = model.config();
    const auto H = static_cast<std::size_t>(c.hidden_size);
    const auto V = static_cast<std::size_t>(c.vocab_size);
    const auto A = static_cast<std::size_t>(c.aux_outputs);
    const double inv = 1.0 / static_cast<double>(batch.size());

    OutputGrads<float> up;
    double total = 0.0;
    const bool classify = enc.task().kind == TaskKind::classify;
    const Scheme scheme = enc.scheme();
    std::optional<FourierHead> head;
    if (classify || scheme == Scheme::xval) {
        up.aux.assign(pass.head_rows.size() * A, 0.0f);
    } else if (scheme == Scheme::digitwise || scheme == Scheme::subword) {
        up.logits.assign(pass.head_rows.size() * V, 0.0f);
    } else {
        up.hidden.assign(pass.rows * H, 0.0f);
        if (scheme == Scheme::fone) head.emplace(enc.task().answer_format, enc.periods());
    }

    std::vector<double> h(H), gh;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const EncodedSequence& seq = *batch[b];
        const std::size_t slot = seq.answer_slot;
        if (classify) {
            const std::size_t j = pass.head_index(b, slot);
            total += softmax_xent(pass.aux.data() + j * A, A, seq.class_label.value(), inv, up.aux.data() + j * A);
            continue;
        }
        switch (scheme) {
            case Scheme::fone: {
                const auto hs = pass.hidden_at(b, slot, H);
                std::copy(hs.begin(), hs.end(), h.begin());
                total += head->final_loss_grad(h, seq.digit_label.value(), gh);
                float* dst = up.hidden.data() + (pass.segments[b].offset + slot) * H;
                for (std::size_t k = 0; k < gh.size(); ++k) dst[k] += static_cast<float>(gh[k] * inv);
                break;
            }
            case Scheme::direct: {
                const auto hs = pass.hidden_at(b, slot, H);
                const auto& d = seq.digit_targets;
                const double kinv = 1.0 / static_cast<double>(d.size());
                float* dst = up.hidden.data() + (pass.segments[b].offset + slot) * H;
                for (std::size_t k = 0; k < d.size(); ++k) {
                    const double e = static_cast<double>(hs[k]) - d[k];
                    total += e * e * kinv;
                    dst[k] += static_cast<float>(2.0 * e * kinv * inv);
                }
                break;
            }
            case Scheme::xval: {
                const std::size_t j = pass.head_index(b, slot);
                const double e = static_cast<double>(pass.aux[j * A]) - seq.scalar_label.value();
                total += e * e;
                up.aux[j * A] += static_cast<float>(2.0 * e * inv);
                break;
            }
            case Scheme::digitwise:
            case Scheme::subword: {
                std::size_t n = 0;
                for (std::size_t p = slot; p < seq.size(); ++p) n += seq.targets[p] >= 0 ? 1 : 0;
                const double scale = inv / static_cast<double>(std::max<std::size_t>(n, 1));
                for (std::size_t p = slot; p < seq.size(); ++p) {
                    if (seq.targets[p] < 0) continue;
                    const std::size_t j = pass.head_index(b, p);
                    total += softmax_xent(pass.logits.data() + j * V, V, seq.targets[p], scale,
                                          up.logits.data() + j * V) /
                             static_cast<double>(n);
                }
                break;
            }
        }
    }
    model.backward(pass, up, grad);
    return total;
}

// Spelled schemes: greedy decoding from the prompt until [EOS].
std::vector<std::string> greedy_decode(const Model& model, const Encoder& enc,
                                       std::span<const EncodedSequence> prompts) {
    const Vocabulary& vocab = enc.vocabulary();
    const int eos = vocab.eos_id();
    const auto V = static_cast<std::size_t>(model.config().vocab_size);
    const auto max_len =
        std::min(enc.max_length(), static_cast<std::size_t>(model.config().max_seq_len));
    std::vector<EncodedSequence> work(prompts.begin(), prompts.end());
    std::vector<std::string> out(work.size());
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < work.size(); ++i) {
        const std::size_t n = work[i].prompt_length();
        work[i].token_ids.resize(n);
        work[i].payloads.resize(n);
        work[i].targets.resize(n);
        if (n < max_len) active.push_back(i);
    }
    while (!active.empty()) {
        std::vector<SequenceView> views;
        for (std::size_t i : active) views.push_back({&work[i], work[i].size(), work[i].size() - 1});
        const ForwardPass<float> pass = model.forward(views);
        std::vector<std::size_t> next;
        for (std::size_t b = 0; b < active.size(); ++b) {
            const std::size_t i = active[b];
            const std::size_t j = pass.head_index(b, work[i].size() - 1);
            const int id = argmax_lowest(pass.logits.data() + j * V, V);
            if (id == eos) continue;
            out[i] += vocab.token(id);
            work[i].token_ids.push_back(id);
            work[i].payloads.emplace_back();
            work[i].targets.push_back(-1);
            if (work[i].size() < max_len) next.push_back(i);
        }
        active = std::move(next);
    }
    return out;
}

std::vector<std::string> predict_encoded(const Model& model, const Encoder& enc,
                                         std::span<const EncodedSequence> seqs, int batch_size) {
    std::vector<std::string> out;
    out.reserve(seqs.size());
    const auto step = static_cast<std::size_t>(std::max(batch_size, 1));
    const ModelConfig& c = model.config();
    const auto H = static_cast<std::size_t>(c.hidden_size);
    const auto A = static_cast<std::size_t>(c.aux_outputs);
    const bool classify = enc.task().kind == TaskKind::classify;
    const Scheme scheme = enc.scheme();
    const FourierHead head(enc.task().answer_format, enc.periods());
    for (std::size_t start = 0; start < seqs.size(); start += step) {
        const auto chunk = seqs.subspan(start, std::min(step, seqs.size() - start));
        if (!classify && (scheme == Scheme::digitwise || scheme == Scheme::subword)) {
            for (auto& s : greedy_decode(model, enc, chunk)) out.push_back(std::move(s));
            continue;
        }
        std::vector<SequenceView> views;
        for (const auto& s : chunk) views.push_back({&s, s.prompt_length(), s.answer_slot});
        const ForwardPass<float> pass = model.forward(views);
        for (std::size_t b = 0; b < chunk.size(); ++b) {
            const std::size_t slot = chunk[b].answer_slot;
            if (classify) {
                const std::size_t j = pass.head_index(b, slot);
                out.push_back(std::to_string(argmax_lowest(pass.aux.data() + j * A, A)));
                continue;
            }
            const auto hs = pass.hidden_at(b, slot, H);
            std::vector<double> h(hs.begin(), hs.end());
            switch (scheme) {
                case Scheme::fone: out.push_back(head.final_predict(h)); break;
                case Scheme::direct:
                    h.resize(chunk[b].digit_targets.size());
                    out.push_back(enc.number_from_payload(h));
                    break;
                case Scheme::xval: {
                    const std::size_t j = pass.head_index(b, slot);
                    out.push_back(enc.number_from_payload({static_cast<double>(pass.aux[j * A])}));
                    break;
                }
                default: break;
            }
        }
    }
    return out;
}

std::vector<EncodedSequence> encode_all(const Encoder& enc, std::span<const ArithRecord> records) {
    std::vector<EncodedSequence> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(enc.encode(r));
    return out;
}

EvalReport build_report(const TaskSpec& task, Scheme scheme, std::span<const ArithRecord> records,
                        const std::vector<std::string>& preds) {
    EvalReport rep;
    rep.count = records.size();
    rep.tokens_per_number = numeric_token_count(scheme, max_answer(task));
    const bool classify = task.kind == TaskKind::classify;
    const NumberFormat fmt = classify ? NumberFormat{1, 0} : task.answer_format;
    rep.per_digit_confusion.assign(static_cast<std::size_t>(fmt.total_digits()), DigitConfusion{});
    std::vector<std::string> truth;
    std::vector<double> y, yhat;
    for (std::size_t i = 0; i < records.size(); ++i) {
        truth.push_back(truth_string(records[i], task));
        y.push_back(std::stod(truth.back()));
        yhat.push_back(is_decimal(preds[i]) ? std::stod(preds[i]) : 0.0);
        const auto t = placed_digits(truth.back(), fmt);
        const auto p = placed_digits(preds[i], fmt);
        for (std::size_t k = 0; k < t.size(); ++k) {
            ++rep.per_digit_confusion[k][static_cast<std::size_t>(t[k])][static_cast<std::size_t>(p[k])];
        }
    }
    rep.exact_match = exact_match(truth, preds);
    rep.r_squared = records.empty() ? 0.0 : r_squared(y, yhat);
    return rep;
}

json report_to_json(const EvalReport& r) {
    json j;
    j["count"] = r.count;
    j["exact_match"] = r.exact_match;
    j["r_squared"] = r.r_squared;
    j["wall_clock"] = r.wall_clock;
    j["tokens_per_number"] = r.tokens_per_number;
    j["digit_errors"] = r.digit_errors();
    j["per_digit_confusion"] = r.per_digit_confusion;
    return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorKind::io_error, "cannot write " + path.string());
    out << text;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::string_view to_string(Adapter adapter) noexcept {
    return adapter == Adapter::zero_pad ? "zero-pad" : "linear";
}

Adapter parse_adapter(std::string_view name) {
    if (name == "zero-pad") return Adapter::zero_pad;
    if (name == "linear") return Adapter::linear;
    fail(ErrorKind::config_error, "unknown adapter \"" + std::string(name) + "\" (zero-pad|linear)");
}

double RunConfig::lr() const {
    return learning_rate.value_or(default_learning_rate(scheme));
}

void RunConfig::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) fail(ErrorKind::config_error, what);
    };
    task.validate();
    require(preset >= 1 && preset <= 6, "preset must be 1-6");
    require(batch_size > 0, "batch_size must be positive");
    require(epochs >= 0, "epochs must be >= 0");
    require(std::isfinite(lr()) && lr() > 0.0, "lr must be positive");
    require(sizes.train > 0, "train_size must be positive");
}

KeyValueConfig RunConfig::to_config() const {
    KeyValueConfig cfg;
    cfg.set("task", task.name());
    cfg.set("scheme", std::string(to_string(scheme)));
    cfg.set("preset", std::to_string(preset));
    cfg.set("lr", format_double(lr()));
    cfg.set("batch_size", std::to_string(batch_size));
    cfg.set("epochs", std::to_string(epochs));
    cfg.set("train_size", std::to_string(sizes.train));
    cfg.set("val_size", std::to_string(sizes.val));
    cfg.set("test_size", std::to_string(sizes.test));
    cfg.set("seed", std::to_string(seed));
    cfg.set("out", output_dir.string());
    cfg.set("periods", periods.to_string());
    cfg.set("adapter", std::string(to_string(adapter)));
    cfg.set("early_stop", early_stop ? "true" : "false");
    cfg.set("verbose", verbose ? "true" : "false");
    return cfg;
}

RunConfig RunConfig::from_config(const KeyValueConfig& cfg) {
    cfg.require_known({"task", "scheme", "preset", "lr", "batch_size", "epochs", "train_size", "val_size",
                       "test_size", "seed", "out", "periods", "adapter", "early_stop", "verbose"});
    RunConfig run;
    auto number = [&](const std::string& key, auto& dst) {
        const auto v = cfg.get(key);
        if (!v) return;
        try {
            std::size_t used = 0;
            if constexpr (std::is_floating_point_v<std::remove_reference_t<decltype(dst)>>) {
                dst = std::stod(*v, &used);
            } else {
                const unsigned long long x = std::stoull(*v, &used);
                if (v->front() == '-') throw std::invalid_argument("negative");
                dst = static_cast<std::remove_reference_t<decltype(dst)>>(x);
            }
            if (used != v->size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            fail(ErrorKind::config_error, "bad value for " + key + ": \"" + *v + "\"");
        }
    };
    auto boolean = [&](const std::string& key, bool& dst) {
        const auto v = cfg.get(key);
        if (!v) return;
        if (*v == "true" || *v == "1") dst = true;
        else if (*v == "false" || *v == "0") dst = false;
        else fail(ErrorKind::config_error, "bad value for " + key + ": \"" + *v + "\"");
    };
    if (auto v = cfg.get("task")) run.task = TaskSpec::parse(*v);
    if (auto v = cfg.get("scheme")) run.scheme = parse_scheme(*v);
    number("preset", run.preset);
    if (cfg.has("lr")) {
        double lr = 0.0;
        number("lr", lr);
        run.learning_rate = lr;
    }
    number("batch_size", run.batch_size);
    number("epochs", run.epochs);
    number("train_size", run.sizes.train);
    number("val_size", run.sizes.val);
    number("test_size", run.sizes.test);
    number("seed", run.seed);
    if (auto v = cfg.get("out")) run.output_dir = *v;
    if (auto v = cfg.get("periods")) {
        try {
            run.periods = PeriodSet::parse(*v);
        } catch (const Error& e) {
            fail(ErrorKind::config_error, std::string("bad value for periods: ") + e.what());
        }
    }
    if (auto v = cfg.get("adapter")) run.adapter = parse_adapter(*v);
    boolean("early_stop", run.early_stop);
    boolean("verbose", run.verbose);
    run.validate();
    return run;
}

double EvalReport::error_share_at(int diff) const {
    std::uint64_t errors = 0;
    std::uint64_t hits = 0;
    for (const auto& table : per_digit_confusion) {
        for (int t = 0; t < 10; ++t) {
            for (int p = 0; p < 10; ++p) {
                if (t == p) continue;
                const auto n = table[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
                errors += n;
                if (std::abs(p - t) == diff) hits += n;
            }
        }
    }
    return errors == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(errors);
}

std::uint64_t EvalReport::digit_errors() const {
    std::uint64_t errors = 0;
    for (const auto& table : per_digit_confusion) {
        for (std::size_t t = 0; t < 10; ++t) {
            for (std::size_t p = 0; p < 10; ++p) {
                if (t != p) errors += table[t][p];
            }
        }
    }
    return errors;
}

double r_squared(std::span<const double> truth, std::span<const double> predicted) {
    if (truth.size() != predicted.size() || truth.empty()) {
        fail(ErrorKind::size_error, "r_squared needs two non-empty series of equal length");
    }
    const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / static_cast<double>(truth.size());
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ss_res += (truth[i] - predicted[i]) * (truth[i] - predicted[i]);
        ss_tot += (truth[i] - mean) * (truth[i] - mean);
    }
    if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
    return 1.0 - ss_res / ss_tot;
}

double exact_match(std::span<const std::string> truth, std::span<const std::string> predicted) {
    if (truth.size() != predicted.size()) fail(ErrorKind::size_error, "exact_match needs equal-length inputs");
    if (truth.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hits += truth[i] == predicted[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

std::vector<int> placed_digits(std::string_view number, const NumberFormat& fmt) {
    const auto point = number.find('.');
    const std::string_view int_part = number.substr(0, point);
    const std::string_view frac_part = point == std::string_view::npos ? std::string_view{} : number.substr(point + 1);
    auto digits_of = [](std::string_view s) {
        std::string d;
        for (char c : s) {
            if (c >= '0' && c <= '9') d += c;
        }
        return d;
    };
    const std::string ip = digits_of(int_part);
    const std::string fp = digits_of(frac_part);
    const auto m = static_cast<std::size_t>(fmt.integer_digits);
    const auto n = static_cast<std::size_t>(fmt.fraction_digits);
    std::vector<int> out;  // least-significant first
    for (std::size_t k = n; k-- > 0;) out.push_back(k < fp.size() ? fp[k] - '0' : 0);
    for (std::size_t k = 0; k < m; ++k) out.push_back(k < ip.size() ? ip[ip.size() - 1 - k] - '0' : 0);
    return out;
}

Encoder make_encoder(const RunConfig& run) {
    return Encoder(run.scheme, run.task, run.periods);
}

ModelConfig make_model_config(const RunConfig& run, const Encoder& enc) {
    ModelConfig c = ModelConfig::preset(run.preset);
    c.vocab_size = static_cast<int>(enc.vocabulary().size());
    c.max_seq_len = static_cast<int>(enc.max_length());
    c.payload_dim = static_cast<int>(enc.payload_dim());
    switch (run.scheme) {
        case Scheme::fone:
        case Scheme::direct:
            c.payload_mode = run.adapter == Adapter::linear ? PayloadMode::project : PayloadMode::add;
            break;
        case Scheme::xval: c.payload_mode = PayloadMode::scale; break;
        default: c.payload_mode = PayloadMode::none; break;
    }
    if (run.task.kind == TaskKind::classify) {
        c.aux_outputs = 2;
    } else if (run.scheme == Scheme::xval) {
        c.aux_outputs = 1;
    }
    c.validate();
    return c;
}

std::vector<std::string> predict(const Model& model, const Encoder& enc, std::span<const ArithRecord> records,
                                 int batch_size) {
    const auto seqs = encode_all(enc, records);
    return predict_encoded(model, enc, seqs, batch_size);
}

EvalReport evaluate(const Model& model, const Encoder& enc, std::span<const ArithRecord> records,
                    int batch_size) {
    const auto t0 = Clock::now();
    const auto preds = predict(model, enc, records, batch_size);
    EvalReport rep = build_report(enc.task(), enc.scheme(), records, preds);
    rep.wall_clock = seconds_since(t0);
    return rep;
}

EvalReport evaluate(const Checkpoint& ckpt, std::span<const ArithRecord> records,
                    const std::optional<TaskSpec>& dataset_task) {
    const RunConfig run = run_from_metadata(ckpt.metadata);
    if (dataset_task && dataset_task->name() != run.task.name()) {
        fail(ErrorKind::task_mismatch, "checkpoint was trained on " + run.task.name() + ", dataset is " +
                                           dataset_task->name());
    }
    const Encoder enc = make_encoder(run);
    if (make_model_config(run, enc) != ckpt.model.config()) {
        fail(ErrorKind::state_error, "checkpoint model does not match its recorded run");
    }
    for (const auto& r : records) {
        try {
            enc.encode(r);
        } catch (const Error& e) {
            fail(ErrorKind::task_mismatch, std::string("record does not fit the checkpoint task: ") + e.what());
        }
    }
    return evaluate(ckpt.model, enc, records);
}

std::string run_metadata(const RunConfig& run) {
    json j;
    j["task"] = run.task.name();
    j["scheme"] = std::string(to_string(run.scheme));
    j["preset"] = run.preset;
    j["lr"] = run.lr();
    j["batch_size"] = run.batch_size;
    j["epochs"] = run.epochs;
    j["periods"] = run.periods.to_string();
    j["adapter"] = std::string(to_string(run.adapter));
    j["seed"] = run.seed;
    j["answer_format"] = run.task.answer_format.to_string();
    return j.dump();
}

RunConfig run_from_metadata(const std::string& text) {
    try {
        const json j = json::parse(text);
        RunConfig run;
        run.task = TaskSpec::parse(j.at("task").get<std::string>());
        run.scheme = parse_scheme(j.at("scheme").get<std::string>());
        run.preset = j.at("preset").get<int>();
        run.learning_rate = j.at("lr").get<double>();
        run.batch_size = j.at("batch_size").get<int>();
        run.epochs = j.at("epochs").get<int>();
        run.periods = PeriodSet::parse(j.at("periods").get<std::string>());
        run.adapter = parse_adapter(j.at("adapter").get<std::string>());
        run.seed = j.at("seed").get<std::uint64_t>();
        return run;
    } catch (const json::exception& e) {
        fail(ErrorKind::parse_error, std::string("bad checkpoint metadata: ") + e.what());
    }
}

TrainResult train(const RunConfig& run) {
    run.validate();
    return train(run, generate_splits(run.task, run.sizes, run.seed));
}

TrainResult train(const RunConfig& run, const DataSplits& data) {
    run.validate();
    const auto t_start = Clock::now();
    const Encoder enc = make_encoder(run);
    const ModelConfig mc = make_model_config(run, enc);
    if (data.train.empty()) fail(ErrorKind::size_error, "empty training set");

    const auto train_seqs = encode_all(enc, data.train);
    const auto val_seqs = encode_all(enc, data.val);
    std::vector<std::string> val_truth;
    for (const auto& r : data.val) val_truth.push_back(truth_string(r, run.task));

    TrainResult result;
    Model model = Model::init(mc, mix_seed(run.seed ^ 0x6d6f64656cULL));
    Adam adam(model.parameter_count());
    std::vector<float> grad(model.parameter_count());
    std::vector<float> best = model.parameters();
    double best_val = -1.0;
    const double lr = run.lr();

    std::vector<std::size_t> order(train_seqs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto bs = static_cast<std::size_t>(run.batch_size);
    std::vector<const EncodedSequence*> batch;

    for (int epoch = 1; epoch <= run.epochs && result.failure.empty(); ++epoch) {
        const auto t0 = Clock::now();
        Rng rng = Rng::derive(run.seed, static_cast<std::uint64_t>(epoch));
        for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);
        double loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += bs) {
            batch.clear();
            for (std::size_t k = start; k < std::min(order.size(), start + bs); ++k) {
                batch.push_back(&train_seqs[order[k]]);
            }
            std::fill(grad.begin(), grad.end(), 0.0f);
            const double batch_loss = accumulate_batch(model, enc, batch, grad);
            try {
                if (!std::isfinite(batch_loss)) {
                    fail(ErrorKind::divergence_error, "non-finite loss in epoch " + std::to_string(epoch));
                }
                adam.step<float>(model.parameters(), grad, lr, model.tensors());
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::divergence_error) throw;
                result.failure = e.what();
                break;
            }
            loss += batch_loss;
        }
        if (!result.failure.empty()) break;

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss / static_cast<double>(train_seqs.size());
        if (!val_seqs.empty()) {
            rec.val_exact_match = exact_match(val_truth, predict_encoded(model, enc, val_seqs, run.batch_size));
        }
        rec.seconds = seconds_since(t0);
        result.history.push_back(rec);
        result.epochs_run = epoch;
        if (run.verbose) {
            std::fprintf(stderr, "epoch %d  loss %.6f  val %.4f  %.1fs\n", epoch, rec.train_loss,
                         rec.val_exact_match, rec.seconds);
        }
        if (rec.val_exact_match > best_val || val_seqs.empty()) {
            best_val = rec.val_exact_match;
            best = model.parameters();
            result.best_epoch = epoch;
        }
        if (run.early_stop && !val_seqs.empty() && rec.val_exact_match >= 1.0) {
            result.early_stopped = true;
            break;
        }
    }
    model.parameters() = best;

    result.checkpoint.model = model;
    result.checkpoint.optimizer = adam;
    result.checkpoint.vocabulary = enc.vocabulary();
    result.checkpoint.step = adam.steps();
    result.checkpoint.seed = run.seed;
    result.checkpoint.metadata = run_metadata(run);
    if (!data.test.empty()) result.test = evaluate(model, enc, data.test, run.batch_size);

    if (!run.output_dir.empty()) {
        std::filesystem::create_directories(run.output_dir);
        run.to_config().save(run.output_dir / "config.txt");
        save_checkpoint(result.checkpoint, run.output_dir / "checkpoint.fone");
        write_text(run.output_dir / "history.csv", history_csv(result.history));
        json summary;
        summary["run"] = json::parse(run_metadata(run));
        summary["epochs_run"] = result.epochs_run;
        summary["best_epoch"] = result.best_epoch;
        summary["early_stopped"] = result.early_stopped;
        summary["failure"] = result.failure;
        summary["parameters"] = model.parameter_count();
        summary["seconds"] = seconds_since(t_start);
        summary["test"] = report_to_json(result.test);
        write_text(run.output_dir / "summary.json", summary.dump(2) + "\n");
    }
    return result;
}

std::string_view to_string(SweepAxis axis) noexcept {
    return axis == SweepAxis::data_size ? "data-size" : "model-size";
}

SweepAxis parse_sweep_axis(std::string_view name) {
    if (name == "data-size") return SweepAxis::data_size;
    if (name == "model-size") return SweepAxis::model_size;
    fail(ErrorKind::config_error, "unknown sweep axis \"" + std::string(name) + "\" (data-size|model-size)");
}

std::vector<SweepRow> sweep(SweepAxis axis, std::span<const double> grid, const RunConfig& base,
                            std::span<const Scheme> schemes) {
    std::vector<SweepRow> rows;
    if (grid.empty()) return rows;
    std::vector<Scheme> order(schemes.begin(), schemes.end());
    if (order.empty()) order.push_back(base.scheme);

    SplitSizes sizes = base.sizes;
    if (axis == SweepAxis::data_size) {
        double top = 0.0;
        for (double v : grid) {
            if (!(v >= 1.0) || v != std::floor(v)) fail(ErrorKind::config_error, "data-size grid needs positive integers");
            top = std::max(top, v);
        }
        sizes.train = static_cast<std::size_t>(top);
    } else {
        for (double v : grid) {
            if (v != std::floor(v) || v < 1 || v > 6) fail(ErrorKind::config_error, "model-size grid holds presets 1-6");
        }
    }
    // shared validation / test sets; smaller training sets are prefixes
    const DataSplits all = generate_splits(base.task, sizes, base.seed);
    for (Scheme scheme : order) {
        for (double v : grid) {
            RunConfig run = base;
            run.scheme = scheme;
            if (scheme != base.scheme) run.learning_rate.reset();
            DataSplits data = all;
            if (axis == SweepAxis::data_size) {
                run.sizes.train = static_cast<std::size_t>(v);
                data.train.resize(run.sizes.train);
            } else {
                run.preset = static_cast<int>(v);
            }
            if (!base.output_dir.empty()) {
                run.output_dir = base.output_dir / (std::string(to_string(axis)) + "-" + format_double(v) + "-" +
                                                    std::string(to_string(scheme)));
            }
            TrainResult r = train(run, data);
            rows.push_back({std::string(to_string(axis)), v, scheme, r.test, r.epochs_run, r.failure});
        }
    }
    return rows;
}

std::string_view to_string(AblationKind kind) noexcept {
    switch (kind) {
        case AblationKind::periods: return "periods";
        case AblationKind::adapter: return "adapter";
        case AblationKind::direct: return "direct";
    }
    return "unknown";
}

AblationKind parse_ablation_kind(std::string_view name) {
    if (name == "periods") return AblationKind::periods;
    if (name == "adapter") return AblationKind::adapter;
    if (name == "direct" || name == "direct-encoding") return AblationKind::direct;
    fail(ErrorKind::config_error, "unknown ablation \"" + std::string(name) + "\" (periods|adapter|direct)");
}

std::vector<AblationRow> run_ablation(AblationKind kind, const RunConfig& base) {
    std::vector<std::pair<std::string, RunConfig>> variants;
    RunConfig fone_base = base;
    fone_base.scheme = Scheme::fone;
    switch (kind) {
        case AblationKind::periods:
            for (const char* p : {"2,5,10", "10", "5", "7"}) {
                RunConfig run = fone_base;
                run.periods = PeriodSet::parse(p);
                variants.emplace_back(p, run);
            }
            break;
        case AblationKind::adapter:
            for (Adapter a : {Adapter::zero_pad, Adapter::linear}) {
                RunConfig run = fone_base;
                run.adapter = a;
                variants.emplace_back(std::string(to_string(a)), run);
            }
            break;
        case AblationKind::direct: {
            variants.emplace_back("fone", fone_base);
            RunConfig run = fone_base;
            run.scheme = Scheme::direct;
            variants.emplace_back("direct", run);
            break;
        }
    }
    const DataSplits data = generate_splits(base.task, base.sizes, base.seed);
    std::vector<AblationRow> rows;
    for (auto& [name, run] : variants) {
        if (!base.output_dir.empty()) {
            std::string dir = std::string(to_string(kind)) + "-" + name;
            std::replace(dir.begin(), dir.end(), ',', '_');
            run.output_dir = base.output_dir / dir;
        }
        TrainResult r = train(run, data);
        rows.push_back({name, r.test, r.epochs_run, r.failure});
    }
    return rows;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
    std::string out = "epoch,train_loss,val_exact_match,seconds\n";
    for (const auto& h : history) {
        out += std::to_string(h.epoch) + "," + format_double(h.train_loss) + "," + format_double(h.val_exact_match) +
               "," + format_double(h.seconds) + "\n";
    }
    return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "axis,value,scheme,exact_match,r_squared,tokens_per_number,epochs,wall_clock,failure\n";
    for (const auto& r : rows) {
        out += r.axis + "," + format_double(r.value) + "," + std::string(to_string(r.scheme)) + "," +
               format_double(r.report.exact_match) + "," + format_double(r.report.r_squared) + "," +
               std::to_string(r.report.tokens_per_number) + "," + std::to_string(r.epochs_run) + "," +
               format_double(r.report.wall_clock) + "," + csv_field(r.failure) + "\n";
    }
    return out;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::string out = "variant,exact_match,r_squared,digit_errors,error_share_at_5,epochs,failure\n";
    for (const auto& r : rows) {
        out += csv_field(r.variant) + "," + format_double(r.report.exact_match) + "," +
               format_double(r.report.r_squared) + "," + std::to_string(r.report.digit_errors()) + "," +
               format_double(r.report.error_share_at(5)) + "," + std::to_string(r.epochs_run) + "," +
               csv_field(r.failure) + "\n";
    }
    return out;
}

std::string report_json(const EvalReport& report) {
    return report_to_json(report).dump(2);
}

}  // namespace fone
