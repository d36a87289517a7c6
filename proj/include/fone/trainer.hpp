#pragma once

// Training and evaluation loops, metrics, sweeps and ablations.
//
// Loss per scheme, computed at the answer slot ('=' of the prompt):
//   fone       mean digit cross-entropy of the Fourier head on the final hidden state
//   digitwise  next-token cross-entropy over the spelled answer and [EOS]
//   subword    same as digitwise
//   xval       squared error of a one-output readout against value / scale
//   direct     squared error of the first m+n hidden entries against the digits
// Classification tasks use a two-way readout with cross-entropy for every scheme.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fone/checkpoint.hpp"
#include "fone/config.hpp"
#include "fone/datagen.hpp"
#include "fone/model.hpp"
#include "fone/tokenize.hpp"

namespace fone {

enum class Adapter { zero_pad, linear };

std::string_view to_string(Adapter adapter) noexcept;
Adapter parse_adapter(std::string_view name);

struct RunConfig {
    TaskSpec task = TaskSpec::make(TaskKind::int_add, 3);
    Scheme scheme = Scheme::fone;
    int preset = 1;
    std::optional<double> learning_rate;  // scheme default when unset
    int batch_size = kDefaultBatchSize;
    int epochs = 100;
    SplitSizes sizes = desk_split_sizes();
    std::uint64_t seed = 0;
    std::filesystem::path output_dir;  // empty: nothing written
    PeriodSet periods;
    Adapter adapter = Adapter::zero_pad;
    bool early_stop = true;  // stop once validation exact match hits 100%
    bool verbose = false;    // per-epoch line on stderr

    double lr() const;
    /// Throws config-error.
    void validate() const;

    /// Keys: task, scheme, preset, lr, batch_size, epochs, train_size,
    /// val_size, test_size, seed, out, periods, adapter, early_stop, verbose.
    KeyValueConfig to_config() const;
    /// Unset keys keep their defaults; unknown keys are a config-error.
    static RunConfig from_config(const KeyValueConfig& cfg);
};

using DigitConfusion = std::array<std::array<std::uint64_t, 10>, 10>;  // [true][predicted]

struct EvalReport {
    std::size_t count = 0;
    double exact_match = 0.0;
    double r_squared = 0.0;
    /// One 10x10 table per answer digit place, least-significant first.
    /// Classification uses a single table over labels 0/1.
    std::vector<DigitConfusion> per_digit_confusion;
    double wall_clock = 0.0;  // seconds
    std::size_t tokens_per_number = 0;

    /// Fraction of digit errors with |predicted - true| == `diff`.
    double error_share_at(int diff) const;
    std::uint64_t digit_errors() const;
};

/// Coefficient of determination 1 - SS_res / SS_tot. When every label is
/// equal, 1 for a perfect fit and 0 otherwise.
double r_squared(std::span<const double> truth, std::span<const double> predicted);
double exact_match(std::span<const std::string> truth, std::span<const std::string> predicted);

/// Digits of a (possibly malformed) prediction placed under `fmt`: the
/// integer part is right-aligned, the fraction left-aligned, missing places
/// read as 0 and non-digits are dropped. Least-significant first.
std::vector<int> placed_digits(std::string_view number, const NumberFormat& fmt);

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_exact_match = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    Checkpoint checkpoint;  // weights with the best validation exact match
    EvalReport test;
    int epochs_run = 0;
    int best_epoch = 0;
    bool early_stopped = false;
    std::string failure;  // non-empty when the run aborted (e.g. divergence-error: ...)
};

/// Encoder and model shape implied by a run.
Encoder make_encoder(const RunConfig& run);
ModelConfig make_model_config(const RunConfig& run, const Encoder& encoder);

/// Predicted canonical answers (greedy decoding for spelled schemes).
std::vector<std::string> predict(const Model& model, const Encoder& encoder,
                                 std::span<const ArithRecord> records, int batch_size = kDefaultBatchSize);

EvalReport evaluate(const Model& model, const Encoder& encoder, std::span<const ArithRecord> records,
                    int batch_size = kDefaultBatchSize);
/// Rebuilds the encoder from the checkpoint metadata. Throws task-mismatch
/// when `dataset_task` (if given) or any record does not match the
/// checkpoint's task.
EvalReport evaluate(const Checkpoint& ckpt, std::span<const ArithRecord> records,
                    const std::optional<TaskSpec>& dataset_task = std::nullopt);

/// Run description stored in checkpoints.
std::string run_metadata(const RunConfig& run);
RunConfig run_from_metadata(const std::string& json);

/// Generates the splits from (task, sizes, seed) and trains.
TrainResult train(const RunConfig& run);
TrainResult train(const RunConfig& run, const DataSplits& data);

enum class SweepAxis { data_size, model_size };
std::string_view to_string(SweepAxis axis) noexcept;
SweepAxis parse_sweep_axis(std::string_view name);

struct SweepRow {
    std::string axis;
    double value = 0.0;
    Scheme scheme = Scheme::fone;
    EvalReport report;
    int epochs_run = 0;
    std::string failure;
};

/// One run per (grid value, scheme); data-size varies the training set,
/// model-size the preset. Output goes to <out>/<axis>-<value>-<scheme>.
std::vector<SweepRow> sweep(SweepAxis axis, std::span<const double> grid, const RunConfig& base,
                            std::span<const Scheme> schemes = {});

enum class AblationKind { periods, adapter, direct };
std::string_view to_string(AblationKind kind) noexcept;
AblationKind parse_ablation_kind(std::string_view name);

struct AblationRow {
    std::string variant;  // "2,5,10", "zero-pad", "direct", ...
    EvalReport report;
    int epochs_run = 0;
    std::string failure;
};

/// periods: bases {2,5,10}, {10}, {5}, {7}; adapter: zero-pad, linear;
/// direct: the fone run next to the direct-digit run.
std::vector<AblationRow> run_ablation(AblationKind kind, const RunConfig& base);

// Comma-separated tables.
std::string history_csv(const std::vector<EpochRecord>& history);
std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string ablation_csv(const std::vector<AblationRow>& rows);
/// Machine-readable report: {"count", "exact_match", "r_squared",
/// "wall_clock", "tokens_per_number", "per_digit_confusion": [[[..]]]}.
std::string report_json(const EvalReport& report);

}  // namespace fone
