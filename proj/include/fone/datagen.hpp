#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fone/number_format.hpp"

namespace fone {

enum class TaskKind { int_add, decimal_add, int_sub, int_mul, classify };

enum class OperandOrder { a_le_b, a_ge_b, sorted_triple };

std::string_view to_string(TaskKind kind) noexcept;

/// One arithmetic (or classification) task family.
///
/// Task names used by the CLI: "int-add-6", "decimal-add-6" (three of the
/// six digits after the point unless fractional_digits says otherwise),
/// "int-sub-5", "int-mul-3", "classify" (d = 10) and "classify-190"
/// (d = -190).
struct TaskSpec {
    TaskKind kind = TaskKind::int_add;
    int operand_digits = 3;     // total digits, fraction included
    int fractional_digits = 0;  // decimal-add only
    NumberFormat answer_format{4, 0};
    OperandOrder order = OperandOrder::a_le_b;
    // classify only: label = [a n1 + b n2 + c n3 - d > 0]
    double coef_a = 1.5;
    double coef_b = -2.0;
    double coef_c = 0.5;
    double coef_d = 10.0;
    int classify_max = 1000;

    /// Builds a spec with the worst-case answer format and default ordering.
    static TaskSpec make(TaskKind kind, int operand_digits, int fractional_digits = 0);
    static TaskSpec parse(std::string_view name);
    std::string name() const;

    /// Format shared by operands and answer when numbers are embedded:
    /// the answer format for arithmetic, (4, 0) for classification inputs.
    NumberFormat number_format() const;
    NumberFormat operand_format() const;
    char op() const;
    /// Numbers per input (2, or 3 for classify).
    std::size_t operand_count() const;
    /// Distinct inputs under the ordering constraint.
    double capacity() const;
    void validate() const;

    friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

/// One example. Text form "<lhs><op><rhs>=<answer>", e.g. "98282+859172=957454";
/// classification records read "12,40,900=0".
struct ArithRecord {
    std::vector<std::string> operands;
    char op = '+';
    std::string answer;
    std::optional<int> label;  // classify only (answer is "0" or "1")

    const std::string& lhs() const { return operands.at(0); }
    const std::string& rhs() const { return operands.at(1); }
    std::string prompt() const;   // "98282+859172="
    std::string to_text() const;  // prompt + answer
    static ArithRecord from_text(std::string_view line);

    friend bool operator==(const ArithRecord&, const ArithRecord&) = default;
};

/// Exact answer for the operands under `spec` (arbitrary precision).
std::string exact_answer(const TaskSpec& spec, const std::vector<std::string>& operands);

/// Distinct records, deterministic in `seed`. Each operand draws its digit
/// length uniformly from 1..operand_digits, then a value uniformly within
/// that length. Throws exhausted-space when `count` exceeds capacity.
std::vector<ArithRecord> generate(const TaskSpec& spec, std::size_t count, std::uint64_t seed);

/// Sorted triples from [0, classify_max] with a threshold label.
std::vector<ArithRecord> generate_classification(const TaskSpec& spec, std::size_t count,
                                                 std::uint64_t seed);

struct SplitSizes {
    std::size_t train = 0;
    std::size_t val = 0;
    std::size_t test = 0;

    std::size_t total() const noexcept { return train + val + test; }
};

/// Published dataset sizes per task family.
SplitSizes published_split_sizes(const TaskSpec& spec);
/// Laptop-scale profile: 50k / 5k / 10k.
SplitSizes desk_split_sizes();

struct DataSplits {
    std::vector<ArithRecord> train;
    std::vector<ArithRecord> val;
    std::vector<ArithRecord> test;
};

/// Seeded shuffle, then disjoint slices. Throws size-error when the sizes
/// exceed the record count.
DataSplits split(const std::vector<ArithRecord>& records, const SplitSizes& sizes,
                 std::uint64_t seed);

/// Generates sizes.total() records and splits them.
DataSplits generate_splits(const TaskSpec& spec, const SplitSizes& sizes, std::uint64_t seed);

/// One record per line, UTF-8, '\n' terminated.
void write_records(const std::filesystem::path& path, const std::vector<ArithRecord>& records);
/// Throws ParseError carrying the 1-based line of the first malformed line.
std::vector<ArithRecord> read_records(const std::filesystem::path& path);

}  // namespace fone
