#include "fone/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "fone/decimal.hpp"
#include "fone/error.hpp"
#include "fone/fone_core.hpp"
#include "fone/rng.hpp"

namespace fone {
namespace {

// Consecutive duplicate draws tolerated before switching to enumeration.
constexpr std::size_t kMaxMisses = 200000;
// Largest space that is enumerated when rejection sampling stalls.
constexpr double kMaxEnumerated = 5e7;

std::uint64_t pow10u(int e) {
    std::uint64_t v = 1;
    for (int k = 0; k < e; ++k) v *= 10;
    return v;
}

std::string pad_left(std::uint64_t value, int width) {
    std::string s = std::to_string(value);
    if (static_cast<int>(s.size()) < width) {
        s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
    }
    return s;
}

class OperandSampler {
public:
    explicit OperandSampler(const TaskSpec& spec)
        : integer_digits_(spec.operand_digits - spec.fractional_digits),
          fraction_digits_(spec.fractional_digits) {}

    std::string draw(Rng& rng) const {
        const int length = static_cast<int>(rng.between(1, static_cast<std::uint64_t>(integer_digits_)));
        const std::uint64_t lo = length == 1 ? 0 : pow10u(length - 1);
        const std::uint64_t hi = pow10u(length) - 1;
        std::string text = std::to_string(rng.between(lo, hi));
        if (fraction_digits_ > 0) {
            text += "." + pad_left(rng.below(pow10u(fraction_digits_)), fraction_digits_);
        }
        return text;
    }

    // Every operand value, used only when the pair space is small.
    std::vector<std::string> all() const {
        std::vector<std::string> values;
        const std::uint64_t scaled_count = pow10u(integer_digits_ + fraction_digits_);
        for (std::uint64_t v = 0; v < scaled_count; ++v) {
            const std::uint64_t integer = v / pow10u(fraction_digits_);
            std::string text = std::to_string(integer);
            if (fraction_digits_ > 0) {
                text += "." + pad_left(v % pow10u(fraction_digits_), fraction_digits_);
            }
            values.push_back(std::move(text));
        }
        return values;
    }

private:
    int integer_digits_;
    int fraction_digits_;
};

void order_pair(const TaskSpec& spec, std::string& a, std::string& b) {
    const int cmp = decimal::compare(a, b);
    if ((spec.order == OperandOrder::a_le_b && cmp > 0) ||
        (spec.order == OperandOrder::a_ge_b && cmp < 0)) {
        std::swap(a, b);
    }
}

std::string join_key(const std::vector<std::string>& operands) {
    std::string key;
    for (const auto& s : operands) {
        key += s;
        key.push_back('|');
    }
    return key;
}

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
    for (std::size_t k = items.size(); k > 1; --k) {
        std::swap(items[k - 1], items[rng.below(k)]);
    }
}

ArithRecord make_record(const TaskSpec& spec, std::vector<std::string> operands) {
    ArithRecord r;
    r.op = spec.op();
    r.answer = exact_answer(spec, operands);
    r.operands = std::move(operands);
    if (spec.kind == TaskKind::classify) {
        r.label = r.answer == "1" ? 1 : 0;
    }
    return r;
}

}  // namespace

std::string_view to_string(TaskKind kind) noexcept {
    switch (kind) {
        case TaskKind::int_add: return "int-add";
        case TaskKind::decimal_add: return "decimal-add";
        case TaskKind::int_sub: return "int-sub";
        case TaskKind::int_mul: return "int-mul";
        case TaskKind::classify: return "classify";
    }
    return "unknown";
}

TaskSpec TaskSpec::make(TaskKind kind, int operand_digits, int fractional_digits) {
    TaskSpec spec;
    spec.kind = kind;
    spec.operand_digits = operand_digits;
    spec.fractional_digits = kind == TaskKind::decimal_add ? fractional_digits : 0;
    const int integer_digits = operand_digits - spec.fractional_digits;
    switch (kind) {
        case TaskKind::int_add:
            spec.answer_format = {operand_digits + 1, 0};
            spec.order = OperandOrder::a_le_b;
            break;
        case TaskKind::decimal_add:
            spec.answer_format = {integer_digits + 1, spec.fractional_digits};
            spec.order = OperandOrder::a_le_b;
            break;
        case TaskKind::int_sub:
            spec.answer_format = {operand_digits, 0};
            spec.order = OperandOrder::a_ge_b;
            break;
        case TaskKind::int_mul:
            spec.answer_format = {2 * operand_digits, 0};
            spec.order = OperandOrder::a_le_b;
            break;
        case TaskKind::classify:
            spec.operand_digits = 4;
            spec.answer_format = {1, 0};
            spec.order = OperandOrder::sorted_triple;
            break;
    }
    spec.validate();
    return spec;
}

TaskSpec TaskSpec::parse(std::string_view name) {
    const std::string text(name);
    if (text == "classify" || text == "classify-10") {
        return make(TaskKind::classify, 4);
    }
    if (text == "classify-190") {
        TaskSpec spec = make(TaskKind::classify, 4);
        spec.coef_d = -190.0;
        return spec;
    }
    const auto dash = text.rfind('-');
    if (dash == std::string::npos) {
        fail(ErrorKind::config_error, "unknown task \"" + text + "\"");
    }
    const std::string family = text.substr(0, dash);
    int digits = 0;
    try {
        std::size_t used = 0;
        digits = std::stoi(text.substr(dash + 1), &used);
        if (used != text.size() - dash - 1) {
            throw std::invalid_argument("trailing");
        }
    } catch (const std::logic_error&) {
        fail(ErrorKind::config_error, "unknown task \"" + text + "\"");
    }
    if (family == "int-add") return make(TaskKind::int_add, digits);
    if (family == "decimal-add") return make(TaskKind::decimal_add, digits, digits / 2);
    if (family == "int-sub") return make(TaskKind::int_sub, digits);
    if (family == "int-mul") return make(TaskKind::int_mul, digits);
    fail(ErrorKind::config_error, "unknown task \"" + text + "\"");
}

std::string TaskSpec::name() const {
    if (kind == TaskKind::classify) {
        return coef_d == -190.0 ? "classify-190" : "classify";
    }
    return std::string(to_string(kind)) + "-" + std::to_string(operand_digits);
}

NumberFormat TaskSpec::number_format() const {
    return kind == TaskKind::classify ? operand_format() : answer_format;
}

NumberFormat TaskSpec::operand_format() const {
    return {operand_digits - fractional_digits, fractional_digits};
}

char TaskSpec::op() const {
    switch (kind) {
        case TaskKind::int_add:
        case TaskKind::decimal_add: return '+';
        case TaskKind::int_sub: return '-';
        case TaskKind::int_mul: return '*';
        case TaskKind::classify: return ',';
    }
    return '?';
}

std::size_t TaskSpec::operand_count() const {
    return kind == TaskKind::classify ? 3 : 2;
}

double TaskSpec::capacity() const {
    if (kind == TaskKind::classify) {
        const double v = classify_max + 1.0;
        return v * (v + 1.0) * (v + 2.0) / 6.0;
    }
    const double v = std::pow(10.0, operand_digits);
    return v * (v + 1.0) / 2.0;
}

void TaskSpec::validate() const {
    if (operand_digits < 1 || fractional_digits < 0 || fractional_digits >= operand_digits) {
        fail(ErrorKind::config_error, "task needs operand_digits >= 1 and 0 <= fractional < operand_digits");
    }
    if (kind == TaskKind::decimal_add && fractional_digits < 1) {
        fail(ErrorKind::config_error, "decimal-add needs at least one fractional digit");
    }
    if (kind != TaskKind::classify && operand_digits > 7) {
        fail(ErrorKind::config_error, "operands longer than 7 digits are outside the unchunked bound");
    }
    answer_format.validate();
    if (kind == TaskKind::classify && classify_max < 1) {
        fail(ErrorKind::config_error, "classification range must be positive");
    }
}

std::string ArithRecord::prompt() const {
    std::string s;
    for (std::size_t k = 0; k < operands.size(); ++k) {
        if (k > 0) s.push_back(op);
        s += operands[k];
    }
    s.push_back('=');
    return s;
}

std::string ArithRecord::to_text() const {
    return prompt() + answer;
}

ArithRecord ArithRecord::from_text(std::string_view line) {
    const auto eq = line.find('=');
    if (eq == std::string_view::npos || line.find('=', eq + 1) != std::string_view::npos) {
        fail(ErrorKind::parse_error, "expected exactly one '='");
    }
    const std::string_view lhs = line.substr(0, eq);
    ArithRecord r;
    r.answer = std::string(line.substr(eq + 1));
    const auto op_pos = lhs.find_first_of("+-*,");
    if (op_pos == std::string_view::npos || op_pos == 0) {
        fail(ErrorKind::parse_error, "no operator between operands");
    }
    r.op = lhs[op_pos];
    std::size_t start = 0;
    while (true) {
        const auto next = lhs.find(r.op, start);
        r.operands.emplace_back(lhs.substr(start, next - start));
        if (next == std::string_view::npos) break;
        start = next + 1;
    }
    const std::size_t expected = r.op == ',' ? 3 : 2;
    if (r.operands.size() != expected) {
        fail(ErrorKind::parse_error, "expected " + std::to_string(expected) + " operands");
    }
    try {
        for (const auto& s : r.operands) parse_decimal(s);
        parse_decimal(r.answer);
    } catch (const Error& e) {
        fail(ErrorKind::parse_error, e.what());
    }
    if (r.op == ',') {
        if (r.answer != "0" && r.answer != "1") {
            fail(ErrorKind::parse_error, "classification label must be 0 or 1");
        }
        r.label = r.answer == "1" ? 1 : 0;
    }
    return r;
}

std::string exact_answer(const TaskSpec& spec, const std::vector<std::string>& operands) {
    if (operands.size() != spec.operand_count()) {
        fail(ErrorKind::invalid_argument, "wrong operand count for " + spec.name());
    }
    switch (spec.kind) {
        case TaskKind::int_add:
        case TaskKind::decimal_add:
            return canonical_decimal(decimal::add(operands[0], operands[1]), spec.answer_format);
        case TaskKind::int_sub:
            return canonical_decimal(decimal::subtract(operands[0], operands[1]), spec.answer_format);
        case TaskKind::int_mul:
            return canonical_decimal(decimal::multiply(operands[0], operands[1]), spec.answer_format);
        case TaskKind::classify: {
            const double score = spec.coef_a * std::stod(operands[0]) +
                                 spec.coef_b * std::stod(operands[1]) +
                                 spec.coef_c * std::stod(operands[2]) - spec.coef_d;
            return score > 0.0 ? "1" : "0";
        }
    }
    return {};
}

std::vector<ArithRecord> generate(const TaskSpec& spec, std::size_t count, std::uint64_t seed) {
    spec.validate();
    if (spec.kind == TaskKind::classify) {
        return generate_classification(spec, count, seed);
    }
    if (static_cast<double>(count) > spec.capacity()) {
        fail(ErrorKind::exhausted_space, "requested " + std::to_string(count) + " records, " +
                                             spec.name() + " has only " +
                                             std::to_string(static_cast<long long>(spec.capacity())));
    }
    Rng rng = Rng::derive(seed, 1);
    const OperandSampler sampler(spec);
    std::unordered_set<std::string> seen;
    std::vector<ArithRecord> out;
    out.reserve(count);
    std::size_t misses = 0;
    while (out.size() < count) {
        std::string a = sampler.draw(rng);
        std::string b = sampler.draw(rng);
        order_pair(spec, a, b);
        std::vector<std::string> operands{std::move(a), std::move(b)};
        if (!seen.insert(join_key(operands)).second) {
            if (++misses < kMaxMisses) continue;
            break;
        }
        misses = 0;
        out.push_back(make_record(spec, std::move(operands)));
    }
    if (out.size() < count) {
        // Rejection stalled near capacity: finish from the unseen remainder.
        if (spec.capacity() > kMaxEnumerated) {
            fail(ErrorKind::exhausted_space, "sampler stalled before reaching the requested count");
        }
        const auto values = sampler.all();
        std::vector<std::vector<std::string>> rest;
        for (std::size_t i = 0; i < values.size(); ++i) {
            for (std::size_t j = i; j < values.size(); ++j) {
                std::string a = values[i];
                std::string b = values[j];
                order_pair(spec, a, b);
                std::vector<std::string> operands{std::move(a), std::move(b)};
                if (!seen.contains(join_key(operands))) rest.push_back(std::move(operands));
            }
        }
        shuffle(rest, rng);
        for (auto& operands : rest) {
            if (out.size() == count) break;
            out.push_back(make_record(spec, std::move(operands)));
        }
    }
    return out;
}

std::vector<ArithRecord> generate_classification(const TaskSpec& spec, std::size_t count,
                                                 std::uint64_t seed) {
    if (spec.kind != TaskKind::classify) {
        fail(ErrorKind::invalid_argument, "generate_classification needs a classify task");
    }
    if (static_cast<double>(count) > spec.capacity()) {
        fail(ErrorKind::exhausted_space, "requested more triples than the range holds");
    }
    Rng rng = Rng::derive(seed, 2);
    std::unordered_set<std::string> seen;
    std::vector<ArithRecord> out;
    out.reserve(count);
    std::size_t misses = 0;
    const auto hi = static_cast<std::uint64_t>(spec.classify_max);
    while (out.size() < count) {
        std::uint64_t v[3] = {rng.between(0, hi), rng.between(0, hi), rng.between(0, hi)};
        std::sort(v, v + 3);
        std::vector<std::string> operands{std::to_string(v[0]), std::to_string(v[1]),
                                          std::to_string(v[2])};
        if (!seen.insert(join_key(operands)).second) {
            if (++misses >= kMaxMisses) {
                fail(ErrorKind::exhausted_space, "triple sampler stalled");
            }
            continue;
        }
        misses = 0;
        out.push_back(make_record(spec, std::move(operands)));
    }
    return out;
}

SplitSizes published_split_sizes(const TaskSpec& spec) {
    if (spec.kind == TaskKind::int_mul && spec.operand_digits == 3) {
        return {360000, 40000, 100000};
    }
    if (spec.kind == TaskKind::classify) {
        return {72000, 8000, 20000};
    }
    return {720000, 80000, 200000};
}

SplitSizes desk_split_sizes() {
    return {50000, 5000, 10000};
}

DataSplits split(const std::vector<ArithRecord>& records, const SplitSizes& sizes,
                 std::uint64_t seed) {
    if (sizes.total() > records.size()) {
        fail(ErrorKind::size_error, "split needs " + std::to_string(sizes.total()) +
                                        " records, have " + std::to_string(records.size()));
    }
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = Rng::derive(seed, 3);
    shuffle(order, rng);
    DataSplits out;
    std::size_t k = 0;
    for (; k < sizes.train; ++k) out.train.push_back(records[order[k]]);
    for (; k < sizes.train + sizes.val; ++k) out.val.push_back(records[order[k]]);
    for (; k < sizes.total(); ++k) out.test.push_back(records[order[k]]);
    return out;
}

DataSplits generate_splits(const TaskSpec& spec, const SplitSizes& sizes, std::uint64_t seed) {
    return split(generate(spec, sizes.total(), seed), sizes, seed);
}

void write_records(const std::filesystem::path& path, const std::vector<ArithRecord>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        fail(ErrorKind::io_error, "cannot open " + path.string() + " for writing");
    }
    for (const auto& r : records) {
        out << r.to_text() << '\n';
    }
    if (!out) {
        fail(ErrorKind::io_error, "write to " + path.string() + " failed");
    }
}

std::vector<ArithRecord> read_records(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorKind::io_error, "cannot open " + path.string());
    }
    std::vector<ArithRecord> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        try {
            out.push_back(ArithRecord::from_text(line));
        } catch (const Error& e) {
            throw ParseError(number, e.what());
        }
    }
    return out;
}

}  // namespace fone
