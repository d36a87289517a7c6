#include "fone/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fone/error.hpp"

namespace fone {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'F', 'O', 'N', 'E', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Writer {
public:
    template <typename T>
    void pod(const T& v) {
        out_.append(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    void str(std::string_view s) {
        pod(static_cast<std::uint64_t>(s.size()));
        out_.append(s);
    }
    template <typename T>
    void array(const std::vector<T>& v) {
        out_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(T));
    }
    std::string& bytes() { return out_; }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view in) : in_(in) {}

    template <typename T>
    T pod() {
        T v;
        std::memcpy(&v, take(sizeof(T)).data(), sizeof(T));
        return v;
    }
    std::string str() {
        const auto n = pod<std::uint64_t>();
        return std::string(take(n));
    }
    template <typename T>
    std::vector<T> array(std::uint64_t count) {
        if (count > in_.size() / sizeof(T)) truncated();
        std::vector<T> v(count);
        std::memcpy(v.data(), take(count * sizeof(T)).data(), count * sizeof(T));
        return v;
    }
    std::size_t position() const { return pos_; }

private:
    std::string_view take(std::uint64_t n) {
        if (n > in_.size() - pos_) truncated();
        auto s = in_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    [[noreturn]] static void truncated() { fail(ErrorKind::parse_error, "checkpoint is truncated"); }

    std::string_view in_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string model_config_to_text(const ModelConfig& c) {
    std::ostringstream out;
    out.precision(17);
    out << "hidden_size=" << c.hidden_size << '\n'
        << "intermediate_size=" << c.intermediate_size << '\n'
        << "num_layers=" << c.num_layers << '\n'
        << "num_heads=" << c.num_heads << '\n'
        << "num_kv_heads=" << c.num_kv_heads << '\n'
        << "vocab_size=" << c.vocab_size << '\n'
        << "max_seq_len=" << c.max_seq_len << '\n'
        << "payload_dim=" << c.payload_dim << '\n'
        << "payload_mode=" << to_string(c.payload_mode) << '\n'
        << "aux_outputs=" << c.aux_outputs << '\n'
        << "norm_eps=" << c.norm_eps << '\n'
        << "init_std=" << c.init_std << '\n';
    return out.str();
}

ModelConfig model_config_from_text(std::string_view text) {
    ModelConfig c;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(ErrorKind::config_error, "malformed model config line \"" + line + "\"");
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        auto as_int = [&]() {
            int v = 0;
            auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
            if (ec != std::errc() || p != value.data() + value.size()) {
                fail(ErrorKind::config_error, "bad integer for " + key + ": \"" + value + "\"");
            }
            return v;
        };
        auto as_double = [&]() {
            try {
                std::size_t used = 0;
                const double v = std::stod(value, &used);
                if (used == value.size()) return v;
            } catch (const std::exception&) {
            }
            fail(ErrorKind::config_error, "bad number for " + key + ": \"" + value + "\"");
        };
        if (key == "hidden_size") c.hidden_size = as_int();
        else if (key == "intermediate_size") c.intermediate_size = as_int();
        else if (key == "num_layers") c.num_layers = as_int();
        else if (key == "num_heads") c.num_heads = as_int();
        else if (key == "num_kv_heads") c.num_kv_heads = as_int();
        else if (key == "vocab_size") c.vocab_size = as_int();
        else if (key == "max_seq_len") c.max_seq_len = as_int();
        else if (key == "payload_dim") c.payload_dim = as_int();
        else if (key == "payload_mode") c.payload_mode = parse_payload_mode(value);
        else if (key == "aux_outputs") c.aux_outputs = as_int();
        else if (key == "norm_eps") c.norm_eps = as_double();
        else if (key == "init_std") c.init_std = as_double();
        else fail(ErrorKind::config_error, "unknown model config key \"" + key + "\"");
    }
    c.validate();
    return c;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
    Writer w;
    w.bytes().append(kMagic, sizeof kMagic);
    w.pod(kCheckpointVersion);
    w.pod(ckpt.seed);
    w.pod(ckpt.step);
    w.str(model_config_to_text(ckpt.model.config()));
    w.str(ckpt.vocabulary.serialize());
    w.str(ckpt.metadata);
    const auto& params = ckpt.model.parameters();
    w.pod(static_cast<std::uint64_t>(params.size()));
    w.array(params);
    const auto& m = ckpt.optimizer.first_moment();
    const auto& v = ckpt.optimizer.second_moment();
    if (m.size() != v.size() || (!m.empty() && m.size() != params.size())) {
        fail(ErrorKind::state_error, "optimizer state does not match the model");
    }
    w.pod(static_cast<std::uint64_t>(m.size()));
    w.array(m);
    w.array(v);
    w.pod(fnv1a(w.bytes()));
    return std::move(w.bytes());
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
    if (bytes.size() < sizeof kMagic + 4 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        fail(ErrorKind::parse_error, "not a checkpoint (bad magic)");
    }
    Reader r(bytes.substr(sizeof kMagic));
    const auto version = r.pod<std::uint32_t>();
    if (version != kCheckpointVersion) {
        fail(ErrorKind::state_error, "checkpoint format version " + std::to_string(version) +
                                         " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    Checkpoint ckpt;
    ckpt.seed = r.pod<std::uint64_t>();
    ckpt.step = r.pod<std::uint64_t>();
    const ModelConfig config = model_config_from_text(r.str());
    ckpt.vocabulary = Vocabulary::deserialize(r.str());
    ckpt.metadata = r.str();
    ckpt.model = Model(config);
    const auto count = r.pod<std::uint64_t>();
    if (count != ckpt.model.parameter_count()) {
        fail(ErrorKind::parse_error, "checkpoint holds " + std::to_string(count) + " weights, config implies " +
                                         std::to_string(ckpt.model.parameter_count()));
    }
    ckpt.model.parameters() = r.array<float>(count);
    const auto moments = r.pod<std::uint64_t>();
    if (moments != 0 && moments != count) fail(ErrorKind::parse_error, "optimizer state size mismatch");
    ckpt.optimizer = Adam(moments);
    ckpt.optimizer.first_moment() = r.array<double>(moments);
    ckpt.optimizer.second_moment() = r.array<double>(moments);
    ckpt.optimizer.set_steps(ckpt.step);
    const std::size_t body = sizeof kMagic + r.position();
    const auto stored = r.pod<std::uint64_t>();
    if (stored != fnv1a(bytes.substr(0, body))) fail(ErrorKind::parse_error, "checkpoint checksum mismatch");
    if (sizeof kMagic + r.position() != bytes.size()) fail(ErrorKind::parse_error, "trailing bytes after checkpoint");
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const std::string bytes = serialize_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io_error, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::io_error, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io_error, "cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_checkpoint(buf.str());
}

}  // namespace fone
