#include "fone/model.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "fone/error.hpp"
#include "fone/rng.hpp"

namespace fone {
namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<Mat<T>>;
template <typename T>
using CMapM = Eigen::Map<const Mat<T>>;

// out = in * w, shapes rows x I, I x O
template <typename T>
void matmul(const T* in, const T* w, T* out, std::size_t rows, std::size_t I, std::size_t O) {
    const auto r = static_cast<Eigen::Index>(rows);
    const auto i = static_cast<Eigen::Index>(I);
    const auto o = static_cast<Eigen::Index>(O);
    MapM<T>(out, r, o).noalias() = CMapM<T>(in, r, i) * CMapM<T>(w, i, o);
}

// dw += in^T * dout
template <typename T>
void grad_weight(const T* in, const T* dout, T* dw, std::size_t rows, std::size_t I, std::size_t O) {
    const auto r = static_cast<Eigen::Index>(rows);
    const auto i = static_cast<Eigen::Index>(I);
    const auto o = static_cast<Eigen::Index>(O);
    MapM<T>(dw, i, o).noalias() += CMapM<T>(in, r, i).transpose() * CMapM<T>(dout, r, o);
}

// din = dout * w^T
template <typename T>
void grad_input_set(const T* dout, const T* w, T* din, std::size_t rows, std::size_t I, std::size_t O) {
    const auto r = static_cast<Eigen::Index>(rows);
    const auto i = static_cast<Eigen::Index>(I);
    const auto o = static_cast<Eigen::Index>(O);
    MapM<T>(din, r, i).noalias() = CMapM<T>(dout, r, o) * CMapM<T>(w, i, o).transpose();
}

// din += dout * w^T
template <typename T>
void grad_input(const T* dout, const T* w, T* din, std::size_t rows, std::size_t I, std::size_t O) {
    const auto r = static_cast<Eigen::Index>(rows);
    const auto i = static_cast<Eigen::Index>(I);
    const auto o = static_cast<Eigen::Index>(O);
    MapM<T>(din, r, i).noalias() += CMapM<T>(dout, r, o) * CMapM<T>(w, i, o).transpose();
}

template <typename T>
T dot(const T* __restrict a, const T* __restrict b, std::size_t n) {
    T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
        s0 += a[k] * b[k];
        s1 += a[k + 1] * b[k + 1];
        s2 += a[k + 2] * b[k + 2];
        s3 += a[k + 3] * b[k + 3];
    }
    for (; k < n; ++k) s0 += a[k] * b[k];
    return (s0 + s1) + (s2 + s3);
}

template <typename T>
void rmsnorm(const T* x, const T* gain, T* y, T* inv, std::size_t rows, std::size_t H, double eps) {
    for (std::size_t r = 0; r < rows; ++r) {
        const T* xr = x + r * H;
        const T ms = dot(xr, xr, H) / static_cast<T>(H);
        const T s = T(1) / std::sqrt(ms + static_cast<T>(eps));
        inv[r] = s;
        for (std::size_t i = 0; i < H; ++i) y[r * H + i] = xr[i] * s * gain[i];
    }
}

// dx += dy through the norm, dgain += its gain gradient
template <typename T>
void rmsnorm_backward(const T* x, const T* gain, const T* inv, const T* dy, T* dx, T* dgain,
                      std::size_t rows, std::size_t H) {
    std::vector<T> u(H);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* xr = x + r * H;
        const T* dyr = dy + r * H;
        const T s = inv[r];
        for (std::size_t i = 0; i < H; ++i) {
            u[i] = gain[i] * dyr[i];
            dgain[i] += dyr[i] * xr[i] * s;
        }
        const T proj = dot(u.data(), xr, H) * s * s * s / static_cast<T>(H);
        for (std::size_t i = 0; i < H; ++i) dx[r * H + i] += s * u[i] - proj * xr[i];
    }
}

template <typename T>
T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

}  // namespace

std::string_view to_string(PayloadMode mode) noexcept {
    switch (mode) {
        case PayloadMode::none: return "none";
        case PayloadMode::add: return "add";
        case PayloadMode::project: return "project";
        case PayloadMode::scale: return "scale";
    }
    return "unknown";
}

PayloadMode parse_payload_mode(std::string_view name) {
    if (name == "none") return PayloadMode::none;
    if (name == "add") return PayloadMode::add;
    if (name == "project") return PayloadMode::project;
    if (name == "scale") return PayloadMode::scale;
    fail(ErrorKind::config_error, "unknown payload mode \"" + std::string(name) + "\"");
}

ModelConfig ModelConfig::preset(int index) {
    struct Row {
        int hidden, intermediate, layers, heads, kv_heads;
    };
    static constexpr Row rows[] = {
        {64, 256, 1, 4, 2},   {128, 512, 2, 4, 2},  {192, 768, 3, 6, 3},
        {256, 1024, 4, 8, 4}, {320, 1280, 5, 8, 4}, {384, 1536, 6, 8, 4},
    };
    if (index < 1 || index > 6) {
        fail(ErrorKind::config_error, "model preset must be 1-6, got " + std::to_string(index));
    }
    const Row& r = rows[index - 1];
    ModelConfig c;
    c.hidden_size = r.hidden;
    c.intermediate_size = r.intermediate;
    c.num_layers = r.layers;
    c.num_heads = r.heads;
    c.num_kv_heads = r.kv_heads;
    return c;
}

void ModelConfig::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) fail(ErrorKind::config_error, what);
    };
    require(hidden_size > 0 && intermediate_size > 0 && num_layers > 0 && num_heads > 0 && num_kv_heads > 0 &&
                vocab_size > 0 && max_seq_len > 0,
            "model dimensions must be positive");
    require(hidden_size % num_heads == 0, "hidden_size must be divisible by num_heads");
    require(num_heads % num_kv_heads == 0, "num_heads must be divisible by num_kv_heads");
    require(payload_dim >= 0 && aux_outputs >= 0, "payload_dim and aux_outputs must be >= 0");
    require((payload_mode == PayloadMode::none) == (payload_dim == 0),
            "payload_dim must be positive exactly when a payload mode is set");
    require(payload_mode != PayloadMode::add || payload_dim <= hidden_size,
            "zero-pad payload is wider than hidden_size");
    require(payload_mode != PayloadMode::scale || payload_dim == 1, "scale payload must be 1 wide");
    require(norm_eps > 0.0, "norm_eps must be positive");
    require(init_std >= 0.0, "init_std must be >= 0");
}

double default_learning_rate(Scheme scheme) noexcept {
    return scheme == Scheme::xval ? 1e-4 : 5e-3;
}

SequenceView SequenceView::whole(const EncodedSequence& seq) {
    const std::size_t n = seq.size();
    return {&seq, n, n == 0 ? 0 : std::min(seq.answer_slot, n - 1)};
}

template <typename T>
Transformer<T>::Transformer(ModelConfig config) : config_(config) {
    config_.validate();
    build_layout();
}

template <typename T>
void Transformer<T>::build_layout() {
    const auto H = static_cast<std::size_t>(config_.hidden_size);
    const auto I = static_cast<std::size_t>(config_.intermediate_size);
    const auto KV = static_cast<std::size_t>(config_.kv_dim());
    const auto V = static_cast<std::size_t>(config_.vocab_size);
    std::size_t offset = 0;
    auto add = [&](std::string name, std::size_t rows, std::size_t cols) {
        tensors_.push_back({std::move(name), rows, cols, offset});
        offset += rows * cols;
        return tensors_.back().offset;
    };
    off_.tok_emb = add("tok_emb", V, H);
    off_.pos_emb = add("pos_emb", static_cast<std::size_t>(config_.max_seq_len), H);
    if (config_.payload_mode == PayloadMode::project) {
        off_.payload_proj = add("payload_proj", static_cast<std::size_t>(config_.payload_dim), H);
    }
    for (int l = 0; l < config_.num_layers; ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        LayerOffsets lo{};
        lo.attn_norm = add(p + "attn_norm", 1, H);
        lo.wq = add(p + "wq", H, H);
        lo.wk = add(p + "wk", H, KV);
        lo.wv = add(p + "wv", H, KV);
        lo.wo = add(p + "wo", H, H);
        lo.mlp_norm = add(p + "mlp_norm", 1, H);
        lo.w_gate = add(p + "w_gate", H, I);
        lo.w_up = add(p + "w_up", H, I);
        lo.w_down = add(p + "w_down", I, H);
        off_.layers.push_back(lo);
    }
    off_.final_norm = add("final_norm", 1, H);
    off_.lm_head = add("lm_head", H, V);
    if (config_.aux_outputs > 0) {
        off_.aux_head = add("aux_head", H, static_cast<std::size_t>(config_.aux_outputs));
        off_.aux_bias = add("aux_bias", 1, static_cast<std::size_t>(config_.aux_outputs));
    }
    params_.assign(offset, T(0));
}

template <typename T>
const TensorInfo& Transformer<T>::tensor(std::string_view name) const {
    for (const auto& t : tensors_) {
        if (t.name == name) return t;
    }
    fail(ErrorKind::invalid_argument, "no tensor named \"" + std::string(name) + "\"");
}

template <typename T>
Transformer<T> Transformer<T>::init(const ModelConfig& config, std::uint64_t seed) {
    Transformer<T> model(config);
    Rng rng(seed);
    for (const auto& t : model.tensors_) {
        auto w = model.view(t);
        if (t.name.ends_with("norm")) {
            std::fill(w.begin(), w.end(), T(1));
        } else if (t.name == "aux_bias") {
            std::fill(w.begin(), w.end(), T(0));
        } else {
            // the payload projection keeps unit-scale inputs at unit scale
            const double stddev =
                t.name == "payload_proj" ? 1.0 / std::sqrt(static_cast<double>(t.rows)) : config.init_std;
            for (auto& x : w) x = static_cast<T>(rng.truncated_normal(stddev));
        }
    }
    return model;
}

template <typename T>
ForwardPass<T> Transformer<T>::forward(const EncodedSequence& seq) const {
    const SequenceView view = SequenceView::whole(seq);
    return forward(std::span<const SequenceView>(&view, 1));
}

template <typename T>
ForwardPass<T> Transformer<T>::forward(const EncodedSequence& seq, std::size_t length,
                                       std::size_t head_from) const {
    const SequenceView view{&seq, length, head_from};
    return forward(std::span<const SequenceView>(&view, 1));
}

template <typename T>
ForwardPass<T> Transformer<T>::forward(std::span<const SequenceView> batch) const {
    const ModelConfig& c = config_;
    const auto H = static_cast<std::size_t>(c.hidden_size);
    const auto I = static_cast<std::size_t>(c.intermediate_size);
    const auto KV = static_cast<std::size_t>(c.kv_dim());
    const auto V = static_cast<std::size_t>(c.vocab_size);
    const auto P = static_cast<std::size_t>(c.payload_dim);
    const auto A = static_cast<std::size_t>(c.aux_outputs);
    const auto hd = static_cast<std::size_t>(c.head_dim());
    const auto heads = static_cast<std::size_t>(c.num_heads);
    const std::size_t group = heads / static_cast<std::size_t>(c.num_kv_heads);
    const T att_scale = T(1) / std::sqrt(static_cast<T>(hd));

    ForwardPass<T> pass;
    std::size_t probs_total = 0;
    for (const SequenceView& view : batch) {
        if (view.seq == nullptr || view.length == 0 || view.length > view.seq->size()) {
            fail(ErrorKind::length_error, "batch member must run 1..sequence-length positions");
        }
        if (view.length > static_cast<std::size_t>(c.max_seq_len)) {
            fail(ErrorKind::length_error, "sequence of " + std::to_string(view.length) +
                                              " tokens exceeds max_seq_len " + std::to_string(c.max_seq_len));
        }
        typename ForwardPass<T>::Segment seg;
        seg.offset = pass.rows;
        seg.length = view.length;
        seg.head_from = std::min(view.head_from, view.length - 1);
        seg.head_index = pass.head_rows.size();
        for (std::size_t t = seg.head_from; t < seg.length; ++t) pass.head_rows.push_back(seg.offset + t);
        pass.segments.push_back(seg);
        pass.probs_offset.push_back(probs_total);
        probs_total += heads * view.length * view.length;
        pass.rows += view.length;
    }
    const std::size_t R = pass.rows;
    pass.tokens.resize(R);
    pass.payload.assign(R * P, T(0));
    pass.payload_scale.assign(R, T(1));

    // Input embedding.
    std::vector<T> x(R * H);
    const T* emb = params_.data() + off_.tok_emb;
    const T* pos = params_.data() + off_.pos_emb;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const EncodedSequence& seq = *batch[b].seq;
        const auto& seg = pass.segments[b];
        for (std::size_t t = 0; t < seg.length; ++t) {
            const std::size_t row = seg.offset + t;
            const int id = seq.token_ids[t];
            if (id < 0 || id >= c.vocab_size) {
                fail(ErrorKind::invalid_argument, "token id " + std::to_string(id) + " outside vocabulary");
            }
            pass.tokens[row] = id;
            if (P > 0 && t < seq.payloads.size() && !seq.payloads[t].empty()) {
                const auto& src = seq.payloads[t];
                if (src.size() != P) {
                    fail(ErrorKind::invalid_argument, "payload width " + std::to_string(src.size()) +
                                                          " differs from model payload_dim " + std::to_string(P));
                }
                for (std::size_t k = 0; k < P; ++k) pass.payload[row * P + k] = static_cast<T>(src[k]);
                if (c.payload_mode == PayloadMode::scale) pass.payload_scale[row] = pass.payload[row * P];
            }
            const T s = pass.payload_scale[row];
            for (std::size_t i = 0; i < H; ++i) {
                x[row * H + i] = emb[static_cast<std::size_t>(id) * H + i] * s + pos[t * H + i];
            }
            if (c.payload_mode == PayloadMode::add) {
                for (std::size_t k = 0; k < P; ++k) x[row * H + k] += pass.payload[row * P + k];
            }
        }
    }
    if (c.payload_mode == PayloadMode::project) {
        std::vector<T> projected(R * H);
        matmul(pass.payload.data(), params_.data() + off_.payload_proj, projected.data(), R, P, H);
        for (std::size_t k = 0; k < R * H; ++k) x[k] += projected[k];
    }

    std::vector<T> tmp(R * H);
    std::vector<T> scores(static_cast<std::size_t>(c.max_seq_len));
    for (const LayerOffsets& lo : off_.layers) {
        typename ForwardPass<T>::Layer cache;
        cache.input = x;
        cache.norm1.resize(R * H);
        cache.inv1.resize(R);
        rmsnorm(x.data(), params_.data() + lo.attn_norm, cache.norm1.data(), cache.inv1.data(), R, H, c.norm_eps);
        cache.q.resize(R * H);
        cache.k.resize(R * KV);
        cache.v.resize(R * KV);
        matmul(cache.norm1.data(), params_.data() + lo.wq, cache.q.data(), R, H, H);
        matmul(cache.norm1.data(), params_.data() + lo.wk, cache.k.data(), R, H, KV);
        matmul(cache.norm1.data(), params_.data() + lo.wv, cache.v.data(), R, H, KV);

        cache.probs.assign(probs_total, T(0));
        cache.heads.assign(R * H, T(0));
        for (std::size_t b = 0; b < pass.segments.size(); ++b) {
            const auto& seg = pass.segments[b];
            const std::size_t L = seg.length;
            const T* q = cache.q.data() + seg.offset * H;
            const T* k = cache.k.data() + seg.offset * KV;
            const T* v = cache.v.data() + seg.offset * KV;
            T* out_base = cache.heads.data() + seg.offset * H;
            for (std::size_t h = 0; h < heads; ++h) {
                const std::size_t g = h / group;
                for (std::size_t t = 0; t < L; ++t) {
                    const T* qt = q + t * H + h * hd;
                    T peak = -std::numeric_limits<T>::infinity();
                    for (std::size_t u = 0; u <= t; ++u) {
                        scores[u] = dot(qt, k + u * KV + g * hd, hd) * att_scale;
                        peak = std::max(peak, scores[u]);
                    }
                    T sum = 0;
                    for (std::size_t u = 0; u <= t; ++u) {
                        scores[u] = std::exp(scores[u] - peak);
                        sum += scores[u];
                    }
                    T* p = cache.probs.data() + pass.probs_offset[b] + (h * L + t) * L;
                    T* out = out_base + t * H + h * hd;
                    for (std::size_t u = 0; u <= t; ++u) {
                        p[u] = scores[u] / sum;
                        const T* vu = v + u * KV + g * hd;
                        for (std::size_t d = 0; d < hd; ++d) out[d] += p[u] * vu[d];
                    }
                }
            }
        }
        matmul(cache.heads.data(), params_.data() + lo.wo, tmp.data(), R, H, H);
        for (std::size_t k = 0; k < R * H; ++k) x[k] += tmp[k];
        cache.mid = x;

        cache.norm2.resize(R * H);
        cache.inv2.resize(R);
        rmsnorm(x.data(), params_.data() + lo.mlp_norm, cache.norm2.data(), cache.inv2.data(), R, H, c.norm_eps);
        cache.gate.resize(R * I);
        cache.up.resize(R * I);
        cache.act.resize(R * I);
        matmul(cache.norm2.data(), params_.data() + lo.w_gate, cache.gate.data(), R, H, I);
        matmul(cache.norm2.data(), params_.data() + lo.w_up, cache.up.data(), R, H, I);
        cache.sig.resize(R * I);
        for (std::size_t k = 0; k < R * I; ++k) {
            const T g = cache.gate[k];
            cache.sig[k] = sigmoid(g);
            cache.act[k] = g * cache.sig[k] * cache.up[k];
        }
        matmul(cache.act.data(), params_.data() + lo.w_down, tmp.data(), R, I, H);
        for (std::size_t k = 0; k < R * H; ++k) x[k] += tmp[k];
        pass.layers.push_back(std::move(cache));
    }

    pass.final_input = x;
    pass.final_inv.resize(R);
    pass.hidden.resize(R * H);
    rmsnorm(x.data(), params_.data() + off_.final_norm, pass.hidden.data(), pass.final_inv.data(), R, H,
            c.norm_eps);

    const std::size_t nh = pass.head_rows.size();
    std::vector<T> gathered(nh * H);
    for (std::size_t j = 0; j < nh; ++j) {
        std::copy_n(pass.hidden.data() + pass.head_rows[j] * H, H, gathered.data() + j * H);
    }
    pass.logits.resize(nh * V);
    matmul(gathered.data(), params_.data() + off_.lm_head, pass.logits.data(), nh, H, V);
    if (A > 0) {
        pass.aux.resize(nh * A);
        matmul(gathered.data(), params_.data() + off_.aux_head, pass.aux.data(), nh, H, A);
        const T* bias = params_.data() + off_.aux_bias;
        for (std::size_t j = 0; j < nh; ++j) {
            for (std::size_t a = 0; a < A; ++a) pass.aux[j * A + a] += bias[a];
        }
    }
    pass.valid = true;
    return pass;
}

template <typename T>
void Transformer<T>::backward(const ForwardPass<T>& pass, const OutputGrads<T>& upstream, std::span<T> grad) const {
    if (!pass.valid) {
        fail(ErrorKind::state_error, "backward called without a completed forward pass");
    }
    if (grad.size() != params_.size()) {
        fail(ErrorKind::invalid_argument, "gradient buffer size differs from parameter count");
    }
    const ModelConfig& c = config_;
    const std::size_t R = pass.rows;
    const auto H = static_cast<std::size_t>(c.hidden_size);
    const auto I = static_cast<std::size_t>(c.intermediate_size);
    const auto KV = static_cast<std::size_t>(c.kv_dim());
    const auto V = static_cast<std::size_t>(c.vocab_size);
    const auto P = static_cast<std::size_t>(c.payload_dim);
    const auto A = static_cast<std::size_t>(c.aux_outputs);
    const auto hd = static_cast<std::size_t>(c.head_dim());
    const auto heads = static_cast<std::size_t>(c.num_heads);
    const std::size_t group = heads / static_cast<std::size_t>(c.num_kv_heads);
    const T att_scale = T(1) / std::sqrt(static_cast<T>(hd));
    const T* w = params_.data();
    T* gw = grad.data();
    const std::size_t nh = pass.head_rows.size();

    std::vector<T> dh(R * H, T(0));
    if (!upstream.hidden.empty()) {
        if (upstream.hidden.size() != R * H) fail(ErrorKind::invalid_argument, "hidden gradient shape mismatch");
        std::copy(upstream.hidden.begin(), upstream.hidden.end(), dh.begin());
    }
    const bool has_logits = !upstream.logits.empty();
    const bool has_aux = !upstream.aux.empty() && A > 0;
    if (has_logits && upstream.logits.size() != nh * V) {
        fail(ErrorKind::invalid_argument, "logit gradient shape mismatch");
    }
    if (has_aux && upstream.aux.size() != nh * A) fail(ErrorKind::invalid_argument, "aux gradient shape mismatch");
    if (has_logits || has_aux) {
        std::vector<T> gathered(nh * H), dgathered(nh * H, T(0));
        for (std::size_t j = 0; j < nh; ++j) {
            std::copy_n(pass.hidden.data() + pass.head_rows[j] * H, H, gathered.data() + j * H);
        }
        if (has_logits) {
            grad_weight(gathered.data(), upstream.logits.data(), gw + off_.lm_head, nh, H, V);
            grad_input(upstream.logits.data(), w + off_.lm_head, dgathered.data(), nh, H, V);
        }
        if (has_aux) {
            grad_weight(gathered.data(), upstream.aux.data(), gw + off_.aux_head, nh, H, A);
            grad_input(upstream.aux.data(), w + off_.aux_head, dgathered.data(), nh, H, A);
            T* gb = gw + off_.aux_bias;
            for (std::size_t j = 0; j < nh; ++j) {
                for (std::size_t a = 0; a < A; ++a) gb[a] += upstream.aux[j * A + a];
            }
        }
        for (std::size_t j = 0; j < nh; ++j) {
            T* dst = dh.data() + pass.head_rows[j] * H;
            const T* src = dgathered.data() + j * H;
            for (std::size_t i = 0; i < H; ++i) dst[i] += src[i];
        }
    }

    std::vector<T> dx(R * H, T(0));
    rmsnorm_backward(pass.final_input.data(), w + off_.final_norm, pass.final_inv.data(), dh.data(), dx.data(),
                     gw + off_.final_norm, R, H);

    std::vector<T> dmid(R * H), dact(R * I), dgate(R * I), dup(R * I), dnorm(R * H), dheads(R * H);
    std::vector<T> dq(R * H), dk(R * KV), dv(R * KV), dp(static_cast<std::size_t>(c.max_seq_len));
    for (std::size_t l = off_.layers.size(); l-- > 0;) {
        const LayerOffsets& lo = off_.layers[l];
        const auto& cache = pass.layers[l];

        // out = mid + act * w_down
        dmid = dx;
        grad_input_set(dx.data(), w + lo.w_down, dact.data(), R, I, H);
        grad_weight(cache.act.data(), dx.data(), gw + lo.w_down, R, I, H);
        for (std::size_t k = 0; k < R * I; ++k) {
            const T g = cache.gate[k];
            const T s = cache.sig[k];
            dgate[k] = dact[k] * cache.up[k] * s * (T(1) + g * (T(1) - s));
            dup[k] = dact[k] * g * s;
        }
        grad_weight(cache.norm2.data(), dgate.data(), gw + lo.w_gate, R, H, I);
        grad_weight(cache.norm2.data(), dup.data(), gw + lo.w_up, R, H, I);
        grad_input_set(dgate.data(), w + lo.w_gate, dnorm.data(), R, H, I);
        grad_input(dup.data(), w + lo.w_up, dnorm.data(), R, H, I);
        rmsnorm_backward(cache.mid.data(), w + lo.mlp_norm, cache.inv2.data(), dnorm.data(), dmid.data(),
                         gw + lo.mlp_norm, R, H);

        // mid = input + heads * wo
        dx = dmid;
        grad_input_set(dmid.data(), w + lo.wo, dheads.data(), R, H, H);
        grad_weight(cache.heads.data(), dmid.data(), gw + lo.wo, R, H, H);

        std::fill(dq.begin(), dq.end(), T(0));
        std::fill(dk.begin(), dk.end(), T(0));
        std::fill(dv.begin(), dv.end(), T(0));
        for (std::size_t b = 0; b < pass.segments.size(); ++b) {
            const auto& seg = pass.segments[b];
            const std::size_t L = seg.length;
            const T* q = cache.q.data() + seg.offset * H;
            const T* k = cache.k.data() + seg.offset * KV;
            const T* v = cache.v.data() + seg.offset * KV;
            const T* dheads_b = dheads.data() + seg.offset * H;
            T* dq_b = dq.data() + seg.offset * H;
            T* dk_b = dk.data() + seg.offset * KV;
            T* dv_b = dv.data() + seg.offset * KV;
            for (std::size_t h = 0; h < heads; ++h) {
                const std::size_t g = h / group;
                for (std::size_t t = 0; t < L; ++t) {
                    const T* p = cache.probs.data() + pass.probs_offset[b] + (h * L + t) * L;
                    const T* dout = dheads_b + t * H + h * hd;
                    T weighted = 0;
                    for (std::size_t u = 0; u <= t; ++u) {
                        dp[u] = dot(dout, v + u * KV + g * hd, hd);
                        weighted += p[u] * dp[u];
                        T* dvu = dv_b + u * KV + g * hd;
                        for (std::size_t d = 0; d < hd; ++d) dvu[d] += p[u] * dout[d];
                    }
                    const T* qt = q + t * H + h * hd;
                    T* dqt = dq_b + t * H + h * hd;
                    for (std::size_t u = 0; u <= t; ++u) {
                        const T ds = p[u] * (dp[u] - weighted) * att_scale;
                        const T* ku = k + u * KV + g * hd;
                        T* dku = dk_b + u * KV + g * hd;
                        for (std::size_t d = 0; d < hd; ++d) {
                            dqt[d] += ds * ku[d];
                            dku[d] += ds * qt[d];
                        }
                    }
                }
            }
        }
        grad_weight(cache.norm1.data(), dq.data(), gw + lo.wq, R, H, H);
        grad_weight(cache.norm1.data(), dk.data(), gw + lo.wk, R, H, KV);
        grad_weight(cache.norm1.data(), dv.data(), gw + lo.wv, R, H, KV);
        grad_input_set(dq.data(), w + lo.wq, dnorm.data(), R, H, H);
        grad_input(dk.data(), w + lo.wk, dnorm.data(), R, H, KV);
        grad_input(dv.data(), w + lo.wv, dnorm.data(), R, H, KV);
        rmsnorm_backward(cache.input.data(), w + lo.attn_norm, cache.inv1.data(), dnorm.data(), dx.data(),
                         gw + lo.attn_norm, R, H);
    }

    T* gemb = gw + off_.tok_emb;
    T* gpos = gw + off_.pos_emb;
    for (const auto& seg : pass.segments) {
        for (std::size_t t = 0; t < seg.length; ++t) {
            const std::size_t row = seg.offset + t;
            const auto id = static_cast<std::size_t>(pass.tokens[row]);
            const T s = pass.payload_scale[row];
            for (std::size_t i = 0; i < H; ++i) {
                gemb[id * H + i] += dx[row * H + i] * s;
                gpos[t * H + i] += dx[row * H + i];
            }
        }
    }
    if (c.payload_mode == PayloadMode::project) {
        grad_weight(pass.payload.data(), dx.data(), gw + off_.payload_proj, R, P, H);
    }
}

Adam::Adam(std::size_t size, AdamOptions options) : options_(options), m_(size, 0.0), v_(size, 0.0) {}

template <typename T>
void Adam::step(std::span<T> params, std::span<const T> grads, double lr, const std::vector<TensorInfo>& layout) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        fail(ErrorKind::invalid_argument, "optimizer state does not match the parameter count");
    }
    for (std::size_t k = 0; k < grads.size(); ++k) {
        if (!std::isfinite(static_cast<double>(grads[k]))) {
            std::string where = "parameter " + std::to_string(k);
            for (const auto& t : layout) {
                if (k >= t.offset && k < t.offset + t.size()) {
                    where = t.name + "[" + std::to_string(k - t.offset) + "]";
                }
            }
            fail(ErrorKind::divergence_error, "non-finite gradient at " + where + " (step " +
                                                  std::to_string(t_ + 1) + ", lr " + std::to_string(lr) + ")");
        }
    }
    ++t_;
    const double b1 = options_.beta1;
    const double b2 = options_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double g = static_cast<double>(grads[k]);
        m_[k] = b1 * m_[k] + (1.0 - b1) * g;
        v_[k] = b2 * v_[k] + (1.0 - b2) * g * g;
        const double update = (m_[k] / c1) / (std::sqrt(v_[k] / c2) + options_.eps) +
                              options_.weight_decay * static_cast<double>(params[k]);
        params[k] = static_cast<T>(static_cast<double>(params[k]) - lr * update);
    }
}

template class Transformer<float>;
template class Transformer<double>;
template void Adam::step<float>(std::span<float>, std::span<const float>, double, const std::vector<TensorInfo>&);
template void Adam::step<double>(std::span<double>, std::span<const double>, double,
                                 const std::vector<TensorInfo>&);

}  // namespace fone
