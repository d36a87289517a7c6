#pragma once

// Minimal decoder-only transformer: learned absolute positions, pre-norm
// RMSNorm blocks with grouped-query causal attention and a SwiGLU MLP, a
// final RMSNorm, a token head and an optional small readout head. Numbers
// enter through [Num] positions, whose input embedding is the token
// embedding plus (or, for xVal, times) a numeric payload.
//
// All weights live in one flat buffer described by a tensor table, so the
// optimizer, checkpoints and the gradient check walk the same layout.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fone/tokenize.hpp"

namespace fone {

enum class PayloadMode {
    none,     // no numeric payload
    add,      // zero-padded payload added to the token embedding
    project,  // payload mapped by a learned payload_dim x hidden matrix, then added
    scale,    // token embedding multiplied by payload[0] (xVal)
};

std::string_view to_string(PayloadMode mode) noexcept;
PayloadMode parse_payload_mode(std::string_view name);

struct ModelConfig {
    int hidden_size = 64;
    int intermediate_size = 256;
    int num_layers = 1;
    int num_heads = 4;
    int num_kv_heads = 2;
    int vocab_size = 16;
    int max_seq_len = 32;
    int payload_dim = 0;
    PayloadMode payload_mode = PayloadMode::none;
    int aux_outputs = 0;  // width of the readout head (0 = absent)
    double norm_eps = 1e-5;
    double init_std = 0.02;

    /// Architecture rows 1-6 (64/256/1/4/2 ... 384/1536/6/8/4). Vocabulary,
    /// length and payload fields keep their defaults.
    static ModelConfig preset(int index);

    int head_dim() const noexcept { return hidden_size / num_heads; }
    int kv_dim() const noexcept { return head_dim() * num_kv_heads; }
    /// Throws config-error.
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TensorInfo {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t offset = 0;

    std::size_t size() const noexcept { return rows * cols; }
};

/// Activations saved by forward for backward, plus the outputs. A batch is
/// stored as its sequences' positions stacked into one row block each.
template <typename T>
struct ForwardPass {
    struct Segment {
        std::size_t offset = 0;     // first row
        std::size_t length = 0;     // positions run
        std::size_t head_from = 0;  // first position with logits / aux computed
        std::size_t head_index = 0; // index of that position among head rows
    };
    struct Layer {
        std::vector<T> input, norm1, inv1, q, k, v, probs, heads, mid, norm2, inv2, gate, sig, up, act;
    };

    bool valid = false;
    std::vector<Segment> segments;
    std::vector<std::size_t> probs_offset;  // per segment, into Layer::probs
    std::size_t rows = 0;
    std::vector<int> tokens;       // per row
    std::vector<T> payload;        // rows x payload_dim (zeros where absent)
    std::vector<T> payload_scale;  // per row
    std::vector<Layer> layers;
    std::vector<T> final_input, final_inv;

    std::vector<T> hidden;               // rows x hidden_size, after the final norm
    std::vector<std::size_t> head_rows;  // rows that have logits / aux
    std::vector<T> logits;               // head_rows x vocab_size
    std::vector<T> aux;                  // head_rows x aux_outputs

    /// Final hidden state of position `pos` of sequence `b`.
    std::span<const T> hidden_at(std::size_t b, std::size_t pos, std::size_t width) const {
        return std::span<const T>(hidden).subspan((segments.at(b).offset + pos) * width, width);
    }
    /// Index into the head rows for position `pos` of sequence `b`.
    std::size_t head_index(std::size_t b, std::size_t pos) const {
        const Segment& s = segments.at(b);
        if (pos < s.head_from || pos >= s.length) throw std::out_of_range("position has no head row");
        return s.head_index + (pos - s.head_from);
    }
};

/// Upstream gradients for backward; empty vectors mean "no gradient".
/// Shapes follow ForwardPass: hidden is rows x hidden_size, logits and aux
/// are indexed by head row.
template <typename T>
struct OutputGrads {
    std::vector<T> hidden;
    std::vector<T> logits;
    std::vector<T> aux;
};

/// One batch member: the first `length` positions of `seq`, with outputs
/// from `head_from` on.
struct SequenceView {
    const EncodedSequence* seq = nullptr;
    std::size_t length = 0;
    std::size_t head_from = 0;

    /// Whole sequence, outputs from the answer slot.
    static SequenceView whole(const EncodedSequence& seq);
};

template <typename T>
class Transformer {
public:
    /// All weights zero.
    explicit Transformer(ModelConfig config);

    /// Truncated normal (std init_std, cut at 2 std) for matrices and
    /// embeddings, ones for norm gains, zeros for biases.
    static Transformer init(const ModelConfig& config, std::uint64_t seed);

    const ModelConfig& config() const noexcept { return config_; }
    const std::vector<TensorInfo>& tensors() const noexcept { return tensors_; }
    const TensorInfo& tensor(std::string_view name) const;
    std::size_t parameter_count() const noexcept { return params_.size(); }

    std::vector<T>& parameters() noexcept { return params_; }
    const std::vector<T>& parameters() const noexcept { return params_; }
    std::span<T> view(const TensorInfo& t) { return std::span<T>(params_).subspan(t.offset, t.size()); }
    std::span<const T> view(const TensorInfo& t) const {
        return std::span<const T>(params_).subspan(t.offset, t.size());
    }

    /// Same architecture, weights converted to U.
    template <typename U>
    Transformer<U> cast() const {
        Transformer<U> out(config_);
        for (std::size_t k = 0; k < params_.size(); ++k) {
            out.parameters()[k] = static_cast<U>(params_[k]);
        }
        return out;
    }

    /// Token logits and readout rows are computed from `head_from` on
    /// (default: the answer slot). Throws length-error for sequences longer
    /// than max_seq_len.
    ForwardPass<T> forward(const EncodedSequence& seq) const;
    ForwardPass<T> forward(const EncodedSequence& seq, std::size_t length, std::size_t head_from) const;
    ForwardPass<T> forward(std::span<const SequenceView> batch) const;

    /// Accumulates parameter gradients into `grad` (size parameter_count()).
    /// Throws state-error if `pass` did not come from forward.
    void backward(const ForwardPass<T>& pass, const OutputGrads<T>& upstream, std::span<T> grad) const;

private:
    void build_layout();

    struct LayerOffsets {
        std::size_t attn_norm, wq, wk, wv, wo, mlp_norm, w_gate, w_up, w_down;
    };
    struct Offsets {
        std::size_t tok_emb = 0, pos_emb = 0, payload_proj = 0, final_norm = 0, lm_head = 0, aux_head = 0,
                    aux_bias = 0;
        std::vector<LayerOffsets> layers;
    };

    ModelConfig config_;
    Offsets off_;
    std::vector<TensorInfo> tensors_;
    std::vector<T> params_;
};

using Model = Transformer<float>;

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

/// Adam with bias correction. Moments are kept in double.
class Adam {
public:
    Adam() = default;
    Adam(std::size_t size, AdamOptions options = {});

    /// Throws divergence-error naming the first tensor with a non-finite
    /// gradient; parameters are left untouched in that case.
    template <typename T>
    void step(std::span<T> params, std::span<const T> grads, double lr,
              const std::vector<TensorInfo>& layout = {});

    std::uint64_t steps() const noexcept { return t_; }
    const AdamOptions& options() const noexcept { return options_; }
    std::vector<double>& first_moment() noexcept { return m_; }
    std::vector<double>& second_moment() noexcept { return v_; }
    const std::vector<double>& first_moment() const noexcept { return m_; }
    const std::vector<double>& second_moment() const noexcept { return v_; }
    void set_steps(std::uint64_t t) noexcept { t_ = t; }

private:
    AdamOptions options_;
    std::uint64_t t_ = 0;
    std::vector<double> m_;
    std::vector<double> v_;
};

/// Learning rate used for a scheme unless overridden: 0.0001 for xVal,
/// 0.005 otherwise.
double default_learning_rate(Scheme scheme) noexcept;
inline constexpr int kDefaultBatchSize = 512;

}  // namespace fone
