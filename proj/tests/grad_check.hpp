#pragma once

// Finite-difference check of Transformer<double>::backward, shared by the
// unit tests and the acceptance suite.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "fone/codec.hpp"
#include "fone/model.hpp"

namespace gradcheck {

struct TensorResult {
    std::string name;
    std::size_t coords = 0;
    double max_rel = 0.0;
};

// Eight positions, [Num] payloads at 0 and 2, token loss from position 3 on.
inline fone::EncodedSequence toy_sequence(const fone::ModelConfig& cfg) {
    fone::EncodedSequence seq;
    seq.token_ids = {1, 3, 1, 7, 4, 5, 6, 2};
    seq.payloads.resize(8);
    if (cfg.payload_dim > 0) {
        const auto a = fone::fone_encode("407", fone::NumberFormat(3, 0)).values;
        const auto b = fone::fone_encode("95", fone::NumberFormat(3, 0)).values;
        seq.payloads[0].assign(a.begin(), a.begin() + std::min<std::ptrdiff_t>(cfg.payload_dim, 6));
        seq.payloads[2].assign(b.begin(), b.begin() + std::min<std::ptrdiff_t>(cfg.payload_dim, 6));
        seq.payloads[0].resize(static_cast<std::size_t>(cfg.payload_dim), 0.25);
        seq.payloads[2].resize(static_cast<std::size_t>(cfg.payload_dim), -0.5);
        if (cfg.payload_mode == fone::PayloadMode::scale) {
            seq.payloads[0] = {0.407};
            seq.payloads[2] = {0.095};
        }
    }
    seq.targets = {-1, -1, -1, 4, 5, 6, 2, 0};
    seq.answer_slot = 7;
    return seq;
}

// Scalar objective mixing every output the trainer uses: Fourier digit loss
// at the last position, token cross-entropy on the head rows, squared error
// on the readout and a fixed linear probe on every hidden row.
class Objective {
public:
    Objective(const fone::ModelConfig& cfg, const fone::EncodedSequence& seq, std::uint64_t seed)
        : cfg_(cfg), seq_(seq), head_(fone::NumberFormat(3, 0)),
          label_(fone::DigitLabel::from_string("502", fone::NumberFormat(3, 0))) {
        std::mt19937_64 gen(seed);
        std::normal_distribution<double> g(0.0, 1.0);
        probe_.resize(seq.size() * static_cast<std::size_t>(cfg.hidden_size));
        for (double& v : probe_) v = 0.1 * g(gen);
        aux_target_.resize(static_cast<std::size_t>(cfg.aux_outputs));
        for (double& v : aux_target_) v = g(gen);
    }

    static constexpr std::size_t head_from = 3;

    fone::ForwardPass<double> run(const fone::Transformer<double>& model) const {
        return model.forward(seq_, seq_.size(), head_from);
    }

    double value(const fone::ForwardPass<double>& pass) const {
        const std::size_t h = static_cast<std::size_t>(cfg_.hidden_size);
        const std::size_t v = static_cast<std::size_t>(cfg_.vocab_size);
        const std::size_t a = static_cast<std::size_t>(cfg_.aux_outputs);
        double loss = head_.final_loss(pass.hidden_at(0, seq_.answer_slot, h), label_);
        for (std::size_t k = 0; k < probe_.size(); ++k) loss += probe_[k] * pass.hidden[k];
        for (std::size_t p = head_from; p < seq_.size(); ++p) {
            const std::size_t r = pass.head_index(0, p);
            std::vector<double> z(pass.logits.begin() + static_cast<std::ptrdiff_t>(r * v),
                                  pass.logits.begin() + static_cast<std::ptrdiff_t>((r + 1) * v));
            loss += fone::cross_entropy(z, static_cast<std::size_t>(seq_.targets[p]));
            for (std::size_t j = 0; j < a; ++j) {
                const double d = pass.aux[r * a + j] - aux_target_[j];
                loss += 0.5 * d * d;
            }
        }
        return loss;
    }

    fone::OutputGrads<double> grads(const fone::ForwardPass<double>& pass) const {
        const std::size_t h = static_cast<std::size_t>(cfg_.hidden_size);
        const std::size_t v = static_cast<std::size_t>(cfg_.vocab_size);
        const std::size_t a = static_cast<std::size_t>(cfg_.aux_outputs);
        fone::OutputGrads<double> out;
        out.hidden = probe_;
        std::vector<double> g;
        head_.final_loss_grad(pass.hidden_at(0, seq_.answer_slot, h), label_, g);
        for (std::size_t k = 0; k < h; ++k) out.hidden[seq_.answer_slot * h + k] += g[k];
        out.logits.assign(pass.logits.size(), 0.0);
        out.aux.assign(pass.aux.size(), 0.0);
        for (std::size_t p = head_from; p < seq_.size(); ++p) {
            const std::size_t r = pass.head_index(0, p);
            double peak = -1e300, sum = 0.0;
            for (std::size_t j = 0; j < v; ++j) peak = std::max(peak, pass.logits[r * v + j]);
            for (std::size_t j = 0; j < v; ++j) sum += std::exp(pass.logits[r * v + j] - peak);
            for (std::size_t j = 0; j < v; ++j) out.logits[r * v + j] = std::exp(pass.logits[r * v + j] - peak) / sum;
            out.logits[r * v + static_cast<std::size_t>(seq_.targets[p])] -= 1.0;
            for (std::size_t j = 0; j < a; ++j) out.aux[r * a + j] = pass.aux[r * a + j] - aux_target_[j];
        }
        return out;
    }

private:
    fone::ModelConfig cfg_;
    fone::EncodedSequence seq_;
    fone::FourierHead head_;
    fone::DigitLabel label_;
    std::vector<double> probe_;
    std::vector<double> aux_target_;
};

// Compares backward against fourth-order central differences on `per_tensor`
// sampled coordinates of every tensor (all of them when the tensor is
// smaller). A wide step keeps cancellation noise below tiny gradients; the
// O(h^4) stencil keeps truncation error down at that width.
inline std::vector<TensorResult> run(const fone::ModelConfig& cfg, std::uint64_t seed, std::size_t per_tensor,
                                     double step = 1e-3) {
    auto model = fone::Transformer<double>::init(cfg, seed);
    // Lift the weights off the tiny init scale so every nonlinearity is
    // exercised away from its linear regime.
    std::mt19937_64 gen(seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> jitter(0.0, 0.15);
    for (double& w : model.parameters()) w += jitter(gen);

    const auto seq = toy_sequence(cfg);
    const Objective objective(cfg, seq, seed);
    const auto pass = objective.run(model);
    std::vector<double> grad(model.parameter_count(), 0.0);
    model.backward(pass, objective.grads(pass), grad);

    std::vector<TensorResult> results;
    for (const auto& t : model.tensors()) {
        std::vector<std::size_t> coords(t.size());
        for (std::size_t k = 0; k < coords.size(); ++k) coords[k] = t.offset + k;
        if (coords.size() > per_tensor) {
            std::shuffle(coords.begin(), coords.end(), gen);
            coords.resize(per_tensor);
        }
        TensorResult r{t.name, coords.size(), 0.0};
        for (std::size_t c : coords) {
            const double saved = model.parameters()[c];
            auto at = [&](double offset) {
                model.parameters()[c] = saved + offset;
                return objective.value(objective.run(model));
            };
            const double fd = (8.0 * (at(step) - at(-step)) - (at(2 * step) - at(-2 * step))) / (12.0 * step);
            model.parameters()[c] = saved;
            const double denom = std::max({std::fabs(fd), std::fabs(grad[c]), 1e-8});
            r.max_rel = std::max(r.max_rel, std::fabs(fd - grad[c]) / denom);
        }
        results.push_back(r);
    }
    return results;
}

}  // namespace gradcheck
