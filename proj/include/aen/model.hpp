#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aen/nn.hpp"
#include "aen/ops.hpp"

namespace aen {

struct AenConfig {
    std::size_t d_emb = 300;
    std::size_t d_hid = 300;
    std::size_t n_head = 6;
    std::size_t num_classes = 3;
    std::size_t max_context_len = 80;
    std::size_t max_target_len = 20;
    double dropout_rate = 0.1;
    double epsilon = 0.2;   // label smoothing
    double lambda = 1e-5;   // L2 coefficient

    void validate() const {
        if (d_emb == 0 || d_hid == 0 || n_head == 0)
            throw ContractError("config: widths and head count must be positive");
        if (d_hid % n_head != 0)
            throw ContractError("config: d_hid " + std::to_string(d_hid) +
                                " not divisible by n_head " + std::to_string(n_head));
        if (num_classes < 2) throw ContractError("config: need at least 2 classes");
        if (max_context_len == 0 || max_target_len == 0)
            throw ContractError("config: length caps must be positive");
        if (dropout_rate < 0.0 || dropout_rate >= 1.0)
            throw ContractError("config: dropout_rate must lie in [0, 1)");
        if (epsilon < 0.0 || epsilon >= 1.0)
            throw ContractError("config: epsilon must lie in [0, 1)");
        if (lambda < 0.0) throw ContractError("config: lambda must be nonnegative");
    }
};

// All weights of the network. The embedding table is loaded, not learned, so
// it sits outside the trainable set.
template <typename T>
struct AenParams {
    MhaParams<T> intra;   // context self-attention
    MhaParams<T> inter;   // target-over-context attention
    MhaParams<T> tsc;     // target-specific context attention
    PctParams<T> pct_c;
    PctParams<T> pct_t;
    Tensor<T> w_o;        // [3 * d_hid, num_classes]
    Tensor<T> b_o;        // [num_classes]
    Tensor<T> embedding;  // [vocab, d_emb], frozen

    std::size_t vocab_size() const { return embedding.shape()[0]; }
};

// Visits every trainable tensor in a fixed order; the optimizer, the L2
// penalty, checkpoints, and the parameter count all rely on this order.
template <typename Params, typename F>
void for_each_trainable(Params& params, F&& f) {
    auto visit_mha = [&](const std::string& prefix, auto& m) {
        f(prefix + ".w_k", m.w_k);
        f(prefix + ".w_q", m.w_q);
        for (std::size_t h = 0; h < m.w_att.size(); ++h)
            f(prefix + ".w_att." + std::to_string(h), m.w_att[h]);
        f(prefix + ".w_mh", m.w_mh);
    };
    auto visit_pct = [&](const std::string& prefix, auto& p) {
        f(prefix + ".w1", p.w1);
        f(prefix + ".b1", p.b1);
        f(prefix + ".w2", p.w2);
        f(prefix + ".b2", p.b2);
    };
    visit_mha("intra", params.intra);
    visit_mha("inter", params.inter);
    visit_mha("tsc", params.tsc);
    visit_pct("pct_c", params.pct_c);
    visit_pct("pct_t", params.pct_t);
    f(std::string("w_o"), params.w_o);
    f(std::string("b_o"), params.b_o);
}

// rng == nullptr builds zero-valued weights of the right shapes (checkpoint
// loading fills them in); otherwise matrices are Glorot-initialized and
// biases start at zero. The embedding is always zeros here -- the data
// module fills it.
template <typename T>
AenParams<T> build_params(const AenConfig& cfg, std::size_t vocab_size, Rng* rng) {
    cfg.validate();
    if (vocab_size < 2)
        throw ContractError("build_params: vocabulary needs at least pad + unk");
    AenParams<T> p;
    p.intra = make_mha_params<T>(cfg.d_emb, cfg.d_emb, cfg.d_hid, cfg.n_head, rng);
    p.inter = make_mha_params<T>(cfg.d_emb, cfg.d_emb, cfg.d_hid, cfg.n_head, rng);
    p.tsc = make_mha_params<T>(cfg.d_hid, cfg.d_hid, cfg.d_hid, cfg.n_head, rng);
    p.pct_c = make_pct_params<T>(cfg.d_hid, rng);
    p.pct_t = make_pct_params<T>(cfg.d_hid, rng);
    p.w_o = glorot_uniform<T>({3 * cfg.d_hid, cfg.num_classes}, 3 * cfg.d_hid,
                              cfg.num_classes, rng);
    p.b_o = Tensor<T>::zeros({cfg.num_classes}, /*requires_grad=*/true);
    p.embedding = Tensor<T>::zeros({vocab_size, cfg.d_emb});
    return p;
}

template <typename T>
AenParams<T> init_params(const AenConfig& cfg, std::size_t vocab_size, Rng& rng) {
    return build_params<T>(cfg, vocab_size, &rng);
}

template <typename T>
AenParams<T> clone_params(const AenParams<T>& params) {
    AenParams<T> out = params;
    for_each_trainable(out, [](const std::string&, Tensor<T>& t) { t = t.clone(); });
    out.embedding = params.embedding.clone();
    return out;
}

template <typename T>
void zero_grads(AenParams<T>& params) {
    for_each_trainable(params, [](const std::string&, Tensor<T>& t) { t.zero_grad(); });
}

template <typename T>
std::size_t param_count(const AenParams<T>& params) {
    std::size_t total = 0;
    for_each_trainable(params,
                       [&](const std::string&, const Tensor<T>& t) { total += t.numel(); });
    return total;
}

// Per-block element counts, in visiting order.
template <typename T>
std::vector<std::pair<std::string, std::size_t>> param_breakdown(const AenParams<T>& params) {
    std::vector<std::pair<std::string, std::size_t>> blocks = {
        {"mha_intra", 0}, {"mha_inter", 0}, {"mha_tsc", 0},
        {"pct_context", 0}, {"pct_target", 0}, {"output_head", 0},
    };
    for_each_trainable(params, [&](const std::string& name, const Tensor<T>& t) {
        std::size_t slot = 5;
        if (name.rfind("intra", 0) == 0) slot = 0;
        else if (name.rfind("inter", 0) == 0) slot = 1;
        else if (name.rfind("tsc", 0) == 0) slot = 2;
        else if (name.rfind("pct_c", 0) == 0) slot = 3;
        else if (name.rfind("pct_t", 0) == 0) slot = 4;
        blocks[slot].second += t.numel();
    });
    return blocks;
}

// Intermediate representations of one example's forward pass.
template <typename T>
struct ForwardTrace {
    Tensor<T> c_intra;  // [n, d_hid]
    Tensor<T> t_inter;  // [m, d_hid]
    Tensor<T> h_c;      // [n, d_hid]
    Tensor<T> h_t;      // [m, d_hid]
    Tensor<T> h_tsc;    // [m, d_hid]
    Tensor<T> o_tilde;  // [3 * d_hid]
    Tensor<T> logits;   // [num_classes]
    Tensor<T> probs;    // [num_classes]
};

// Runs one (context, target) pair through the network. Masks mark real
// tokens; padded key positions are inert in every attention and pooling
// step. Pass a tape to make the result differentiable.
template <typename T>
ForwardTrace<T> forward(Tape<T>* tape, const AenParams<T>& params, const AenConfig& cfg,
                        std::span<const std::int32_t> context_ids,
                        std::span<const std::int32_t> target_ids,
                        const Mask& context_mask, const Mask& target_mask, bool training,
                        Rng* rng) {
    if (context_ids.size() != context_mask.size() || target_ids.size() != target_mask.size())
        throw ShapeError("forward: ids and masks disagree in length");
    if (context_ids.empty() || target_ids.empty())
        throw ContractError("forward: empty context or target");
    if (mask_true_count(context_mask) == 0)
        throw ContractError("forward: context fully masked");
    if (mask_true_count(target_mask) == 0)
        throw ContractError("forward: target fully masked");

    auto e_c = dropout(tape, embed(tape, context_ids, params.embedding), cfg.dropout_rate,
                       training, rng);
    auto e_t = dropout(tape, embed(tape, target_ids, params.embedding), cfg.dropout_rate,
                       training, rng);

    ForwardTrace<T> trace;
    trace.c_intra = mha(tape, params.intra, e_c, e_c, context_mask);
    trace.t_inter = mha(tape, params.inter, e_c, e_t, context_mask);
    trace.h_c = pct(tape, params.pct_c, trace.c_intra);
    trace.h_t = pct(tape, params.pct_t, trace.t_inter);
    trace.h_tsc = mha(tape, params.tsc, trace.h_c, trace.h_t, context_mask);

    auto pooled_c = masked_mean(tape, trace.h_c, context_mask);
    auto pooled_t = masked_mean(tape, trace.h_t, target_mask);
    auto pooled_tsc = masked_mean(tape, trace.h_tsc, target_mask);
    trace.o_tilde = concat(tape, {pooled_c, pooled_t, pooled_tsc}, 0);

    auto o_drop = dropout(tape, trace.o_tilde, cfg.dropout_rate, training, rng);
    auto projected = reshape(
        tape, matmul(tape, reshape(tape, o_drop, {1, o_drop.numel()}), params.w_o),
        {cfg.num_classes});
    trace.logits = add(tape, projected, params.b_o);
    trace.probs = softmax(tape, trace.logits);
    return trace;
}

}  // namespace aen
