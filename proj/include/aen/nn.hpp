#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "aen/ops.hpp"
#include "aen/rng.hpp"
#include "aen/tensor.hpp"

namespace aen {

// Uniform in +/- sqrt(6 / (fan_in + fan_out)). Pass rng = nullptr for zeros
// (used when a checkpoint will overwrite the values anyway).
template <typename T>
Tensor<T> glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng* rng) {
    auto t = Tensor<T>::zeros(std::move(shape), /*requires_grad=*/true);
    if (rng) {
        const double bound = std::sqrt(6.0 / double(fan_in + fan_out));
        for (auto& v : t.data()) v = T(rng->uniform(-bound, bound));
    }
    return t;
}

// Multi-head attention weights. Keys and queries are first projected to
// d_hid, then split into n_head contiguous slices of width d_head; each head
// scores key/query pairs with its own alignment vector of length 2*d_head,
// and the concatenated head outputs are mixed by the square matrix w_mh.
template <typename T>
struct MhaParams {
    Tensor<T> w_k;                  // [d_k_in, d_hid]
    Tensor<T> w_q;                  // [d_q_in, d_hid]
    std::vector<Tensor<T>> w_att;   // n_head vectors, each [2 * d_head]
    Tensor<T> w_mh;                 // [d_hid, d_hid]

    std::size_t n_head() const { return w_att.size(); }
    std::size_t d_hid() const { return w_mh.shape()[0]; }
    std::size_t d_head() const { return d_hid() / n_head(); }
};

template <typename T>
MhaParams<T> make_mha_params(std::size_t d_k_in, std::size_t d_q_in, std::size_t d_hid,
                             std::size_t n_head, Rng* rng) {
    if (n_head == 0 || d_hid % n_head != 0) {
        throw ContractError("mha: d_hid " + std::to_string(d_hid) +
                            " is not divisible by n_head " + std::to_string(n_head));
    }
    const std::size_t d_head = d_hid / n_head;
    MhaParams<T> p;
    p.w_k = glorot_uniform<T>({d_k_in, d_hid}, d_k_in, d_hid, rng);
    p.w_q = glorot_uniform<T>({d_q_in, d_hid}, d_q_in, d_hid, rng);
    p.w_att.reserve(n_head);
    for (std::size_t h = 0; h < n_head; ++h) {
        // The alignment vector maps a 2*d_head concatenation to one score.
        p.w_att.push_back(glorot_uniform<T>({2 * d_head}, 2 * d_head, 1, rng));
    }
    p.w_mh = glorot_uniform<T>({d_hid, d_hid}, d_hid, d_hid, rng);
    return p;
}

// Two kernel-size-1 convolutions: an identical affine map applied to every
// row, with an ELU between them.
template <typename T>
struct PctParams {
    Tensor<T> w1;  // [d_hid, d_hid]
    Tensor<T> b1;  // [d_hid]
    Tensor<T> w2;  // [d_hid, d_hid]
    Tensor<T> b2;  // [d_hid]
};

template <typename T>
PctParams<T> make_pct_params(std::size_t d_hid, Rng* rng) {
    PctParams<T> p;
    p.w1 = glorot_uniform<T>({d_hid, d_hid}, d_hid, d_hid, rng);
    p.b1 = Tensor<T>::zeros({d_hid}, /*requires_grad=*/true);
    p.w2 = glorot_uniform<T>({d_hid, d_hid}, d_hid, d_hid, rng);
    p.b2 = Tensor<T>::zeros({d_hid}, /*requires_grad=*/true);
    return p;
}

// One attention head over projected keys k_proj[n, d_head] and queries
// q_proj[m, d_head]. Score(i, j) = tanh([k_i; q_j] . w_att_h); splitting the
// dot product over the two halves of w_att_h gives the same value without
// materializing the n*m concatenations. Each output row is the
// softmax-weighted sum of unmasked key rows.
template <typename T>
Tensor<T> attention_head(Tape<T>* tape, const Tensor<T>& k_proj, const Tensor<T>& q_proj,
                         const Tensor<T>& w_att_h, const Mask& key_mask) {
    if (k_proj.rank() != 2 || q_proj.rank() != 2 ||
        k_proj.shape()[1] != q_proj.shape()[1]) {
        throw ShapeError("attention_head: key/query widths disagree: " +
                         shape_str(k_proj.shape()) + " vs " + shape_str(q_proj.shape()));
    }
    const std::size_t d_head = k_proj.shape()[1];
    if (w_att_h.numel() != 2 * d_head) {
        throw ShapeError("attention_head: alignment vector " + shape_str(w_att_h.shape()) +
                         " must have length " + std::to_string(2 * d_head));
    }
    if (key_mask.size() != k_proj.shape()[0]) {
        throw ShapeError("attention_head: mask size " + std::to_string(key_mask.size()) +
                         " does not match " + std::to_string(k_proj.shape()[0]) + " keys");
    }
    if (mask_true_count(key_mask) == 0)
        throw ContractError("attention_head: every key is masked out");

    auto w_k_part = reshape(tape, narrow(tape, w_att_h, 0, 0, d_head), {d_head, 1});
    auto w_q_part = reshape(tape, narrow(tape, w_att_h, 0, d_head, d_head), {d_head, 1});
    auto k_scores = matmul(tape, k_proj, w_k_part);  // [n, 1]
    auto q_scores = matmul(tape, q_proj, w_q_part);  // [m, 1]
    auto scores = tanh(tape, pairwise_sum(tape, q_scores, k_scores));  // [m, n]
    auto weights = softmax(tape, scores, &key_mask);
    return matmul(tape, weights, k_proj);  // [m, d_head]
}

// Full multi-head attention: project, split into heads, attend, concatenate,
// mix.
template <typename T>
Tensor<T> mha(Tape<T>* tape, const MhaParams<T>& params, const Tensor<T>& k,
              const Tensor<T>& q, const Mask& key_mask) {
    if (k.rank() != 2 || k.shape()[1] != params.w_k.shape()[0]) {
        throw ShapeError("mha: keys " + shape_str(k.shape()) +
                         " do not match projection " + shape_str(params.w_k.shape()));
    }
    if (q.rank() != 2 || q.shape()[1] != params.w_q.shape()[0]) {
        throw ShapeError("mha: queries " + shape_str(q.shape()) +
                         " do not match projection " + shape_str(params.w_q.shape()));
    }
    auto k_proj = matmul(tape, k, params.w_k);
    auto q_proj = matmul(tape, q, params.w_q);

    const std::size_t n_head = params.n_head();
    const std::size_t d_head = params.d_head();
    std::vector<Tensor<T>> heads;
    heads.reserve(n_head);
    for (std::size_t h = 0; h < n_head; ++h) {
        auto k_h = narrow(tape, k_proj, 1, h * d_head, d_head);
        auto q_h = narrow(tape, q_proj, 1, h * d_head, d_head);
        heads.push_back(attention_head(tape, k_h, q_h, params.w_att[h], key_mask));
    }
    auto cat = n_head == 1 ? heads[0] : concat(tape, heads, 1);
    return matmul(tape, cat, params.w_mh);
}

// Point-wise convolution transformation; rows never interact.
template <typename T>
Tensor<T> pct(Tape<T>* tape, const PctParams<T>& params, const Tensor<T>& h) {
    auto hidden = elu(tape, add_bias(tape, matmul(tape, h, params.w1), params.b1));
    return add_bias(tape, matmul(tape, hidden, params.w2), params.b2);
}

template <typename T>
Tensor<T> embed(Tape<T>* tape, std::span<const std::int32_t> indices, const Tensor<T>& table) {
    return embedding_rows(tape, table, indices);
}

}  // namespace aen
