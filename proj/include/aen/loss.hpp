#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "aen/model.hpp"
#include "aen/ops.hpp"

namespace aen {

namespace detail {

template <typename T>
void check_distribution(const std::vector<T>& p, const char* what) {
    if (p.empty()) throw ContractError(std::string(what) + ": empty distribution");
    double sum = 0.0;
    for (T v : p) {
        if (v < T(0)) throw ContractError(std::string(what) + ": negative probability");
        sum += double(v);
    }
    if (std::abs(sum - 1.0) > 1e-6)
        throw ContractError(std::string(what) + ": probabilities sum to " +
                            std::to_string(sum));
}

}  // namespace detail

// q'(k) = (1 - eps) * q(k) + eps / C with a uniform prior. eps == 1 is the
// degenerate all-uniform limit.
template <typename T>
std::vector<T> smooth_labels(const std::vector<T>& dist, double epsilon) {
    detail::check_distribution(dist, "smooth_labels");
    if (epsilon < 0.0 || epsilon > 1.0)
        throw ContractError("smooth_labels: epsilon must lie in [0, 1]");
    const std::size_t c = dist.size();
    std::vector<T> out(c);
    for (std::size_t k = 0; k < c; ++k)
        out[k] = T((1.0 - epsilon) * double(dist[k]) + epsilon / double(c));
    return out;
}

template <typename T>
std::vector<T> one_hot(std::size_t label, std::size_t num_classes) {
    if (label >= num_classes)
        throw IndexError("one_hot: label " + std::to_string(label) + " outside " +
                         std::to_string(num_classes) + " classes");
    std::vector<T> v(num_classes, T(0));
    v[label] = T(1);
    return v;
}

// -sum_k target(k) * log(pred(k)). Predictions at or below the clamp are
// lifted to it and counted in numeric_guard_count().
template <typename T>
T cross_entropy(const std::vector<T>& pred, const std::vector<T>& target) {
    if (pred.size() != target.size() || pred.empty())
        throw ContractError("cross_entropy: prediction and target sizes disagree");
    double loss = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        double p = double(pred[k]);
        if (p < kLogClamp) {
            if (target[k] > T(0)) numeric_guard_count()++;
            p = kLogClamp;
        }
        loss -= double(target[k]) * std::log(p);
    }
    return T(loss);
}

// Scalar objective: cross-entropy against smoothed labels plus lambda times
// the squared-parameter sum over the trainable set (the frozen embedding is
// not part of it).
template <typename T>
T total_loss(const std::vector<T>& pred, const std::vector<T>& gold_one_hot, double epsilon,
             double lambda, const AenParams<T>& params) {
    T ce = cross_entropy(pred, smooth_labels(gold_one_hot, epsilon));
    double sq = 0.0;
    for_each_trainable(params, [&](const std::string&, const Tensor<T>& t) {
        for (T v : t.data()) sq += double(v) * double(v);
    });
    return ce + T(lambda * sq);
}

// Tape-connected cross-entropy of predicted probabilities against a constant
// target distribution.
template <typename T>
Tensor<T> cross_entropy_node(Tape<T>* tape, const Tensor<T>& probs,
                             const std::vector<T>& target) {
    if (probs.numel() != target.size())
        throw ShapeError("cross_entropy_node: " + shape_str(probs.shape()) + " vs " +
                         std::to_string(target.size()) + " target entries");
    auto t = Tensor<T>::from({target.size()}, target);
    auto v = reshape(tape, probs, {probs.numel()});
    return scale(tape, reduce_sum(tape, mul(tape, log(tape, v), t)), T(-1));
}

// lambda * sum of squares over the trainable set, as a tape node.
template <typename T>
Tensor<T> l2_penalty_node(Tape<T>* tape, AenParams<T>& params, double lambda) {
    Tensor<T> acc;
    for_each_trainable(params, [&](const std::string&, Tensor<T>& t) {
        auto s = sum_squares(tape, t);
        acc = acc.defined() ? add(tape, acc, s) : s;
    });
    return scale(tape, acc, T(lambda));
}

// Full per-example objective as a tape node.
template <typename T>
Tensor<T> total_loss_node(Tape<T>* tape, const Tensor<T>& probs, std::size_t gold_label,
                          const AenConfig& cfg, AenParams<T>& params) {
    auto target = smooth_labels(one_hot<T>(gold_label, cfg.num_classes), cfg.epsilon);
    auto ce = cross_entropy_node(tape, probs, target);
    return add(tape, ce, l2_penalty_node(tape, params, cfg.lambda));
}

}  // namespace aen
