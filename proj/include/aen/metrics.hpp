#pragma once

#include <span>
#include <string>
#include <vector>

#include "aen/common.hpp"

namespace aen {

inline double accuracy(std::span<const int> pred, std::span<const int> gold) {
    if (pred.empty() || pred.size() != gold.size())
        throw ContractError("accuracy: need equal, nonempty label lists");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == gold[i] ? 1 : 0;
    return double(hits) / double(pred.size());
}

// Unweighted mean of per-class F1. A class with zero precision+recall
// contributes 0, which also covers classes absent from both sides.
inline double macro_f1(std::span<const int> pred, std::span<const int> gold, int num_classes) {
    if (pred.empty() || pred.size() != gold.size())
        throw ContractError("macro_f1: need equal, nonempty label lists");
    if (num_classes < 1) throw ContractError("macro_f1: need at least one class");

    std::vector<std::size_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const int p = pred[i], g = gold[i];
        if (p < 0 || p >= num_classes || g < 0 || g >= num_classes)
            throw ContractError("macro_f1: label outside [0, " +
                                std::to_string(num_classes) + ")");
        if (p == g) {
            tp[p]++;
        } else {
            fp[p]++;
            fn[g]++;
        }
    }

    double sum = 0.0;
    for (int c = 0; c < num_classes; ++c) {
        const double precision = tp[c] + fp[c] ? double(tp[c]) / double(tp[c] + fp[c]) : 0.0;
        const double recall = tp[c] + fn[c] ? double(tp[c]) / double(tp[c] + fn[c]) : 0.0;
        sum += precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    }
    return sum / double(num_classes);
}

}  // namespace aen
