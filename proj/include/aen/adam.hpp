#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "aen/model.hpp"

namespace aen {

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// In-place Adam update for one parameter buffer; t is the already-incremented
// step count. Arithmetic runs in double regardless of the storage type.
template <typename T>
void adam_update_tensor(std::vector<T>& theta, const std::vector<T>& grad,
                        std::vector<T>& m, std::vector<T>& v, std::uint64_t t,
                        const AdamHyper& h) {
    if (grad.size() != theta.size() || m.size() != theta.size() || v.size() != theta.size())
        throw ContractError("adam: gradient/state buffers do not match parameter size");
    const double bc1 = 1.0 - std::pow(h.beta1, double(t));
    const double bc2 = 1.0 - std::pow(h.beta2, double(t));
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double g = double(grad[i]);
        const double mi = h.beta1 * double(m[i]) + (1.0 - h.beta1) * g;
        const double vi = h.beta2 * double(v[i]) + (1.0 - h.beta2) * g * g;
        m[i] = T(mi);
        v[i] = T(vi);
        const double m_hat = mi / bc1;
        const double v_hat = vi / bc2;
        theta[i] = T(double(theta[i]) - h.lr * m_hat / (std::sqrt(v_hat) + h.eps));
    }
}

// First/second moment buffers for every trainable tensor, in visiting order.
template <typename T>
struct AdamState {
    std::vector<std::vector<T>> m;
    std::vector<std::vector<T>> v;
    std::uint64_t t = 0;

    static AdamState init_for(const AenParams<T>& params) {
        AdamState s;
        for_each_trainable(params, [&](const std::string&, const Tensor<T>& tensor) {
            s.m.emplace_back(tensor.numel(), T(0));
            s.v.emplace_back(tensor.numel(), T(0));
        });
        return s;
    }
};

template <typename T>
void adam_step(AenParams<T>& params, AdamState<T>& state, const AdamHyper& h) {
    if (h.lr <= 0.0) throw ContractError("adam: learning rate must be positive");
    state.t += 1;
    std::size_t slot = 0;
    for_each_trainable(params, [&](const std::string& name, Tensor<T>& tensor) {
        if (slot >= state.m.size())
            throw ContractError("adam: state has fewer buffers than parameters");
        if (!tensor.has_grad())
            throw ContractError("adam: no gradient for " + name);
        adam_update_tensor(tensor.data(), tensor.grad(), state.m[slot], state.v[slot],
                           state.t, h);
        ++slot;
    });
}

}  // namespace aen
