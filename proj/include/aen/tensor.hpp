#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "aen/common.hpp"

namespace aen {

using Shape = std::vector<std::size_t>;
using Mask = std::vector<std::uint8_t>;

inline std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += " x ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

inline std::size_t mask_true_count(const Mask& mask) {
    std::size_t n = 0;
    for (auto m : mask) n += m ? 1 : 0;
    return n;
}

// Dense row-major tensor with an attached gradient slot. Copies are shallow
// handles onto shared storage; use clone() for an independent copy. Data is
// immutable once an op has produced it -- only the grad buffer (and parameter
// tensors during an optimizer step) get written in place.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return Tensor(std::move(shape), T(0), requires_grad);
    }

    static Tensor full(Shape shape, T value, bool requires_grad = false) {
        return Tensor(std::move(shape), value, requires_grad);
    }

    static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false) {
        if (values.size() != shape_numel(shape)) {
            throw ShapeError("tensor: " + std::to_string(values.size()) +
                             " values do not fill shape " + shape_str(shape));
        }
        Tensor t;
        t.impl_ = std::make_shared<Impl>();
        t.impl_->shape = std::move(shape);
        t.check_extents();
        t.impl_->data = std::move(values);
        t.impl_->requires_grad = requires_grad;
        return t;
    }

    static Tensor scalar(T value, bool requires_grad = false) {
        return from({1}, {value}, requires_grad);
    }

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t numel() const { return impl_->data.size(); }

    std::vector<T>& data() { return impl_->data; }
    const std::vector<T>& data() const { return impl_->data; }

    bool requires_grad() const { return impl_ && impl_->requires_grad; }
    void set_requires_grad(bool rg) { impl_->requires_grad = rg; }

    // Allocates a zero gradient buffer on first access.
    std::vector<T>& grad() {
        if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), T(0));
        return impl_->grad;
    }

    bool has_grad() const { return impl_ && !impl_->grad.empty(); }

    void zero_grad() {
        if (impl_ && !impl_->grad.empty())
            std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
    }

    T item() const {
        if (numel() != 1) {
            throw ContractError("item: tensor of shape " + shape_str(shape()) +
                                " is not a scalar");
        }
        return impl_->data[0];
    }

    T& at(std::size_t i) { return impl_->data[i]; }
    T at(std::size_t i) const { return impl_->data[i]; }
    T& at(std::size_t i, std::size_t j) {
        return impl_->data[i * impl_->shape[1] + j];
    }
    T at(std::size_t i, std::size_t j) const {
        return impl_->data[i * impl_->shape[1] + j];
    }

    // Deep copy of shape/data/flags; gradient buffer starts empty.
    Tensor clone() const {
        Tensor t;
        t.impl_ = std::make_shared<Impl>();
        t.impl_->shape = impl_->shape;
        t.impl_->data = impl_->data;
        t.impl_->requires_grad = impl_->requires_grad;
        return t;
    }

    bool shares_storage_with(const Tensor& other) const { return impl_ == other.impl_; }

private:
    struct Impl {
        Shape shape;
        std::vector<T> data;
        std::vector<T> grad;
        bool requires_grad = false;
    };

    Tensor(Shape shape, T fill, bool requires_grad) {
        impl_ = std::make_shared<Impl>();
        impl_->shape = std::move(shape);
        check_extents();
        impl_->data.assign(shape_numel(impl_->shape), fill);
        impl_->requires_grad = requires_grad;
    }

    void check_extents() const {
        for (std::size_t e : impl_->shape) {
            if (e == 0) throw ShapeError("tensor: zero extent in shape " + shape_str(impl_->shape));
        }
    }

    std::shared_ptr<Impl> impl_;
};

// Reverse-mode tape: each op appends a closure that knows how to push the
// output gradient back onto its inputs. Closures capture tensor handles and
// whatever saved values the rule needs. Replaying them in reverse order
// accumulates (additively) into every requires_grad tensor reachable from
// the loss; the caller zeroes parameter grads between steps.
template <typename T>
class Tape {
public:
    void record(std::string_view op, std::function<void()> backward_fn) {
        records_.push_back({std::string(op), std::move(backward_fn)});
    }

    std::size_t size() const { return records_.size(); }
    void clear() { records_.clear(); }

    void backward(const Tensor<T>& loss) {
        if (loss.numel() != 1) {
            throw ContractError("backward: loss must be scalar, got shape " +
                                shape_str(loss.shape()));
        }
        Tensor<T> l = loss;  // shared handle; grad access needs a non-const view
        auto& g = l.grad();
        std::fill(g.begin(), g.end(), T(0));
        g[0] = T(1);
        for (auto it = records_.rbegin(); it != records_.rend(); ++it) it->fn();
    }

private:
    struct Record {
        std::string op;
        std::function<void()> fn;
    };
    std::vector<Record> records_;
};

}  // namespace aen
