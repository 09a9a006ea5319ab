#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aen/rng.hpp"
#include "aen/tensor.hpp"

namespace aen {

namespace detail {

// C[p,r] += A[p,q] * B[q,r]. The k loop is outermost per output row, so each
// C element accumulates its products in increasing-k order (the same order a
// plain triple loop uses).
template <typename T>
void mm_nn(const T* a, const T* b, T* c, std::size_t p, std::size_t q, std::size_t r) {
    for (std::size_t i = 0; i < p; ++i) {
        const T* arow = a + i * q;
        T* crow = c + i * r;
        for (std::size_t k = 0; k < q; ++k) {
            const T aik = arow[k];
            const T* brow = b + k * r;
            for (std::size_t j = 0; j < r; ++j) crow[j] += aik * brow[j];
        }
    }
}

// C[p,q] += A[p,r] * B[q,r]^T
template <typename T>
void mm_nt(const T* a, const T* b, T* c, std::size_t p, std::size_t r, std::size_t q) {
    for (std::size_t i = 0; i < p; ++i) {
        const T* arow = a + i * r;
        T* crow = c + i * q;
        for (std::size_t j = 0; j < q; ++j) {
            const T* brow = b + j * r;
            T acc = T(0);
            for (std::size_t k = 0; k < r; ++k) acc += arow[k] * brow[k];
            crow[j] += acc;
        }
    }
}

// C[q,r] += A[p,q]^T * B[p,r]
template <typename T>
void mm_tn(const T* a, const T* b, T* c, std::size_t p, std::size_t q, std::size_t r) {
    for (std::size_t i = 0; i < p; ++i) {
        const T* arow = a + i * q;
        const T* brow = b + i * r;
        for (std::size_t k = 0; k < q; ++k) {
            const T aik = arow[k];
            T* crow = c + k * r;
            for (std::size_t j = 0; j < r; ++j) crow[j] += aik * brow[j];
        }
    }
}

// Masked scores are pushed to this sentinel before exponentiation; after the
// row-max shift exp() underflows to exactly 0 for any sane score magnitude.
template <typename T>
constexpr T softmax_sentinel() {
    return T(-1e30);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// matmul: a[..., p, q] * b[q, r], batched over the leading extents of a.
// ---------------------------------------------------------------------------
template <typename T>
Tensor<T> matmul(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() < 2 || b.rank() != 2) {
        throw ShapeError("matmul: need a of rank >= 2 and b of rank 2, got " +
                         shape_str(a.shape()) + " and " + shape_str(b.shape()));
    }
    const std::size_t q = a.shape()[a.rank() - 1];
    if (q != b.shape()[0]) {
        throw ShapeError("matmul: inner extents disagree: " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
    const std::size_t p = a.shape()[a.rank() - 2];
    const std::size_t r = b.shape()[1];
    const std::size_t batch = a.numel() / (p * q);

    Shape out_shape(a.shape());
    out_shape.back() = r;
    auto out = Tensor<T>::zeros(out_shape);
    for (std::size_t nb = 0; nb < batch; ++nb) {
        detail::mm_nn(a.data().data() + nb * p * q, b.data().data(),
                      out.data().data() + nb * p * r, p, q, r);
    }

    if (tape && (a.requires_grad() || b.requires_grad())) {
        out.set_requires_grad(true);
        Tensor<T> ta = a, tb = b, to = out;
        tape->record("matmul", [ta, tb, to, p, q, r, batch]() mutable {
            const auto& go = to.grad();
            if (ta.requires_grad()) {
                auto& ga = ta.grad();
                for (std::size_t nb = 0; nb < batch; ++nb) {
                    detail::mm_nt(go.data() + nb * p * r, tb.data().data(),
                                  ga.data() + nb * p * q, p, r, q);
                }
            }
            if (tb.requires_grad()) {
                auto& gb = tb.grad();
                for (std::size_t nb = 0; nb < batch; ++nb) {
                    detail::mm_tn(ta.data().data() + nb * p * q, go.data() + nb * p * r,
                                  gb.data(), p, q, r);
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Elementwise activations.
// ---------------------------------------------------------------------------
enum class Unary { Tanh, Elu, Log };

inline constexpr double kEluAlpha = 1.0;
inline constexpr double kLogClamp = 1e-12;

template <typename T>
Tensor<T> elementwise(Tape<T>* tape, const Tensor<T>& x, Unary fn) {
    auto out = Tensor<T>::zeros(x.shape());
    const auto& in = x.data();
    auto& o = out.data();
    switch (fn) {
        case Unary::Tanh:
            for (std::size_t i = 0; i < in.size(); ++i) o[i] = std::tanh(in[i]);
            break;
        case Unary::Elu:
            for (std::size_t i = 0; i < in.size(); ++i) {
                o[i] = in[i] >= T(0) ? in[i] : T(kEluAlpha) * (std::exp(in[i]) - T(1));
            }
            break;
        case Unary::Log:
            for (std::size_t i = 0; i < in.size(); ++i) {
                if (in[i] < T(kLogClamp)) {
                    numeric_guard_count()++;
                    o[i] = std::log(T(kLogClamp));
                } else {
                    o[i] = std::log(in[i]);
                }
            }
            break;
    }

    if (tape && x.requires_grad()) {
        out.set_requires_grad(true);
        Tensor<T> tx = x, to = out;
        tape->record("elementwise", [tx, to, fn]() mutable {
            const auto& go = to.grad();
            const auto& y = to.data();
            const auto& in = tx.data();
            auto& gx = tx.grad();
            switch (fn) {
                case Unary::Tanh:
                    for (std::size_t i = 0; i < gx.size(); ++i)
                        gx[i] += go[i] * (T(1) - y[i] * y[i]);
                    break;
                case Unary::Elu:
                    // d/dx elu = 1 for x >= 0, alpha*exp(x) = y + alpha below.
                    for (std::size_t i = 0; i < gx.size(); ++i)
                        gx[i] += go[i] * (in[i] >= T(0) ? T(1) : y[i] + T(kEluAlpha));
                    break;
                case Unary::Log:
                    for (std::size_t i = 0; i < gx.size(); ++i)
                        if (in[i] >= T(kLogClamp)) gx[i] += go[i] / in[i];
                    break;
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> tanh(Tape<T>* tape, const Tensor<T>& x) {
    return elementwise(tape, x, Unary::Tanh);
}

template <typename T>
Tensor<T> elu(Tape<T>* tape, const Tensor<T>& x) {
    return elementwise(tape, x, Unary::Elu);
}

template <typename T>
Tensor<T> log(Tape<T>* tape, const Tensor<T>& x) {
    return elementwise(tape, x, Unary::Log);
}

// ---------------------------------------------------------------------------
// softmax over the last axis, numerically stabilized by max-subtraction.
// The optional mask covers either the last axis (broadcast across rows) or
// the whole tensor; false positions come out exactly 0.
// ---------------------------------------------------------------------------
template <typename T>
Tensor<T> softmax(Tape<T>* tape, const Tensor<T>& x, const Mask* mask = nullptr) {
    const std::size_t n = x.shape().back();
    const std::size_t rows = x.numel() / n;
    if (mask && mask->size() != n && mask->size() != x.numel()) {
        throw ShapeError("softmax: mask of size " + std::to_string(mask->size()) +
                         " fits neither the last axis (" + std::to_string(n) +
                         ") nor the full tensor " + shape_str(x.shape()));
    }
    const bool mask_per_row = mask && mask->size() == x.numel();

    auto out = Tensor<T>::zeros(x.shape());
    const auto& in = x.data();
    auto& o = out.data();
    std::vector<T> scores(n);
    for (std::size_t row = 0; row < rows; ++row) {
        const T* xr = in.data() + row * n;
        T* yr = o.data() + row * n;
        const std::uint8_t* mr =
            mask ? mask->data() + (mask_per_row ? row * n : 0) : nullptr;

        bool any = false;
        for (std::size_t j = 0; j < n; ++j) {
            const bool keep = !mr || mr[j];
            scores[j] = keep ? xr[j] : detail::softmax_sentinel<T>();
            any = any || keep;
        }
        if (!any) throw ContractError("softmax: fully masked row " + std::to_string(row));

        T mx = scores[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, scores[j]);
        T sum = T(0);
        for (std::size_t j = 0; j < n; ++j) {
            yr[j] = std::exp(scores[j] - mx);
            sum += yr[j];
        }
        for (std::size_t j = 0; j < n; ++j) yr[j] /= sum;
    }

    if (tape && x.requires_grad()) {
        out.set_requires_grad(true);
        Tensor<T> tx = x, to = out;
        tape->record("softmax", [tx, to, rows, n]() mutable {
            const auto& go = to.grad();
            const auto& y = to.data();
            auto& gx = tx.grad();
            for (std::size_t row = 0; row < rows; ++row) {
                const T* gr = go.data() + row * n;
                const T* yr = y.data() + row * n;
                T dot = T(0);
                for (std::size_t j = 0; j < n; ++j) dot += gr[j] * yr[j];
                T* gxr = gx.data() + row * n;
                for (std::size_t j = 0; j < n; ++j) gxr[j] += yr[j] * (gr[j] - dot);
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Shape plumbing: concat / narrow / reshape.
// ---------------------------------------------------------------------------
template <typename T>
Tensor<T> concat(Tape<T>* tape, const std::vector<Tensor<T>>& parts, std::size_t axis) {
    if (parts.empty()) throw ContractError("concat: no parts");
    const Shape& first = parts[0].shape();
    if (axis >= first.size()) {
        throw ShapeError("concat: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(first));
    }
    std::size_t axis_total = 0;
    for (const auto& p : parts) {
        if (p.rank() != first.size()) {
            throw ShapeError("concat: rank mismatch: " + shape_str(first) + " vs " +
                             shape_str(p.shape()));
        }
        for (std::size_t d = 0; d < first.size(); ++d) {
            if (d != axis && p.shape()[d] != first[d]) {
                throw ShapeError("concat: shapes differ off-axis: " + shape_str(first) +
                                 " vs " + shape_str(p.shape()));
            }
        }
        axis_total += p.shape()[axis];
    }

    Shape out_shape(first);
    out_shape[axis] = axis_total;
    auto out = Tensor<T>::zeros(out_shape);

    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
    for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];

    auto& o = out.data();
    for (std::size_t ou = 0; ou < outer; ++ou) {
        std::size_t cursor = 0;
        for (const auto& p : parts) {
            const std::size_t blk = p.shape()[axis] * inner;
            const T* src = p.data().data() + ou * blk;
            T* dst = o.data() + ou * axis_total * inner + cursor;
            std::copy(src, src + blk, dst);
            cursor += blk;
        }
    }

    bool needs = false;
    for (const auto& p : parts) needs = needs || p.requires_grad();
    if (tape && needs) {
        out.set_requires_grad(true);
        std::vector<Tensor<T>> tparts = parts;
        Tensor<T> to = out;
        tape->record("concat", [tparts, to, outer, inner, axis, axis_total]() mutable {
            const auto& go = to.grad();
            for (std::size_t ou = 0; ou < outer; ++ou) {
                std::size_t cursor = 0;
                for (auto& p : tparts) {
                    const std::size_t blk = p.shape()[axis] * inner;
                    if (p.requires_grad()) {
                        auto& gp = p.grad();
                        const T* src = go.data() + ou * axis_total * inner + cursor;
                        T* dst = gp.data() + ou * blk;
                        for (std::size_t i = 0; i < blk; ++i) dst[i] += src[i];
                    }
                    cursor += blk;
                }
            }
        });
    }
    return out;
}

// Contiguous slice [start, start+len) along one axis.
template <typename T>
Tensor<T> narrow(Tape<T>* tape, const Tensor<T>& x, std::size_t axis, std::size_t start,
                 std::size_t len) {
    if (axis >= x.rank()) {
        throw ShapeError("narrow: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(x.shape()));
    }
    const std::size_t extent = x.shape()[axis];
    if (len == 0 || start + len > extent) {
        throw ShapeError("narrow: range [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") exceeds extent " +
                         std::to_string(extent));
    }

    Shape out_shape(x.shape());
    out_shape[axis] = len;
    auto out = Tensor<T>::zeros(out_shape);

    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= x.shape()[d];
    for (std::size_t d = axis + 1; d < x.rank(); ++d) inner *= x.shape()[d];

    const auto& in = x.data();
    auto& o = out.data();
    for (std::size_t ou = 0; ou < outer; ++ou) {
        const T* src = in.data() + (ou * extent + start) * inner;
        std::copy(src, src + len * inner, o.data() + ou * len * inner);
    }

    if (tape && x.requires_grad()) {
        out.set_requires_grad(true);
        Tensor<T> tx = x, to = out;
        tape->record("narrow", [tx, to, outer, inner, extent, start, len]() mutable {
            const auto& go = to.grad();
            auto& gx = tx.grad();
            for (std::size_t ou = 0; ou < outer; ++ou) {
                const T* src = go.data() + ou * len * inner;
                T* dst = gx.data() + (ou * extent + start) * inner;
                for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> reshape(Tape<T>* tape, const Tensor<T>& x, Shape new_shape) {
    if (shape_numel(new_shape) != x.numel()) {
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(new_shape));
    }
    auto out = Tensor<T>::from(std::move(new_shape), x.data());
    if (tape && x.requires_grad()) {
        out.set_requires_grad(true);
        Tensor<T> tx = x, to = out;
        tape->record("reshape", [tx, to]() mutable {
            const auto& go = to.grad();
            auto& gx = tx.grad();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Arithmetic.
// ---------------------------------------------------------------------------
template <typename T>
Tensor<T> add(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("add: shape mismatch: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    auto out = Tensor<T>::zeros(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
    if (tape && (a.requires_grad() || b.requires_grad())) {
        out.set_requires_grad(true);
        Tensor<T> ta = a, tb = b, to = out;
        tape->record("add", [ta, tb, to]() mutable {
            const auto& go = to.grad();
            if (ta.requires_grad()) {
                auto& ga = ta.grad();
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i];
            }
            if (tb.requires_grad()) {
                auto& gb = tb.grad();
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[i];
            }
        });
    }
    return out;
}

// x[..., d] + b[d], b broadcast across all leading extents.
template <typename T>
Tensor<T> add_bias(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& b) {
    const std::size_t d = x.shape().back();
    if (b.rank() != 1 || b.shape()[0] != d) {
        throw ShapeError("add_bias: bias " + shape_str(b.shape()) +
                         " does not match last axis of " + shape_str(x.shape()));
    }
    const std::size_t rows = x.numel() / d;
    auto out = Tensor<T>::zeros(x.shape());
    for (std::size_t row = 0; row < rows; ++row)
        for (std::size_t j = 0; j < d; ++j)
            out.data()[row * d + j] = x.data()[row * d + j] + b.data()[j];

    if (tape && (x.requires_grad() || b.requires_grad())) {
        out.set_requires_grad(true);
        Tensor<T> tx = x, tb = b, to = out;
        tape->record("add_bias", [tx, tb, to, rows, d]() mutable {
            const auto& go = to.grad();
            if (tx.requires_grad()) {
                auto& gx = tx.grad();
                for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i];
            }
            if (tb.requires_grad()) {
                auto& gb = tb.grad();
                for (std::size_t row = 0; row < rows; ++row)
                    for (std::size_t j = 0; j < d; ++j) gb[j] += go[row * d + j];
            }
        });
    }
    return out;
}

// out[i, j] = u[i] + v[j] for flat u (m values) and v (n values).
template <typename T>
Tensor<T> pairwise_sum(Tape<T>* tape, const Tensor<T>& u, const Tensor<T>& v) {
    const std::size_t m = u.numel();
    const std::size_t n = v.numel();
    auto out = Tensor<T>::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.data()[i * n + j] = u.data()[i] + v.data()[j];

    if (tape && (u.requires_grad() || v.requires_grad())) {
        out.set_requires_grad(true);
        Tensor<T> tu = u, tv = v, to = out;
        tape->record("pairwise_sum", [tu, tv, to, m, n]() mutable {
            const auto& go = to.grad();
            if (tu.requires_grad()) {
                auto& gu = tu.grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) gu[i] += go[i * n + j];
            }
            if (tv.requires_grad()) {
                auto& gv = tv.grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) gv[j] += go[i * n + j];
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> mul(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("mul: shape mismatch: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    auto out = Tensor<T>::zeros(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
    if (tape && (a.requires_grad() || b.requires_grad())) {
        out.set_requires_grad(true);
        Tensor<T> ta = a, tb = b, to = out;
        tape->record("mul", [ta, tb, to]() mutable {
            const auto& go = to.grad();
            if (ta.requires_grad()) {
                auto& ga = ta.grad();
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * tb.data()[i];
            }
            if (tb.requires_grad()) {
                auto& gb = tb.grad();
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[i] * ta.data()[i];
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> scale(Tape<T>* tape, const Tensor<T>& x, T c) {
    auto out = Tensor<T>::zeros(x.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] = c * x.data()[i];
    if (tape && x.requires_grad()) {
        out.set_requires_grad(true);
        Tensor<T> tx = x, to = out;
        tape->record("scale", [tx, to, c]() mutable {
            const auto& go = to.grad();
            auto& gx = tx.grad();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += c * go[i];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reductions.
// ---------------------------------------------------------------------------
template <typename T>
Tensor<T> reduce_sum(Tape<T>* tape, const Tensor<T>& x) {
    T s = T(0);
    for (T v : x.data()) s += v;
    auto out = Tensor<T>::scalar(s);
    if (tape && x.requires_grad()) {
        out.set_requires_grad(true);
        Tensor<T> tx = x, to = out;
        tape->record("reduce_sum", [tx, to]() mutable {
            const T g = to.grad()[0];
            auto& gx = tx.grad();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
        });
    }
    return out;
}

template <typename T>
Tensor<T> sum_squares(Tape<T>* tape, const Tensor<T>& x) {
    T s = T(0);
    for (T v : x.data()) s += v * v;
    auto out = Tensor<T>::scalar(s);
    if (tape && x.requires_grad()) {
        out.set_requires_grad(true);
        Tensor<T> tx = x, to = out;
        tape->record("sum_squares", [tx, to]() mutable {
            const T g = to.grad()[0];
            auto& gx = tx.grad();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += T(2) * tx.data()[i] * g;
        });
    }
    return out;
}

// Mean of the rows of x[n, d] whose mask entry is true.
template <typename T>
Tensor<T> masked_mean(Tape<T>* tape, const Tensor<T>& x, const Mask& mask) {
    if (x.rank() != 2) {
        throw ShapeError("masked_mean: need rank-2 input, got " + shape_str(x.shape()));
    }
    const std::size_t n = x.shape()[0], d = x.shape()[1];
    if (mask.size() != n) {
        throw ShapeError("masked_mean: mask size " + std::to_string(mask.size()) +
                         " does not match " + std::to_string(n) + " rows");
    }
    const std::size_t cnt = mask_true_count(mask);
    if (cnt == 0) throw ContractError("masked_mean: all rows masked out");

    auto out = Tensor<T>::zeros({d});
    for (std::size_t i = 0; i < n; ++i) {
        if (!mask[i]) continue;
        for (std::size_t j = 0; j < d; ++j) out.data()[j] += x.data()[i * d + j];
    }
    for (std::size_t j = 0; j < d; ++j) out.data()[j] /= T(cnt);

    if (tape && x.requires_grad()) {
        out.set_requires_grad(true);
        Tensor<T> tx = x, to = out;
        Mask m = mask;
        tape->record("masked_mean", [tx, to, m, n, d, cnt]() mutable {
            const auto& go = to.grad();
            auto& gx = tx.grad();
            for (std::size_t i = 0; i < n; ++i) {
                if (!m[i]) continue;
                for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += go[j] / T(cnt);
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Embedding lookup: out row i = table row indices[i]. The table is normally
// frozen; gradients flow back only if it explicitly requires them.
// ---------------------------------------------------------------------------
template <typename T>
Tensor<T> embedding_rows(Tape<T>* tape, const Tensor<T>& table,
                         std::span<const std::int32_t> indices) {
    if (table.rank() != 2) {
        throw ShapeError("embedding_rows: table must be rank 2, got " +
                         shape_str(table.shape()));
    }
    const std::size_t vocab = table.shape()[0], d = table.shape()[1];
    auto out = Tensor<T>::zeros({indices.size(), d});
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const std::int32_t idx = indices[i];
        if (idx < 0 || static_cast<std::size_t>(idx) >= vocab) {
            throw IndexError("embedding_rows: index " + std::to_string(idx) +
                             " outside vocabulary of size " + std::to_string(vocab));
        }
        std::copy(table.data().begin() + idx * d, table.data().begin() + (idx + 1) * d,
                  out.data().begin() + i * d);
    }

    if (tape && table.requires_grad()) {
        out.set_requires_grad(true);
        Tensor<T> tt = table, to = out;
        std::vector<std::int32_t> idxs(indices.begin(), indices.end());
        tape->record("embedding_rows", [tt, to, idxs, d]() mutable {
            const auto& go = to.grad();
            auto& gt = tt.grad();
            for (std::size_t i = 0; i < idxs.size(); ++i)
                for (std::size_t j = 0; j < d; ++j) gt[idxs[i] * d + j] += go[i * d + j];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Inverted dropout: survivors are scaled by 1/(1-rate) at training time so
// evaluation is a plain identity.
// ---------------------------------------------------------------------------
template <typename T>
Tensor<T> dropout(Tape<T>* tape, const Tensor<T>& x, double rate, bool training, Rng* rng) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ContractError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
    }
    if (!training || rate == 0.0) return x;
    if (!rng) throw ContractError("dropout: training mode needs an rng");

    const T keep_scale = T(1.0 / (1.0 - rate));
    std::vector<T> mask(x.numel());
    for (auto& m : mask) m = rng->uniform() < rate ? T(0) : keep_scale;

    auto out = Tensor<T>::zeros(x.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] = x.data()[i] * mask[i];

    if (tape && x.requires_grad()) {
        out.set_requires_grad(true);
        Tensor<T> tx = x, to = out;
        tape->record("dropout", [tx, to, mask = std::move(mask)]() mutable {
            const auto& go = to.grad();
            auto& gx = tx.grad();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * mask[i];
        });
    }
    return out;
}

}  // namespace aen
