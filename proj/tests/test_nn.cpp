#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "aen/nn.hpp"
#include "testutil.hpp"

using namespace aen;
using Catch::Approx;

namespace {

// Literal double-loop evaluation of one attention head: concatenate each
// (key, query) pair, take tanh of the dot product with the alignment vector,
// softmax over unmasked keys, then form the weighted key sums.
std::vector<std::vector<double>> attention_head_ref(
    const std::vector<std::vector<double>>& k, const std::vector<std::vector<double>>& q,
    const std::vector<double>& w_att, const Mask& mask) {
    const std::size_t n = k.size(), m = q.size(), dh = k[0].size();
    std::vector<std::vector<double>> out(m, std::vector<double>(dh, 0.0));
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<double> scores(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> cat(k[i]);
            cat.insert(cat.end(), q[j].begin(), q[j].end());
            double dot = 0.0;
            for (std::size_t d = 0; d < 2 * dh; ++d) dot += cat[d] * w_att[d];
            scores[i] = std::tanh(dot);
        }
        double mx = -1e300;
        for (std::size_t i = 0; i < n; ++i)
            if (mask[i]) mx = std::max(mx, scores[i]);
        double denom = 0.0;
        std::vector<double> weights(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (!mask[i]) continue;
            weights[i] = std::exp(scores[i] - mx);
            denom += weights[i];
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (!mask[i]) continue;
            const double w = weights[i] / denom;
            for (std::size_t d = 0; d < dh; ++d) out[j][d] += w * k[i][d];
        }
    }
    return out;
}

std::vector<std::vector<double>> to_rows(const Tensor<double>& t) {
    std::vector<std::vector<double>> rows(t.shape()[0], std::vector<double>(t.shape()[1]));
    for (std::size_t i = 0; i < t.shape()[0]; ++i)
        for (std::size_t j = 0; j < t.shape()[1]; ++j) rows[i][j] = t.at(i, j);
    return rows;
}

std::vector<std::vector<double>> matmul_ref(const std::vector<std::vector<double>>& a,
                                            const std::vector<std::vector<double>>& b) {
    std::vector<std::vector<double>> c(a.size(), std::vector<double>(b[0].size(), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b[0].size(); ++j)
            for (std::size_t k = 0; k < b.size(); ++k) c[i][j] += a[i][k] * b[k][j];
    return c;
}

}  // namespace

TEST_CASE("attention over a single key returns that key row") {
    Rng rng(301);
    auto k = testutil::random_tensor({1, 3}, rng, false);
    auto q = testutil::random_tensor({4, 3}, rng, false);
    auto w = testutil::random_tensor({6}, rng, false);
    auto out = attention_head<double>(nullptr, k, q, w, {1});
    REQUIRE(out.shape() == Shape{4, 3});
    for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t d = 0; d < 3; ++d) REQUIRE(out.at(j, d) == Approx(k.at(0, d)).margin(1e-15));
}

TEST_CASE("zero alignment weights give uniform attention over unmasked keys") {
    Rng rng(302);
    auto k = testutil::random_tensor({4, 2}, rng, false);
    auto q = testutil::random_tensor({2, 2}, rng, false);
    auto w = Tensor<double>::zeros({4});
    Mask mask = {1, 1, 0, 1};
    auto out = attention_head<double>(nullptr, k, q, w, mask);
    for (std::size_t j = 0; j < 2; ++j)
        for (std::size_t d = 0; d < 2; ++d) {
            const double mean = (k.at(0, d) + k.at(1, d) + k.at(3, d)) / 3.0;
            REQUIRE(out.at(j, d) == Approx(mean).margin(1e-12));
        }
}

TEST_CASE("attention head matches the double-loop reference") {
    Rng rng(303);
    for (int trial = 0; trial < 10; ++trial) {
        auto k = testutil::random_tensor({3, 2}, rng, false);
        auto q = testutil::random_tensor({2, 2}, rng, false);
        auto w = testutil::random_tensor({4}, rng, false);
        Mask mask = {1, trial % 2 == 0, 1};
        auto got = attention_head<double>(nullptr, k, q, w, mask);
        auto want = attention_head_ref(to_rows(k), to_rows(q), w.data(), mask);
        for (std::size_t j = 0; j < 2; ++j)
            for (std::size_t d = 0; d < 2; ++d)
                REQUIRE(got.at(j, d) == Approx(want[j][d]).margin(1e-12));
    }
    auto k = testutil::random_tensor({3, 2}, rng, false);
    auto q = testutil::random_tensor({2, 2}, rng, false);
    auto w = testutil::random_tensor({4}, rng, false);
    REQUIRE_THROWS_AS(attention_head<double>(nullptr, k, q, w, {0, 0, 0}), ContractError);
}

TEST_CASE("attention output stays inside the envelope of unmasked keys") {
    Rng rng(304);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + rng.below(5), m = 1 + rng.below(4), dh = 1 + rng.below(4);
        auto k = testutil::random_tensor({n, dh}, rng, false, -2.0, 2.0);
        auto q = testutil::random_tensor({m, dh}, rng, false, -2.0, 2.0);
        auto w = testutil::random_tensor({2 * dh}, rng, false);
        Mask mask(n, 0);
        mask[rng.below(n)] = 1;
        for (auto& b : mask) b = b || rng.uniform() < 0.6;
        auto out = attention_head<double>(nullptr, k, q, w, mask);
        for (std::size_t d = 0; d < dh; ++d) {
            double lo = 1e300, hi = -1e300;
            for (std::size_t i = 0; i < n; ++i) {
                if (!mask[i]) continue;
                lo = std::min(lo, k.at(i, d));
                hi = std::max(hi, k.at(i, d));
            }
            for (std::size_t j = 0; j < m; ++j) {
                REQUIRE(out.at(j, d) >= lo - 1e-9);
                REQUIRE(out.at(j, d) <= hi + 1e-9);
            }
        }
    }
}

TEST_CASE("single-head mha is attention plus the three projections") {
    Rng rng(305);
    auto params = make_mha_params<double>(3, 3, 4, 1, &rng);
    auto k = testutil::random_tensor({5, 3}, rng, false);
    auto q = testutil::random_tensor({2, 3}, rng, false);
    Mask mask = {1, 1, 1, 0, 1};
    auto got = mha<double>(nullptr, params, k, q, mask);

    auto head = attention_head<double>(nullptr, matmul<double>(nullptr, k, params.w_k),
                                       matmul<double>(nullptr, q, params.w_q),
                                       params.w_att[0], mask);
    auto want = matmul<double>(nullptr, head, params.w_mh);
    REQUIRE(got.data() == want.data());
}

TEST_CASE("mha matches a per-head brute-force evaluation") {
    Rng rng(306);
    auto params = make_mha_params<double>(4, 4, 4, 2, &rng);
    auto k = testutil::random_tensor({3, 4}, rng, false);
    auto q = testutil::random_tensor({2, 4}, rng, false);
    Mask mask = {1, 0, 1};
    auto got = mha<double>(nullptr, params, k, q, mask);

    auto kp = matmul_ref(to_rows(k), to_rows(params.w_k));
    auto qp = matmul_ref(to_rows(q), to_rows(params.w_q));
    std::vector<std::vector<double>> cat(2, std::vector<double>(4, 0.0));
    for (std::size_t h = 0; h < 2; ++h) {
        std::vector<std::vector<double>> kh(3, std::vector<double>(2)),
            qh(2, std::vector<double>(2));
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t d = 0; d < 2; ++d) kh[i][d] = kp[i][h * 2 + d];
        for (std::size_t j = 0; j < 2; ++j)
            for (std::size_t d = 0; d < 2; ++d) qh[j][d] = qp[j][h * 2 + d];
        auto oh = attention_head_ref(kh, qh, params.w_att[h].data(), mask);
        for (std::size_t j = 0; j < 2; ++j)
            for (std::size_t d = 0; d < 2; ++d) cat[j][h * 2 + d] = oh[j][d];
    }
    auto want = matmul_ref(cat, to_rows(params.w_mh));
    for (std::size_t j = 0; j < 2; ++j)
        for (std::size_t d = 0; d < 4; ++d)
            REQUIRE(got.at(j, d) == Approx(want[j][d]).margin(1e-12));
}

TEST_CASE("mha is invariant under key permutation and equivariant under query permutation") {
    Rng rng(307);
    auto params = make_mha_params<double>(3, 3, 6, 3, &rng);
    auto k = testutil::random_tensor({5, 3}, rng, false);
    auto q = testutil::random_tensor({3, 3}, rng, false);
    Mask mask = {1, 0, 1, 1, 0};
    auto base = mha<double>(nullptr, params, k, q, mask);

    std::vector<std::size_t> perm = {3, 0, 4, 2, 1};
    auto k_perm = Tensor<double>::zeros({5, 3});
    Mask mask_perm(5);
    for (std::size_t i = 0; i < 5; ++i) {
        mask_perm[i] = mask[perm[i]];
        for (std::size_t d = 0; d < 3; ++d) k_perm.at(i, d) = k.at(perm[i], d);
    }
    auto permuted = mha<double>(nullptr, params, k_perm, q, mask_perm);
    for (std::size_t i = 0; i < base.numel(); ++i)
        REQUIRE(permuted.data()[i] == Approx(base.data()[i]).margin(1e-12));

    std::vector<std::size_t> qperm = {2, 0, 1};
    auto q_perm = Tensor<double>::zeros({3, 3});
    for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t d = 0; d < 3; ++d) q_perm.at(j, d) = q.at(qperm[j], d);
    auto out_qperm = mha<double>(nullptr, params, k, q_perm, mask);
    for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t d = 0; d < 6; ++d)
            REQUIRE(out_qperm.at(j, d) == Approx(base.at(qperm[j], d)).margin(1e-12));
}

TEST_CASE("padded keys never change mha output, exactly") {
    Rng rng(308);
    auto params = make_mha_params<double>(3, 3, 4, 2, &rng);
    auto k = testutil::random_tensor({4, 3}, rng, false);
    auto q = testutil::random_tensor({2, 3}, rng, false);
    Mask mask = {1, 1, 1, 1};
    auto base = mha<double>(nullptr, params, k, q, mask);

    auto padded = Tensor<double>::zeros({6, 3});
    std::copy(k.data().begin(), k.data().end(), padded.data().begin());
    padded.at(4, 0) = 42.0;  // garbage rows behind the mask
    padded.at(5, 2) = -7.0;
    Mask padded_mask = {1, 1, 1, 1, 0, 0};
    auto got = mha<double>(nullptr, params, padded, q, padded_mask);
    REQUIRE(got.data() == base.data());
}

TEST_CASE("pct applies the same affine maps to every row") {
    PctParams<double> id;
    id.w1 = Tensor<double>::from({2, 2}, {1, 0, 0, 1});
    id.b1 = Tensor<double>::zeros({2});
    id.w2 = Tensor<double>::from({2, 2}, {1, 0, 0, 1});
    id.b2 = Tensor<double>::zeros({2});
    auto x = Tensor<double>::from({2, 2}, {0.5, 1.5, 2.0, 0.0});
    auto y = pct<double>(nullptr, id, x);
    REQUIRE(y.data() == x.data());  // elu is the identity on nonnegative input

    Rng rng(309);
    auto params = make_pct_params<double>(3, &rng);
    auto twice = Tensor<double>::from({2, 3}, {0.3, -0.4, 0.9, 0.3, -0.4, 0.9});
    auto out = pct<double>(nullptr, params, twice);
    for (std::size_t d = 0; d < 3; ++d) REQUIRE(out.at(0, d) == out.at(1, d));
}

TEST_CASE("pct rows match a scalar evaluation") {
    Rng rng(310);
    auto params = make_pct_params<double>(4, &rng);
    auto x = testutil::random_tensor({3, 4}, rng, false);
    auto got = pct<double>(nullptr, params, x);
    for (std::size_t i = 0; i < 3; ++i) {
        std::vector<double> hidden(4, 0.0);
        for (std::size_t j = 0; j < 4; ++j) {
            double acc = params.b1.data()[j];
            for (std::size_t d = 0; d < 4; ++d) acc += x.at(i, d) * params.w1.at(d, j);
            hidden[j] = acc >= 0 ? acc : std::exp(acc) - 1.0;
        }
        for (std::size_t j = 0; j < 4; ++j) {
            double acc = params.b2.data()[j];
            for (std::size_t d = 0; d < 4; ++d) acc += hidden[d] * params.w2.at(d, j);
            REQUIRE(got.at(i, j) == Approx(acc).margin(1e-12));
        }
    }
}

TEST_CASE("pct commutes with row permutation") {
    Rng rng(311);
    auto params = make_pct_params<double>(3, &rng);
    auto x = testutil::random_tensor({4, 3}, rng, false);
    auto y = pct<double>(nullptr, params, x);
    std::vector<std::size_t> perm = {2, 0, 3, 1};
    auto xp = Tensor<double>::zeros({4, 3});
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t d = 0; d < 3; ++d) xp.at(i, d) = x.at(perm[i], d);
    auto yp = pct<double>(nullptr, params, xp);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t d = 0; d < 3; ++d) REQUIRE(yp.at(i, d) == y.at(perm[i], d));
}

TEST_CASE("mha and pct parameter gradients match finite differences") {
    Rng rng(312);
    auto mp = make_mha_params<double>(3, 3, 4, 2, &rng);
    auto k = testutil::random_tensor({4, 3}, rng, false);
    auto q = testutil::random_tensor({2, 3}, rng, false);
    Mask mask = {1, 1, 0, 1};
    auto mha_report = testutil::fd_check(
        {mp.w_k, mp.w_q, mp.w_att[0], mp.w_att[1], mp.w_mh}, [&](Tape<double>* tape) {
            return reduce_sum(tape, tanh(tape, mha(tape, mp, k, q, mask)));
        });
    CAPTURE(mha_report.max_rel);
    REQUIRE(mha_report.max_rel <= 1e-4);

    auto pp = make_pct_params<double>(3, &rng);
    auto h = testutil::random_tensor({4, 3}, rng, false);
    auto pct_report = testutil::fd_check({pp.w1, pp.b1, pp.w2, pp.b2},
                                         [&](Tape<double>* tape) {
                                             return reduce_sum(tape, pct(tape, pp, h));
                                         });
    CAPTURE(pct_report.max_rel);
    REQUIRE(pct_report.max_rel <= 1e-4);
}
