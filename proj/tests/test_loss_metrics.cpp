#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "aen/loss.hpp"
#include "aen/metrics.hpp"
#include "testutil.hpp"

using namespace aen;
using Catch::Approx;

namespace {

std::vector<double> random_distribution(Rng& rng, std::size_t c) {
    std::vector<double> p(c);
    double sum = 0.0;
    for (auto& v : p) {
        v = rng.uniform(0.05, 1.0);
        sum += v;
    }
    for (auto& v : p) v /= sum;
    return p;
}

}  // namespace

TEST_CASE("smooth_labels mixes toward the uniform prior") {
    std::vector<double> hot = {1, 0, 0};
    REQUIRE(smooth_labels(hot, 0.0) == hot);

    auto smoothed = smooth_labels(hot, 0.2);
    REQUIRE(smoothed[0] == Approx(0.8667).margin(1e-4));
    REQUIRE(smoothed[1] == Approx(0.0667).margin(1e-4));
    REQUIRE(smoothed[2] == Approx(0.0667).margin(1e-4));

    auto uniform = smooth_labels(hot, 1.0);
    for (double v : uniform) REQUIRE(v == Approx(1.0 / 3.0).margin(1e-12));

    REQUIRE_THROWS_AS(smooth_labels(std::vector<double>{0.5, 0.2}, 0.2), ContractError);
    REQUIRE_THROWS_AS(smooth_labels(std::vector<double>{1.5, -0.5}, 0.2), ContractError);
}

TEST_CASE("smoothed outputs are distributions with floor epsilon/C") {
    Rng rng(401);
    for (int trial = 0; trial < 50; ++trial) {
        auto q = random_distribution(rng, 3);
        const double eps = rng.uniform(0.0, 1.0);
        auto s = smooth_labels(q, eps);
        double sum = 0.0;
        for (double v : s) {
            REQUIRE(v >= eps / 3.0 - 1e-12);
            sum += v;
        }
        REQUIRE(sum == Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("cross entropy hand values and the scalar-loop oracle") {
    const double delta = 1e-9;
    std::vector<double> near_hot = {1 - 2 * delta, delta, delta};
    REQUIRE(cross_entropy(near_hot, near_hot) == Approx(0.0).margin(1e-6));

    std::vector<double> uniform = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    std::vector<double> hot = {0, 1, 0};
    REQUIRE(cross_entropy(uniform, hot) == Approx(std::log(3.0)).margin(1e-12));

    Rng rng(402);
    for (int trial = 0; trial < 100; ++trial) {
        auto p = random_distribution(rng, 3);
        auto t = random_distribution(rng, 3);
        double want = 0.0;
        for (std::size_t k = 0; k < 3; ++k) want -= t[k] * std::log(p[k]);
        REQUIRE(cross_entropy(p, t) == Approx(want).margin(1e-12));
    }
}

TEST_CASE("cross entropy clamps vanishing predictions and counts the event") {
    const auto before = numeric_guard_count().load();
    std::vector<double> pred = {0.0, 1.0, 0.0};
    std::vector<double> target = {1.0, 0.0, 0.0};
    const double loss = cross_entropy(pred, target);
    REQUIRE(loss == Approx(-std::log(1e-12)).margin(1e-9));
    REQUIRE(numeric_guard_count().load() > before);
}

TEST_CASE("total_loss reduces to plain cross entropy and isolates the L2 term") {
    auto cfg = AenConfig{};
    cfg.d_emb = 4;
    cfg.d_hid = 4;
    cfg.n_head = 2;
    Rng rng(403);
    auto params = init_params<double>(cfg, 4, rng);

    auto p = random_distribution(rng, 3);
    std::vector<double> gold = {0, 0, 1};
    REQUIRE(total_loss(p, gold, 0.0, 0.0, params) ==
            Approx(cross_entropy(p, gold)).margin(1e-12));

    // Zeroed parameters contribute exactly nothing through the L2 term.
    for_each_trainable(params, [](const std::string&, Tensor<double>& t) {
        std::fill(t.data().begin(), t.data().end(), 0.0);
    });
    REQUIRE(total_loss(p, gold, 0.0, 123.0, params) ==
            Approx(cross_entropy(p, gold)).margin(1e-12));

    // With epsilon on, the smoothing decomposes against the uniform prior.
    std::vector<double> uniform = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    const double eps = 0.2;
    REQUIRE(total_loss(p, gold, eps, 0.0, params) ==
            Approx((1 - eps) * cross_entropy(p, gold) + eps * cross_entropy(p, uniform))
                .margin(1e-9));
}

TEST_CASE("smoothing identity: CE(p, q') == (1-eps) CE(p,q) + eps CE(p,u)") {
    Rng rng(404);
    std::vector<double> uniform = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    for (int trial = 0; trial < 1000; ++trial) {
        auto p = random_distribution(rng, 3);
        auto q = one_hot<double>(rng.below(3), 3);
        const double eps = rng.uniform(0.0, 1.0);
        const double lhs = cross_entropy(p, smooth_labels(q, eps));
        const double rhs = (1 - eps) * cross_entropy(p, q) + eps * cross_entropy(p, uniform);
        REQUIRE(lhs == Approx(rhs).margin(1e-9));
    }
}

TEST_CASE("graph loss value agrees with the scalar route and differentiates cleanly") {
    Rng rng(405);
    auto probs_data = random_distribution(rng, 3);
    auto probs = Tensor<double>::from({3}, probs_data, true);
    auto target = smooth_labels(one_hot<double>(1, 3), 0.2);

    Tape<double> tape;
    auto node = cross_entropy_node(&tape, probs, target);
    REQUIRE(node.item() == Approx(cross_entropy(probs_data, target)).margin(1e-12));

    auto report = testutil::fd_check({probs}, [&](Tape<double>* t) {
        return cross_entropy_node(t, probs, target);
    });
    REQUIRE(report.max_rel <= 1e-4);
}

TEST_CASE("accuracy basics") {
    std::vector<int> a = {2, 0, 1, 2};
    REQUIRE(accuracy(a, a) == 1.0);
    std::vector<int> b = {0, 1, 2, 1};
    REQUIRE(accuracy(a, b) == 0.0);
    std::vector<int> preds = {2, 0, 1, 2};
    std::vector<int> golds = {2, 2, 1, 0};
    REQUIRE(accuracy(preds, golds) == 0.5);
    REQUIRE_THROWS_AS(accuracy(std::vector<int>{}, std::vector<int>{}), ContractError);
}

TEST_CASE("macro F1 hand count: crossed binary predictions give 0.5") {
    std::vector<int> preds = {0, 0, 1, 1};
    std::vector<int> golds = {0, 1, 0, 1};
    // Each class: tp=1, fp=1, fn=1 -> P=R=0.5 -> F1=0.5.
    REQUIRE(macro_f1(preds, golds, 2) == Approx(0.5).margin(1e-12));

    std::vector<int> perfect = {0, 1, 2, 0, 1, 2};
    REQUIRE(macro_f1(perfect, perfect, 3) == 1.0);

    // A class absent from both sides contributes zero.
    std::vector<int> only01 = {0, 1, 0, 1};
    REQUIRE(macro_f1(only01, only01, 3) == Approx(2.0 / 3.0).margin(1e-12));
}

TEST_CASE("macro F1 matches an independent confusion-matrix oracle") {
    Rng rng(406);
    for (int round = 0; round < 4; ++round) {
        std::vector<int> preds(200), golds(200);
        for (auto& v : preds) v = int(rng.below(3));
        for (auto& v : golds) v = int(rng.below(3));

        double sum = 0.0;
        for (int c = 0; c < 3; ++c) {
            std::size_t tp = 0, fp = 0, fn = 0;
            for (std::size_t i = 0; i < preds.size(); ++i) {
                if (preds[i] == c && golds[i] == c) tp++;
                if (preds[i] == c && golds[i] != c) fp++;
                if (preds[i] != c && golds[i] == c) fn++;
            }
            const double prec = tp + fp ? double(tp) / double(tp + fp) : 0.0;
            const double rec = tp + fn ? double(tp) / double(tp + fn) : 0.0;
            sum += prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
        }
        REQUIRE(macro_f1(preds, golds, 3) == Approx(sum / 3.0).margin(1e-12));
    }
}

TEST_CASE("metrics are invariant under example reordering") {
    Rng rng(407);
    std::vector<int> preds(50), golds(50);
    for (auto& v : preds) v = int(rng.below(3));
    for (auto& v : golds) v = int(rng.below(3));
    const double acc = accuracy(preds, golds);
    const double f1 = macro_f1(preds, golds, 3);

    std::vector<std::size_t> order(50);
    for (std::size_t i = 0; i < 50; ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<int> preds2(50), golds2(50);
    for (std::size_t i = 0; i < 50; ++i) {
        preds2[i] = preds[order[i]];
        golds2[i] = golds[order[i]];
    }
    REQUIRE(accuracy(preds2, golds2) == acc);
    REQUIRE(macro_f1(preds2, golds2, 3) == f1);
}
