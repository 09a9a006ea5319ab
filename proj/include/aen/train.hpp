#pragma once

#include <chrono>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "aen/adam.hpp"
#include "aen/data.hpp"
#include "aen/loss.hpp"
#include "aen/metrics.hpp"
#include "aen/model.hpp"

namespace aen {

struct TrainConfig {
    AenConfig model;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 20;
    std::size_t patience = 5;
    AdamHyper adam;
    std::uint64_t seed = 1;
    bool stop_on_perfect_eval = false;

    std::string train_path;
    std::string eval_path;
    std::string glove_path;       // empty: random embeddings
    std::string checkpoint_path;
    std::string results_path;

    void validate() const {
        model.validate();
        if (batch_size == 0) throw ContractError("train config: batch_size must be positive");
        if (max_epochs == 0) throw ContractError("train config: max_epochs must be >= 1");
        if (patience == 0) throw ContractError("train config: patience must be >= 1");
    }
};

struct EpochMetrics {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double seconds = 0.0;
};

// Argmax with ties broken toward the lowest class index.
template <typename T>
int argmax_label(const Tensor<T>& probs) {
    int best = 0;
    for (std::size_t k = 1; k < probs.numel(); ++k)
        if (probs.data()[k] > probs.data()[best]) best = int(k);
    return best;
}

template <typename T>
std::vector<int> predict_labels(const AenParams<T>& params, const AenConfig& cfg,
                                const std::vector<Example>& examples, const Vocab& vocab,
                                std::size_t batch_size = 32) {
    std::vector<int> preds;
    preds.reserve(examples.size());
    auto batched = make_batches(examples, vocab, cfg, batch_size, nullptr);
    for (const auto& batch : batched.batches) {
        for (std::size_t b = 0; b < batch.size; ++b) {
            auto trace = forward<T>(nullptr, params, cfg, batch.context_row(b),
                                    batch.target_row(b), batch.context_row_mask(b),
                                    batch.target_row_mask(b), /*training=*/false, nullptr);
            preds.push_back(argmax_label(trace.probs));
        }
    }
    return preds;
}

// Eval-mode pass over a split; parameters are read, never written.
template <typename T>
EpochMetrics evaluate(const AenParams<T>& params, const AenConfig& cfg,
                      const std::vector<Example>& examples, const Vocab& vocab,
                      std::size_t batch_size = 32) {
    if (examples.empty()) throw ContractError("evaluate: empty example list");
    const auto t0 = std::chrono::steady_clock::now();

    auto batched = make_batches(examples, vocab, cfg, batch_size, nullptr);
    std::vector<int> preds, golds;
    for (const auto& batch : batched.batches) {
        for (std::size_t b = 0; b < batch.size; ++b) {
            auto trace = forward<T>(nullptr, params, cfg, batch.context_row(b),
                                    batch.target_row(b), batch.context_row_mask(b),
                                    batch.target_row_mask(b), /*training=*/false, nullptr);
            preds.push_back(argmax_label(trace.probs));
            golds.push_back(batch.labels[b]);
        }
    }

    EpochMetrics m;
    m.accuracy = accuracy(preds, golds);
    m.macro_f1 = macro_f1(preds, golds, int(cfg.num_classes));
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return m;
}

template <typename T>
struct TrainResult {
    AenParams<T> best_params;
    Vocab vocab;
    std::vector<EpochMetrics> epochs;
    std::size_t best_epoch = 0;
    double best_accuracy = 0.0;
    double best_macro_f1 = 0.0;
};

// One gradient step on a batch: mean per-example smoothed cross-entropy plus
// one L2 term. Returns the batch loss value.
template <typename T>
double train_batch(AenParams<T>& params, AdamState<T>& state, const TrainConfig& tc,
                   const Batch& batch, Rng& rng) {
    zero_grads(params);
    Tape<T> tape;
    Tensor<T> ce_sum;
    for (std::size_t b = 0; b < batch.size; ++b) {
        auto trace = forward<T>(&tape, params, tc.model, batch.context_row(b),
                                batch.target_row(b), batch.context_row_mask(b),
                                batch.target_row_mask(b), /*training=*/true, &rng);
        auto target = smooth_labels(one_hot<T>(std::size_t(batch.labels[b]),
                                               tc.model.num_classes),
                                    tc.model.epsilon);
        auto ce = cross_entropy_node(&tape, trace.probs, target);
        ce_sum = ce_sum.defined() ? add(&tape, ce_sum, ce) : ce;
    }
    auto loss = add(&tape, scale(&tape, ce_sum, T(1.0 / double(batch.size))),
                    l2_penalty_node(&tape, params, tc.model.lambda));
    const double loss_value = double(loss.item());
    if (!std::isfinite(loss_value)) return loss_value;

    tape.backward(loss);
    adam_step(params, state, tc.adam);
    return loss_value;
}

// Full training loop: shuffle, step over batches, evaluate each epoch, keep
// the parameters with the best eval accuracy, stop early when accuracy has
// not improved for `patience` epochs. Deterministic for a fixed seed.
template <typename T>
TrainResult<T> train(const TrainConfig& tc, const std::vector<Example>& train_examples,
                     const std::vector<Example>& eval_examples, std::ostream* log = nullptr) {
    tc.validate();
    if (train_examples.empty() || eval_examples.empty())
        throw ContractError("train: empty split");

    Rng rng(tc.seed);
    TrainResult<T> result;
    result.vocab = build_vocab(train_examples);

    Tensor<T> embedding =
        tc.glove_path.empty()
            ? random_embeddings<T>(result.vocab.size(), tc.model.d_emb, rng)
            : load_glove<T>(tc.glove_path, result.vocab, tc.model.d_emb, rng).matrix;

    AenParams<T> params = init_params<T>(tc.model, result.vocab.size(), rng);
    params.embedding = embedding;
    AdamState<T> state = AdamState<T>::init_for(params);

    std::size_t epochs_since_best = 0;
    for (std::size_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        auto batched = make_batches(train_examples, result.vocab, tc.model, tc.batch_size,
                                    &rng);
        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t bi = 0; bi < batched.batches.size(); ++bi) {
            const Batch& batch = batched.batches[bi];
            const double loss_value = train_batch(params, state, tc, batch, rng);
            if (!std::isfinite(loss_value)) {
                throw NumericError("train: non-finite loss " + std::to_string(loss_value) +
                                   " at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(bi));
            }
            loss_sum += loss_value * double(batch.size);
            seen += batch.size;
        }

        EpochMetrics em = evaluate(params, tc.model, eval_examples, result.vocab,
                                   tc.batch_size);
        em.epoch = epoch;
        em.train_loss = seen ? loss_sum / double(seen) : 0.0;
        em.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.epochs.push_back(em);
        if (log) {
            (*log) << "epoch " << epoch << "  loss " << em.train_loss << "  acc "
                   << em.accuracy << "  f1 " << em.macro_f1 << "  (" << em.seconds << "s)\n";
        }

        if (result.epochs.size() == 1 || em.accuracy > result.best_accuracy) {
            result.best_accuracy = em.accuracy;
            result.best_macro_f1 = em.macro_f1;
            result.best_epoch = epoch;
            result.best_params = clone_params(params);
            epochs_since_best = 0;
        } else {
            epochs_since_best++;
        }
        if (tc.stop_on_perfect_eval && em.accuracy >= 1.0) break;
        if (epochs_since_best >= tc.patience) break;
    }
    return result;
}

}  // namespace aen
