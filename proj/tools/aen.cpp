// Command-line front end: train / eval / predict / stats / params.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aen/aen.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

// key=value lines; '#' starts a comment line. Unknown keys are errors so a
// typo cannot silently fall back to a default.
aen::TrainConfig parse_config_file(const std::string& path) {
    aen::TrainConfig tc;
    if (path.empty()) return tc;
    std::ifstream in(path);
    if (!in) throw aen::FormatError("cannot open config file: " + path);

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        std::string_view sv = aen::detail::trim(line);
        if (sv.empty() || sv.front() == '#') continue;
        const auto eq = sv.find('=');
        if (eq == std::string_view::npos)
            throw aen::FormatError(path + ":" + std::to_string(lineno) +
                                   ": expected key=value");
        const std::string key(aen::detail::trim(sv.substr(0, eq)));
        const std::string value(aen::detail::trim(sv.substr(eq + 1)));
        try {
            if (key == "d_emb") tc.model.d_emb = std::stoul(value);
            else if (key == "d_hid") tc.model.d_hid = std::stoul(value);
            else if (key == "n_head") tc.model.n_head = std::stoul(value);
            else if (key == "num_classes") tc.model.num_classes = std::stoul(value);
            else if (key == "max_context_len") tc.model.max_context_len = std::stoul(value);
            else if (key == "max_target_len") tc.model.max_target_len = std::stoul(value);
            else if (key == "dropout_rate") tc.model.dropout_rate = std::stod(value);
            else if (key == "epsilon") tc.model.epsilon = std::stod(value);
            else if (key == "lambda") tc.model.lambda = std::stod(value);
            else if (key == "batch_size") tc.batch_size = std::stoul(value);
            else if (key == "max_epochs") tc.max_epochs = std::stoul(value);
            else if (key == "patience") tc.patience = std::stoul(value);
            else if (key == "lr") tc.adam.lr = std::stod(value);
            else if (key == "beta1") tc.adam.beta1 = std::stod(value);
            else if (key == "beta2") tc.adam.beta2 = std::stod(value);
            else if (key == "adam_eps") tc.adam.eps = std::stod(value);
            else if (key == "seed") tc.seed = std::stoull(value);
            else if (key == "train") tc.train_path = value;
            else if (key == "eval") tc.eval_path = value;
            else if (key == "glove") tc.glove_path = value;
            else if (key == "checkpoint") tc.checkpoint_path = value;
            else if (key == "results") tc.results_path = value;
            else
                throw aen::FormatError(path + ":" + std::to_string(lineno) +
                                       ": unknown config key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw aen::FormatError(path + ":" + std::to_string(lineno) +
                                   ": bad value for '" + key + "'");
        } catch (const std::out_of_range&) {
            throw aen::FormatError(path + ":" + std::to_string(lineno) +
                                   ": value out of range for '" + key + "'");
        }
    }
    return tc;
}

int cmd_train(const aen::TrainConfig& tc) {
    auto train_examples = aen::parse_corpus(tc.train_path);
    auto eval_examples = aen::parse_corpus(tc.eval_path);

    auto result = aen::train<float>(tc, train_examples, eval_examples, &std::cout);
    aen::save_checkpoint(result.best_params, tc.model, result.vocab, tc.checkpoint_path);

    const std::string results_path =
        tc.results_path.empty() ? tc.checkpoint_path + ".metrics.tsv" : tc.results_path;
    std::ofstream out(results_path, std::ios::trunc);
    if (!out) throw aen::FormatError("cannot write results file: " + results_path);
    char buf[160];
    for (const auto& em : result.epochs) {
        std::snprintf(buf, sizeof(buf), "%zu\t%.6f\t%.4f\t%.4f\t%.2f\n", em.epoch,
                      em.train_loss, em.accuracy, em.macro_f1, em.seconds);
        out << buf;
    }
    std::snprintf(buf, sizeof(buf), "best\t%zu\t%.4f\t%.4f\n", result.best_epoch,
                  result.best_accuracy, result.best_macro_f1);
    out << buf;

    std::printf("best epoch %zu  accuracy %.4f  macro_f1 %.4f\n", result.best_epoch,
                result.best_accuracy, result.best_macro_f1);
    std::printf("checkpoint written to %s\n", tc.checkpoint_path.c_str());
    return kExitOk;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path) {
    auto ckpt = aen::load_checkpoint<float>(ckpt_path);
    auto examples = aen::parse_corpus(data_path);
    auto metrics = aen::evaluate(ckpt.params, ckpt.config, examples, ckpt.vocab);
    std::printf("accuracy %.4f\n", metrics.accuracy);
    std::printf("macro_f1 %.4f\n", metrics.macro_f1);
    return kExitOk;
}

int cmd_predict(const std::string& ckpt_path, const std::string& context,
                const std::string& target) {
    auto ckpt = aen::load_checkpoint<float>(ckpt_path);

    aen::Example ex;
    ex.context_tokens = aen::tokenize(context);
    ex.target_tokens = aen::tokenize(target);
    if (ex.context_tokens.empty() || ex.target_tokens.empty())
        throw aen::ParseError("predict: empty context or target after tokenization");

    // Locate the target phrase inside the context.
    bool found = false;
    for (std::size_t i = 0; i + ex.target_tokens.size() <= ex.context_tokens.size(); ++i) {
        bool match = true;
        for (std::size_t j = 0; j < ex.target_tokens.size() && match; ++j)
            match = ex.context_tokens[i + j] == ex.target_tokens[j];
        if (match) {
            ex.target_begin = i;
            ex.target_end = i + ex.target_tokens.size();
            found = true;
            break;
        }
    }
    if (!found) throw aen::ParseError("predict: target phrase not found in context");

    auto batched = aen::make_batches({ex}, ckpt.vocab, ckpt.config, 1, nullptr);
    if (batched.batches.empty())
        throw aen::ParseError("predict: target truncated away entirely");
    const auto& batch = batched.batches[0];
    auto trace = aen::forward<float>(nullptr, ckpt.params, ckpt.config, batch.context_row(0),
                                     batch.target_row(0), batch.context_row_mask(0),
                                     batch.target_row_mask(0), false, nullptr);
    for (std::size_t c = 0; c < trace.probs.numel(); ++c)
        std::printf("%s %.4f\n", aen::label_name(int(c)), double(trace.probs.data()[c]));
    std::printf("label %s\n", aen::label_name(aen::argmax_label(trace.probs)));
    return kExitOk;
}

int cmd_stats(const std::string& data_path) {
    auto examples = aen::parse_corpus(data_path);
    auto counts = aen::class_counts(examples);
    std::printf("positive %zu, neutral %zu, negative %zu\n", counts[aen::kPositive],
                counts[aen::kNeutral], counts[aen::kNegative]);
    return kExitOk;
}

int cmd_params(const aen::TrainConfig& tc) {
    auto params = aen::build_params<float>(tc.model, 2, nullptr);
    for (const auto& [block, count] : aen::param_breakdown(params))
        std::printf("%s %zu\n", block.c_str(), count);
    std::printf("total %zu\n", aen::param_count(params));
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"attentional encoder network for targeted sentiment classification"};
    app.require_subcommand(1);

    std::string config_path, train_path, eval_path, glove_path, out_path, results_path;
    std::string ckpt_path, data_path, context_text, target_text;
    std::uint64_t seed = 0;
    bool seed_set = false;

    auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
    train_cmd->add_option("--config", config_path, "key=value config file");
    train_cmd->add_option("--train", train_path, "training corpus")->required();
    train_cmd->add_option("--eval", eval_path, "evaluation corpus")->required();
    train_cmd->add_option("--glove", glove_path, "pre-trained embedding file");
    train_cmd->add_option("--out", out_path, "checkpoint output path")->required();
    train_cmd->add_option("--results", results_path, "per-epoch metrics file (tsv)");
    train_cmd->add_option("--seed", seed, "rng seed")->each([&](const std::string&) {
        seed_set = true;
    });

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a corpus");
    eval_cmd->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
    eval_cmd->add_option("--data", data_path, "corpus file")->required();

    auto* predict_cmd = app.add_subcommand("predict", "classify one context/target pair");
    predict_cmd->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
    predict_cmd->add_option("--context", context_text, "context sentence")->required();
    predict_cmd->add_option("--target", target_text, "target phrase")->required();

    auto* stats_cmd = app.add_subcommand("stats", "per-class counts of a corpus");
    stats_cmd->add_option("--data", data_path, "corpus file")->required();

    auto* params_cmd = app.add_subcommand("params", "trainable parameter counts");
    params_cmd->add_option("--config", config_path, "key=value config file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (train_cmd->parsed()) {
            aen::TrainConfig tc = parse_config_file(config_path);
            if (!train_path.empty()) tc.train_path = train_path;
            if (!eval_path.empty()) tc.eval_path = eval_path;
            if (!glove_path.empty()) tc.glove_path = glove_path;
            if (!out_path.empty()) tc.checkpoint_path = out_path;
            if (!results_path.empty()) tc.results_path = results_path;
            if (seed_set) tc.seed = seed;
            if (tc.checkpoint_path.empty())
                throw aen::FormatError("train: no checkpoint path given");
            return cmd_train(tc);
        }
        if (eval_cmd->parsed()) return cmd_eval(ckpt_path, data_path);
        if (predict_cmd->parsed()) return cmd_predict(ckpt_path, context_text, target_text);
        if (stats_cmd->parsed()) return cmd_stats(data_path);
        if (params_cmd->parsed()) return cmd_params(parse_config_file(config_path));
    } catch (const aen::NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return kExitNumeric;
    } catch (const aen::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumeric;
    }
    return kExitUsage;
}
