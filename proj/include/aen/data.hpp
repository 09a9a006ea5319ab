#pragma once

#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "aen/model.hpp"
#include "aen/rng.hpp"
#include "aen/tensor.hpp"

namespace aen {

inline constexpr int kNegative = 0;
inline constexpr int kNeutral = 1;
inline constexpr int kPositive = 2;

inline const char* label_name(int label) {
    switch (label) {
        case kNegative: return "negative";
        case kNeutral: return "neutral";
        case kPositive: return "positive";
        default: return "?";
    }
}

// One classification instance: the target phrase appears inside the context
// at [target_begin, target_end).
struct Example {
    std::vector<std::string> context_tokens;
    std::vector<std::string> target_tokens;
    std::size_t target_begin = 0;
    std::size_t target_end = 0;
    int label = kNeutral;
};

// Lowercase, split on whitespace, and break punctuation characters out into
// single-character tokens.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string word;
    auto flush = [&] {
        if (!word.empty()) {
            tokens.push_back(word);
            word.clear();
        }
    };
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            flush();
        } else if (std::ispunct(c)) {
            flush();
            tokens.emplace_back(1, char(std::tolower(c)));
        } else {
            word.push_back(char(std::tolower(c)));
        }
    }
    flush();
    return tokens;
}

namespace detail {

inline std::string strip_cr(std::string line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    return line;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

}  // namespace detail

// Reads three-line records: a context line with the literal `$T$` marking
// where the target sits, the target phrase, and a polarity in {-1, 0, 1}.
inline std::vector<Example> parse_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open corpus file: " + path);

    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(detail::strip_cr(line));
    if (lines.size() % 3 != 0)
        throw ParseError(path + ": " + std::to_string(lines.size()) +
                         " lines is not a whole number of 3-line records");

    std::vector<Example> examples;
    examples.reserve(lines.size() / 3);
    for (std::size_t i = 0; i < lines.size(); i += 3) {
        const std::size_t lineno = i + 1;
        const std::string& context_line = lines[i];
        const std::string& target_line = lines[i + 1];
        const std::string polarity(detail::trim(lines[i + 2]));

        const std::size_t pos = context_line.find("$T$");
        if (pos == std::string::npos)
            throw ParseError(path + ":" + std::to_string(lineno) +
                             ": context has no $T$ placeholder");

        Example ex;
        if (polarity == "-1") ex.label = kNegative;
        else if (polarity == "0") ex.label = kNeutral;
        else if (polarity == "1") ex.label = kPositive;
        else
            throw ParseError(path + ":" + std::to_string(lineno + 2) + ": bad polarity '" +
                             polarity + "'");

        ex.target_tokens = tokenize(target_line);
        if (ex.target_tokens.empty())
            throw ParseError(path + ":" + std::to_string(lineno + 1) + ": empty target");

        auto prefix = tokenize(std::string_view(context_line).substr(0, pos));
        auto suffix = tokenize(std::string_view(context_line).substr(pos + 3));
        ex.target_begin = prefix.size();
        ex.target_end = prefix.size() + ex.target_tokens.size();
        ex.context_tokens = std::move(prefix);
        ex.context_tokens.insert(ex.context_tokens.end(), ex.target_tokens.begin(),
                                 ex.target_tokens.end());
        ex.context_tokens.insert(ex.context_tokens.end(), suffix.begin(), suffix.end());
        examples.push_back(std::move(ex));
    }
    return examples;
}

inline std::array<std::size_t, 3> class_counts(const std::vector<Example>& examples) {
    std::array<std::size_t, 3> counts{0, 0, 0};
    for (const auto& ex : examples) counts[ex.label]++;
    return counts;
}

// Token ids. 0 and 1 are reserved; everything else is assigned in first-
// occurrence order over the training examples.
struct Vocab {
    static constexpr std::int32_t kPad = 0;
    static constexpr std::int32_t kUnk = 1;

    std::vector<std::string> tokens = {"<pad>", "<unk>"};
    std::unordered_map<std::string, std::int32_t> index = {{"<pad>", 0}, {"<unk>", 1}};

    std::size_t size() const { return tokens.size(); }

    std::int32_t id(const std::string& token) const {
        auto it = index.find(token);
        return it == index.end() ? kUnk : it->second;
    }

    std::int32_t add(const std::string& token) {
        auto it = index.find(token);
        if (it != index.end()) return it->second;
        const auto idx = static_cast<std::int32_t>(tokens.size());
        tokens.push_back(token);
        index.emplace(token, idx);
        return idx;
    }
};

inline Vocab build_vocab(const std::vector<Example>& examples) {
    if (examples.empty()) throw ContractError("build_vocab: no examples");
    Vocab vocab;
    for (const auto& ex : examples)
        for (const auto& tok : ex.context_tokens) vocab.add(tok);
    return vocab;
}

// Pre-trained embeddings matched against the vocabulary. `found` counts
// non-reserved vocab tokens that appeared in the file; everything missing
// (unk included) is drawn uniform in +/-0.25, and the pad row stays zero.
template <typename T>
struct GloveLoad {
    Tensor<T> matrix;
    std::size_t found = 0;
};

template <typename T>
GloveLoad<T> load_glove(const std::string& path, const Vocab& vocab, std::size_t d_emb,
                        Rng& rng) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open embedding file: " + path);

    auto matrix = Tensor<T>::zeros({vocab.size(), d_emb});
    std::vector<bool> filled(vocab.size(), false);

    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::string_view sv(line);
        const std::size_t sp = sv.find(' ');
        if (sp == std::string_view::npos)
            throw FormatError(path + ": embedding row with no values");
        const std::string token(sv.substr(0, sp));

        // Validate the dimension of every row; parse values only when needed.
        std::size_t fields = 0;
        for (std::size_t k = sp; k < sv.size();) {
            while (k < sv.size() && sv[k] == ' ') ++k;
            if (k >= sv.size()) break;
            ++fields;
            while (k < sv.size() && sv[k] != ' ') ++k;
        }
        if (fields != d_emb)
            throw FormatError(path + ": row for '" + token + "' has " +
                              std::to_string(fields) + " values, expected " +
                              std::to_string(d_emb));

        const auto it = vocab.index.find(token);
        if (it == vocab.index.end() || it->second <= Vocab::kUnk || filled[it->second])
            continue;

        T* row = matrix.data().data() + std::size_t(it->second) * d_emb;
        const char* p = line.data() + sp;
        const char* end = line.data() + line.size();
        for (std::size_t j = 0; j < d_emb; ++j) {
            while (p < end && *p == ' ') ++p;
            double value = 0.0;
            auto [next, ec] = std::from_chars(p, end, value);
            if (ec != std::errc())
                throw FormatError(path + ": row for '" + token + "' has a malformed number");
            row[j] = T(value);
            p = next;
        }
        filled[it->second] = true;
    }

    GloveLoad<T> result;
    std::size_t found = 0;
    for (std::size_t i = 2; i < vocab.size(); ++i) found += filled[i] ? 1 : 0;
    // Deterministic fill of whatever the file did not cover, pad excluded.
    for (std::size_t i = 1; i < vocab.size(); ++i) {
        if (filled[i]) continue;
        T* row = matrix.data().data() + i * d_emb;
        for (std::size_t j = 0; j < d_emb; ++j) row[j] = T(rng.uniform(-0.25, 0.25));
    }
    result.matrix = std::move(matrix);
    result.found = found;
    return result;
}

// Embedding table with no pre-trained file: every non-pad row uniform in
// +/-0.25.
template <typename T>
Tensor<T> random_embeddings(std::size_t vocab_size, std::size_t d_emb, Rng& rng) {
    auto matrix = Tensor<T>::zeros({vocab_size, d_emb});
    for (std::size_t i = 1; i < vocab_size; ++i)
        for (std::size_t j = 0; j < d_emb; ++j)
            matrix.data()[i * d_emb + j] = T(rng.uniform(-0.25, 0.25));
    return matrix;
}

// Index-encoded, padded, masked batch. Rows are padded to the longest
// sequence in the batch (after truncation to the config caps).
struct Batch {
    std::size_t size = 0;
    std::size_t context_len = 0;
    std::size_t target_len = 0;
    std::vector<std::int32_t> context_ids;  // [size * context_len]
    std::vector<std::int32_t> target_ids;   // [size * target_len]
    Mask context_mask;
    Mask target_mask;
    std::vector<int> labels;

    std::span<const std::int32_t> context_row(std::size_t b) const {
        return {context_ids.data() + b * context_len, context_len};
    }
    std::span<const std::int32_t> target_row(std::size_t b) const {
        return {target_ids.data() + b * target_len, target_len};
    }
    Mask context_row_mask(std::size_t b) const {
        return {context_mask.begin() + b * context_len,
                context_mask.begin() + (b + 1) * context_len};
    }
    Mask target_row_mask(std::size_t b) const {
        return {target_mask.begin() + b * target_len,
                target_mask.begin() + (b + 1) * target_len};
    }
};

struct BatchingResult {
    std::vector<Batch> batches;
    std::size_t skipped = 0;  // examples whose target did not survive truncation
};

namespace detail {

struct EncodedExample {
    std::vector<std::int32_t> context;
    std::vector<std::int32_t> target;
    int label;
};

// Truncation keeps a window of the context centered on the target span, and
// the first max_target_len target tokens. Returns false only if no target
// token would survive.
inline bool truncate_example(const Example& ex, std::size_t n_max, std::size_t m_max,
                             std::size_t& ctx_begin, std::size_t& ctx_end,
                             std::size_t& tgt_len) {
    const std::size_t n = ex.context_tokens.size();
    tgt_len = std::min(ex.target_tokens.size(), m_max);
    if (n <= n_max) {
        ctx_begin = 0;
        ctx_end = n;
    } else {
        const std::size_t center = (ex.target_begin + ex.target_end) / 2;
        std::size_t start = center > n_max / 2 ? center - n_max / 2 : 0;
        start = std::min(start, n - n_max);
        ctx_begin = start;
        ctx_end = start + n_max;
    }
    return ex.target_begin < ctx_end && ex.target_end > ctx_begin;
}

}  // namespace detail

inline BatchingResult make_batches(const std::vector<Example>& examples, const Vocab& vocab,
                                   const AenConfig& cfg, std::size_t batch_size,
                                   Rng* shuffle_rng) {
    if (batch_size == 0) throw ContractError("make_batches: batch_size must be positive");

    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (shuffle_rng) shuffle_rng->shuffle(order);

    std::vector<detail::EncodedExample> encoded;
    encoded.reserve(examples.size());
    BatchingResult result;
    for (std::size_t idx : order) {
        const Example& ex = examples[idx];
        std::size_t cb = 0, ce = 0, tl = 0;
        if (!detail::truncate_example(ex, cfg.max_context_len, cfg.max_target_len, cb, ce, tl)) {
            result.skipped++;
            continue;
        }
        detail::EncodedExample enc;
        enc.label = ex.label;
        enc.context.reserve(ce - cb);
        for (std::size_t i = cb; i < ce; ++i)
            enc.context.push_back(vocab.id(ex.context_tokens[i]));
        enc.target.reserve(tl);
        for (std::size_t i = 0; i < tl; ++i) enc.target.push_back(vocab.id(ex.target_tokens[i]));
        encoded.push_back(std::move(enc));
    }

    for (std::size_t begin = 0; begin < encoded.size(); begin += batch_size) {
        const std::size_t end = std::min(begin + batch_size, encoded.size());
        Batch batch;
        batch.size = end - begin;
        for (std::size_t i = begin; i < end; ++i) {
            batch.context_len = std::max(batch.context_len, encoded[i].context.size());
            batch.target_len = std::max(batch.target_len, encoded[i].target.size());
        }
        batch.context_ids.assign(batch.size * batch.context_len, Vocab::kPad);
        batch.target_ids.assign(batch.size * batch.target_len, Vocab::kPad);
        batch.context_mask.assign(batch.size * batch.context_len, 0);
        batch.target_mask.assign(batch.size * batch.target_len, 0);
        for (std::size_t i = begin; i < end; ++i) {
            const std::size_t b = i - begin;
            const auto& enc = encoded[i];
            for (std::size_t j = 0; j < enc.context.size(); ++j) {
                batch.context_ids[b * batch.context_len + j] = enc.context[j];
                batch.context_mask[b * batch.context_len + j] = 1;
            }
            for (std::size_t j = 0; j < enc.target.size(); ++j) {
                batch.target_ids[b * batch.target_len + j] = enc.target[j];
                batch.target_mask[b * batch.target_len + j] = 1;
            }
            batch.labels.push_back(enc.label);
        }
        result.batches.push_back(std::move(batch));
    }
    return result;
}

}  // namespace aen
