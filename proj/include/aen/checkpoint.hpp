#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "aen/data.hpp"
#include "aen/model.hpp"

namespace aen {

// Binary model file. Layout, all integers unsigned 32-bit little-endian:
//   "AENC" | version | config block (length prefix + key=value lines,
//   vocabulary included) | tensor count | per tensor: name (length prefix),
//   rank, extents, payload as IEEE-754 single-precision little-endian.
inline constexpr char kCheckpointMagic[4] = {'A', 'E', 'N', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(char(v & 0xff));
    out.push_back(char((v >> 8) & 0xff));
    out.push_back(char((v >> 16) & 0xff));
    out.push_back(char((v >> 24) & 0xff));
}

inline void put_f32(std::string& out, float v) {
    put_u32(out, std::bit_cast<std::uint32_t>(v));
}

inline void put_block(std::string& out, const std::string& bytes) {
    put_u32(out, static_cast<std::uint32_t>(bytes.size()));
    out += bytes;
}

class Reader {
public:
    Reader(const char* data, std::size_t size) : data_(data), size_(size) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = std::uint32_t(std::uint8_t(data_[pos_])) |
                          std::uint32_t(std::uint8_t(data_[pos_ + 1])) << 8 |
                          std::uint32_t(std::uint8_t(data_[pos_ + 2])) << 16 |
                          std::uint32_t(std::uint8_t(data_[pos_ + 3])) << 24;
        pos_ += 4;
        return v;
    }

    float f32() { return std::bit_cast<float>(u32()); }

    std::string bytes(std::size_t n) {
        need(n);
        std::string s(data_ + pos_, n);
        pos_ += n;
        return s;
    }

    std::string block() { return bytes(u32()); }

    bool exhausted() const { return pos_ == size_; }

private:
    void need(std::size_t n) const {
        if (pos_ + n > size_) throw FormatError("checkpoint: truncated file");
    }
    const char* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

template <typename T>
struct Checkpoint {
    AenParams<T> params;
    AenConfig config;
    Vocab vocab;
};

template <typename T>
void save_checkpoint(const AenParams<T>& params, const AenConfig& config, const Vocab& vocab,
                     const std::string& path) {
    std::string out;
    out.append(kCheckpointMagic, 4);
    detail::put_u32(out, kCheckpointVersion);

    std::string cfg;
    cfg += "d_emb=" + std::to_string(config.d_emb) + "\n";
    cfg += "d_hid=" + std::to_string(config.d_hid) + "\n";
    cfg += "n_head=" + std::to_string(config.n_head) + "\n";
    cfg += "num_classes=" + std::to_string(config.num_classes) + "\n";
    cfg += "max_context_len=" + std::to_string(config.max_context_len) + "\n";
    cfg += "max_target_len=" + std::to_string(config.max_target_len) + "\n";
    cfg += "dropout_rate=" + detail::format_double(config.dropout_rate) + "\n";
    cfg += "epsilon=" + detail::format_double(config.epsilon) + "\n";
    cfg += "lambda=" + detail::format_double(config.lambda) + "\n";
    cfg += "vocab=";
    for (std::size_t i = 2; i < vocab.tokens.size(); ++i) {
        if (i > 2) cfg += ' ';
        cfg += vocab.tokens[i];
    }
    cfg += "\n";
    detail::put_block(out, cfg);

    std::vector<std::pair<std::string, const Tensor<T>*>> tensors;
    for_each_trainable(params, [&](const std::string& name, const Tensor<T>& t) {
        tensors.emplace_back(name, &t);
    });
    tensors.emplace_back("embedding", &params.embedding);

    detail::put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, tensor] : tensors) {
        detail::put_block(out, name);
        detail::put_u32(out, static_cast<std::uint32_t>(tensor->rank()));
        for (std::size_t e : tensor->shape())
            detail::put_u32(out, static_cast<std::uint32_t>(e));
        for (T v : tensor->data()) detail::put_f32(out, float(v));
    }

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw FormatError("cannot open checkpoint for writing: " + path);
    file.write(out.data(), std::streamsize(out.size()));
    if (!file) throw FormatError("failed writing checkpoint: " + path);
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw FormatError("cannot open checkpoint: " + path);
    std::stringstream ss;
    ss << file.rdbuf();
    const std::string blob = ss.str();

    detail::Reader r(blob.data(), blob.size());
    if (r.bytes(4) != std::string(kCheckpointMagic, 4))
        throw FormatError("checkpoint: bad magic bytes");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));

    Checkpoint<T> ckpt;
    const std::string cfg_block = r.block();
    std::istringstream cfg_in(cfg_block);
    std::string line;
    while (std::getline(cfg_in, line)) {
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError("checkpoint: malformed config line '" + line + "'");
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        try {
            if (key == "d_emb") ckpt.config.d_emb = std::stoul(value);
            else if (key == "d_hid") ckpt.config.d_hid = std::stoul(value);
            else if (key == "n_head") ckpt.config.n_head = std::stoul(value);
            else if (key == "num_classes") ckpt.config.num_classes = std::stoul(value);
            else if (key == "max_context_len") ckpt.config.max_context_len = std::stoul(value);
            else if (key == "max_target_len") ckpt.config.max_target_len = std::stoul(value);
            else if (key == "dropout_rate") ckpt.config.dropout_rate = std::stod(value);
            else if (key == "epsilon") ckpt.config.epsilon = std::stod(value);
            else if (key == "lambda") ckpt.config.lambda = std::stod(value);
            else if (key == "vocab") {
                std::istringstream toks(value);
                std::string tok;
                while (toks >> tok) ckpt.vocab.add(tok);
            } else {
                throw FormatError("checkpoint: unknown config key '" + key + "'");
            }
        } catch (const std::invalid_argument&) {
            throw FormatError("checkpoint: bad value for config key '" + key + "'");
        }
    }
    ckpt.config.validate();

    ckpt.params = build_params<T>(ckpt.config, ckpt.vocab.size(), nullptr);
    std::vector<std::pair<std::string, Tensor<T>*>> expected;
    for_each_trainable(ckpt.params, [&](const std::string& name, Tensor<T>& t) {
        expected.emplace_back(name, &t);
    });
    expected.emplace_back("embedding", &ckpt.params.embedding);

    const std::uint32_t count = r.u32();
    if (count != expected.size())
        throw IntegrityError("checkpoint: holds " + std::to_string(count) +
                             " tensors, config implies " + std::to_string(expected.size()));

    for (auto& [name, tensor] : expected) {
        const std::string stored_name = r.block();
        if (stored_name != name)
            throw IntegrityError("checkpoint: expected tensor '" + name + "', found '" +
                                 stored_name + "'");
        const std::uint32_t rank = r.u32();
        Shape shape(rank);
        for (auto& e : shape) e = r.u32();
        if (shape != tensor->shape())
            throw IntegrityError("checkpoint: tensor '" + name + "' has shape " +
                                 shape_str(shape) + ", config implies " +
                                 shape_str(tensor->shape()));
        for (auto& v : tensor->data()) v = T(r.f32());
    }
    if (!r.exhausted()) throw FormatError("checkpoint: trailing bytes after last tensor");
    return ckpt;
}

}  // namespace aen
