#pragma once

#include <atomic>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace aen {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor extent / dimension disagreements.
struct ShapeError : Error {
    using Error::Error;
};

// Violated preconditions: non-scalar loss, degenerate masks, invalid
// distributions, bad hyperparameter ranges.
struct ContractError : Error {
    using Error::Error;
};

// Out-of-range lookups (embedding indices, label ids).
struct IndexError : Error {
    using Error::Error;
};

// Malformed corpus text.
struct ParseError : Error {
    using Error::Error;
};

// Malformed binary or structured files (embeddings, checkpoints, configs).
struct FormatError : Error {
    using Error::Error;
};

// Checkpoint contents inconsistent with the config stored inside it.
struct IntegrityError : Error {
    using Error::Error;
};

// Non-finite values where finite ones are required.
struct NumericError : Error {
    using Error::Error;
};

// Counts how many times a probability had to be clamped before taking a log.
inline std::atomic<std::uint64_t>& numeric_guard_count() {
    static std::atomic<std::uint64_t> count{0};
    return count;
}

}  // namespace aen
