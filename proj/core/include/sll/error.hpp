#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sll {

// Caller passed something malformed (bad dims, NaN inputs, out-of-range config).
struct InvalidInputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Two operands disagree on shape.  Message always carries both shapes.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// On-disk bytes do not match the expected layout.  Message names the offset.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An internal precondition was broken (stale cache, double release, ...).
struct ContractViolationError : std::logic_error {
    using std::logic_error::logic_error;
};

// The memory ledger went inconsistent (free without matching alloc).
struct AccountingError : std::logic_error {
    using std::logic_error::logic_error;
};

// A training loss went non-finite.  Records where.
struct DivergedError : std::runtime_error {
    int layer;
    std::int64_t step;
    DivergedError(const std::string& what, int layer_index, std::int64_t step_index)
        : std::runtime_error(what), layer(layer_index), step(step_index) {}
};

// Filesystem-level failure (missing file, short read, failed write).
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace sll
