#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sll/matrix.hpp"
#include "sll/rng.hpp"

namespace sll {

struct Dataset {
    Matrix x;  // one flattened example per row, already normalized
    std::vector<int> labels;
    std::size_t n_classes = 0;
    // Image geometry (channels == 0 for non-image data).
    std::size_t channels = 0, height = 0, width = 0;

    std::size_t size() const { return x.rows; }
};

enum class Split { train, test };

// IDX-format digit images + labels under `dir` (train-images-idx3-ubyte,
// ...).  Pixels are scaled to [0,1] then standardized with the usual
// mean/std for this corpus.
Dataset load_mnist(const std::string& dir, Split split);

// 3073-byte records (label + 32x32x3 channel-major pixels) across
// data_batch_1..5.bin / test_batch.bin; per-channel standardization.
Dataset load_cifar10(const std::string& dir, Split split);

// 3074-byte records (coarse label, fine label, pixels) in train.bin /
// test.bin; uses the fine labels (100 classes).
Dataset load_cifar100(const std::string& dir, Split split);

// Isotropic Gaussian clusters around random centers; handy for fast
// end-to-end tests with a learnable signal.
Dataset make_blobs(std::size_t n, std::size_t dim, std::size_t k, double spread,
                   std::uint64_t seed);

// Mirrors one flattened channel-major image row left<->right.
void flip_horizontal_inplace(std::span<double> row, std::size_t channels, std::size_t height,
                             std::size_t width);

// Resolves the dataset root: explicit argument, else $SLL_DATA_ROOT.
std::string resolve_data_root(const std::string& cli_value);

}  // namespace sll
