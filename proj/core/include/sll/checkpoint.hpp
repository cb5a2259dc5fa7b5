#pragma once

#include <string>

#include "sll/trainer.hpp"

namespace sll {

// Versioned little-endian binary snapshot of a model and its head
// configuration.  Projection matrices are not stored: each head is
// regenerated from its recorded (seed, dims, keep_prob).  Optimizer state is
// deliberately excluded; a loaded model evaluates identically and can be
// trained on with fresh optimizer slots.
struct CheckpointBundle {
    Model model;
    HeadSet heads;
};

void save_checkpoint(const std::string& path, const Model& model, const HeadSet& heads);

// Throws FormatError (naming the byte offset) on any structural mismatch.
CheckpointBundle load_checkpoint(const std::string& path);

}  // namespace sll
