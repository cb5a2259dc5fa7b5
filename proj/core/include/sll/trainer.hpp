#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sll/conv.hpp"
#include "sll/data.hpp"
#include "sll/layers.hpp"
#include "sll/losses.hpp"
#include "sll/optimizer.hpp"
#include "sll/projection.hpp"
#include "sll/telemetry.hpp"

namespace sll {

// Architecture string: "mlp:800,800" (hidden widths) or "cnn3" (a fixed
// 3-stage conv stack for 32x32 RGB inputs).
struct ArchSpec {
    enum class Kind { mlp, cnn3 };
    Kind kind = Kind::mlp;
    std::vector<std::size_t> hidden;

    std::string text() const;
    static ArchSpec parse(const std::string& s);
};

// Hidden block of a dense stack.  With batch norm present the dense layer is
// affine (identity activation) and the block applies norm -> relu on top;
// without it the layer applies relu itself.
struct DenseBlock {
    DenseLayer layer;
    std::optional<BatchNorm1d> bn;
};

struct ConvBlock {
    ConvLayer conv;
    bool pool = true;
    ConvShape in_shape;        // geometry this block expects
    ConvShape conv_out_shape;  // after the convolution
    ConvShape out_shape;       // after optional pooling
};

using Block = std::variant<DenseBlock, ConvBlock>;

struct Model {
    ArchSpec arch;
    std::size_t input_dim = 0;
    ConvShape input_shape;  // meaningful for conv stacks
    std::size_t n_classes = 0;
    std::vector<Block> blocks;  // hidden stack producing h_1 .. h_{L-1}
    DenseLayer classifier;      // final layer emitting logits
    std::uint64_t seed = 0;

    std::size_t depth() const { return blocks.size() + 1; }  // layers with parameters
    std::size_t block_out_dim(std::size_t i) const;
    std::size_t feature_dim(std::size_t level) const;  // level 0 = input
    std::size_t parameter_bytes() const;
};

// batch_norm controls the hidden blocks of dense stacks (conv stacks and the
// final classifier are unaffected).
Model make_model(const ArchSpec& arch, std::size_t input_dim, const ConvShape& input_shape,
                 std::size_t n_classes, std::uint64_t seed, bool batch_norm = true);

// One fixed random head per feature level 0..L-1 (input plus every hidden
// output).  pool_dim > 0 average-pools features wider than pool_dim before
// projecting; label_concat appends a one-hot label block at train time.
struct HeadSet {
    std::vector<ProjectionHead> heads;
    std::size_t pool_dim = 0;
    bool label_concat = false;
    std::size_t n_classes = 0;
};

HeadSet make_heads(const Model& model, double keep_prob, bool label_concat, std::size_t pool_dim,
                   std::uint64_t seed);

enum class Method { sll, bp };

struct TrainConfig {
    Method method = Method::sll;
    OptConfig opt{};
    std::size_t epochs = 10;
    std::size_t batch_size = 128;
    double keep_prob = 0.9;
    double bc_weight = 1.0;
    bool bc_enabled = true;     // ablation: drop the alignment term entirely
    bool final_align = true;    // align the final logits with the last head
    bool label_concat = false;  // append one-hot labels before projecting
    std::size_t proj_pool_dim = 0;
    double act_dropout = 0.0;  // hidden-activation dropout rate (either method)
    std::uint64_t seed = 1;
    bool shuffle = true;
    bool augment_flip = false;
    double target_acc = -1.0;  // stop once test accuracy reaches this (if > 0)
    std::size_t eval_every = 1;
    std::string run_id = "run";
};

struct LocalLossReport {
    double pred_loss = 0.0;
    double bc_loss = 0.0;  // weighted alignment term actually optimized
    double total_loss = 0.0;
    double head_acc = 0.0;
};

struct StepReport {
    std::vector<LocalLossReport> per_layer;       // one entry per layer, final included
    std::vector<std::size_t> live_after_update;   // transient bytes after each local update
};

// One minibatch of layer-local training: each layer forwards, builds its own
// projected objective, updates, and releases its buffers before the next
// layer runs.  Dropout masks are derived from (seed, step, layer) only, so a
// layer's update never depends on anything downstream of it.
StepReport sll_train_step(Model& model, const HeadSet& heads, const Matrix& x,
                          std::span<const int> y, const TrainConfig& cfg, MemoryLedger& ledger,
                          std::int64_t step);

// End-to-end cross-entropy baseline (dense stacks only): forward everything,
// keep every cache, backpropagate through the chain.
StepReport bp_train_step(Model& model, const Matrix& x, std::span<const int> y,
                         const TrainConfig& cfg, MemoryLedger& ledger, std::int64_t step);

struct EvalResult {
    double accuracy = 0.0;
    double mean_loss = 0.0;
};

EvalResult evaluate(const Model& model, const Dataset& ds, std::size_t batch_size = 256);

struct LayerProbe {
    int layer = 0;  // 0 = input head, 1..L-1 hidden heads, L = final logits
    double pred_loss = 0.0;
    double bc_loss = 0.0;  // alignment against the previous level (0 at level 0)
    double head_acc = 0.0;
};

// Readout quality of every projected head plus the final logits, in
// inference mode (no dropout, no label block).
std::vector<LayerProbe> per_layer_probe(const Model& model, const HeadSet& heads,
                                        const Dataset& ds, std::size_t batch_size = 256);

struct EpochSummary {
    int epoch = 0;
    std::vector<LocalLossReport> layer_means;
    double test_acc = -1.0;  // -1 when not evaluated this epoch
    std::size_t peak_transient_bytes = 0;
    double wall_ms = 0.0;
};

struct TrainResult {
    std::vector<EpochSummary> epochs;
    double final_test_acc = 0.0;
    bool reached_target = false;
    std::size_t peak_transient_bytes = 0;
};

// Epoch driver: shuffles, assembles batches (with optional horizontal-flip
// augmentation), steps, evaluates, and streams CSV rows.
TrainResult train_run(Model& model, HeadSet& heads, const Dataset& train, const Dataset& test,
                      const TrainConfig& cfg, MetricsWriter* metrics = nullptr,
                      MemoryLedger* ledger = nullptr);

struct DepthPoint {
    int depth = 0;  // hidden layers
    std::size_t peak_transient_bytes = 0;
};

// Peak transient (activation+cache) bytes of one training step on synthetic
// data, per depth.  Fresh model and ledger per point; batch and width fixed.
std::vector<DepthPoint> depth_sweep(Method method, std::span<const int> depths, std::size_t width,
                                    std::size_t batch, std::uint64_t seed);

// Registers parameter (and existing optimizer) bytes with a fresh ledger.
void register_model_with_ledger(const Model& model, MemoryLedger& ledger);

}  // namespace sll
