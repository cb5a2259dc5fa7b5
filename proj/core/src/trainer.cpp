#include "sll/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "sll/error.hpp"

namespace sll {

// ---------------------------------------------------------------- ArchSpec

std::string ArchSpec::text() const {
    if (kind == Kind::cnn3) return "cnn3";
    std::string s = "mlp:";
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(hidden[i]);
    }
    return s;
}

ArchSpec ArchSpec::parse(const std::string& s) {
    ArchSpec spec;
    if (s == "cnn3") {
        spec.kind = Kind::cnn3;
        return spec;
    }
    if (s.rfind("mlp:", 0) != 0)
        throw InvalidInputError("arch '" + s + "': expected 'mlp:<w1,w2,...>' or 'cnn3'");
    spec.kind = Kind::mlp;
    std::size_t pos = 4;
    while (pos < s.size()) {
        std::size_t end = s.find(',', pos);
        if (end == std::string::npos) end = s.size();
        const std::string tok = s.substr(pos, end - pos);
        if (tok.empty()) throw InvalidInputError("arch '" + s + "': empty width");
        std::size_t parsed = 0;
        unsigned long w = 0;
        try {
            w = std::stoul(tok, &parsed);
        } catch (const std::exception&) {
            throw InvalidInputError("arch '" + s + "': bad width '" + tok + "'");
        }
        if (parsed != tok.size() || w == 0)
            throw InvalidInputError("arch '" + s + "': bad width '" + tok + "'");
        spec.hidden.push_back(w);
        pos = end + 1;
    }
    return spec;
}

// ------------------------------------------------------------------ Model

std::size_t Model::block_out_dim(std::size_t i) const {
    if (const auto* d = std::get_if<DenseBlock>(&blocks[i])) return d->layer.w.rows;
    return std::get<ConvBlock>(blocks[i]).out_shape.flat();
}

std::size_t Model::feature_dim(std::size_t level) const {
    if (level == 0) return input_dim;
    return block_out_dim(level - 1);
}

std::size_t Model::parameter_bytes() const {
    std::size_t bytes = classifier.w.bytes() + classifier.b.size() * sizeof(double);
    for (const auto& block : blocks) {
        if (const auto* d = std::get_if<DenseBlock>(&block))
            bytes += d->layer.w.bytes() + d->layer.b.size() * sizeof(double);
        else {
            const auto& c = std::get<ConvBlock>(block);
            bytes += c.conv.kernels.bytes() + c.conv.bias.size() * sizeof(double);
        }
    }
    return bytes;
}

Model make_model(const ArchSpec& arch, std::size_t input_dim, const ConvShape& input_shape,
                 std::size_t n_classes, std::uint64_t seed) {
    if (n_classes < 2) throw InvalidInputError("make_model: need at least two classes");
    Model model;
    model.arch = arch;
    model.n_classes = n_classes;
    model.seed = seed;
    SeededRng init_rng = SeededRng(seed).child(1);

    if (arch.kind == ArchSpec::Kind::mlp) {
        if (input_dim == 0) throw InvalidInputError("make_model: zero input dim");
        model.input_dim = input_dim;
        std::size_t prev = input_dim;
        for (std::size_t w : arch.hidden) {
            DenseBlock block;
            block.layer = make_dense_layer(prev, w, Activation::relu, init_rng);
            model.blocks.push_back(std::move(block));
            prev = w;
        }
        model.classifier = make_dense_layer(prev, n_classes, Activation::identity, init_rng);
        return model;
    }

    // cnn3: three conv+relu+maxpool stages sized for 32x32 RGB inputs.
    if (input_shape.flat() == 0) throw InvalidInputError("make_model: cnn needs an image shape");
    model.input_shape = input_shape;
    model.input_dim = input_shape.flat();
    struct StageCfg {
        std::size_t out_c, k, pad;
    };
    const StageCfg stages[3] = {{32, 5, 2}, {64, 5, 2}, {128, 3, 1}};
    ConvShape cur = input_shape;
    for (const auto& st : stages) {
        ConvBlock block;
        block.conv = make_conv_layer(cur.c, st.out_c, st.k, st.k, 1, st.pad, init_rng);
        block.in_shape = cur;
        block.conv_out_shape = conv_output_shape(block.conv, cur);
        block.pool = true;
        block.out_shape = {block.conv_out_shape.c, block.conv_out_shape.h / 2,
                           block.conv_out_shape.w / 2};
        cur = block.out_shape;
        model.blocks.push_back(std::move(block));
    }
    model.classifier = make_dense_layer(cur.flat(), n_classes, Activation::identity, init_rng);
    return model;
}

HeadSet make_heads(const Model& model, double keep_prob, bool label_concat, std::size_t pool_dim,
                   std::uint64_t seed) {
    HeadSet hs;
    hs.pool_dim = pool_dim;
    hs.label_concat = label_concat;
    hs.n_classes = model.n_classes;
    const std::size_t levels = model.depth();  // heads for levels 0 .. L-1
    hs.heads.reserve(levels);
    for (std::size_t level = 0; level < levels; ++level) {
        const std::size_t base = model.feature_dim(level);
        const std::size_t pooled = (pool_dim > 0 && base > pool_dim) ? pool_dim : base;
        const std::size_t in_dim = pooled + (label_concat ? model.n_classes : 0);
        hs.heads.push_back(make_projection_head(in_dim, model.n_classes, keep_prob,
                                                mix_seed(seed, 9000 + level)));
    }
    return hs;
}

// ------------------------------------------------------------- block helpers

namespace {

struct AnyCache {
    bool is_conv = false;
    ForwardCache dense;
    ConvCache conv;
    Matrix conv_post;  // relu(pre); transient when pooled, else the output
    PoolResult pool;
    bool has_pool = false;
    Matrix output;  // taken from the pieces above after forward

    std::size_t cache_bytes = 0;  // transient bytes excluding the output
};

AnyCache block_forward(Block& block, const Matrix& x) {
    AnyCache any;
    if (auto* d = std::get_if<DenseBlock>(&block)) {
        any.dense = dense_forward(d->layer, x, /*detach_input=*/true);
        any.output = std::move(any.dense.output);
        any.cache_bytes = any.dense.input_snapshot.bytes() + any.dense.pre_activation.bytes();
        return any;
    }
    auto& c = std::get<ConvBlock>(block);
    any.is_conv = true;
    any.conv = conv2d_forward(c.conv, x, c.in_shape);
    any.conv_post = relu(any.conv.pre);
    any.has_pool = c.pool;
    if (c.pool) {
        any.pool = maxpool2d(any.conv_post, c.conv_out_shape, 2, 2);
        any.output = std::move(any.pool.y);
        any.cache_bytes = any.conv.bytes() + any.conv_post.bytes();
    } else {
        any.output = std::move(any.conv_post);
        any.cache_bytes = any.conv.bytes();
    }
    return any;
}

ParamGrads block_backward_local(Block& block, const AnyCache& any, const Matrix& grad_out) {
    if (const auto* d = std::get_if<DenseBlock>(&block))
        return dense_backward_local(d->layer, any.dense, grad_out);
    const auto& c = std::get<ConvBlock>(block);
    Matrix grad_post =
        any.has_pool ? maxpool2d_backward(any.pool, c.conv_out_shape, grad_out) : grad_out;
    const Matrix grad_pre = hadamard(grad_post, relu_mask(any.conv.pre));
    return conv2d_backward_local(c.conv, any.conv, grad_pre);
}

void block_release(AnyCache& any) {
    any.dense.release();
    any.conv.release();
    any.conv_post.release();
    any.pool.y.release();
    any.pool.argmax.clear();
}

void apply_with_ledger(DenseLayer& layer, const ParamGrads& grads, const OptConfig& opt,
                       MemoryLedger& ledger) {
    const std::size_t before = opt_state_bytes(layer.opt);
    apply_update(layer, grads, opt);
    const std::size_t after = opt_state_bytes(layer.opt);
    if (after > before) ledger.on_alloc(Tag::optimizer, after - before);
}

void apply_with_ledger(ConvLayer& conv, const ParamGrads& grads, const OptConfig& opt,
                       MemoryLedger& ledger) {
    const std::size_t before = opt_state_bytes(conv.opt);
    check_same_shape(conv.kernels, grads.dw, "apply_update(conv)");
    const std::int64_t t = ++conv.opt.t;
    optimizer_step(conv.kernels.data, grads.dw.data, conv.opt.w_state, t, opt);
    optimizer_step(conv.bias, grads.db, conv.opt.b_state, t, opt);
    const std::size_t after = opt_state_bytes(conv.opt);
    if (after > before) ledger.on_alloc(Tag::optimizer, after - before);
}

void block_apply(Block& block, const ParamGrads& grads, const OptConfig& opt,
                 MemoryLedger& ledger) {
    if (auto* d = std::get_if<DenseBlock>(&block))
        apply_with_ledger(d->layer, grads, opt, ledger);
    else
        apply_with_ledger(std::get<ConvBlock>(block).conv, grads, opt, ledger);
}

Matrix block_infer(const Block& block, const Matrix& x) {
    if (const auto* d = std::get_if<DenseBlock>(&block)) return dense_infer(d->layer, x);
    const auto& c = std::get<ConvBlock>(block);
    Matrix post = conv2d_infer(c.conv, x, c.in_shape);
    for (double& v : post.data) v = v > 0.0 ? v : 0.0;
    if (!c.pool) return post;
    return maxpool2d(post, c.conv_out_shape, 2, 2).y;
}

void check_batch(const Model& model, const Matrix& x, std::span<const int> y, const char* op) {
    if (x.cols != model.input_dim)
        throw ShapeError(std::string(op) + ": batch " + shape_string(x) + " vs input dim " +
                         std::to_string(model.input_dim));
    if (x.rows == 0) throw InvalidInputError(std::string(op) + ": empty batch");
    if (y.size() != x.rows)
        throw ShapeError(std::string(op) + ": " + std::to_string(y.size()) + " labels for " +
                         std::to_string(x.rows) + " rows");
    for (int label : y)
        if (label < 0 || static_cast<std::size_t>(label) >= model.n_classes)
            throw InvalidInputError(std::string(op) + ": label " + std::to_string(label) +
                                    " out of range");
    if (!all_finite(x)) throw InvalidInputError(std::string(op) + ": non-finite input");
}

// Pool + optional one-hot block, matching make_heads' dimension rule.
// Pass y empty for inference (zero label block).
Matrix build_head_input(const Matrix& feat, const HeadSet& hs, std::span<const int> y) {
    const std::size_t pooled =
        (hs.pool_dim > 0 && feat.cols > hs.pool_dim) ? hs.pool_dim : feat.cols;
    const bool pool = pooled != feat.cols;
    if (!pool && !hs.label_concat) return feat;
    Matrix base = pool ? adaptive_avg_pool_to(feat, pooled) : feat;
    if (!hs.label_concat) return base;
    Matrix out(feat.rows, pooled + hs.n_classes);
    for (std::size_t i = 0; i < feat.rows; ++i) {
        const double* src = base.data.data() + i * base.cols;
        double* dst = out.data.data() + i * out.cols;
        for (std::size_t j = 0; j < pooled; ++j) dst[j] = src[j];
        if (!y.empty()) dst[pooled + static_cast<std::size_t>(y[i])] = 1.0;
    }
    return out;
}

// Gradient of build_head_input's transform: slice off the label block and
// un-pool back to the feature width.
Matrix head_input_backward(const Matrix& grad_in, const HeadSet& hs, std::size_t feat_dim) {
    const std::size_t pooled =
        (hs.pool_dim > 0 && feat_dim > hs.pool_dim) ? hs.pool_dim : feat_dim;
    const Matrix* sliced = &grad_in;
    Matrix slice_store;
    if (hs.label_concat) {
        slice_store = Matrix(grad_in.rows, pooled);
        for (std::size_t i = 0; i < grad_in.rows; ++i)
            for (std::size_t j = 0; j < pooled; ++j) slice_store(i, j) = grad_in(i, j);
        sliced = &slice_store;
    }
    if (pooled == feat_dim) return *sliced;
    return adaptive_avg_pool_backward(*sliced, feat_dim);
}

std::size_t batch_hits(const Matrix& logits, std::span<const int> y) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const auto row = logits.row(i);
        std::size_t best = 0;
        for (std::size_t j = 1; j < row.size(); ++j)
            if (row[j] > row[best]) best = j;
        hits += best == static_cast<std::size_t>(y[i]);
    }
    return hits;
}

double batch_accuracy(const Matrix& logits, std::span<const int> y) {
    return static_cast<double>(batch_hits(logits, y)) / static_cast<double>(logits.rows);
}

// Mask stream for (seed, step, level): nothing downstream of `level` feeds it.
SeededRng level_rng(std::uint64_t seed, std::int64_t step, std::size_t level) {
    return SeededRng(mix_seed(mix_seed(seed, static_cast<std::uint64_t>(step)), 101 + level));
}

}  // namespace

// ------------------------------------------------------------ training steps

StepReport sll_train_step(Model& model, const HeadSet& heads, const Matrix& x,
                          std::span<const int> y, const TrainConfig& cfg, MemoryLedger& ledger,
                          std::int64_t step) {
    check_batch(model, x, y, "sll_train_step");
    const std::size_t depth = model.depth();
    if (heads.heads.size() != depth)
        throw InvalidInputError("sll_train_step: " + std::to_string(heads.heads.size()) +
                                " heads for depth " + std::to_string(depth));

    StepReport rep;
    rep.per_layer.reserve(depth);
    rep.live_after_update.reserve(depth);

    ledger.on_alloc(Tag::activation, x.bytes());
    const Matrix* h = &x;
    Matrix h_own;
    std::size_t h_bytes = x.bytes();

    // Level-0 target: the projected input's posterior.
    Matrix v_prev, q_prev;
    {
        SeededRng rng = level_rng(cfg.seed, step, 0);
        const Matrix mask = sample_projection_mask(heads.heads[0], rng);
        const Matrix hin = build_head_input(*h, heads, y);
        v_prev = project(heads.heads[0], hin, &mask);
        q_prev = softmax_rows(v_prev);
        ledger.on_alloc(Tag::activation, v_prev.bytes() + q_prev.bytes());
    }

    for (std::size_t l = 1; l <= depth; ++l) {
        const bool final_layer = l == depth;
        LocalLossReport local;

        if (!final_layer) {
            Block& block = model.blocks[l - 1];
            AnyCache cache = block_forward(block, *h);
            const std::size_t out_bytes = cache.output.bytes();
            ledger.on_alloc(Tag::cache, cache.cache_bytes);
            ledger.on_alloc(Tag::activation, out_bytes);
            // The previous level's buffer is no longer needed: updates only
            // ever read this layer's own snapshot.
            ledger.on_free(Tag::activation, h_bytes);
            h_own = std::move(cache.output);
            h = &h_own;
            h_bytes = out_bytes;

            SeededRng rng = level_rng(cfg.seed, step, l);
            const Matrix mask = sample_projection_mask(heads.heads[l], rng);
            const Matrix hin = build_head_input(*h, heads, y);
            Matrix v = project(heads.heads[l], hin, &mask);
            if (!all_finite(v))
                throw DivergedError("projected logits went non-finite", static_cast<int>(l), step);
            Matrix q = softmax_rows(v);
            ledger.on_alloc(Tag::activation, v.bytes() + q.bytes());

            const LossResult pred = cross_entropy(v, y, Reduction::mean, true);
            Matrix grad_v = pred.grad;
            local.pred_loss = pred.value;
            if (cfg.bc_enabled) {
                BcOptions opt;
                const BcResult bc = bc_surrogate(BatchProbs::checked(q), BatchProbs::checked(q_prev), opt);
                local.bc_loss = cfg.bc_weight * bc.value;
                axpy_inplace(grad_v, bc.grad_q_logits, cfg.bc_weight);
            }
            local.total_loss = local.pred_loss + local.bc_loss;
            local.head_acc = batch_accuracy(v, y);
            if (!std::isfinite(local.total_loss))
                throw DivergedError("layer objective went non-finite", static_cast<int>(l), step);

            const Matrix grad_hin = project_backward(heads.heads[l], grad_v, &mask);
            const Matrix grad_h = head_input_backward(grad_hin, heads, h->cols);
            const ParamGrads grads = block_backward_local(block, cache, grad_h);
            block_apply(block, grads, cfg.opt, ledger);

            ledger.on_free(Tag::cache, cache.cache_bytes);
            block_release(cache);
            ledger.on_free(Tag::activation, v_prev.bytes() + q_prev.bytes());
            v_prev = std::move(v);
            q_prev = std::move(q);
        } else {
            ForwardCache cache = dense_forward(model.classifier, *h, /*detach_input=*/true);
            const std::size_t cache_bytes =
                cache.input_snapshot.bytes() + cache.pre_activation.bytes();
            const std::size_t out_bytes = cache.output.bytes();
            ledger.on_alloc(Tag::cache, cache_bytes);
            ledger.on_alloc(Tag::activation, out_bytes);
            ledger.on_free(Tag::activation, h_bytes);
            h_own.release();

            const Matrix& logits = cache.output;
            if (!all_finite(logits))
                throw DivergedError("final logits went non-finite", static_cast<int>(l), step);
            const LossResult pred = cross_entropy(logits, y, Reduction::mean, true);
            Matrix grad_logits = pred.grad;
            local.pred_loss = pred.value;
            if (cfg.final_align && cfg.bc_enabled) {
                const Matrix q_final = softmax_rows(logits);
                BcOptions opt;
                const BcResult bc =
                    bc_surrogate(BatchProbs::checked(q_final), BatchProbs::checked(q_prev), opt);
                local.bc_loss = cfg.bc_weight * bc.value;
                axpy_inplace(grad_logits, bc.grad_q_logits, cfg.bc_weight);
            }
            local.total_loss = local.pred_loss + local.bc_loss;
            local.head_acc = batch_accuracy(logits, y);
            if (!std::isfinite(local.total_loss))
                throw DivergedError("final objective went non-finite", static_cast<int>(l), step);

            const ParamGrads grads = dense_backward_local(model.classifier, cache, grad_logits);
            apply_with_ledger(model.classifier, grads, cfg.opt, ledger);

            ledger.on_free(Tag::cache, cache_bytes);
            ledger.on_free(Tag::activation, out_bytes);
            cache.release();
            ledger.on_free(Tag::activation, v_prev.bytes() + q_prev.bytes());
            v_prev.release();
            q_prev.release();
            h_bytes = 0;
        }

        rep.per_layer.push_back(local);
        rep.live_after_update.push_back(ledger.live_transient());
    }
    return rep;
}

StepReport bp_train_step(Model& model, const Matrix& x, std::span<const int> y,
                         const TrainConfig& cfg, MemoryLedger& ledger, std::int64_t step) {
    check_batch(model, x, y, "bp_train_step");
    for (const auto& block : model.blocks)
        if (!std::holds_alternative<DenseBlock>(block))
            throw InvalidInputError("bp_train_step: end-to-end training covers dense stacks only");

    const std::size_t n_blocks = model.blocks.size();
    StepReport rep;
    rep.per_layer.assign(n_blocks + 1, LocalLossReport{});
    rep.live_after_update.reserve(n_blocks + 1);

    ledger.on_alloc(Tag::activation, x.bytes());

    std::vector<ForwardCache> caches(n_blocks);
    std::vector<Matrix> drop_masks(n_blocks);  // entries 0 or 1/keep
    const bool dropout = cfg.act_dropout > 0.0;
    const double keep = 1.0 - cfg.act_dropout;
    const Matrix* h = &x;
    for (std::size_t i = 0; i < n_blocks; ++i) {
        auto& layer = std::get<DenseBlock>(model.blocks[i]).layer;
        caches[i] = dense_forward(layer, *h, /*detach_input=*/false);
        ledger.on_alloc(Tag::cache,
                        caches[i].input_snapshot.bytes() + caches[i].pre_activation.bytes());
        ledger.on_alloc(Tag::activation, caches[i].output.bytes());
        if (dropout) {
            SeededRng rng = level_rng(cfg.seed, step, i + 1);
            drop_masks[i] = Matrix(caches[i].output.rows, caches[i].output.cols);
            for (std::size_t j = 0; j < drop_masks[i].data.size(); ++j)
                drop_masks[i].data[j] = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
            for (std::size_t j = 0; j < caches[i].output.data.size(); ++j)
                caches[i].output.data[j] *= drop_masks[i].data[j];
        }
        h = &caches[i].output;
    }

    ForwardCache top = dense_forward(model.classifier, *h, /*detach_input=*/false);
    ledger.on_alloc(Tag::cache, top.input_snapshot.bytes() + top.pre_activation.bytes());
    ledger.on_alloc(Tag::activation, top.output.bytes());

    if (!all_finite(top.output))
        throw DivergedError("final logits went non-finite", static_cast<int>(n_blocks + 1), step);
    const LossResult ce = cross_entropy(top.output, y, Reduction::mean, true);
    if (!std::isfinite(ce.value))
        throw DivergedError("cross-entropy went non-finite", static_cast<int>(n_blocks + 1), step);
    auto& final_report = rep.per_layer.back();
    final_report.pred_loss = ce.value;
    final_report.total_loss = ce.value;
    final_report.head_acc = batch_accuracy(top.output, y);

    FullGrads full = dense_backward_full(model.classifier, top, ce.grad);
    apply_with_ledger(model.classifier, full.params, cfg.opt, ledger);
    ledger.on_free(Tag::cache, top.input_snapshot.bytes() + top.pre_activation.bytes());
    ledger.on_free(Tag::activation, top.output.bytes());
    top.release();
    rep.live_after_update.push_back(ledger.live_transient());

    Matrix grad = std::move(full.grad_input);
    for (std::size_t idx = n_blocks; idx-- > 0;) {
        auto& layer = std::get<DenseBlock>(model.blocks[idx]).layer;
        if (dropout) {
            check_same_shape(grad, drop_masks[idx], "bp dropout");
            for (std::size_t j = 0; j < grad.data.size(); ++j)
                grad.data[j] *= drop_masks[idx].data[j];
        }
        FullGrads g = dense_backward_full(layer, caches[idx], grad);
        apply_with_ledger(layer, g.params, cfg.opt, ledger);
        ledger.on_free(Tag::cache,
                       caches[idx].input_snapshot.bytes() + caches[idx].pre_activation.bytes());
        ledger.on_free(Tag::activation, caches[idx].output.bytes());
        caches[idx].release();
        grad = std::move(g.grad_input);
        rep.live_after_update.push_back(ledger.live_transient());
    }
    ledger.on_free(Tag::activation, x.bytes());
    return rep;
}

// ------------------------------------------------------------------- eval

namespace {

Matrix infer_features(const Model& model, const Matrix& x, std::size_t levels) {
    Matrix h = x;
    for (std::size_t i = 0; i < levels; ++i) h = block_infer(model.blocks[i], h);
    return h;
}

}  // namespace

EvalResult evaluate(const Model& model, const Dataset& ds, std::size_t batch_size) {
    if (ds.size() == 0) throw InvalidInputError("evaluate: empty dataset");
    if (batch_size == 0) throw InvalidInputError("evaluate: zero batch size");
    double loss_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t start = 0; start < ds.size(); start += batch_size) {
        const std::size_t b = std::min(batch_size, ds.size() - start);
        Matrix x(b, ds.x.cols);
        for (std::size_t i = 0; i < b; ++i) {
            const auto row = ds.x.row(start + i);
            std::copy(row.begin(), row.end(), x.row(i).begin());
        }
        const std::span<const int> y(ds.labels.data() + start, b);
        Matrix h = infer_features(model, x, model.blocks.size());
        const Matrix logits = dense_infer(model.classifier, h);
        const LossResult ce = cross_entropy(logits, y, Reduction::sum, false);
        loss_sum += ce.value;
        hits += batch_hits(logits, y);
    }
    EvalResult res;
    res.accuracy = static_cast<double>(hits) / static_cast<double>(ds.size());
    res.mean_loss = loss_sum / static_cast<double>(ds.size());
    return res;
}

std::vector<LayerProbe> per_layer_probe(const Model& model, const HeadSet& heads,
                                        const Dataset& ds, std::size_t batch_size) {
    if (heads.heads.size() != model.depth())
        throw InvalidInputError("per_layer_probe: head count disagrees with model depth");
    if (ds.size() == 0) throw InvalidInputError("per_layer_probe: empty dataset");
    const std::size_t depth = model.depth();
    std::vector<LayerProbe> probes(depth + 1);
    for (std::size_t level = 0; level <= depth; ++level)
        probes[level].layer = static_cast<int>(level);

    std::vector<double> loss_sums(depth + 1, 0.0), bc_sums(depth + 1, 0.0);
    std::vector<std::size_t> hit_sums(depth + 1, 0);

    for (std::size_t start = 0; start < ds.size(); start += batch_size) {
        const std::size_t b = std::min(batch_size, ds.size() - start);
        Matrix h(b, ds.x.cols);
        for (std::size_t i = 0; i < b; ++i) {
            const auto row = ds.x.row(start + i);
            std::copy(row.begin(), row.end(), h.row(i).begin());
        }
        const std::span<const int> y(ds.labels.data() + start, b);
        Matrix q_prev;
        for (std::size_t level = 0; level <= depth; ++level) {
            Matrix v;
            if (level < depth) {
                if (level > 0) h = block_infer(model.blocks[level - 1], h);
                const Matrix hin = build_head_input(h, heads, {});  // zero label block
                v = project(heads.heads[level], hin, nullptr);
            } else {
                v = dense_infer(model.classifier, h);
            }
            const LossResult ce = cross_entropy(v, y, Reduction::sum, false);
            loss_sums[level] += ce.value;
            hit_sums[level] += batch_hits(v, y);
            Matrix q = softmax_rows(v);
            if (level > 0) {
                BcOptions opt;
                opt.reduction = Reduction::sum;
                opt.with_grad = false;
                bc_sums[level] +=
                    bc_surrogate(BatchProbs::checked(q), BatchProbs::checked(q_prev), opt).value;
            }
            q_prev = std::move(q);
        }
    }
    const double inv_n = 1.0 / static_cast<double>(ds.size());
    for (std::size_t level = 0; level <= depth; ++level) {
        probes[level].pred_loss = loss_sums[level] * inv_n;
        probes[level].bc_loss = bc_sums[level] * inv_n;
        probes[level].head_acc = static_cast<double>(hit_sums[level]) * inv_n;
    }
    return probes;
}

// ------------------------------------------------------------- epoch driver

TrainResult train_run(Model& model, HeadSet& heads, const Dataset& train, const Dataset& test,
                      const TrainConfig& cfg, MetricsWriter* metrics, MemoryLedger* ledger) {
    if (train.size() == 0) throw InvalidInputError("train_run: empty training set");
    if (cfg.batch_size == 0) throw InvalidInputError("train_run: zero batch size");
    if (cfg.epochs == 0) throw InvalidInputError("train_run: zero epochs");

    MemoryLedger local_ledger;
    MemoryLedger& led = ledger ? *ledger : local_ledger;
    register_model_with_ledger(model, led);

    TrainResult result;
    const std::size_t depth = model.depth();
    std::int64_t step = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        led.reset_peaks();

        SeededRng order_rng = SeededRng(mix_seed(cfg.seed, 0xE70C + epoch));
        std::vector<std::size_t> order;
        if (cfg.shuffle)
            order = order_rng.permutation(train.size());
        else {
            order.resize(train.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        }
        SeededRng aug_rng = order_rng.child(0xA06);

        std::vector<LocalLossReport> sums(depth);
        std::size_t n_batches = 0;

        for (std::size_t start = 0; start < train.size(); start += cfg.batch_size) {
            const std::size_t b = std::min(cfg.batch_size, train.size() - start);
            Matrix x(b, train.x.cols);
            std::vector<int> y(b);
            for (std::size_t i = 0; i < b; ++i) {
                const auto row = train.x.row(order[start + i]);
                std::copy(row.begin(), row.end(), x.row(i).begin());
                y[i] = train.labels[order[start + i]];
                if (cfg.augment_flip && train.channels > 0 && aug_rng.bernoulli(0.5))
                    flip_horizontal_inplace(x.row(i), train.channels, train.height, train.width);
            }
            const StepReport sr =
                cfg.method == Method::sll
                    ? sll_train_step(model, heads, x, y, cfg, led, ++step)
                    : bp_train_step(model, x, y, cfg, led, ++step);
            for (std::size_t l = 0; l < depth; ++l) {
                sums[l].pred_loss += sr.per_layer[l].pred_loss;
                sums[l].bc_loss += sr.per_layer[l].bc_loss;
                sums[l].total_loss += sr.per_layer[l].total_loss;
                sums[l].head_acc += sr.per_layer[l].head_acc;
            }
            ++n_batches;
        }

        EpochSummary summary;
        summary.epoch = static_cast<int>(epoch + 1);
        summary.layer_means.resize(depth);
        const double inv_nb = 1.0 / static_cast<double>(n_batches);
        for (std::size_t l = 0; l < depth; ++l) {
            summary.layer_means[l].pred_loss = sums[l].pred_loss * inv_nb;
            summary.layer_means[l].bc_loss = sums[l].bc_loss * inv_nb;
            summary.layer_means[l].total_loss = sums[l].total_loss * inv_nb;
            summary.layer_means[l].head_acc = sums[l].head_acc * inv_nb;
        }
        summary.peak_transient_bytes = led.peak_transient();
        result.peak_transient_bytes =
            std::max(result.peak_transient_bytes, summary.peak_transient_bytes);

        const bool last_epoch = epoch + 1 == cfg.epochs;
        const bool eval_now = last_epoch || cfg.target_acc > 0.0 ||
                              (epoch + 1) % std::max<std::size_t>(cfg.eval_every, 1) == 0;
        if (eval_now) {
            const EvalResult ev = evaluate(model, test, 256);
            summary.test_acc = ev.accuracy;
            result.final_test_acc = ev.accuracy;
        }
        const auto t1 = std::chrono::steady_clock::now();
        summary.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();

        if (metrics) {
            MetricsRow row;
            row.run_id = cfg.run_id;
            row.epoch = summary.epoch;
            for (std::size_t l = 0; l < depth; ++l) {
                row.layer = static_cast<int>(l + 1);
                row.pred_loss = summary.layer_means[l].pred_loss;
                row.bc_loss = summary.layer_means[l].bc_loss;
                row.total_loss = summary.layer_means[l].total_loss;
                row.head_acc = summary.layer_means[l].head_acc;
                row.test_acc = std::numeric_limits<double>::quiet_NaN();
                row.peak_bytes = 0;
                row.wall_ms = 0.0;
                metrics->write(row);
            }
            row.layer = -1;
            const auto& fin = summary.layer_means.back();
            row.pred_loss = fin.pred_loss;
            row.bc_loss = fin.bc_loss;
            row.total_loss = fin.total_loss;
            row.head_acc = fin.head_acc;
            row.test_acc = summary.test_acc >= 0.0 ? summary.test_acc
                                                   : std::numeric_limits<double>::quiet_NaN();
            row.peak_bytes = summary.peak_transient_bytes;
            row.wall_ms = summary.wall_ms;
            metrics->write(row);
        }

        result.epochs.push_back(std::move(summary));
        if (cfg.target_acc > 0.0 && result.final_test_acc >= cfg.target_acc) {
            result.reached_target = true;
            break;
        }
    }
    return result;
}

std::vector<DepthPoint> depth_sweep(Method method, std::span<const int> depths, std::size_t width,
                                    std::size_t batch, std::uint64_t seed) {
    if (width == 0 || batch == 0) throw InvalidInputError("depth_sweep: zero width or batch");
    std::vector<DepthPoint> points;
    points.reserve(depths.size());
    for (int depth : depths) {
        if (depth < 1) throw InvalidInputError("depth_sweep: depth must be >= 1");
        ArchSpec arch;
        arch.kind = ArchSpec::Kind::mlp;
        arch.hidden.assign(static_cast<std::size_t>(depth), width);
        Model model = make_model(arch, width, {}, 10, seed);
        HeadSet heads = make_heads(model, 0.9, false, 0, mix_seed(seed, 2));

        SeededRng rng(mix_seed(seed, 3));
        Matrix x = gaussian_matrix(batch, width, rng);
        std::vector<int> y(batch);
        for (std::size_t i = 0; i < batch; ++i) y[i] = static_cast<int>(i % 10);

        TrainConfig cfg;
        cfg.method = method;
        cfg.opt = OptConfig{OptKind::sgd, 0.01};
        cfg.seed = seed;
        MemoryLedger ledger;
        register_model_with_ledger(model, ledger);
        ledger.reset_peaks();
        if (method == Method::sll)
            sll_train_step(model, heads, x, y, cfg, ledger, 1);
        else
            bp_train_step(model, x, y, cfg, ledger, 1);
        points.push_back({depth, ledger.peak_transient()});
    }
    return points;
}

void register_model_with_ledger(const Model& model, MemoryLedger& ledger) {
    ledger.on_alloc(Tag::parameter, model.parameter_bytes());
    std::size_t opt_bytes = opt_state_bytes(model.classifier.opt);
    for (const auto& block : model.blocks) {
        if (const auto* d = std::get_if<DenseBlock>(&block))
            opt_bytes += opt_state_bytes(d->layer.opt);
        else
            opt_bytes += opt_state_bytes(std::get<ConvBlock>(block).conv.opt);
    }
    if (opt_bytes > 0) ledger.on_alloc(Tag::optimizer, opt_bytes);
}

}  // namespace sll
