// Whole-training-step benchmarks: layer-local updates vs end-to-end backprop
// on the same synthetic batch, across depths.  Peak transient bytes are
// attached to each measurement as counters, so the memory story and the
// speed story come from the same run.
#include <benchmark/benchmark.h>

#include "sll/data.hpp"
#include "sll/telemetry.hpp"
#include "sll/trainer.hpp"

namespace {

struct StepFixture {
    sll::Model model;
    sll::HeadSet heads;
    sll::Dataset batch;
    sll::TrainConfig cfg;

    StepFixture(sll::Method method, int depth, std::size_t width, std::size_t batch_size) {
        std::string arch = "mlp:";
        for (int i = 0; i < depth; ++i) arch += (i ? "," : "") + std::to_string(width);
        batch = sll::make_blobs(batch_size, width, 10, 1.0, 17);
        model = sll::make_model(sll::ArchSpec::parse(arch), width, {}, 10, 5);
        heads = sll::make_heads(model, 0.9, false, 0, 23);
        cfg.method = method;
        cfg.opt.kind = sll::OptKind::sgd;
        cfg.opt.lr = 0.01;
        cfg.seed = 3;
    }
};

void bm_local_step(benchmark::State& state) {
    StepFixture fx(sll::Method::sll, static_cast<int>(state.range(0)), 256, 128);
    sll::MemoryLedger ledger;
    std::int64_t step = 0;
    for (auto _ : state)
        (void)sll::sll_train_step(fx.model, fx.heads, fx.batch.x, fx.batch.labels, fx.cfg,
                                  ledger, ++step);
    state.counters["peak_transient_bytes"] =
        static_cast<double>(ledger.peak_transient());
}

void bm_backprop_step(benchmark::State& state) {
    StepFixture fx(sll::Method::bp, static_cast<int>(state.range(0)), 256, 128);
    sll::MemoryLedger ledger;
    std::int64_t step = 0;
    for (auto _ : state)
        (void)sll::bp_train_step(fx.model, fx.batch.x, fx.batch.labels, fx.cfg, ledger, ++step);
    state.counters["peak_transient_bytes"] =
        static_cast<double>(ledger.peak_transient());
}

BENCHMARK(bm_local_step)->Arg(2)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_backprop_step)->Arg(2)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
