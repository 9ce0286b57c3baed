#include <benchmark/benchmark.h>

#include "rangan/gan.hpp"
#include "rangan/synthgen.hpp"
#include "rangan/windowing.hpp"

using namespace rangan;

namespace {

Tensor random_matrix(int rows, int cols, Rng& rng, bool grad = false) {
    std::vector<double> data(static_cast<std::size_t>(rows) * cols);
    for (auto& v : data) v = rng.uniform(-1, 1);
    return Tensor({rows, cols}, std::move(data), grad);
}

ModelConfig bench_model_config() {
    ModelConfig mc;
    mc.window_size = 60;
    mc.feature_count = 5;
    return mc;
}

void BM_matmul(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng(1);
    Tensor a = random_matrix(n, n, rng);
    Tensor b = random_matrix(n, n, rng);
    for (auto _ : state) {
        Tape tape(Tape::Mode::NoGrad);
        benchmark::DoNotOptimize(tape.matmul(a, b).data().data());
    }
    state.SetItemsProcessed(state.iterations() * 2L * n * n * n);
}
BENCHMARK(BM_matmul)->Arg(32)->Arg(64)->Arg(128)->Arg(256);

void BM_attention_forward(benchmark::State& state) {
    const int batch = static_cast<int>(state.range(0));
    const int n = 60, d = 32;
    Rng rng(2);
    Tensor q = random_matrix(batch * n, d, rng);
    Tensor k = random_matrix(batch * n, d, rng);
    Tensor v = random_matrix(batch * n, d, rng);
    for (auto _ : state) {
        Tape tape(Tape::Mode::NoGrad);
        benchmark::DoNotOptimize(tape.attention_heads(q, k, v, batch, 4).data().data());
    }
}
BENCHMARK(BM_attention_forward)->Arg(1)->Arg(64);

void BM_generator_forward_backward(benchmark::State& state) {
    const int batch = static_cast<int>(state.range(0));
    ModelConfig mc = bench_model_config();
    GanModel model(mc, 3);
    Rng rng(4);
    Tensor z = random_matrix(batch, mc.latent_dim, rng, true);
    Tensor target = random_matrix(batch * mc.window_size, mc.feature_count, rng);
    for (auto _ : state) {
        Tape tape;
        Tensor out = model.generator().forward(tape, z, mc, nullptr);
        Tensor loss = tape.sum(tape.l1_rowblocks(out, target, batch));
        tape.backward(loss);
        z.zero_grad();
        for (auto& [name, p] : model.generator_params()) p.zero_grad();
        benchmark::DoNotOptimize(loss.value());
    }
}
BENCHMARK(BM_generator_forward_backward)->Arg(1)->Arg(64)->Arg(128);

void BM_train_epoch(benchmark::State& state) {
    GeneratedScenario scenario = generate(benchmark_spec(7, 2000));
    NormalizationParams norm = fit_minmax(scenario.frame);
    WindowSet windows = slide(apply_minmax(scenario.frame, norm), 60, 4);
    ModelConfig mc = bench_model_config();
    for (auto _ : state) {
        GanModel model(mc, 5);
        TrainConfig tc;
        tc.epochs = 1;
        tc.seed = 6;
        benchmark::DoNotOptimize(train(model, windows, tc).entries.size());
    }
}
BENCHMARK(BM_train_epoch)->Unit(benchmark::kMillisecond);

void BM_score_window(benchmark::State& state) {
    GeneratedScenario scenario = generate(benchmark_spec(7, 2000));
    NormalizationParams norm = fit_minmax(scenario.frame);
    WindowSet windows = slide(apply_minmax(scenario.frame, norm), 60, 10);
    ModelConfig mc = bench_model_config();
    GanModel model(mc, 5);
    ScoreConfig sc;
    std::size_t scored = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(score_windows(model, windows, sc).scores.data());
        scored += windows.count();
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(scored));
}
BENCHMARK(BM_score_window)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
