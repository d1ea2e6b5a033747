#include <benchmark/benchmark.h>

#include <random>

#include "cood/diagnostics.hpp"
#include "cood/losses.hpp"
#include "cood/scoring.hpp"

namespace {

cood::Matrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  cood::Matrix m(rows, cols);
  for (double& v : m.values()) v = normal(rng);
  return m;
}

void BM_SymEig(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const cood::Matrix x = gaussian(2 * n, n, 1);
  const cood::Matrix gram = cood::matmul_tn(x, x);
  for (auto _ : state) benchmark::DoNotOptimize(cood::sym_eig(gram));
}
BENCHMARK(BM_SymEig)->Arg(16)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_EncoderForwardBackward(benchmark::State& state) {
  cood::Rng rng(2);
  const std::size_t sizes[] = {32, 256, 128, 128};
  const auto params = cood::init_encoder(sizes, rng);
  const cood::Matrix batch = gaussian(static_cast<std::size_t>(state.range(0)), 32, 3);
  const cood::Matrix grad = gaussian(batch.rows(), 128, 4);
  for (auto _ : state) {
    cood::EncoderTape tape;
    cood::encoder_forward(params, batch, &tape);
    benchmark::DoNotOptimize(cood::encoder_backward(params, tape, grad));
  }
}
BENCHMARK(BM_EncoderForwardBackward)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_SupClrLoss(benchmark::State& state) {
  const cood::Matrix f = cood::l2_normalize_rows(gaussian(256, 128, 5));
  std::vector<int> labels(256);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 8);
  for (auto _ : state) benchmark::DoNotOptimize(cood::supclr_loss_grad(f, labels, 0.07));
}
BENCHMARK(BM_SupClrLoss)->Unit(benchmark::kMillisecond);

void BM_MahalanobisFitScore(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const cood::Matrix train = cood::l2_normalize_rows(gaussian(800, d, 6));
  std::vector<int> labels(800);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 8);
  const cood::Matrix test = cood::l2_normalize_rows(gaussian(600, d, 7));
  for (auto _ : state) {
    const auto model = cood::fit_mahalanobis(train, labels);
    benchmark::DoNotOptimize(cood::score_mahalanobis(model, test));
  }
}
BENCHMARK(BM_MahalanobisFitScore)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_KdeScore(benchmark::State& state) {
  const cood::Matrix train = cood::l2_normalize_rows(gaussian(static_cast<std::size_t>(state.range(0)), 128, 8));
  const cood::Matrix test = cood::l2_normalize_rows(gaussian(100, 128, 9));
  const auto model = cood::fit_kde(train);
  for (auto _ : state) benchmark::DoNotOptimize(cood::score_kde(model, test));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(test.rows()));
}
BENCHMARK(BM_KdeScore)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

void BM_SpectralDecay(benchmark::State& state) {
  const cood::Matrix f = cood::l2_normalize_rows(gaussian(1000, 128, 10));
  for (auto _ : state) benchmark::DoNotOptimize(cood::spectral_decay(f));
}
BENCHMARK(BM_SpectralDecay)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
