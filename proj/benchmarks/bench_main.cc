#include <benchmark/benchmark.h>

#include "tinydef/csdmam.h"
#include "tinydef/diffconv.h"
#include "tinydef/fws_loss.h"
#include "tinydef/random_init.h"
#include "tinydef/spd.h"

using namespace tinydef;

namespace {

// Args: channels, spatial side.
void BM_EEConvFused(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0)), s = static_cast<int>(state.range(1));
  Rng rng = make_rng(1);
  const FusedConv f = fuse(random_branch_set(c, c, rng));
  const Tensor4 x = random_tensor({1, c, s, s}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(eeconv_forward_fused(x, f));
  state.counters["MACs"] = static_cast<double>(eeconv_fused_macs(1, c, c, s, s));
}
BENCHMARK(BM_EEConvFused)->Args({8, 32})->Args({16, 64})->Args({32, 64});

void BM_EEConvTrainPath(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0)), s = static_cast<int>(state.range(1));
  Rng rng = make_rng(1);
  const ConvBranchSet bs = random_branch_set(c, c, rng);
  const Tensor4 x = random_tensor({1, c, s, s}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(eeconv_forward_train(x, bs));
  state.counters["MACs"] = static_cast<double>(eeconv_branchwise_macs(1, c, c, s, s));
}
BENCHMARK(BM_EEConvTrainPath)->Args({8, 32})->Args({16, 64})->Args({32, 64});

void BM_Dft2(benchmark::State& state) {
  const int s = static_cast<int>(state.range(0));
  Rng rng = make_rng(2);
  const Tensor4 x = random_tensor({1, 8, s, s}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(idft2(dft2(x)));
}
BENCHMARK(BM_Dft2)->Arg(16)->Arg(32)->Arg(64);

void BM_SpdConv(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0)), s = static_cast<int>(state.range(1));
  Rng rng = make_rng(3);
  const SpdConfig cfg(random_conv({2 * c, 4 * c}, rng));
  const Tensor4 x = random_tensor({1, c, s, s}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(spdconv_forward(x, cfg));
}
BENCHMARK(BM_SpdConv)->Args({8, 64})->Args({16, 64});

void BM_Csdmam(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0)), s = static_cast<int>(state.range(1));
  Rng rng = make_rng(4);
  const CsdmamParams p = random_csdmam(c, kDefaultStripKernel, rng);
  const Tensor4 x = random_tensor({1, c, s, s}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(csdmam_forward(x, p));
}
BENCHMARK(BM_Csdmam)->Args({16, 32})->Args({16, 64});

void BM_FwsLoss(benchmark::State& state) {
  const auto pairs = make_regress_pairs(1024, 5);
  const FwsConfig cfg;
  WiseState s;
  for (auto _ : state) {
    for (const auto& p : pairs) {
      const FwsResult r = fws_loss(p.pred, p.target, s, cfg);
      s = r.state;
      benchmark::DoNotOptimize(r.grad);
    }
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pairs.size()));
}
BENCHMARK(BM_FwsLoss);

}  // namespace
BENCHMARK_MAIN();
