#include <benchmark/benchmark.h>

#include <memory>
#include <random>

#include "vrc/datamodel.hpp"
#include "vrc/similarity.hpp"
#include "vrc/solver.hpp"

using namespace vrc;

namespace {

Matrix gaussian(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double sd) {
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = n(rng);
  return m;
}

std::shared_ptr<RelationNetParams> params(std::mt19937_64& rng, Eigen::Index d) {
  auto p = std::make_shared<RelationNetParams>(RelationNetParams::initialize(d, 1));
  p->b1 = gaussian(rng, d, 1, 0.1).col(0);
  p->b2 = gaussian(rng, d, 1, 0.1).col(0);
  return p;
}

// A bag of four images with p regions each: p(p-1) labels per image.
EmbeddingPotentials bag(std::size_t regions, Eigen::Index d, bool symmetric = true) {
  std::mt19937_64 rng(7);
  const auto labels = static_cast<Eigen::Index>(regions * (regions - 1));
  std::vector<Matrix> emb;
  for (int u = 0; u < 4; ++u) emb.push_back(gaussian(rng, d, labels, 1.0));
  return EmbeddingPotentials(std::move(emb), Scorer::relation(params(rng, d), symmetric));
}

void BM_RelationScore(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto d = state.range(0);
  const auto p = params(rng, d);
  const Vector a = gaussian(rng, d, 1, 1.0).col(0);
  const Vector b = gaussian(rng, d, 1, 1.0).col(0);
  for (auto _ : state) benchmark::DoNotOptimize(symmetric_relation_score(*p, a, b));
}
BENCHMARK(BM_RelationScore)->Arg(16)->Arg(64);

void BM_PairBlock(benchmark::State& state) {
  const auto pot = bag(static_cast<std::size_t>(state.range(0)), 64);
  const auto n = pot.num_labels(0);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (auto _ : state) benchmark::DoNotOptimize(pot.pair_similarity_block(0, idx, 1, idx));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * n));
}
BENCHMARK(BM_PairBlock)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_InferFree(benchmark::State& state) {
  const auto pot = bag(static_cast<std::size_t>(state.range(0)), 64);
  InferenceConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(infer_free(pot, cfg));
}
BENCHMARK(BM_InferFree)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_BruteForce(benchmark::State& state) {
  std::mt19937_64 rng(3);
  DensePotentials pot({20, 20, 20, 20});
  std::normal_distribution<double> n;
  for (std::size_t u = 0; u < 4; ++u)
    for (std::size_t v = 0; v < 4; ++v)
      if (u != v)
        for (Eigen::Index k = 0; k < pot.table(u, v).size(); ++k) pot.table(u, v).data()[k] = n(rng);
  for (auto _ : state) benchmark::DoNotOptimize(brute_force(pot));
}
BENCHMARK(BM_BruteForce)->Unit(benchmark::kMillisecond);

void BM_Nms(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 0.8);
  std::vector<Region> regions(static_cast<std::size_t>(state.range(0)));
  for (auto& r : regions) {
    const double x = u(rng), y = u(rng);
    r.box = {x, y, x + 0.2, y + 0.2};
    r.objectness = u(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(nms_topk(regions, 0.5, 100));
}
BENCHMARK(BM_Nms)->Arg(300)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
