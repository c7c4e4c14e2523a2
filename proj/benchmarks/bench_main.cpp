#include <benchmark/benchmark.h>

#include <random>

#include "boxtax/box.hpp"
#include "boxtax/box_ops.hpp"
#include "boxtax/cluster.hpp"
#include "boxtax/planted.hpp"
#include "boxtax/train.hpp"

namespace boxtax {
namespace {

ad::Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double mean = 0.0) {
  std::normal_distribution<double> d(mean, 1.0);
  ad::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

void BM_SymAffinity(benchmark::State& st) {
  BoxAlgebraConfig cfg;
  cfg.dim = static_cast<int>(st.range(0));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  auto vec = [&] {
    std::vector<double> v(static_cast<std::size_t>(cfg.dim));
    for (auto& x : v) x = n(rng);
    return v;
  };
  const auto a = make_box(vec(), vec()), b = make_box(vec(), vec());
  for (auto _ : st) benchmark::DoNotOptimize(sym_affinity(a, b, cfg));
}
BENCHMARK(BM_SymAffinity)->Arg(10)->Arg(50);

// Topics x vocabulary intersection, forward and backward.
void BM_PairwiseIntersection(benchmark::State& st) {
  BoxAlgebraConfig cfg;
  const auto topics = st.range(0), words = st.range(1);
  std::mt19937_64 rng(2);
  ad::Parameter tmin(random_matrix(rng, topics, cfg.dim)), tsize(random_matrix(rng, topics, cfg.dim, -1.0));
  ad::Parameter wmin(random_matrix(rng, words, cfg.dim)), wsize(random_matrix(rng, words, cfg.dim, -2.0));
  for (auto _ : st) {
    ad::Graph g;
    const auto t = box_corners(g.parameter(tmin), g.parameter(tsize));
    const auto w = box_corners(g.parameter(wmin), g.parameter(wsize));
    const auto out = ad::sum(pairwise_log_intersection(t, w, cfg));
    g.backward(out);
    benchmark::DoNotOptimize(out.scalar());
  }
  st.SetItemsProcessed(st.iterations() * topics * words);
}
BENCHMARK(BM_PairwiseIntersection)->Args({10, 300})->Args({50, 2000})->Unit(benchmark::kMillisecond);

void BM_AffinityPropagation(benchmark::State& st) {
  std::mt19937_64 rng(3);
  const ad::Matrix s = random_matrix(rng, st.range(0), st.range(0));
  const std::vector<double> pref(static_cast<std::size_t>(s.rows()), preference_value(s, PreferenceMode::kMedian));
  for (auto _ : st) benchmark::DoNotOptimize(affinity_propagation(s, ClusterConfig{}, pref).iterations);
}
BENCHMARK(BM_AffinityPropagation)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

// One training batch (forward and backward) on the planted corpus.
void BM_BatchLoss(benchmark::State& st) {
  const auto planted = generate_planted(PlantedConfig{});
  CorpusConfig cc;
  cc.min_count = 1;
  cc.use_default_stopwords = false;
  const Corpus corpus = build_corpus(planted.docs, cc);
  TrainConfig cfg;
  cfg.levels = 2;
  cfg.leaf_topics = 6;
  cfg.batch_size = static_cast<int>(st.range(0));
  ModelState state = initialize(corpus, cfg);
  std::vector<int> rows;
  for (int r = 0; r < cfg.batch_size; ++r) rows.push_back(r);
  const ad::Matrix counts = dense_rows(corpus.counts, rows);
  const ad::Matrix tfidf = dense_rows(corpus.tfidf, rows);
  std::mt19937_64 rng(4);
  const ad::Matrix noise = random_matrix(rng, cfg.batch_size, cfg.leaf_topics);
  const auto support = co_support(corpus.cooc);
  const auto pairs = sample_co_batch(support, cfg.co_batch_size, rng);
  for (auto _ : st) {
    ad::Graph g;
    const GlobalVars gv = bind_model(state, g);
    const auto loss = batch_loss(state, gv, tfidf, counts, noise, pairs, cfg.beta_max, cfg);
    g.backward(loss.total);
    benchmark::DoNotOptimize(loss.total.scalar());
  }
}
BENCHMARK(BM_BatchLoss)->Arg(32)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace boxtax

BENCHMARK_MAIN();
