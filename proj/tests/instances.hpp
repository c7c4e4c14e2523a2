#pragma once

// Fixed instances shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <limits>
#include <random>
#include <vector>

#include "boxtax/box.hpp"
#include "boxtax/cluster.hpp"
#include "boxtax/corpus.hpp"
#include "boxtax/model.hpp"
#include "boxtax/train.hpp"

namespace boxtax::testing {

/// Sharp temperatures so that disjoint boxes score far below nested ones.
inline BoxAlgebraConfig sharp_config(int dim) {
  BoxAlgebraConfig c;
  c.dim = dim;
  c.vol_temp = 0.01;
  c.int_temp = 0.01;
  return c;
}

/// Eight boxes in two groups of four: group g sits in the corner
/// [0.05 + 0.5 g, 0.45 + 0.5 g]^dim with small per-box jitter.
inline std::vector<BoxEmbed> two_group_boxes(int dim = 6, std::uint64_t seed = 11) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.01, 0.01);
  std::vector<BoxEmbed> out;
  for (int g = 0; g < 2; ++g) {
    for (int i = 0; i < 4; ++i) {
      std::vector<double> lo(static_cast<std::size_t>(dim)), hi(static_cast<std::size_t>(dim));
      for (int d = 0; d < dim; ++d) {
        lo[static_cast<std::size_t>(d)] = 0.05 + 0.5 * g + jitter(rng);
        hi[static_cast<std::size_t>(d)] = 0.45 + 0.5 * g + jitter(rng);
      }
      out.push_back(BoxEmbed::from_corners(lo, hi));
    }
  }
  return out;
}

struct ExemplarSearch {
  std::vector<int> exemplars;
  std::vector<int> labels;  // index into exemplars
  double net_similarity = -std::numeric_limits<double>::infinity();
};

/// Maximizes the AP objective (sum of each item's similarity to its exemplar,
/// with preferences for exemplars choosing themselves) over every nonempty
/// exemplar subset. Exponential; meant for n <= 16.
inline ExemplarSearch exhaustive_exemplar_search(const ad::Matrix& s, const std::vector<double>& pref) {
  const int n = static_cast<int>(s.rows());
  ExemplarSearch best;
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<int> ex;
    for (int k = 0; k < n; ++k) {
      if (mask & (1u << k)) ex.push_back(k);
    }
    double net = 0.0;
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        net += pref[static_cast<std::size_t>(i)];
        labels[static_cast<std::size_t>(i)] =
            static_cast<int>(std::find(ex.begin(), ex.end(), i) - ex.begin());
        continue;
      }
      int arg = 0;
      for (std::size_t c = 1; c < ex.size(); ++c) {
        if (s(i, ex[c]) > s(i, ex[static_cast<std::size_t>(arg)])) arg = static_cast<int>(c);
      }
      net += s(i, ex[static_cast<std::size_t>(arg)]);
      labels[static_cast<std::size_t>(i)] = arg;
    }
    if (net > best.net_similarity) best = {ex, labels, net};
  }
  return best;
}

/// True when two labelings induce the same partition.
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) {
      if ((a[i] == a[j]) != (b[i] == b[j])) return false;
    }
  }
  return true;
}

/// Toy instance for checking the gradient of the full training loss:
/// 5 documents over 10 words, D = 4, 3 leaf and 2 upper topics.
struct ToyInstance {
  TrainConfig cfg;
  ModelState state;
  ad::Matrix tfidf, counts, noise;
  std::vector<CoPair> pairs;
  double beta = 1.0;  // well above the warmup values so the ht gradient is not negligible
};

inline ToyInstance toy_instance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> word(0, 9);
  std::vector<std::vector<int>> docs(5);
  for (auto& d : docs) {
    for (int t = 0; t < 8; ++t) d.push_back(word(rng));
  }
  ToyInstance toy;
  toy.cfg.box.dim = 4;
  toy.cfg.levels = 2;
  toy.cfg.leaf_topics = 3;
  toy.cfg.hidden = 8;
  toy.state = init_model(toy.cfg.model_config(10), seed);
  std::vector<BoxEmbed> upper;
  std::normal_distribution<double> normal;
  for (int t = 0; t < 2; ++t) {
    std::vector<double> pmin(4), psize(4);
    for (auto& x : pmin) x = 0.3 * normal(rng);
    for (auto& x : psize) x = -0.5 + 0.1 * normal(rng);
    upper.push_back(make_box(pmin, psize));
  }
  BoxSlots level;
  level.assign(upper);
  toy.state.topics.push_back(std::move(level));
  toy.state.parents = {{0, 1, 1}};
  const SparseMatrix counts = count_matrix(docs, 10);
  const std::vector<int> rows{0, 1, 2, 3, 4};
  toy.counts = dense_rows(counts, rows);
  toy.tfidf = dense_rows(tfidf(counts), rows);
  toy.noise = ad::Matrix(5, 3);
  for (Eigen::Index i = 0; i < toy.noise.size(); ++i) toy.noise.data()[i] = normal(rng);
  const auto support = co_support(cooccurrence(docs, 10, 2));
  toy.pairs = sample_co_batch(support, 16, rng);
  return toy;
}

}  // namespace boxtax::testing
