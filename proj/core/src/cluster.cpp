#include "boxtax/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "boxtax/errors.hpp"

namespace boxtax {

using ad::Matrix;

PreferenceMode parse_preference_mode(std::string_view s) {
  if (s == "median") return PreferenceMode::kMedian;
  if (s == "min") return PreferenceMode::kMin;
  throw PreconditionError("unknown preference mode '" + std::string(s) + "'");
}

std::string_view to_string(PreferenceMode m) { return m == PreferenceMode::kMedian ? "median" : "min"; }

void ClusterConfig::validate() const {
  if (!(damping >= 0.5 && damping < 1.0)) throw PreconditionError("cluster.damping must lie in [0.5, 1)");
  if (max_iter < 1 || convergence_window < 1) throw PreconditionError("cluster iteration limits must be positive");
  if (max_iter < convergence_window) throw PreconditionError("cluster.max_iter must be >= convergence_window");
  if (n_expand < 1) throw PreconditionError("cluster.n_expand must be positive");
  if (top_threshold < 1) throw PreconditionError("cluster.top_threshold must be positive");
}

BoxEmbed expand_topic_box(const BoxEmbed& topic, std::span<const BoxEmbed> keywords) {
  if (keywords.empty()) throw PreconditionError("expand_topic_box needs at least one keyword box");
  BoxEmbed out = topic;
  for (const auto& w : keywords) out = union_box(out, w);
  return out;
}

Matrix topic_affinity_matrix(std::span<const BoxEmbed> boxes, const BoxAlgebraConfig& cfg) {
  if (boxes.size() < 2) throw PreconditionError("topic_affinity_matrix needs at least two boxes");
  const auto n = static_cast<Eigen::Index>(boxes.size());
  Matrix a = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j) a(i, j) = asym_containment(boxes[j], boxes[i], cfg);
    }
  }
  return a;
}

double preference_value(const Matrix& affinity, PreferenceMode mode) {
  std::vector<double> off;
  for (Eigen::Index i = 0; i < affinity.rows(); ++i) {
    for (Eigen::Index j = 0; j < affinity.cols(); ++j) {
      if (i != j) off.push_back(affinity(i, j));
    }
  }
  if (off.empty()) return 0.0;
  if (mode == PreferenceMode::kMin) return *std::min_element(off.begin(), off.end());
  std::sort(off.begin(), off.end());
  const std::size_t m = off.size() / 2;
  return off.size() % 2 == 1 ? off[m] : 0.5 * (off[m - 1] + off[m]);
}

namespace {

// Deterministic uniform [0, 1) stream, identical on every platform.
class UnitStream {
 public:
  explicit UnitStream(std::uint64_t seed) : rng_(seed) {}
  double next() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 rng_;
};

ApResult single_cluster(const Matrix& s) {
  const auto n = s.rows();
  int best = 0;
  double best_sum = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < n; ++k) {
    const double col = s.col(k).sum();
    if (col > best_sum) {
      best_sum = col;
      best = static_cast<int>(k);
    }
  }
  ApResult r;
  r.exemplars = {best};
  r.labels.assign(static_cast<std::size_t>(n), 0);
  r.converged = true;
  return r;
}

ApResult all_singletons(Eigen::Index n) {
  ApResult r;
  r.exemplars.resize(static_cast<std::size_t>(n));
  std::iota(r.exemplars.begin(), r.exemplars.end(), 0);
  r.labels = r.exemplars;
  r.converged = true;
  return r;
}

int argmax_over(const Matrix& s, Eigen::Index row, const std::vector<int>& cols) {
  int best = 0;
  for (std::size_t c = 1; c < cols.size(); ++c) {
    if (s(row, cols[c]) > s(row, cols[static_cast<std::size_t>(best)])) best = static_cast<int>(c);
  }
  return best;
}

}  // namespace

ApResult affinity_propagation(const Matrix& similarity, const ClusterConfig& cfg,
                              std::span<const double> preferences) {
  cfg.validate();
  const Eigen::Index n = similarity.rows();
  if (similarity.cols() != n) throw DimensionError("affinity_propagation needs a square matrix");
  if (static_cast<Eigen::Index>(preferences.size()) != n) {
    throw DimensionError("affinity_propagation: one preference per item required");
  }
  if (n == 0) return {};
  if (n == 1) return all_singletons(1);

  Matrix s = similarity;
  for (Eigen::Index i = 0; i < n; ++i) s(i, i) = preferences[static_cast<std::size_t>(i)];

  // With every similarity and every preference equal, message passing cannot
  // separate the items: preference above the similarities makes everyone an
  // exemplar, otherwise everyone joins one cluster.
  {
    const double off = n > 1 ? s(0, 1) : 0.0;
    bool equal = true;
    for (Eigen::Index i = 0; i < n && equal; ++i) {
      for (Eigen::Index j = 0; j < n && equal; ++j) {
        if (i != j && s(i, j) != off) equal = false;
      }
      if (s(i, i) != s(0, 0)) equal = false;
    }
    if (equal) return s(0, 0) > off ? all_singletons(n) : single_cluster(s);
  }

  // Tiny deterministic jitter breaks exact ties between candidate exemplars.
  {
    UnitStream u(0x5eed);
    constexpr double kEps = std::numeric_limits<double>::epsilon();
    constexpr double kTiny = std::numeric_limits<double>::min();
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      s.data()[i] += (kEps * s.data()[i] + kTiny * 100.0) * u.next();
    }
  }

  Matrix r = Matrix::Zero(n, n);
  Matrix a = Matrix::Zero(n, n);
  Matrix tmp(n, n);
  const double lambda = cfg.damping;
  std::vector<std::vector<char>> history(static_cast<std::size_t>(n),
                                         std::vector<char>(static_cast<std::size_t>(cfg.convergence_window), 0));
  ApResult result;
  int it = 0;
  for (; it < cfg.max_iter; ++it) {
    // responsibilities
    tmp = a + s;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      double first = -std::numeric_limits<double>::infinity();
      double second = -std::numeric_limits<double>::infinity();
      for (Eigen::Index k = 0; k < n; ++k) {
        const double v = tmp(i, k);
        if (v > first) {
          second = first;
          first = v;
          best = k;
        } else if (v > second) {
          second = v;
        }
      }
      for (Eigen::Index k = 0; k < n; ++k) {
        const double fresh = s(i, k) - (k == best ? second : first);
        r(i, k) = lambda * r(i, k) + (1.0 - lambda) * fresh;
      }
    }
    // availabilities
    for (Eigen::Index k = 0; k < n; ++k) {
      double pos_sum = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (i != k) pos_sum += std::max(0.0, r(i, k));
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        double fresh;
        if (i == k) {
          fresh = pos_sum;
        } else {
          fresh = std::min(0.0, r(k, k) + pos_sum - std::max(0.0, r(i, k)));
        }
        a(i, k) = lambda * a(i, k) + (1.0 - lambda) * fresh;
      }
    }
    // exemplar-set stability
    int count = 0;
    for (Eigen::Index k = 0; k < n; ++k) {
      const char is_ex = a(k, k) + r(k, k) > 0.0 ? 1 : 0;
      history[static_cast<std::size_t>(k)][static_cast<std::size_t>(it % cfg.convergence_window)] = is_ex;
      count += is_ex;
    }
    if (it + 1 >= cfg.convergence_window) {
      bool stable = true;
      for (const auto& h : history) {
        const int on = std::accumulate(h.begin(), h.end(), 0);
        if (on != 0 && on != cfg.convergence_window) {
          stable = false;
          break;
        }
      }
      if (stable && count > 0) {
        result.converged = true;
        ++it;
        break;
      }
    }
  }
  result.iterations = it;

  std::vector<int> ex;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (a(k, k) + r(k, k) > 0.0) ex.push_back(static_cast<int>(k));
  }
  if (ex.empty()) {
    auto single = single_cluster(s);
    single.iterations = it;
    single.converged = false;
    return single;
  }
  // Assign, then move each exemplar to the member with the best total similarity.
  std::vector<int> c(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) c[static_cast<std::size_t>(i)] = argmax_over(s, i, ex);
  for (std::size_t k = 0; k < ex.size(); ++k) c[static_cast<std::size_t>(ex[k])] = static_cast<int>(k);
  for (std::size_t k = 0; k < ex.size(); ++k) {
    std::vector<int> members;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (c[static_cast<std::size_t>(i)] == static_cast<int>(k)) members.push_back(static_cast<int>(i));
    }
    int best = ex[k];
    double best_sum = -std::numeric_limits<double>::infinity();
    for (const int j : members) {
      double col = 0.0;
      for (const int i : members) col += s(i, j);
      if (col > best_sum) {
        best_sum = col;
        best = j;
      }
    }
    ex[k] = best;
  }
  std::sort(ex.begin(), ex.end());
  ex.erase(std::unique(ex.begin(), ex.end()), ex.end());
  for (Eigen::Index i = 0; i < n; ++i) c[static_cast<std::size_t>(i)] = argmax_over(s, i, ex);
  for (std::size_t k = 0; k < ex.size(); ++k) c[static_cast<std::size_t>(ex[k])] = static_cast<int>(k);
  result.exemplars = std::move(ex);
  result.labels = std::move(c);
  return result;
}

std::vector<int> assign_parents(const Matrix& theta) {
  if (theta.rows() == 0 || theta.cols() == 0) throw PreconditionError("assign_parents: empty relation matrix");
  std::vector<int> parent(static_cast<std::size_t>(theta.rows()));
  for (Eigen::Index i = 0; i < theta.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < theta.cols(); ++j) {
      if (theta(i, j) > theta(i, best)) best = j;
    }
    parent[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return parent;
}

Matrix containment_matrix(std::span<const BoxEmbed> children, std::span<const BoxEmbed> parents,
                          const BoxAlgebraConfig& cfg) {
  Matrix t(static_cast<Eigen::Index>(children.size()), static_cast<Eigen::Index>(parents.size()));
  for (std::size_t i = 0; i < children.size(); ++i) {
    for (std::size_t j = 0; j < parents.size(); ++j) {
      t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = asym_containment(children[i], parents[j], cfg);
    }
  }
  return t;
}

std::vector<std::vector<int>> topic_keywords(std::span<const BoxEmbed> topics, std::span<const BoxEmbed> words,
                                             int n, const BoxAlgebraConfig& cfg) {
  if (n < 1 || static_cast<std::size_t>(n) > words.size()) throw PreconditionError("topic_keywords: bad n");
  std::vector<double> word_lv(words.size());
  for (std::size_t j = 0; j < words.size(); ++j) word_lv[j] = gumbel_log_volume(words[j], cfg);
  std::vector<std::vector<int>> out;
  out.reserve(topics.size());
  std::vector<double> score(words.size());
  for (const auto& t : topics) {
    for (std::size_t j = 0; j < words.size(); ++j) score[j] = sym_affinity(t, words[j], cfg) - word_lv[j];
    std::vector<int> idx(words.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + n, idx.end(), [&](int a, int b) {
      const double sa = score[static_cast<std::size_t>(a)], sb = score[static_cast<std::size_t>(b)];
      return sa != sb ? sa > sb : a < b;
    });
    idx.resize(static_cast<std::size_t>(n));
    out.push_back(std::move(idx));
  }
  return out;
}

std::vector<int> RecurClusResult::level_sizes(int leaf_count) const {
  std::vector<int> sizes = {leaf_count};
  for (const auto& lvl : upper) sizes.push_back(static_cast<int>(lvl.size()));
  return sizes;
}

RecurClusResult recur_clus(std::span<const BoxEmbed> words, std::span<const BoxEmbed> leaves, int depth,
                           const ClusterConfig& cfg, const BoxAlgebraConfig& box_cfg) {
  if (depth < 2) throw PreconditionError("recur_clus needs a depth of at least 2");
  if (leaves.empty()) throw PreconditionError("recur_clus: no leaf topics");
  cfg.validate();
  RecurClusResult out;
  std::vector<BoxEmbed> current(leaves.begin(), leaves.end());
  const int n_expand = std::min<int>(cfg.n_expand, static_cast<int>(words.size()));
  for (int level = 1; level < depth; ++level) {
    if (current.size() < 2) {
      out.topped_out_early = true;
      break;
    }
    if (cfg.adaptive && static_cast<int>(current.size()) <= cfg.top_threshold) break;

    const auto keywords = topic_keywords(current, words, n_expand, box_cfg);
    std::vector<BoxEmbed> expanded;
    expanded.reserve(current.size());
    for (std::size_t i = 0; i < current.size(); ++i) {
      std::vector<BoxEmbed> kw;
      for (const int w : keywords[i]) kw.push_back(words[static_cast<std::size_t>(w)]);
      expanded.push_back(expand_topic_box(current[i], kw));
    }
    const Matrix affinity = topic_affinity_matrix(expanded, box_cfg);
    const bool below_top = level + 1 < depth;
    std::vector<double> prefs(current.size(), preference_value(affinity, cfg.preference));
    ApResult ap = affinity_propagation(affinity, cfg, prefs);
    if (ap.num_clusters() < 2 && below_top && cfg.preference != PreferenceMode::kMin) {
      prefs.assign(current.size(), preference_value(affinity, PreferenceMode::kMin));
      ap = affinity_propagation(affinity, cfg, prefs);
    }

    std::vector<BoxEmbed> next;
    for (int c = 0; c < ap.num_clusters(); ++c) {
      std::vector<BoxEmbed> members;
      for (std::size_t i = 0; i < current.size(); ++i) {
        if (ap.labels[i] == c) members.push_back(expanded[i]);
      }
      next.push_back(soft_union(members));
    }
    out.parents.push_back(assign_parents(containment_matrix(current, next, box_cfg)));
    out.membership.push_back(ap.labels);
    out.upper.push_back(next);
    if (next.size() == 1 && below_top) {
      out.topped_out_early = true;
      break;
    }
    if (cfg.adaptive && static_cast<int>(next.size()) <= cfg.top_threshold) break;
    current = std::move(next);
  }
  return out;
}

}  // namespace boxtax
