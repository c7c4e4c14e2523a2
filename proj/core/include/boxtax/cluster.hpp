#pragma once

// Recursive upper-level topic mining over topic boxes: keyword expansion,
// asymmetric affinity matrix, affinity propagation, soft-union
// re-initialization and parent assignment.

#include <span>
#include <string_view>
#include <vector>

#include "boxtax/autodiff.hpp"
#include "boxtax/box.hpp"

namespace boxtax {

enum class PreferenceMode { kMedian, kMin };

PreferenceMode parse_preference_mode(std::string_view s);
std::string_view to_string(PreferenceMode m);

struct ClusterConfig {
  double damping = 0.9;
  int max_iter = 200;
  int convergence_window = 15;
  PreferenceMode preference = PreferenceMode::kMedian;
  int n_expand = 5;
  int top_threshold = 10;
  bool adaptive = false;  // stop once a level has <= top_threshold topics

  void validate() const;
};

/// Hard union of a topic box with its keyword boxes.
BoxEmbed expand_topic_box(const BoxEmbed& topic, std::span<const BoxEmbed> keywords);

/// A[i][j] = log R_a(box_j | box_i) for i != j, zero diagonal.
ad::Matrix topic_affinity_matrix(std::span<const BoxEmbed> boxes, const BoxAlgebraConfig& cfg);

/// Median or minimum of the off-diagonal entries.
double preference_value(const ad::Matrix& affinity, PreferenceMode mode);

struct ApResult {
  std::vector<int> exemplars;  // item index of each cluster's exemplar, ascending
  std::vector<int> labels;     // cluster id in [0, exemplars.size()) per item
  int iterations = 0;
  bool converged = false;

  [[nodiscard]] int num_clusters() const { return static_cast<int>(exemplars.size()); }
};

/// Affinity propagation on a (possibly asymmetric) similarity matrix where
/// S[i][k] is how well k suits as exemplar for i. The diagonal is replaced by
/// `preferences` (one per item). Always returns an assignment.
ApResult affinity_propagation(const ad::Matrix& similarity, const ClusterConfig& cfg,
                              std::span<const double> preferences);

/// parent(i) = argmax_j theta[i][j], ties to the lowest j.
std::vector<int> assign_parents(const ad::Matrix& theta);

/// theta[i][j] = log R_a(child_i | parent_j).
ad::Matrix containment_matrix(std::span<const BoxEmbed> children, std::span<const BoxEmbed> parents,
                              const BoxAlgebraConfig& cfg);

/// Top-n word indices per topic by normalized symmetric affinity (the order
/// induced by the topic-word softmax).
std::vector<std::vector<int>> topic_keywords(std::span<const BoxEmbed> topics, std::span<const BoxEmbed> words,
                                             int n, const BoxAlgebraConfig& cfg);

struct RecurClusResult {
  /// upper[m] holds the boxes of level m + 2 (level 1 = leaves).
  std::vector<std::vector<BoxEmbed>> upper;
  /// parents[k][i]: parent of topic i at level k + 1 within level k + 2.
  std::vector<std::vector<int>> parents;
  /// membership[k][i]: AP cluster of topic i at level k + 1.
  std::vector<std::vector<int>> membership;
  /// True when clustering collapsed to one topic before reaching depth K.
  bool topped_out_early = false;

  [[nodiscard]] std::vector<int> level_sizes(int leaf_count) const;
};

RecurClusResult recur_clus(std::span<const BoxEmbed> words, std::span<const BoxEmbed> leaves, int depth,
                           const ClusterConfig& cfg, const BoxAlgebraConfig& box_cfg);

}  // namespace boxtax
