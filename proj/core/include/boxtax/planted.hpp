#pragma once

// Synthetic corpus with a planted two-level topic hierarchy, and scores for
// how well a trained model recovers it.

#include <cstdint>
#include <string>
#include <vector>

#include "boxtax/autodiff.hpp"
#include "boxtax/corpus.hpp"
#include "boxtax/model.hpp"

namespace boxtax {

struct PlantedConfig {
  int groups = 2;             // super-groups
  int leaves_per_group = 3;   // leaf word clusters per super-group
  int words_per_leaf = 50;
  int docs = 2000;
  int min_length = 40;
  int max_length = 60;
  double noise = 0.1;         // share of tokens drawn uniformly from the vocabulary
  double sibling_share = 0.2; // share drawn from the other leaves of the same group
  std::uint64_t seed = 7;

  [[nodiscard]] int leaves() const { return groups * leaves_per_group; }
  [[nodiscard]] int vocab_size() const { return groups * leaves_per_group * words_per_leaf; }
  void validate() const;
};

struct PlantedCorpus {
  PlantedConfig config;
  std::vector<std::string> docs;                 // space-separated tokens
  std::vector<int> doc_leaf;                     // planted leaf cluster per document
  std::vector<std::vector<std::string>> leaf_words;
  std::vector<int> leaf_group;                   // super-group of each leaf cluster
};

PlantedCorpus generate_planted(const PlantedConfig& cfg);

/// One-to-one assignment of rows (topics) to columns (clusters) maximizing
/// the total score; rows left without a column get -1. Exact, for up to 20
/// columns.
std::vector<int> best_assignment(const ad::Matrix& score);

/// Fraction of item pairs on which "same parent" agrees with "same group".
double pair_agreement(const std::vector<int>& parent, const std::vector<int>& group);

struct PlantedScore {
  double purity = 0.0;            // mean over leaf topics of the matched-cluster share of top-n keywords
  double parent_agreement = 0.0;  // over matched leaf-topic pairs
  std::vector<int> assignment;    // planted leaf cluster per learned leaf topic, -1 if unmatched
  std::vector<double> topic_purity;
};

/// Scores the leaf level and the links to the level above (if any).
PlantedScore score_planted(const PlantedCorpus& planted, const Vocab& vocab, const ModelState& state, int top_n = 10);

}  // namespace boxtax
