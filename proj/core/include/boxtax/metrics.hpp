#pragma once

// Intrinsic taxonomy metrics: NPMI coherence, topic uniqueness, their product
// and cross-level NPMI between parents and children.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "boxtax/model.hpp"
#include "boxtax/sparse.hpp"

namespace boxtax {

/// Document-level occurrence statistics of a reference corpus.
class DocOccurrence {
 public:
  DocOccurrence() = default;
  /// Documents are rows of `counts`; only `rows` are used (all when empty).
  DocOccurrence(const SparseMatrix& counts, std::span<const int> rows, std::string id = {});
  /// Each inner vector lists the word ids present in one document.
  DocOccurrence(const std::vector<std::vector<int>>& docs, int vocab_size, std::string id = {});

  [[nodiscard]] int num_docs() const { return num_docs_; }
  [[nodiscard]] int vocab_size() const { return static_cast<int>(postings_.size()); }
  [[nodiscard]] int doc_freq(int w) const;
  [[nodiscard]] int co_doc_freq(int a, int b) const;
  [[nodiscard]] const std::string& id() const { return id_; }

 private:
  std::vector<std::vector<int>> postings_;  // sorted document ids per word
  int num_docs_ = 0;
  std::string id_;
};

inline constexpr double kNpmiEps = 1e-12;
inline const std::vector<int> kDefaultTopNs{5, 10, 15};

/// Throws PreconditionError if either word never occurs in the reference.
double npmi_pair(int wi, int wj, const DocOccurrence& ref);

// The aggregate metrics below score a pair with an absent word as -1, like a
// pair that never co-occurs, instead of throwing.

/// Mean over topics and over each N of the mean pairwise NPMI of the top-N keywords.
double coherence_C(const std::vector<std::vector<int>>& keywords, const DocOccurrence& ref,
                   std::span<const int> top_ns = kDefaultTopNs);

double uniqueness_D(const std::vector<std::vector<int>>& keywords, std::span<const int> top_ns = kDefaultTopNs);

/// Mean NPMI over parent-only x child-only keyword pairs, averaged over each N.
/// An N whose difference sets leave either side empty contributes 0.
double clnpmi_HC(std::span<const int> parent, std::span<const int> child, const DocOccurrence& ref,
                 std::span<const int> top_ns = kDefaultTopNs);

struct LevelMetrics {
  int level = 0;  // 1-based, 1 = leaves
  int topics = 0;
  double C = 0.0;
  double D = 0.0;
  double CD = 0.0;
  bool has_hc = false;  // false at the top level
  double HC = 0.0;      // over links from this level to the one above
};

struct MetricReport {
  std::vector<LevelMetrics> levels;
  LevelMetrics overall;  // level 0; C and D averaged over levels, HC over all links
  std::vector<std::vector<std::vector<int>>> keywords;  // [level][topic] -> word ids
  std::string reference;

  [[nodiscard]] std::string to_json(const std::vector<std::string>& words = {}) const;
  [[nodiscard]] std::string to_text() const;
};

/// Metrics for given keyword lists per level and parent links (parents[k][i]
/// is the parent at level k+1 of topic i at level k).
MetricReport report(const std::vector<std::vector<std::vector<int>>>& keywords,
                    const std::vector<std::vector<int>>& parents, const DocOccurrence& ref,
                    std::span<const int> top_ns = kDefaultTopNs);

/// Metrics for the top max(top_ns) keywords of every topic of a model.
MetricReport report(const ModelState& state, const DocOccurrence& ref, std::span<const int> top_ns = kDefaultTopNs);

/// Baseline keyword lists: same shape, each list drawn uniformly without
/// replacement from the words that occur in the reference.
std::vector<std::vector<std::vector<int>>> random_keywords(const std::vector<std::vector<std::vector<int>>>& like,
                                                           const DocOccurrence& ref, std::uint64_t seed);

}  // namespace boxtax
