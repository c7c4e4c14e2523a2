#pragma once

// Corpus ingestion: tokenization, vocabulary, count / TF-IDF matrices,
// word co-occurrence statistics and the train/valid/test split.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "boxtax/sparse.hpp"

namespace boxtax {

const std::vector<std::string>& default_stopwords();

/// Lowercases, splits on non-alphanumeric bytes and drops pure-digit tokens.
/// Bytes >= 0x80 are kept so UTF-8 words survive intact.
std::vector<std::string> tokenize(std::string_view text);

class Vocab {
 public:
  Vocab() = default;
  explicit Vocab(std::vector<std::string> words, std::vector<std::int64_t> doc_freq = {});

  [[nodiscard]] int size() const { return static_cast<int>(words_.size()); }
  [[nodiscard]] const std::string& word(int i) const { return words_.at(static_cast<std::size_t>(i)); }
  [[nodiscard]] const std::vector<std::string>& words() const { return words_; }
  [[nodiscard]] const std::vector<std::int64_t>& doc_freq() const { return doc_freq_; }
  /// -1 when absent.
  [[nodiscard]] int find(std::string_view w) const;
  /// FNV-1a 64 over the newline-joined word list, as 16 hex digits.
  [[nodiscard]] std::string hash() const;

 private:
  std::vector<std::string> words_;
  std::vector<std::int64_t> doc_freq_;
  std::unordered_map<std::string, int> index_;
};

/// Keeps non-stopwords with corpus frequency >= min_count, the max_vocab most
/// frequent ones (ties broken lexicographically), in that order.
Vocab build_vocab(const std::vector<std::vector<std::string>>& docs,
                  const std::unordered_set<std::string>& stopwords, int min_count, int max_vocab);

/// Maps tokens to vocabulary ids, dropping out-of-vocabulary tokens.
std::vector<int> to_ids(const std::vector<std::string>& tokens, const Vocab& vocab);

/// docs x |V| raw counts.
SparseMatrix count_matrix(const std::vector<std::vector<int>>& docs, int vocab_size);

/// Entry = count * (ln((1 + N) / (1 + df)) + 1), with N and df taken over the
/// documents listed in idf_rows (all rows when empty).
SparseMatrix tfidf(const SparseMatrix& counts, const std::vector<int>& idf_rows = {});

struct Cooccurrence {
  SparseMatrix counts;           // symmetric X, zero diagonal
  std::vector<double> marginals; // X_j = sum_n X_jn

  /// P(i | j) = X_ij / X_j; 0 when X_j == 0.
  [[nodiscard]] double conditional(int i, int j) const;
};

/// Each token position adds 1 to X_ij for every in-vocabulary neighbour j != i
/// within `window` positions on either side (window 0 = whole document).
Cooccurrence cooccurrence(const std::vector<std::vector<int>>& docs, int vocab_size, int window);

enum class Split : std::uint8_t { kTrain = 0, kValid = 1, kTest = 2 };

struct SplitRatios {
  double train = 0.48;
  double valid = 0.12;
  double test = 0.40;
};

/// Deterministic shuffled assignment of n documents to splits.
std::vector<Split> split(std::size_t n, const SplitRatios& ratios, std::uint64_t seed);

struct CorpusConfig {
  int min_count = 5;
  int max_vocab = 15000;
  int window = 10;
  SplitRatios ratios;
  std::uint64_t seed = 42;
  bool use_default_stopwords = true;
  std::vector<std::string> extra_stopwords;

  void validate() const;
};

struct Corpus {
  Vocab vocab;
  SparseMatrix counts;
  SparseMatrix tfidf;
  Cooccurrence cooc;
  std::vector<Split> splits;

  [[nodiscard]] int num_docs() const { return counts.rows(); }
  [[nodiscard]] std::vector<int> rows_of(Split s) const;

  /// Writes vocab.json, docfreq.json, counts.txt, tfidf.txt, cooccur.txt and splits.txt.
  void save(const std::filesystem::path& dir) const;
  static Corpus load(const std::filesystem::path& dir);
};

/// Full pipeline over raw documents (one string each). Documents left without
/// any in-vocabulary token are dropped before splitting. IDF and
/// co-occurrence statistics come from the training split.
Corpus build_corpus(const std::vector<std::string>& raw_docs, const CorpusConfig& cfg);

/// Reads one document per line.
std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace boxtax
