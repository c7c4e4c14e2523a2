#pragma once

// Checkpoint files (a single versioned JSON document) and taxonomy export.

#include <filesystem>
#include <string>
#include <vector>

#include "boxtax/config.hpp"
#include "boxtax/model.hpp"
#include "boxtax/train.hpp"

namespace boxtax {

inline constexpr const char* kCheckpointSchema = "boxtax.checkpoint/1";

struct Checkpoint {
  RunConfig config;
  std::string vocab_hash;
  std::vector<std::string> words;  // vocabulary, so export and sampling need no corpus
  TrainProgress progress;
  ModelState state;  // parameters, optimizer moments and parent links
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws PreconditionError on a missing file or an unknown schema tag.
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct KeywordWeight {
  int word;
  double weight;
};

struct TaxonomyTopic {
  int id;
  int parent;  // -1 at the top level
  std::vector<KeywordWeight> keywords;
};

/// levels[0] holds the leaves.
struct Taxonomy {
  std::vector<std::vector<TaxonomyTopic>> levels;
};

/// Top-n keywords of every topic with their topic-word probabilities.
Taxonomy build_taxonomy(const ModelState& state, int top_n = 15);

/// {"levels": [[{"id", "level", "parent", "keywords": [{"word", "weight"}]}]], "config", "vocab_hash"}
std::string taxonomy_json(const Taxonomy& tax, const std::vector<std::string>& words, const RunConfig& config,
                          const std::string& vocab_hash);

/// Top-level topics first, each child indented under its parent.
std::string taxonomy_text(const Taxonomy& tax, const std::vector<std::string>& words);

}  // namespace boxtax
