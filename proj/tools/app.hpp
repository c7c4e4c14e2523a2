#pragma once

// Subcommands of the boxtax tool. Each returns a process exit code and
// writes human-readable output to `out`; failures throw.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "boxtax/config.hpp"

namespace boxtax::app {

namespace fs = std::filesystem;

struct CommonOptions {
  fs::path config;                     // INI file, optional
  std::optional<std::uint64_t> seed;
  fs::path out_dir;
  std::vector<std::string> overrides;  // "section.key=value"
};

/// Defaults, then the INI file, then --set overrides; validated.
RunConfig resolve_config(const CommonOptions& common);

int cmd_preprocess(const fs::path& input, const CommonOptions& common, std::ostream& out);

struct TrainOptions {
  fs::path corpus_dir;
  std::optional<int> epochs;
  std::optional<int> levels;
  std::optional<int> leaf_topics;
  bool resume = false;
  bool quiet = false;
};

/// Writes checkpoint.json (latest), best.json, taxonomy.json and train.jsonl.
int cmd_train(const TrainOptions& opts, const CommonOptions& common, std::ostream& out);

/// Writes metrics.json and metrics.txt.
int cmd_eval(const fs::path& checkpoint, const fs::path& corpus_dir, const CommonOptions& common, std::ostream& out);

/// format is "json" or "text". Prints to `out` when no --out-dir is given.
int cmd_export(const fs::path& checkpoint, const std::string& format, int top_n, const CommonOptions& common,
               std::ostream& out);

int cmd_sample(const fs::path& checkpoint, int length, int count, const CommonOptions& common, std::ostream& out);

}  // namespace boxtax::app
