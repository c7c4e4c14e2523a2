#pragma once

// Run configuration: every corpus, box-algebra, clustering and training knob,
// loadable from an INI file whose sections mirror the modules.

#include <filesystem>
#include <string>
#include <string_view>

#include "boxtax/corpus.hpp"
#include "boxtax/train.hpp"

namespace boxtax {

struct RunConfig {
  CorpusConfig corpus;
  TrainConfig train;

  void validate() const;

  /// Applies "section.key = value" settings from an INI file on top of the
  /// current values. Unknown sections or keys are errors.
  void merge_ini(const std::filesystem::path& path);
  /// Same for a single "section.key" override.
  void set(std::string_view dotted_key, const std::string& value);

  [[nodiscard]] std::string to_json() const;
  static RunConfig from_json(std::string_view text);
};

/// Defaults overlaid with the file when the path is non-empty.
RunConfig load_config(const std::filesystem::path& ini);

}  // namespace boxtax
