#include "boxtax/config.hpp"

#include <boost/algorithm/string/split.hpp>
#include <boost/algorithm/string/trim.hpp>
#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include "boxtax/errors.hpp"

namespace boxtax {

namespace {

// Calls f(section, key, field&) for every configurable field.
template <typename F>
void visit_fields(RunConfig& c, F&& f) {
  auto& co = c.corpus;
  f("corpus", "min_count", co.min_count);
  f("corpus", "max_vocab", co.max_vocab);
  f("corpus", "window", co.window);
  f("corpus", "train_ratio", co.ratios.train);
  f("corpus", "valid_ratio", co.ratios.valid);
  f("corpus", "test_ratio", co.ratios.test);
  f("corpus", "seed", co.seed);
  f("corpus", "default_stopwords", co.use_default_stopwords);
  f("corpus", "extra_stopwords", co.extra_stopwords);

  auto& t = c.train;
  f("box", "dim", t.box.dim);
  f("box", "vol_temp", t.box.vol_temp);
  f("box", "int_temp", t.box.int_temp);
  f("box", "log_eps", t.box.log_eps);

  f("cluster", "damping", t.cluster.damping);
  f("cluster", "max_iter", t.cluster.max_iter);
  f("cluster", "convergence_window", t.cluster.convergence_window);
  f("cluster", "preference", t.cluster.preference);
  f("cluster", "n_expand", t.cluster.n_expand);
  f("cluster", "top_threshold", t.cluster.top_threshold);
  f("cluster", "adaptive", t.cluster.adaptive);

  f("train", "k", t.levels);
  f("train", "leaf_topics", t.leaf_topics);
  f("train", "hidden", t.hidden);
  f("train", "latent", t.latent);
  f("train", "margin", t.margin);
  f("train", "alpha", t.alpha);
  f("train", "beta_max", t.beta_max);
  f("train", "gamma", t.gamma);
  f("train", "epochs", t.epochs);
  f("train", "batch_size", t.batch_size);
  f("train", "co_batch_size", t.co_batch_size);
  f("train", "clip_norm", t.clip_norm);
  f("train", "learning_rate", t.adam.learning_rate);
  f("train", "seed", t.seed);
}

void parse_into(const std::string& raw, bool& out) {
  const std::string v = boost::algorithm::trim_copy(raw);
  if (v == "true" || v == "1" || v == "yes" || v == "on") {
    out = true;
  } else if (v == "false" || v == "0" || v == "no" || v == "off") {
    out = false;
  } else {
    throw PreconditionError("not a boolean: '" + raw + "'");
  }
}

void parse_into(const std::string& raw, PreferenceMode& out) {
  out = parse_preference_mode(boost::algorithm::trim_copy(raw));
}

void parse_into(const std::string& raw, std::vector<std::string>& out) {
  out.clear();
  std::vector<std::string> parts;
  boost::algorithm::split(parts, raw, [](char ch) { return ch == ','; });
  for (auto& p : parts) {
    boost::algorithm::trim(p);
    if (!p.empty()) out.push_back(p);
  }
}

template <typename T>
void parse_into(const std::string& raw, T& out) {
  try {
    out = boost::lexical_cast<T>(boost::algorithm::trim_copy(raw));
  } catch (const boost::bad_lexical_cast&) {
    throw PreconditionError("cannot parse '" + raw + "'");
  }
}

template <typename T>
nlohmann::ordered_json to_json_value(const T& v) {
  return v;
}
nlohmann::ordered_json to_json_value(const PreferenceMode& v) { return std::string(to_string(v)); }

template <typename T>
void from_json_value(const nlohmann::json& j, T& out) {
  out = j.get<T>();
}
void from_json_value(const nlohmann::json& j, PreferenceMode& out) { out = parse_preference_mode(j.get<std::string>()); }

}  // namespace

void RunConfig::validate() const {
  corpus.validate();
  train.validate();
}

void RunConfig::set(std::string_view dotted_key, const std::string& value) {
  const auto dot = dotted_key.find('.');
  if (dot == std::string_view::npos) throw PreconditionError("config key needs a section: " + std::string(dotted_key));
  const auto section = dotted_key.substr(0, dot);
  const auto key = dotted_key.substr(dot + 1);
  bool found = false;
  visit_fields(*this, [&](std::string_view s, std::string_view k, auto& field) {
    if (s != section || k != key) return;
    found = true;
    try {
      parse_into(value, field);
    } catch (const std::exception& e) {
      throw PreconditionError("config " + std::string(dotted_key) + ": " + e.what());
    }
  });
  if (!found) throw PreconditionError("unknown config key: " + std::string(dotted_key));
}

void RunConfig::merge_ini(const std::filesystem::path& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw PreconditionError("cannot read config " + path.string() + ": " + e.message());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw PreconditionError("config entry outside a section: " + section);
    for (const auto& [key, value] : body) set(section + "." + key, value.data());
  }
}

std::string RunConfig::to_json() const {
  RunConfig copy = *this;
  nlohmann::ordered_json j;
  visit_fields(copy, [&](const char* s, const char* k, auto& field) { j[s][k] = to_json_value(field); });
  return j.dump();
}

RunConfig RunConfig::from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  RunConfig c;
  visit_fields(c, [&](const char* s, const char* k, auto& field) {
    if (j.contains(s) && j[s].contains(k)) from_json_value(j[s][k], field);
  });
  return c;
}

RunConfig load_config(const std::filesystem::path& ini) {
  RunConfig c;
  if (!ini.empty()) c.merge_ini(ini);
  return c;
}

}  // namespace boxtax
