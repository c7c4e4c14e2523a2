#include "boxtax/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "boxtax/errors.hpp"

namespace boxtax {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json matrix_json(const ad::Matrix& m) {
  ordered_json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["data"] = std::vector<double>(m.data(), m.data() + m.size());
  return j;
}

ad::Matrix matrix_from(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw PreconditionError("checkpoint: matrix size mismatch");
  ad::Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

ordered_json slot_json(const Slot& s) {
  ordered_json j;
  j["value"] = matrix_json(s.param.value);
  j["adam_m"] = matrix_json(s.adam.first_moment);
  j["adam_v"] = matrix_json(s.adam.second_moment);
  j["adam_step"] = s.adam.step;
  return j;
}

Slot slot_from(const json& j) {
  Slot s(matrix_from(j.at("value")));
  s.adam.first_moment = matrix_from(j.at("adam_m"));
  s.adam.second_moment = matrix_from(j.at("adam_v"));
  s.adam.step = j.at("adam_step").get<std::int64_t>();
  return s;
}

ordered_json boxes_json(const BoxSlots& b) {
  ordered_json j;
  j["params_min"] = slot_json(b.params_min);
  j["params_size"] = slot_json(b.params_size);
  return j;
}

BoxSlots boxes_from(const json& j) {
  BoxSlots b;
  b.params_min = slot_from(j.at("params_min"));
  b.params_size = slot_from(j.at("params_size"));
  return b;
}

ordered_json model_config_json(const ModelConfig& c) {
  ordered_json j;
  j["dim"] = c.box.dim;
  j["vol_temp"] = c.box.vol_temp;
  j["int_temp"] = c.box.int_temp;
  j["log_eps"] = c.box.log_eps;
  j["vocab_size"] = c.vocab_size;
  j["hidden"] = c.hidden;
  j["latent"] = c.latent;
  j["leaf_topics"] = c.leaf_topics;
  j["levels"] = c.levels;
  return j;
}

ModelConfig model_config_from(const json& j) {
  ModelConfig c;
  c.box.dim = j.at("dim").get<int>();
  c.box.vol_temp = j.at("vol_temp").get<double>();
  c.box.int_temp = j.at("int_temp").get<double>();
  c.box.log_eps = j.at("log_eps").get<double>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.latent = j.at("latent").get<int>();
  c.leaf_topics = j.at("leaf_topics").get<int>();
  c.levels = j.at("levels").get<int>();
  return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const ModelState& s = ckpt.state;
  ordered_json j;
  j["schema"] = kCheckpointSchema;
  j["config"] = json::parse(ckpt.config.to_json());
  j["vocab_hash"] = ckpt.vocab_hash;
  j["vocab"] = ckpt.words;
  j["progress"] = {{"next_epoch", ckpt.progress.next_epoch},
                   {"best_epoch", ckpt.progress.best_epoch},
                   {"best_valid_elbo", ckpt.progress.best_valid_elbo}};
  j["model_config"] = model_config_json(s.config);
  const Encoder& e = s.encoder;
  j["encoder"] = {{"hidden_w", slot_json(e.hidden_w)}, {"hidden_b", slot_json(e.hidden_b)},
                  {"mu_w", slot_json(e.mu_w)},         {"mu_b", slot_json(e.mu_b)},
                  {"sigma_w", slot_json(e.sigma_w)},   {"sigma_b", slot_json(e.sigma_b)},
                  {"pi_w", slot_json(e.pi_w)},         {"pi_b", slot_json(e.pi_b)}};
  j["word_boxes"] = boxes_json(s.words);
  j["topics"] = ordered_json::array();
  for (const auto& t : s.topics) j["topics"].push_back(boxes_json(t));
  j["parents"] = s.parents;

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Write then rename so an interrupted save never clobbers the last good file.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw PreconditionError("cannot write " + tmp.string());
    out << j.dump() << '\n';
    if (!out) throw PreconditionError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PreconditionError("cannot read checkpoint " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw PreconditionError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  if (j.value("schema", std::string{}) != kCheckpointSchema) {
    throw PreconditionError("unsupported checkpoint schema in " + path.string());
  }
  try {
    Checkpoint c;
    c.config = RunConfig::from_json(j.at("config").dump());
    c.vocab_hash = j.at("vocab_hash").get<std::string>();
    c.words = j.at("vocab").get<std::vector<std::string>>();
    const auto& p = j.at("progress");
    c.progress.next_epoch = p.at("next_epoch").get<int>();
    c.progress.best_epoch = p.at("best_epoch").get<int>();
    c.progress.best_valid_elbo = p.at("best_valid_elbo").get<double>();
    ModelState& s = c.state;
    s.config = model_config_from(j.at("model_config"));
    const auto& e = j.at("encoder");
    s.encoder.hidden_w = slot_from(e.at("hidden_w"));
    s.encoder.hidden_b = slot_from(e.at("hidden_b"));
    s.encoder.mu_w = slot_from(e.at("mu_w"));
    s.encoder.mu_b = slot_from(e.at("mu_b"));
    s.encoder.sigma_w = slot_from(e.at("sigma_w"));
    s.encoder.sigma_b = slot_from(e.at("sigma_b"));
    s.encoder.pi_w = slot_from(e.at("pi_w"));
    s.encoder.pi_b = slot_from(e.at("pi_b"));
    s.words = boxes_from(j.at("word_boxes"));
    for (const auto& t : j.at("topics")) s.topics.push_back(boxes_from(t));
    s.parents = j.at("parents").get<std::vector<std::vector<int>>>();
    if (s.parents.size() + 1 != s.topics.size() && !(s.topics.empty() && s.parents.empty())) {
      throw PreconditionError("checkpoint: parent links do not match the levels");
    }
    return c;
  } catch (const json::exception& e) {
    throw PreconditionError("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

Taxonomy build_taxonomy(const ModelState& state, int top_n) {
  Taxonomy tax;
  for (int k = 0; k < state.num_levels(); ++k) {
    const auto phi = topic_word_dist(state, k);
    auto& level = tax.levels.emplace_back();
    for (int t = 0; t < phi.rows(); ++t) {
      TaxonomyTopic topic{t, -1, {}};
      if (k + 1 < state.num_levels()) topic.parent = state.parents.at(static_cast<std::size_t>(k)).at(static_cast<std::size_t>(t));
      for (const int w : top_keywords(phi, t, top_n)) topic.keywords.push_back({w, phi(t, w)});
      level.push_back(std::move(topic));
    }
  }
  return tax;
}

std::string taxonomy_json(const Taxonomy& tax, const std::vector<std::string>& words, const RunConfig& config,
                          const std::string& vocab_hash) {
  ordered_json j;
  j["levels"] = ordered_json::array();
  for (std::size_t k = 0; k < tax.levels.size(); ++k) {
    auto level = ordered_json::array();
    for (const auto& t : tax.levels[k]) {
      ordered_json tj;
      tj["id"] = t.id;
      tj["level"] = k + 1;
      tj["parent"] = t.parent < 0 ? ordered_json(nullptr) : ordered_json(t.parent);
      tj["keywords"] = ordered_json::array();
      for (const auto& kw : t.keywords) {
        tj["keywords"].push_back({{"word", words.at(static_cast<std::size_t>(kw.word))}, {"weight", kw.weight}});
      }
      level.push_back(std::move(tj));
    }
    j["levels"].push_back(std::move(level));
  }
  j["config"] = ordered_json::parse(config.to_json());
  j["vocab_hash"] = vocab_hash;
  return j.dump(2) + "\n";
}

namespace {

void emit_topic(std::ostringstream& os, const Taxonomy& tax, const std::vector<std::string>& words, int level,
                int id, int depth) {
  const auto& t = tax.levels[static_cast<std::size_t>(level)][static_cast<std::size_t>(id)];
  os << std::string(static_cast<std::size_t>(2 * depth), ' ') << "[L" << level + 1 << " T" << id << "]";
  for (const auto& kw : t.keywords) os << ' ' << words.at(static_cast<std::size_t>(kw.word));
  os << '\n';
  if (level == 0) return;
  for (const auto& child : tax.levels[static_cast<std::size_t>(level - 1)]) {
    if (child.parent == id) emit_topic(os, tax, words, level - 1, child.id, depth + 1);
  }
}

}  // namespace

std::string taxonomy_text(const Taxonomy& tax, const std::vector<std::string>& words) {
  std::ostringstream os;
  if (tax.levels.empty()) return {};
  const int top = static_cast<int>(tax.levels.size()) - 1;
  for (const auto& t : tax.levels.back()) emit_topic(os, tax, words, top, t.id, 0);
  return os.str();
}

}  // namespace boxtax
