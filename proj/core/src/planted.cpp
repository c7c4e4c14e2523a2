#include "boxtax/planted.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <sstream>

#include "boxtax/errors.hpp"

namespace boxtax {

void PlantedConfig::validate() const {
  if (groups < 1 || leaves_per_group < 1 || words_per_leaf < 1 || docs < 1) {
    throw PreconditionError("planted: sizes must be positive");
  }
  if (min_length < 1 || max_length < min_length) throw PreconditionError("planted: bad document length range");
  if (noise < 0.0 || sibling_share < 0.0 || noise + sibling_share > 1.0) {
    throw PreconditionError("planted: noise and sibling_share must be shares summing to <= 1");
  }
}

namespace {

std::string word_name(int group, int leaf, int i) {
  std::ostringstream os;
  os << 'g' << group << 'l' << leaf << 'w' << i;
  return os.str();
}

}  // namespace

PlantedCorpus generate_planted(const PlantedConfig& cfg) {
  cfg.validate();
  PlantedCorpus pc;
  pc.config = cfg;
  std::vector<std::string> vocab;
  for (int g = 0; g < cfg.groups; ++g) {
    for (int l = 0; l < cfg.leaves_per_group; ++l) {
      auto& words = pc.leaf_words.emplace_back();
      for (int i = 0; i < cfg.words_per_leaf; ++i) words.push_back(word_name(g, l, i));
      vocab.insert(vocab.end(), words.begin(), words.end());
      pc.leaf_group.push_back(g);
    }
  }

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> leaf_dist(0, cfg.leaves() - 1);
  std::uniform_int_distribution<int> length_dist(cfg.min_length, cfg.max_length);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto pick = [&rng](const std::vector<std::string>& from) -> const std::string& {
    std::uniform_int_distribution<std::size_t> d(0, from.size() - 1);
    return from[d(rng)];
  };
  for (int d = 0; d < cfg.docs; ++d) {
    const int leaf = leaf_dist(rng);
    const int group = pc.leaf_group[static_cast<std::size_t>(leaf)];
    std::vector<int> siblings;
    for (int l = 0; l < cfg.leaves(); ++l) {
      if (l != leaf && pc.leaf_group[static_cast<std::size_t>(l)] == group) siblings.push_back(l);
    }
    std::uniform_int_distribution<std::size_t> sibling_dist(0, siblings.empty() ? 0 : siblings.size() - 1);
    const int length = length_dist(rng);
    std::string text;
    for (int t = 0; t < length; ++t) {
      const double u = unit(rng);
      const std::string* w = nullptr;
      if (u < cfg.noise) {
        w = &pick(vocab);
      } else if (u < cfg.noise + cfg.sibling_share && !siblings.empty()) {
        w = &pick(pc.leaf_words[static_cast<std::size_t>(siblings[sibling_dist(rng)])]);
      } else {
        w = &pick(pc.leaf_words[static_cast<std::size_t>(leaf)]);
      }
      if (!text.empty()) text += ' ';
      text += *w;
    }
    pc.docs.push_back(std::move(text));
    pc.doc_leaf.push_back(leaf);
  }
  return pc;
}

std::vector<int> best_assignment(const ad::Matrix& score) {
  const int rows = static_cast<int>(score.rows());
  const int cols = static_cast<int>(score.cols());
  if (cols > 20) throw PreconditionError("best_assignment: too many columns");
  const std::size_t masks = std::size_t{1} << cols;
  constexpr double kNone = -std::numeric_limits<double>::infinity();
  // best[r][mask]: best total over rows >= r when the columns in mask are taken.
  std::vector<std::vector<double>> best(static_cast<std::size_t>(rows) + 1, std::vector<double>(masks, kNone));
  std::fill(best[static_cast<std::size_t>(rows)].begin(), best[static_cast<std::size_t>(rows)].end(), 0.0);
  for (int r = rows - 1; r >= 0; --r) {
    for (std::size_t mask = 0; mask < masks; ++mask) {
      double b = best[static_cast<std::size_t>(r) + 1][mask];  // row left unmatched
      for (int c = 0; c < cols; ++c) {
        if (mask & (std::size_t{1} << c)) continue;
        b = std::max(b, score(r, c) + best[static_cast<std::size_t>(r) + 1][mask | (std::size_t{1} << c)]);
      }
      best[static_cast<std::size_t>(r)][mask] = b;
    }
  }
  std::vector<int> out(static_cast<std::size_t>(rows), -1);
  std::size_t mask = 0;
  for (int r = 0; r < rows; ++r) {
    const double target = best[static_cast<std::size_t>(r)][mask];
    for (int c = 0; c < cols; ++c) {
      if (mask & (std::size_t{1} << c)) continue;
      if (score(r, c) + best[static_cast<std::size_t>(r) + 1][mask | (std::size_t{1} << c)] == target) {
        out[static_cast<std::size_t>(r)] = c;
        mask |= std::size_t{1} << c;
        break;
      }
    }
  }
  return out;
}

double pair_agreement(const std::vector<int>& parent, const std::vector<int>& group) {
  if (parent.size() != group.size()) throw DimensionError("pair_agreement: size mismatch");
  int agree = 0, pairs = 0;
  for (std::size_t i = 0; i < parent.size(); ++i) {
    for (std::size_t j = i + 1; j < parent.size(); ++j) {
      agree += (parent[i] == parent[j]) == (group[i] == group[j]) ? 1 : 0;
      ++pairs;
    }
  }
  return pairs == 0 ? 1.0 : static_cast<double>(agree) / pairs;
}

PlantedScore score_planted(const PlantedCorpus& planted, const Vocab& vocab, const ModelState& state, int top_n) {
  if (state.num_levels() < 1) throw PreconditionError("score_planted: model has no topics");
  const int clusters = static_cast<int>(planted.leaf_words.size());
  std::vector<int> word_cluster(static_cast<std::size_t>(vocab.size()), -1);
  for (int c = 0; c < clusters; ++c) {
    for (const auto& w : planted.leaf_words[static_cast<std::size_t>(c)]) {
      const int id = vocab.find(w);
      if (id >= 0) word_cluster[static_cast<std::size_t>(id)] = c;
    }
  }
  const auto phi = topic_word_dist(state, 0);
  const int topics = static_cast<int>(phi.rows());
  ad::Matrix share = ad::Matrix::Zero(topics, clusters);
  for (int t = 0; t < topics; ++t) {
    for (const int w : top_keywords(phi, t, top_n)) {
      const int c = word_cluster[static_cast<std::size_t>(w)];
      if (c >= 0) share(t, c) += 1.0 / top_n;
    }
  }
  PlantedScore s;
  s.assignment = best_assignment(share);
  for (int t = 0; t < topics; ++t) {
    const int c = s.assignment[static_cast<std::size_t>(t)];
    s.topic_purity.push_back(c < 0 ? 0.0 : share(t, c));
    s.purity += s.topic_purity.back();
  }
  s.purity /= topics;

  if (state.num_levels() >= 2) {
    std::vector<int> parent, group;
    for (int t = 0; t < topics; ++t) {
      const int c = s.assignment[static_cast<std::size_t>(t)];
      if (c < 0) continue;
      parent.push_back(state.parents.at(0).at(static_cast<std::size_t>(t)));
      group.push_back(planted.leaf_group[static_cast<std::size_t>(c)]);
    }
    s.parent_agreement = pair_agreement(parent, group);
  }
  return s;
}

}  // namespace boxtax
