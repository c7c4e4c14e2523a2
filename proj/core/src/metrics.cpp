#include "boxtax/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "boxtax/errors.hpp"

namespace boxtax {

DocOccurrence::DocOccurrence(const SparseMatrix& counts, std::span<const int> rows, std::string id)
    : postings_(static_cast<std::size_t>(counts.cols())), id_(std::move(id)) {
  std::vector<int> all;
  if (rows.empty()) {
    all.resize(static_cast<std::size_t>(counts.rows()));
    std::iota(all.begin(), all.end(), 0);
    rows = all;
  }
  std::vector<int> sorted(rows.begin(), rows.end());
  std::sort(sorted.begin(), sorted.end());
  int d = 0;
  for (const int r : sorted) {
    counts.for_row(r, [&](int w, double v) {
      if (v > 0.0) postings_[static_cast<std::size_t>(w)].push_back(d);
    });
    ++d;
  }
  num_docs_ = d;
}

DocOccurrence::DocOccurrence(const std::vector<std::vector<int>>& docs, int vocab_size, std::string id)
    : postings_(static_cast<std::size_t>(vocab_size)), num_docs_(static_cast<int>(docs.size())), id_(std::move(id)) {
  for (std::size_t d = 0; d < docs.size(); ++d) {
    std::vector<int> words = docs[d];
    std::sort(words.begin(), words.end());
    words.erase(std::unique(words.begin(), words.end()), words.end());
    for (const int w : words) {
      if (w < 0 || w >= vocab_size) throw PreconditionError("DocOccurrence: word id out of range");
      postings_[static_cast<std::size_t>(w)].push_back(static_cast<int>(d));
    }
  }
}

int DocOccurrence::doc_freq(int w) const {
  if (w < 0 || w >= vocab_size()) throw PreconditionError("word id " + std::to_string(w) + " outside the reference");
  return static_cast<int>(postings_[static_cast<std::size_t>(w)].size());
}

int DocOccurrence::co_doc_freq(int a, int b) const {
  static_cast<void>(doc_freq(a));
  static_cast<void>(doc_freq(b));
  const auto& pa = postings_[static_cast<std::size_t>(a)];
  const auto& pb = postings_[static_cast<std::size_t>(b)];
  if (a == b) return static_cast<int>(pa.size());
  int n = 0;
  auto i = pa.begin();
  auto j = pb.begin();
  while (i != pa.end() && j != pb.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

namespace {

double npmi_counts(int di, int dj, int dij, int n) {
  if (dij == 0) return -1.0;
  const double N = n;
  const double pij = dij / N;
  if (dij == n) return 1.0;  // every document holds both words; the ratio is 0/0
  const double pi = di / N;
  const double pj = dj / N;
  return std::log((pij + kNpmiEps) / (pi * pj + kNpmiEps)) / -std::log(pij + kNpmiEps);
}

double npmi_lenient(int wi, int wj, const DocOccurrence& ref) {
  const int di = ref.doc_freq(wi);
  const int dj = ref.doc_freq(wj);
  if (di == 0 || dj == 0) return -1.0;
  return npmi_counts(di, dj, ref.co_doc_freq(wi, wj), ref.num_docs());
}

double mean_pairwise(std::span<const int> words, const DocOccurrence& ref) {
  double s = 0.0;
  int n = 0;
  for (std::size_t a = 0; a < words.size(); ++a) {
    for (std::size_t b = a + 1; b < words.size(); ++b) {
      s += npmi_lenient(words[a], words[b], ref);
      ++n;
    }
  }
  return n == 0 ? 0.0 : s / n;
}

void check_lengths(const std::vector<std::vector<int>>& keywords, std::span<const int> top_ns) {
  if (top_ns.empty()) throw PreconditionError("at least one top-N is required");
  const int need = *std::max_element(top_ns.begin(), top_ns.end());
  for (const auto& k : keywords) {
    if (static_cast<int>(k.size()) < need) {
      throw PreconditionError("keyword list too short: " + std::to_string(k.size()) + " < " + std::to_string(need));
    }
  }
}

}  // namespace

double npmi_pair(int wi, int wj, const DocOccurrence& ref) {
  const int di = ref.doc_freq(wi);
  const int dj = ref.doc_freq(wj);
  if (di == 0 || dj == 0) throw PreconditionError("npmi_pair: word absent from the reference corpus");
  return npmi_counts(di, dj, ref.co_doc_freq(wi, wj), ref.num_docs());
}

double coherence_C(const std::vector<std::vector<int>>& keywords, const DocOccurrence& ref,
                   std::span<const int> top_ns) {
  if (keywords.empty()) throw PreconditionError("coherence_C: no topics");
  check_lengths(keywords, top_ns);
  double s = 0.0;
  for (const int n : top_ns) {
    for (const auto& k : keywords) s += mean_pairwise(std::span(k).first(static_cast<std::size_t>(n)), ref);
  }
  return s / static_cast<double>(top_ns.size() * keywords.size());
}

double uniqueness_D(const std::vector<std::vector<int>>& keywords, std::span<const int> top_ns) {
  if (keywords.empty()) throw PreconditionError("uniqueness_D: no topics");
  check_lengths(keywords, top_ns);
  double s = 0.0;
  for (const int n : top_ns) {
    std::map<int, int> count;
    for (const auto& k : keywords) {
      std::vector<int> top(k.begin(), k.begin() + n);
      std::sort(top.begin(), top.end());
      top.erase(std::unique(top.begin(), top.end()), top.end());
      for (const int w : top) ++count[w];
    }
    for (const auto& k : keywords) {
      double t = 0.0;
      for (int i = 0; i < n; ++i) t += 1.0 / count[k[static_cast<std::size_t>(i)]];
      s += t / n;
    }
  }
  return s / static_cast<double>(top_ns.size() * keywords.size());
}

double clnpmi_HC(std::span<const int> parent, std::span<const int> child, const DocOccurrence& ref,
                 std::span<const int> top_ns) {
  if (top_ns.empty()) throw PreconditionError("clnpmi_HC: at least one top-N is required");
  double s = 0.0;
  for (const int n : top_ns) {
    if (static_cast<int>(parent.size()) < n || static_cast<int>(child.size()) < n) {
      throw PreconditionError("clnpmi_HC: keyword list too short");
    }
    const auto p = parent.first(static_cast<std::size_t>(n));
    const auto c = child.first(static_cast<std::size_t>(n));
    std::vector<int> p_only, c_only;
    for (const int w : p) {
      if (std::find(c.begin(), c.end(), w) == c.end()) p_only.push_back(w);
    }
    for (const int w : c) {
      if (std::find(p.begin(), p.end(), w) == p.end()) c_only.push_back(w);
    }
    if (p_only.empty() || c_only.empty()) continue;
    double t = 0.0;
    for (const int a : p_only) {
      for (const int b : c_only) t += npmi_lenient(a, b, ref);
    }
    s += t / static_cast<double>(p_only.size() * c_only.size());
  }
  return s / static_cast<double>(top_ns.size());
}

MetricReport report(const std::vector<std::vector<std::vector<int>>>& keywords,
                    const std::vector<std::vector<int>>& parents, const DocOccurrence& ref,
                    std::span<const int> top_ns) {
  if (keywords.empty()) throw PreconditionError("report: no levels");
  if (parents.size() + 1 < keywords.size()) throw DimensionError("report: missing parent links");
  MetricReport r;
  r.keywords = keywords;
  r.reference = ref.id();
  double hc_sum = 0.0;
  int links = 0;
  for (std::size_t k = 0; k < keywords.size(); ++k) {
    LevelMetrics m;
    m.level = static_cast<int>(k) + 1;
    m.topics = static_cast<int>(keywords[k].size());
    m.C = coherence_C(keywords[k], ref, top_ns);
    m.D = uniqueness_D(keywords[k], top_ns);
    m.CD = m.C * m.D;
    if (k + 1 < keywords.size()) {
      const auto& p = parents[k];
      if (p.size() != keywords[k].size()) throw DimensionError("report: parent links do not match topics");
      double s = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const auto& parent_kw = keywords[k + 1].at(static_cast<std::size_t>(p[i]));
        s += clnpmi_HC(parent_kw, keywords[k][i], ref, top_ns);
      }
      m.has_hc = !p.empty();
      m.HC = p.empty() ? 0.0 : s / static_cast<double>(p.size());
      hc_sum += s;
      links += static_cast<int>(p.size());
    }
    r.overall.C += m.C;
    r.overall.D += m.D;
    r.overall.topics += m.topics;
    r.levels.push_back(m);
  }
  const double nl = static_cast<double>(keywords.size());
  r.overall.C /= nl;
  r.overall.D /= nl;
  r.overall.CD = r.overall.C * r.overall.D;
  r.overall.has_hc = links > 0;
  r.overall.HC = links > 0 ? hc_sum / links : 0.0;
  return r;
}

MetricReport report(const ModelState& state, const DocOccurrence& ref, std::span<const int> top_ns) {
  if (top_ns.empty()) throw PreconditionError("report: at least one top-N is required");
  const int n = *std::max_element(top_ns.begin(), top_ns.end());
  std::vector<std::vector<std::vector<int>>> keywords;
  for (int k = 0; k < state.num_levels(); ++k) {
    const auto phi = topic_word_dist(state, k);
    auto& level = keywords.emplace_back();
    for (int t = 0; t < phi.rows(); ++t) level.push_back(top_keywords(phi, t, n));
  }
  return report(keywords, state.parents, ref, top_ns);
}

std::vector<std::vector<std::vector<int>>> random_keywords(const std::vector<std::vector<std::vector<int>>>& like,
                                                           const DocOccurrence& ref, std::uint64_t seed) {
  std::vector<int> present;
  for (int w = 0; w < ref.vocab_size(); ++w) {
    if (ref.doc_freq(w) > 0) present.push_back(w);
  }
  std::mt19937_64 rng(seed);
  auto out = like;
  for (auto& level : out) {
    for (auto& topic : level) {
      if (topic.size() > present.size()) throw PreconditionError("random_keywords: reference vocabulary too small");
      std::shuffle(present.begin(), present.end(), rng);
      std::copy_n(present.begin(), topic.size(), topic.begin());
    }
  }
  return out;
}

namespace {

nlohmann::ordered_json level_json(const LevelMetrics& m) {
  nlohmann::ordered_json j;
  j["level"] = m.level;
  j["topics"] = m.topics;
  j["C"] = m.C;
  j["D"] = m.D;
  j["CD"] = m.CD;
  j["HC"] = m.has_hc ? nlohmann::ordered_json(m.HC) : nlohmann::ordered_json(nullptr);
  return j;
}

}  // namespace

std::string MetricReport::to_json(const std::vector<std::string>& words) const {
  nlohmann::ordered_json j;
  j["reference"] = reference;
  j["levels"] = nlohmann::ordered_json::array();
  for (const auto& m : levels) j["levels"].push_back(level_json(m));
  j["overall"] = level_json(overall);
  j["overall"].erase("level");
  auto& kw = j["keywords"] = nlohmann::ordered_json::array();
  for (const auto& level : keywords) {
    auto lj = nlohmann::ordered_json::array();
    for (const auto& topic : level) {
      auto tj = nlohmann::ordered_json::array();
      for (const int w : topic) {
        if (words.empty()) {
          tj.push_back(w);
        } else {
          tj.push_back(words.at(static_cast<std::size_t>(w)));
        }
      }
      lj.push_back(std::move(tj));
    }
    kw.push_back(std::move(lj));
  }
  return j.dump(2) + "\n";
}

std::string MetricReport::to_text() const {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-8s %7s %9s %9s %9s %9s\n", "level", "topics", "C", "D", "C*D", "HC");
  os << buf;
  auto row = [&](const std::string& name, const LevelMetrics& m) {
    char hc[32];
    if (m.has_hc) {
      std::snprintf(hc, sizeof hc, "%9.4f", m.HC);
    } else {
      std::snprintf(hc, sizeof hc, "%9s", "-");
    }
    std::snprintf(buf, sizeof buf, "%-8s %7d %9.4f %9.4f %9.4f %s\n", name.c_str(), m.topics, m.C, m.D, m.CD, hc);
    os << buf;
  };
  for (const auto& m : levels) row(std::to_string(m.level), m);
  row("overall", overall);
  return os.str();
}

}  // namespace boxtax
