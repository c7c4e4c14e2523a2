#include "boxtax/corpus.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "boxtax/errors.hpp"

namespace boxtax {

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

bool all_digits(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c) != 0; });
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && !all_digits(cur)) out.push_back(cur);
    cur.clear();
  };
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_word_byte(c)) {
      cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

// ---------------------------------------------------------------- Vocab

Vocab::Vocab(std::vector<std::string> words, std::vector<std::int64_t> doc_freq)
    : words_(std::move(words)), doc_freq_(std::move(doc_freq)) {
  if (doc_freq_.empty()) doc_freq_.assign(words_.size(), 0);
  if (doc_freq_.size() != words_.size()) throw DimensionError("vocab: doc_freq length mismatch");
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], static_cast<int>(i)).second) {
      throw PreconditionError("vocab: duplicate word '" + words_[i] + "'");
    }
  }
}

int Vocab::find(std::string_view w) const {
  const auto it = index_.find(std::string(w));
  return it == index_.end() ? -1 : it->second;
}

std::string Vocab::hash() const {
  std::uint64_t h = 14695981039346656037ULL;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 1099511628211ULL;
  };
  for (const auto& w : words_) {
    for (const char c : w) mix(static_cast<unsigned char>(c));
    mix('\n');
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

Vocab build_vocab(const std::vector<std::vector<std::string>>& docs,
                  const std::unordered_set<std::string>& stopwords, int min_count, int max_vocab) {
  if (min_count < 1) throw PreconditionError("min_count must be >= 1");
  if (max_vocab < 1) throw PreconditionError("max_vocab must be >= 1");
  std::unordered_map<std::string, std::int64_t> freq;
  std::unordered_map<std::string, std::int64_t> df;
  for (const auto& doc : docs) {
    std::unordered_set<std::string_view> seen;
    for (const auto& tok : doc) {
      if (stopwords.contains(tok)) continue;
      ++freq[tok];
      if (seen.insert(tok).second) ++df[tok];
    }
  }
  std::vector<std::pair<std::string, std::int64_t>> kept;
  for (auto& [w, n] : freq) {
    if (n >= min_count) kept.emplace_back(w, n);
  }
  std::sort(kept.begin(), kept.end(),
            [](const auto& a, const auto& b) { return a.second != b.second ? a.second > b.second : a.first < b.first; });
  if (kept.size() > static_cast<std::size_t>(max_vocab)) kept.resize(static_cast<std::size_t>(max_vocab));
  if (kept.empty()) throw PreconditionError("empty vocabulary after filtering");
  std::vector<std::string> words;
  std::vector<std::int64_t> dfs;
  for (auto& [w, n] : kept) {
    dfs.push_back(df[w]);
    words.push_back(std::move(w));
  }
  return Vocab(std::move(words), std::move(dfs));
}

std::vector<int> to_ids(const std::vector<std::string>& tokens, const Vocab& vocab) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    const int id = vocab.find(t);
    if (id >= 0) ids.push_back(id);
  }
  return ids;
}

// ---------------------------------------------------------------- matrices

SparseMatrix count_matrix(const std::vector<std::vector<int>>& docs, int vocab_size) {
  std::vector<Triplet> t;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (const int w : docs[d]) t.push_back({static_cast<int>(d), w, 1.0});
  }
  return SparseMatrix::from_triplets(static_cast<int>(docs.size()), vocab_size, std::move(t));
}

SparseMatrix tfidf(const SparseMatrix& counts, const std::vector<int>& idf_rows) {
  std::vector<int> rows = idf_rows;
  if (rows.empty()) {
    rows.resize(static_cast<std::size_t>(counts.rows()));
    std::iota(rows.begin(), rows.end(), 0);
  }
  std::vector<double> df(static_cast<std::size_t>(counts.cols()), 0.0);
  for (const int r : rows) {
    counts.for_row(r, [&](int c, double v) {
      if (v > 0.0) df[c] += 1.0;
    });
  }
  const double n = static_cast<double>(rows.size());
  std::vector<double> idf(df.size());
  for (std::size_t c = 0; c < df.size(); ++c) idf[c] = std::log((1.0 + n) / (1.0 + df[c])) + 1.0;
  std::vector<Triplet> t;
  t.reserve(counts.nnz());
  for (int r = 0; r < counts.rows(); ++r) {
    counts.for_row(r, [&](int c, double v) { t.push_back({r, c, v * idf[c]}); });
  }
  return SparseMatrix::from_triplets(counts.rows(), counts.cols(), std::move(t));
}

double Cooccurrence::conditional(int i, int j) const {
  const double xj = marginals.at(static_cast<std::size_t>(j));
  return xj > 0.0 ? counts.at(i, j) / xj : 0.0;
}

Cooccurrence cooccurrence(const std::vector<std::vector<int>>& docs, int vocab_size, int window) {
  if (window < 0) throw PreconditionError("co-occurrence window must be >= 0");
  std::unordered_map<std::uint64_t, double> acc;
  const auto v = static_cast<std::uint64_t>(vocab_size);
  for (const auto& doc : docs) {
    const auto n = static_cast<std::ptrdiff_t>(doc.size());
    for (std::ptrdiff_t p = 0; p < n; ++p) {
      const std::ptrdiff_t lo = window == 0 ? 0 : std::max<std::ptrdiff_t>(0, p - window);
      const std::ptrdiff_t hi = window == 0 ? n - 1 : std::min<std::ptrdiff_t>(n - 1, p + window);
      for (std::ptrdiff_t q = lo; q <= hi; ++q) {
        if (q == p || doc[q] == doc[p]) continue;
        acc[static_cast<std::uint64_t>(doc[p]) * v + static_cast<std::uint64_t>(doc[q])] += 1.0;
      }
    }
  }
  std::vector<Triplet> t;
  t.reserve(acc.size());
  for (const auto& [key, val] : acc) {
    t.push_back({static_cast<int>(key / v), static_cast<int>(key % v), val});
  }
  Cooccurrence out;
  out.counts = SparseMatrix::from_triplets(vocab_size, vocab_size, std::move(t));
  out.marginals.resize(static_cast<std::size_t>(vocab_size));
  for (int j = 0; j < vocab_size; ++j) out.marginals[static_cast<std::size_t>(j)] = out.counts.row_sum(j);
  return out;
}

std::vector<Split> split(std::size_t n, const SplitRatios& ratios, std::uint64_t seed) {
  const double total = ratios.train + ratios.valid + ratios.test;
  if (ratios.train < 0 || ratios.valid < 0 || ratios.test < 0 || std::abs(total - 1.0) > 1e-9) {
    throw PreconditionError("split ratios must be nonnegative and sum to 1");
  }
  const auto n_train = static_cast<std::size_t>(std::llround(ratios.train * static_cast<double>(n)));
  const auto n_valid = static_cast<std::size_t>(std::llround(ratios.valid * static_cast<double>(n)));
  if (n_train == 0 || n_valid == 0 || n_train + n_valid >= n) {
    throw PreconditionError("split leaves an empty partition for " + std::to_string(n) + " documents");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Split> labels(n, Split::kTest);
  for (std::size_t k = 0; k < n_train; ++k) labels[order[k]] = Split::kTrain;
  for (std::size_t k = n_train; k < n_train + n_valid; ++k) labels[order[k]] = Split::kValid;
  return labels;
}

void CorpusConfig::validate() const {
  if (min_count < 1) throw PreconditionError("corpus.min_count must be >= 1");
  if (max_vocab < 1) throw PreconditionError("corpus.max_vocab must be >= 1");
  if (window < 0) throw PreconditionError("corpus.window must be >= 0");
  const double total = ratios.train + ratios.valid + ratios.test;
  if (std::abs(total - 1.0) > 1e-9) throw PreconditionError("corpus split ratios must sum to 1");
}

// ---------------------------------------------------------------- Corpus

std::vector<int> Corpus::rows_of(Split s) const {
  std::vector<int> rows;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == s) rows.push_back(static_cast<int>(i));
  }
  return rows;
}

void Corpus::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "vocab.json");
    if (!os) throw std::runtime_error("cannot write " + (dir / "vocab.json").string());
    os << nlohmann::json(vocab.words()).dump() << '\n';
  }
  {
    std::ofstream os(dir / "docfreq.json");
    os << nlohmann::json(vocab.doc_freq()).dump() << '\n';
  }
  counts.save(dir / "counts.txt");
  tfidf.save(dir / "tfidf.txt");
  cooc.counts.save(dir / "cooccur.txt");
  std::ofstream os(dir / "splits.txt");
  for (const auto s : splits) os << static_cast<int>(s) << '\n';
}

Corpus Corpus::load(const std::filesystem::path& dir) {
  Corpus c;
  std::ifstream vs(dir / "vocab.json");
  if (!vs) throw std::runtime_error("missing " + (dir / "vocab.json").string());
  auto words = nlohmann::json::parse(vs).get<std::vector<std::string>>();
  std::vector<std::int64_t> df;
  if (std::ifstream ds(dir / "docfreq.json"); ds) df = nlohmann::json::parse(ds).get<std::vector<std::int64_t>>();
  c.vocab = Vocab(std::move(words), std::move(df));
  c.counts = SparseMatrix::load(dir / "counts.txt");
  c.tfidf = SparseMatrix::load(dir / "tfidf.txt");
  c.cooc.counts = SparseMatrix::load(dir / "cooccur.txt");
  c.cooc.marginals.resize(static_cast<std::size_t>(c.cooc.counts.rows()));
  for (int j = 0; j < c.cooc.counts.rows(); ++j) c.cooc.marginals[static_cast<std::size_t>(j)] = c.cooc.counts.row_sum(j);
  std::ifstream ss(dir / "splits.txt");
  if (!ss) throw std::runtime_error("missing " + (dir / "splits.txt").string());
  int s = 0;
  while (ss >> s) {
    if (s < 0 || s > 2) throw std::runtime_error("splits.txt: bad label");
    c.splits.push_back(static_cast<Split>(s));
  }
  if (c.counts.cols() != c.vocab.size() || c.tfidf.rows() != c.counts.rows() ||
      static_cast<int>(c.splits.size()) != c.counts.rows()) {
    throw std::runtime_error("corpus artifacts in " + dir.string() + " are inconsistent");
  }
  return c;
}

Corpus build_corpus(const std::vector<std::string>& raw_docs, const CorpusConfig& cfg) {
  cfg.validate();
  std::vector<std::vector<std::string>> tokens;
  tokens.reserve(raw_docs.size());
  for (const auto& d : raw_docs) tokens.push_back(tokenize(d));
  if (std::all_of(tokens.begin(), tokens.end(), [](const auto& t) { return t.empty(); })) {
    throw PreconditionError("empty corpus");
  }
  std::unordered_set<std::string> stop;
  if (cfg.use_default_stopwords) stop.insert(default_stopwords().begin(), default_stopwords().end());
  stop.insert(cfg.extra_stopwords.begin(), cfg.extra_stopwords.end());

  Corpus c;
  c.vocab = build_vocab(tokens, stop, cfg.min_count, cfg.max_vocab);
  std::vector<std::vector<int>> ids;
  for (const auto& t : tokens) {
    auto d = to_ids(t, c.vocab);
    if (!d.empty()) ids.push_back(std::move(d));
  }
  c.splits = split(ids.size(), cfg.ratios, cfg.seed);
  c.counts = count_matrix(ids, c.vocab.size());
  const auto train = c.rows_of(Split::kTrain);
  c.tfidf = tfidf(c.counts, train);
  std::vector<std::vector<int>> train_docs;
  train_docs.reserve(train.size());
  for (const int r : train) train_docs.push_back(ids[static_cast<std::size_t>(r)]);
  c.cooc = cooccurrence(train_docs, c.vocab.size(), cfg.window);
  return c;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace boxtax
