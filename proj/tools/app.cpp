#include "app.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "boxtax/checkpoint.hpp"
#include "boxtax/corpus.hpp"
#include "boxtax/errors.hpp"
#include "boxtax/metrics.hpp"
#include "boxtax/train.hpp"

namespace boxtax::app {

namespace {

fs::path out_dir_or(const CommonOptions& common, const fs::path& fallback) {
  const fs::path dir = common.out_dir.empty() ? fallback : common.out_dir;
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

std::string log_line(const EpochStats& s) {
  nlohmann::ordered_json j;
  j["epoch"] = s.epoch;
  j["total"] = s.total;
  j["elbo"] = s.elbo;
  j["reconstruction"] = s.reconstruction;
  j["kl"] = s.kl;
  j["min_batch_kl"] = s.min_batch_kl;
  j["co"] = s.co;
  j["ht"] = s.ht;
  j["beta"] = s.beta;
  j["valid_elbo"] = s.valid_elbo;
  j["reclustered"] = s.reclustered;
  j["cluster_sizes"] = s.cluster_sizes;
  return j.dump();
}

// Keeps the log lines of epochs before `next_epoch`; a resumed run rewrites the rest.
void truncate_log(const fs::path& path, int next_epoch) {
  std::ifstream in(path);
  std::vector<std::string> kept;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (nlohmann::json::parse(line).at("epoch").get<int>() < next_epoch) kept.push_back(line);
  }
  in.close();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  for (const auto& l : kept) os << l << '\n';
}

void check_vocab(const Checkpoint& ckpt, const Corpus& corpus) {
  if (ckpt.vocab_hash != corpus.vocab.hash()) {
    throw PreconditionError("vocabulary mismatch: checkpoint " + ckpt.vocab_hash + ", corpus " + corpus.vocab.hash());
  }
}

}  // namespace

RunConfig resolve_config(const CommonOptions& common) {
  RunConfig cfg = load_config(common.config);
  for (const auto& o : common.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw PreconditionError("override must look like section.key=value: " + o);
    cfg.set(o.substr(0, eq), o.substr(eq + 1));
  }
  return cfg;
}

int cmd_preprocess(const fs::path& input, const CommonOptions& common, std::ostream& out) {
  RunConfig cfg = resolve_config(common);
  if (common.seed) cfg.corpus.seed = *common.seed;
  cfg.corpus.validate();
  const Corpus corpus = build_corpus(read_lines(input), cfg.corpus);
  const fs::path dir = out_dir_or(common, "corpus");
  corpus.save(dir);
  out << "vocabulary " << corpus.vocab.size() << " words, " << corpus.num_docs() << " documents\n"
      << "split train/valid/test " << corpus.rows_of(Split::kTrain).size() << '/'
      << corpus.rows_of(Split::kValid).size() << '/' << corpus.rows_of(Split::kTest).size() << '\n'
      << "wrote " << dir.string() << '\n';
  return 0;
}

int cmd_train(const TrainOptions& opts, const CommonOptions& common, std::ostream& out) {
  const fs::path dir = out_dir_or(common, "run");
  const fs::path ckpt_path = dir / "checkpoint.json";
  const fs::path log_path = dir / "train.jsonl";
  const Corpus corpus = Corpus::load(opts.corpus_dir);

  Checkpoint ckpt;
  if (opts.resume) {
    ckpt = load_checkpoint(ckpt_path);
    check_vocab(ckpt, corpus);
  } else {
    ckpt.config = resolve_config(common);
    if (opts.levels) ckpt.config.train.levels = *opts.levels;
    if (opts.leaf_topics) ckpt.config.train.leaf_topics = *opts.leaf_topics;
    if (common.seed) ckpt.config.train.seed = *common.seed;
  }
  if (opts.epochs) ckpt.config.train.epochs = *opts.epochs;
  ckpt.config.validate();
  const TrainConfig& tc = ckpt.config.train;

  if (opts.resume) {
    truncate_log(log_path, ckpt.progress.next_epoch);
    out << "resuming at epoch " << ckpt.progress.next_epoch << '\n';
  } else {
    ckpt.vocab_hash = corpus.vocab.hash();
    ckpt.words = corpus.vocab.words();
    ckpt.state = initialize(corpus, tc);
    ckpt.progress = TrainProgress{};
    save_checkpoint(ckpt_path, ckpt);
    std::ofstream(log_path, std::ios::trunc);
  }

  std::ofstream log(log_path, std::ios::app | std::ios::binary);
  if (!log) throw std::runtime_error("cannot write " + log_path.string());
  const auto on_epoch = [&](const EpochStats& s, const ModelState& state, const TrainProgress& progress) {
    Checkpoint c{ckpt.config, ckpt.vocab_hash, ckpt.words, progress, state};
    save_checkpoint(ckpt_path, c);
    if (progress.best_epoch == s.epoch) save_checkpoint(dir / "best.json", c);
    log << log_line(s) << '\n' << std::flush;
    if (!opts.quiet) {
      out << "epoch " << s.epoch << " loss " << s.total << " elbo " << s.elbo << " valid " << s.valid_elbo
          << " levels";
      for (const int n : s.cluster_sizes) out << ' ' << n;
      out << '\n';
    }
  };

  FitResult result;
  try {
    result = resume(corpus, tc, ckpt.state, ckpt.progress, on_epoch);
  } catch (const NonFiniteError& e) {
    out << "training aborted: " << e.what() << "; last good state is in " << ckpt_path.string() << '\n';
    return 2;
  }
  if (result.history.empty() && !opts.resume) save_checkpoint(dir / "best.json", ckpt);
  write_file(dir / "taxonomy.json",
             taxonomy_json(build_taxonomy(result.state), ckpt.words, ckpt.config, ckpt.vocab_hash));
  out << "wrote " << dir.string() << '\n';
  return 0;
}

int cmd_eval(const fs::path& checkpoint, const fs::path& corpus_dir, const CommonOptions& common, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const Corpus corpus = Corpus::load(corpus_dir);
  check_vocab(ckpt, corpus);
  const auto train = corpus.rows_of(Split::kTrain);
  const DocOccurrence ref(corpus.counts, train, "train split, vocab " + ckpt.vocab_hash);
  const MetricReport r = report(ckpt.state, ref);
  const fs::path dir = out_dir_or(common, "eval");
  write_file(dir / "metrics.json", r.to_json(ckpt.words));
  write_file(dir / "metrics.txt", r.to_text());
  out << r.to_text();
  return 0;
}

int cmd_export(const fs::path& checkpoint, const std::string& format, int top_n, const CommonOptions& common,
               std::ostream& out) {
  if (format != "json" && format != "text") throw PreconditionError("unknown format '" + format + "' (json, text)");
  if (top_n < 1) throw PreconditionError("--top-n must be positive");
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const Taxonomy tax = build_taxonomy(ckpt.state, top_n);
  const std::string text = format == "json" ? taxonomy_json(tax, ckpt.words, ckpt.config, ckpt.vocab_hash)
                                            : taxonomy_text(tax, ckpt.words);
  if (common.out_dir.empty()) {
    out << text;
  } else {
    fs::create_directories(common.out_dir);
    const fs::path file = common.out_dir / (format == "json" ? "taxonomy.json" : "taxonomy.txt");
    write_file(file, text);
    out << "wrote " << file.string() << '\n';
  }
  return 0;
}

int cmd_sample(const fs::path& checkpoint, int length, int count, const CommonOptions& common, std::ostream& out) {
  if (length < 1 || count < 1) throw PreconditionError("--length and --count must be positive");
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const std::uint64_t seed = common.seed.value_or(0);
  std::ostringstream text;
  for (int i = 0; i < count; ++i) {
    const auto doc = sample_document(ckpt.state, length, seed + static_cast<std::uint64_t>(i));
    for (std::size_t k = 0; k < doc.words.size(); ++k) {
      text << (k ? " " : "") << ckpt.words.at(static_cast<std::size_t>(doc.words[k]));
    }
    text << '\n';
  }
  if (common.out_dir.empty()) {
    out << text.str();
  } else {
    fs::create_directories(common.out_dir);
    write_file(common.out_dir / "samples.txt", text.str());
    out << "wrote " << (common.out_dir / "samples.txt").string() << '\n';
  }
  return 0;
}

}  // namespace boxtax::app
