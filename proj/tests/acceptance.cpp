// Acceptance suite. Prints one line per criterion:
//   criterion N: PASS|FAIL|NOT RUN <details>
// Usage: acceptance [N]. Exit 0 when every criterion run passed, 1 on a
// failure, 77 when the only requested criterion could not run.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "app.hpp"
#include "boxtax/box.hpp"
#include "boxtax/box_ops.hpp"
#include "boxtax/cluster.hpp"
#include "boxtax/corpus.hpp"
#include "boxtax/metrics.hpp"
#include "boxtax/model.hpp"
#include "boxtax/planted.hpp"
#include "boxtax/train.hpp"
#include "instances.hpp"
#include "metric_oracles.hpp"
#include "op_cases.hpp"
#include "support.hpp"

namespace boxtax {
namespace {

namespace fs = std::filesystem;

enum class Status { kPass, kFail, kNotRun };

struct Outcome {
  Status status = Status::kPass;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      status = Status::kFail;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ------------------------------------------------------------ 1: box algebra

void criterion_box_algebra(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dims(1, 16);
  std::uniform_real_distribution<double> log_temp(-6.0, 1.0);
  std::normal_distribution<double> wide(0.0, 1.0);
  std::uniform_real_distribution<double> scale(0.0, 40.0);

  constexpr int kBoxes = 100000;
  long non_finite = 0, asym_violations = 0, sym_violations = 0, bound_violations = 0;
  double worst_identity = 0.0;
  for (int n = 0; n < kBoxes; n += 2) {
    BoxAlgebraConfig c;
    c.dim = dims(rng);
    c.vol_temp = std::pow(10.0, log_temp(rng));
    c.int_temp = std::pow(10.0, log_temp(rng));
    // Parameters up to |40| saturate the sigmoid and produce degenerate sides.
    const double s = scale(rng);
    auto params = [&] {
      std::vector<double> v(static_cast<std::size_t>(c.dim));
      for (auto& x : v) x = s * wide(rng);
      return v;
    };
    const auto a = make_box(params(), params());
    const auto b = make_box(params(), params());
    const double lva = gumbel_log_volume(a, c), lvb = gumbel_log_volume(b, c);
    const double sab = sym_affinity(a, b, c), sba = sym_affinity(b, a, c);
    const double aab = asym_containment(a, b, c), aba = asym_containment(b, a, c);
    const double nab = norm_sym_affinity(a, b, c);
    for (const double v : {lva, lvb, sab, sba, aab, aba, nab}) non_finite += !std::isfinite(v);
    const auto i = intersect(a, b, c);
    for (int d = 0; d < c.dim; ++d) {
      non_finite += !std::isfinite(i.lower()[static_cast<std::size_t>(d)]);
      non_finite += !std::isfinite(i.upper()[static_cast<std::size_t>(d)]);
    }
    sym_violations += sab != sba;
    // log R_a(a|b) - log R_a(b|a) = log Vol(a) - log Vol(b)
    const double identity = (aab - aba) - (lva - lvb);
    const double err = std::abs(identity) / std::max(1.0, std::max(std::abs(lva), std::abs(lvb)));
    worst_identity = std::max(worst_identity, err);
    asym_violations += err > 1e-9;
    // The smoothed intersection lies inside both boxes.
    bound_violations += sab > std::min(lva, lvb) + 1e-9 * std::max(1.0, std::abs(sab));
  }

  // Hard limit: low-dim boxes whose hard intersection has every side >= 0.05.
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> low_dims(1, 4);
  std::uniform_real_distribution<double> small_temp(-6.0, -4.0);
  double worst_sym = 0.0, worst_asym = 0.0;
  int hard_cases = 0;
  while (hard_cases < 5000) {
    BoxAlgebraConfig c;
    c.dim = low_dims(rng);
    c.vol_temp = std::pow(10.0, small_temp(rng));
    c.int_temp = std::pow(10.0, small_temp(rng));
    std::vector<double> la, ua, lb, ub;
    double hard_inter = 1.0, hard_b = 1.0;
    bool ok = true;
    for (int d = 0; d < c.dim; ++d) {
      const double x0 = u(rng), x1 = u(rng), y0 = u(rng), y1 = u(rng);
      la.push_back(std::min(x0, x1));
      ua.push_back(std::max(x0, x1));
      lb.push_back(std::min(y0, y1));
      ub.push_back(std::max(y0, y1));
      const double side = std::min(ua.back(), ub.back()) - std::max(la.back(), lb.back());
      ok = ok && side >= 0.05;
      hard_inter *= side;
      hard_b *= ub.back() - lb.back();
    }
    if (!ok) continue;
    ++hard_cases;
    const auto a = BoxEmbed::from_corners(la, ua), b = BoxEmbed::from_corners(lb, ub);
    worst_sym = std::max(worst_sym, std::abs(std::exp(sym_affinity(a, b, c)) / hard_inter - 1.0));
    worst_asym = std::max(worst_asym, std::abs(std::exp(asym_containment(a, b, c)) / (hard_inter / hard_b) - 1.0));
  }

  // Fused matrix kernels on a saturated batch.
  {
    std::normal_distribution<double> big(0.0, 30.0);
    ad::Matrix pmin(64, 12), psize(64, 12);
    for (Eigen::Index k = 0; k < pmin.size(); ++k) {
      pmin.data()[k] = big(rng);
      psize.data()[k] = big(rng);
    }
    BoxAlgebraConfig c;
    c.dim = 12;
    c.vol_temp = 1e-5;
    c.int_temp = 1e-5;
    ad::Graph g;
    const BoxVars boxes = box_corners(g.constant(pmin), g.constant(psize));
    non_finite += !log_volumes(boxes, c).value().allFinite();
    non_finite += !pairwise_log_intersection(boxes, boxes, c).value().allFinite();
  }

  const double secs = seconds_since(t0);
  o.detail << kBoxes << " fuzzed boxes, non-finite " << non_finite << ", symmetry violations " << sym_violations
           << ", asym identity worst " << worst_identity << ", bound violations " << bound_violations
           << "; hard limit over " << hard_cases << " pairs: R_s rel err " << worst_sym << ", R_a rel err "
           << worst_asym << "; " << std::fixed << std::setprecision(1) << secs << " s";
  o.check(non_finite == 0, "non-finite outputs");
  o.check(sym_violations == 0, "R_s symmetry");
  o.check(asym_violations == 0, "R_a identity");
  o.check(bound_violations == 0, "intersection bound");
  o.check(worst_sym <= 1e-3 && worst_asym <= 1e-3, "hard limit rel err <= 1e-3");
  o.check(secs < 60.0, "runtime < 60 s");
}

// ------------------------------------------------------------ 2: gradients

void criterion_gradients(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_op = 0.0;
  std::string worst_name;
  const auto cases = testing::op_cases();
  for (const auto& c : cases) {
    const double e = testing::op_max_rel_error(c, 100);
    if (e >= worst_op) {
      worst_op = e;
      worst_name = c.name;
    }
  }
  double worst_loss = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto toy = testing::toy_instance(seed);
    std::vector<ad::Parameter*> params;
    for (auto* s : toy.state.slots()) params.push_back(&s->param);
    const auto r = testing::gradcheck(
        params,
        [&](ad::Graph& g, std::vector<ad::Var>&) {
          const GlobalVars gv = bind_model(toy.state, g);
          return batch_loss(toy.state, gv, toy.tfidf, toy.counts, toy.noise, toy.pairs, toy.beta, toy.cfg).total;
        },
        1e-5, 20, seed);
    worst_loss = std::max(worst_loss, r.max_rel);
  }
  const double secs = seconds_since(t0);
  o.detail << cases.size() << " ops, worst per-op rel err " << worst_op << " (" << worst_name
           << "); composite loss worst rel err " << worst_loss << " over 5 toy instances; " << std::fixed
           << std::setprecision(1) << secs << " s";
  o.check(worst_op <= 1e-4, "per-op <= 1e-4");
  o.check(worst_loss <= 1e-3, "composite <= 1e-3");
  o.check(secs < 120.0, "runtime < 120 s");
}

// ------------------------------------------------------------ 3, 7: planted run

struct PlantedRun {
  PlantedCorpus planted;
  Corpus corpus;
  FitResult fit;
  double seconds = 0.0;
};

const PlantedRun& planted_run() {
  static const PlantedRun run = [] {
    PlantedRun r;
    r.planted = generate_planted(PlantedConfig{});
    CorpusConfig cc;
    cc.min_count = 1;
    cc.use_default_stopwords = false;
    r.corpus = build_corpus(r.planted.docs, cc);
    TrainConfig tc;
    tc.levels = 2;
    tc.leaf_topics = 6;
    tc.epochs = 100;
    tc.gamma = 50;
    tc.batch_size = 32;
    tc.adam.learning_rate = 0.02;
    tc.seed = 1;
    const auto t0 = std::chrono::steady_clock::now();
    r.fit = fit(r.corpus, tc);
    r.seconds = seconds_since(t0);
    return r;
  }();
  return run;
}

void criterion_planted(Outcome& o) {
  const auto& run = planted_run();
  const auto score = score_planted(run.planted, run.corpus.vocab, run.fit.state);
  o.detail << "vocab " << run.corpus.vocab.size() << ", docs " << run.corpus.num_docs() << ", purity "
           << score.purity << ", parent agreement " << score.parent_agreement << "; " << std::fixed
           << std::setprecision(1) << run.seconds << " s";
  o.check(score.purity >= 0.7, "purity >= 0.7");
  o.check(score.parent_agreement >= 0.7, "agreement >= 0.7");
  o.check(run.seconds < 900.0, "runtime < 15 min");
}

void criterion_monotone(Outcome& o) {
  const auto& h = planted_run().fit.history;
  if (h.empty()) {
    o.check(false, "no epochs");
    return;
  }
  double min_kl = h.front().min_batch_kl;
  for (const auto& s : h) min_kl = std::min(min_kl, s.min_batch_kl);
  o.detail << "epoch 1 total " << h.front().total << ", epoch " << h.size() << " total " << h.back().total
           << ", min batch KL " << min_kl;
  o.check(h.back().total < h.front().total, "final loss below epoch-1 loss");
  o.check(min_kl >= 0.0, "KL >= 0 at every batch");
}

// ------------------------------------------------------------ 4: clustering

void criterion_clustering(Outcome& o) {
  const auto boxes = testing::two_group_boxes(6);
  const auto cfg = testing::sharp_config(6);
  const ad::Matrix a = topic_affinity_matrix(boxes, cfg);
  const std::vector<double> pref(8, preference_value(a, PreferenceMode::kMedian));
  const auto oracle = testing::exhaustive_exemplar_search(a, pref);
  const auto r = affinity_propagation(a, ClusterConfig{}, pref);
  const std::vector<int> planted{0, 0, 0, 0, 1, 1, 1, 1};
  o.detail << "AP clusters " << r.num_clusters() << " after " << r.iterations << " iterations, exhaustive search "
           << oracle.exemplars.size() << " exemplars";
  o.check(r.converged, "converged");
  o.check(r.num_clusters() == 2, "2 clusters");
  o.check(oracle.exemplars.size() == 2, "oracle picks 2 exemplars");
  o.check(testing::same_partition(r.labels, oracle.labels), "matches exhaustive search");
  o.check(testing::same_partition(r.labels, planted), "matches the two groups");
}

// ------------------------------------------------------------ 5: metrics

std::vector<int> range(int from, int to) {
  std::vector<int> v;
  for (int i = from; i < to; ++i) v.push_back(i);
  return v;
}

void criterion_metrics(Outcome& o) {
  using testing::Docs;
  // perfect: 0 and 1 always together; independent: P(0,1) = P(0) P(1); never: disjoint
  const Docs perfect{{0, 1}, {0, 1, 2}, {2}, {3}};
  const Docs independent{{0, 1}, {0, 2}, {1, 2}, {2}};
  const Docs never{{0}, {1}, {0, 2}};
  const double np = npmi_pair(0, 1, DocOccurrence(perfect, 4));
  const double ni = npmi_pair(0, 1, DocOccurrence(independent, 3));
  const double nn = npmi_pair(0, 1, DocOccurrence(never, 3));
  o.check(std::abs(np - 1.0) < 1e-9, "NPMI perfect = 1");
  o.check(std::abs(ni) < 1e-9, "NPMI independent = 0");
  o.check(nn == -1.0, "NPMI never = -1");

  const double tu_disjoint = uniqueness_D({range(0, 15), range(15, 30), range(30, 45)});
  const double tu_pair = uniqueness_D({range(0, 15), range(0, 15)});
  bool identical_ok = true;
  for (int t = 1; t <= 8; ++t) {
    const double d = uniqueness_D(std::vector<std::vector<int>>(static_cast<std::size_t>(t), range(0, 15)));
    identical_ok = identical_ok && std::abs(d - 1.0 / t) < 1e-15;
  }
  o.check(tu_disjoint == 1.0, "TU disjoint = 1");
  o.check(tu_pair == 0.5, "TU duplicated pair = 0.5");
  o.check(identical_ok, "TU identical = 1/T");

  // CLNPMI against the brute-force enumeration, with forced shared words.
  std::mt19937_64 rng(17);
  std::bernoulli_distribution has(0.4);
  Docs docs(80);
  for (auto& d : docs) {
    for (int w = 0; w < 40; ++w) {
      if (has(rng)) d.push_back(w);
    }
  }
  const DocOccurrence ref(docs, 40);
  double worst = 0.0;
  int compared = 0, with_shared = 0;
  for (int trial = 0; trial < 200; ++trial) {
    auto p = range(0, 40), c = range(0, 40);
    std::shuffle(p.begin(), p.end(), rng);
    std::shuffle(c.begin(), c.end(), rng);
    p.resize(15);
    std::vector<int> rest;
    for (const int w : c) {
      if (std::find(p.begin(), p.end(), w) == p.end()) rest.push_back(w);
    }
    // child = k words of the parent followed by words the parent lacks
    const int k = trial % 9;
    std::vector<int> child(p.begin() + 2, p.begin() + 2 + k);
    for (const int w : rest) {
      if (static_cast<int>(child.size()) < 15) child.push_back(w);
    }
    std::vector<int> sorted_p(p), sorted_c(child);
    std::sort(sorted_p.begin(), sorted_p.end());
    std::sort(sorted_c.begin(), sorted_c.end());
    std::vector<int> common;
    std::set_intersection(sorted_p.begin(), sorted_p.end(), sorted_c.begin(), sorted_c.end(),
                          std::back_inserter(common));
    with_shared += !common.empty();
    worst = std::max(worst, std::abs(clnpmi_HC(p, child, ref) - testing::clnpmi_oracle(p, child, docs)));
    ++compared;
  }
  o.check(worst < 1e-12, "CLNPMI matches brute force");
  o.check(with_shared > 0, "shared-word cases exercised");

  o.detail << "NPMI " << np << " / " << ni << " / " << nn << "; TU " << tu_disjoint << ", " << tu_pair
           << ", 1/T for T=1..8 " << (identical_ok ? "ok" : "off") << "; CLNPMI " << compared << " lists ("
           << with_shared << " with shared words), worst abs diff " << worst;
}

// ------------------------------------------------------------ 6: 20news

void criterion_20news(Outcome& o) {
  const char* path = std::getenv("BOXTAX_20NEWS_PATH");
  if (path == nullptr || *path == '\0') {
    o.status = Status::kNotRun;
    o.detail << "BOXTAX_20NEWS_PATH is not set (one document per line)";
    return;
  }
  const auto t0 = std::chrono::steady_clock::now();
  std::ifstream in(path);
  if (!in) {
    o.check(false, std::string("cannot read ") + path);
    return;
  }
  std::vector<std::string> raw;
  for (std::string line; std::getline(in, line);) raw.push_back(line);
  const Corpus corpus = build_corpus(raw, CorpusConfig{});
  TrainConfig tc;
  tc.levels = 3;
  tc.leaf_topics = 50;
  const auto result = fit(corpus, tc);
  const auto train_rows = corpus.rows_of(Split::kTrain);
  const DocOccurrence ref(corpus.counts, train_rows);
  const auto model = report(result.state, ref);
  const auto baseline =
      report(random_keywords(model.keywords, ref, tc.seed), result.state.parents, ref);
  const auto& m = model.overall;
  const auto& b = baseline.overall;
  const double secs = seconds_since(t0);
  o.detail << "vocab " << corpus.vocab.size() << ", docs " << corpus.num_docs() << "; C " << m.C << " (random "
           << b.C << "), HC " << m.HC << " (random " << b.HC << "), D " << m.D << " (random " << b.D << "); "
           << std::fixed << std::setprecision(0) << secs << " s";
  // "exceeds by >= 50%" relative to the baseline's magnitude, so it also applies to negative baselines
  auto beats = [](double v, double base) { return v >= base + 0.5 * std::abs(base); };
  o.check(m.C >= 0.20, "C >= 0.20");
  o.check(m.HC >= 0.10, "HC >= 0.10");
  o.check(m.D >= 0.45, "D >= 0.45");
  o.check(beats(m.C, b.C) && beats(m.HC, b.HC) && beats(m.D, b.D), "1.5x random baseline");
  o.check(secs <= 3 * 3600.0, "runtime <= 3 h");
}

// ------------------------------------------------------------ 8: determinism

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion_determinism(Outcome& o) {
  const fs::path root = fs::temp_directory_path() / ("boxtax_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  PlantedConfig pc;
  pc.docs = 300;
  pc.words_per_leaf = 20;
  {
    std::ofstream out(root / "docs.txt");
    for (const auto& d : generate_planted(pc).docs) out << d << '\n';
  }
  auto run = [&](const std::string& name) {
    app::CommonOptions common;
    common.seed = 5;
    common.overrides = {"corpus.min_count=1", "corpus.default_stopwords=false", "box.dim=8", "train.k=2",
                        "train.leaf_topics=6", "train.hidden=32", "train.batch_size=32", "train.gamma=3"};
    std::ostringstream sink;
    common.out_dir = root / name / "corpus";
    app::cmd_preprocess(root / "docs.txt", common, sink);
    app::TrainOptions t;
    t.corpus_dir = root / name / "corpus";
    t.epochs = 6;
    t.quiet = true;
    common.out_dir = root / name / "run";
    app::cmd_train(t, common, sink);
    common.out_dir = root / name / "eval";
    app::cmd_eval(root / name / "run" / "checkpoint.json", root / name / "corpus", common, sink);
  };
  run("a");
  run("b");
  const std::string tax_a = read_file(root / "a" / "run" / "taxonomy.json");
  const std::string met_a = read_file(root / "a" / "eval" / "metrics.json");
  const bool tax_same = !tax_a.empty() && tax_a == read_file(root / "b" / "run" / "taxonomy.json");
  const bool met_same = !met_a.empty() && met_a == read_file(root / "b" / "eval" / "metrics.json");
  o.detail << "two preprocess -> train -> eval runs, seed 5: taxonomy.json " << (tax_same ? "identical" : "differs")
           << " (" << tax_a.size() << " bytes), metrics.json " << (met_same ? "identical" : "differs") << " ("
           << met_a.size() << " bytes)";
  o.check(tax_same, "identical taxonomy");
  o.check(met_same, "identical metrics");
  fs::remove_all(root);
}

const std::map<int, std::function<void(Outcome&)>>& criteria() {
  static const std::map<int, std::function<void(Outcome&)>> all{
      {1, criterion_box_algebra}, {2, criterion_gradients}, {3, criterion_planted},  {4, criterion_clustering},
      {5, criterion_metrics},     {6, criterion_20news},    {7, criterion_monotone}, {8, criterion_determinism},
  };
  return all;
}

}  // namespace
}  // namespace boxtax

int main(int argc, char** argv) {
  using boxtax::Status;
  std::vector<int> selected;
  if (argc > 1) {
    for (int k = 1; k < argc; ++k) selected.push_back(std::atoi(argv[k]));
  } else {
    for (const auto& [n, _] : boxtax::criteria()) selected.push_back(n);
  }
  int failed = 0, not_run = 0;
  for (const int n : selected) {
    const auto it = boxtax::criteria().find(n);
    if (it == boxtax::criteria().end()) {
      std::cerr << "unknown criterion " << n << '\n';
      return 2;
    }
    boxtax::Outcome o;
    try {
      it->second(o);
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    const char* label = o.status == Status::kPass ? "PASS" : o.status == Status::kFail ? "FAIL" : "NOT RUN";
    std::cout << "criterion " << n << ": " << label << " " << o.detail.str() << std::endl;
    failed += o.status == Status::kFail;
    not_run += o.status == Status::kNotRun;
  }
  if (failed > 0) return 1;
  if (not_run == static_cast<int>(selected.size())) return 77;
  return 0;
}
