#include "boxtax/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>

#include "boxtax/errors.hpp"

namespace boxtax {

using ad::Matrix;
using ad::Var;

void TrainConfig::validate() const {
  box.validate();
  cluster.validate();
  if (!(adam.learning_rate > 0.0)) throw PreconditionError("train.learning_rate must be positive");
  if (levels < 1) throw PreconditionError("train.k must be >= 1");
  if (leaf_topics < 1) throw PreconditionError("train.leaf_topics must be positive");
  if (hidden < 1) throw PreconditionError("train.hidden must be positive");
  if (latent < 0) throw PreconditionError("train.latent must be >= 0");
  if (margin < 0.0 || alpha < 0.0 || beta_max < 0.0) throw PreconditionError("loss weights must be nonnegative");
  if (gamma < 0 || epochs < 0) throw PreconditionError("train.gamma and train.epochs must be >= 0");
  if (batch_size < 1 || co_batch_size < 1) throw PreconditionError("batch sizes must be positive");
  if (!(clip_norm > 0.0)) throw PreconditionError("train.clip_norm must be positive");
}

ModelConfig TrainConfig::model_config(int vocab_size) const {
  ModelConfig m;
  m.box = box;
  m.vocab_size = vocab_size;
  m.hidden = hidden;
  m.latent = latent;
  m.leaf_topics = leaf_topics;
  m.levels = levels;
  return m;
}

// ------------------------------------------------------------ losses

double kl_divergence(const Matrix& mu, const Matrix& sigma) {
  const auto s2 = sigma.array().square();
  return 0.5 * (mu.array().square() + s2 - 1.0 - s2.log()).sum();
}

Var kl_divergence(Var mu, Var sigma) {
  const Var s2 = ad::square(sigma);
  const Var terms = ad::sub(ad::add(ad::square(mu), s2), ad::add_scalar(ad::log(s2, 1e-300), 1.0));
  return ad::scale(ad::sum(terms), 0.5);
}

Var reconstruction_loss(Var counts, Var d_hat) { return ad::neg(ad::sum(ad::mul(counts, ad::log(d_hat)))); }

double elbo_loss(const Matrix& counts, const Matrix& d_hat, const Matrix& mu, const Matrix& sigma) {
  if (counts.cols() != d_hat.cols() || counts.rows() != d_hat.rows()) {
    throw DimensionError("elbo_loss: counts and reconstruction differ in shape");
  }
  double rec = 0.0;
  for (Eigen::Index i = 0; i < counts.size(); ++i) {
    const double c = counts.data()[i];
    if (c != 0.0) rec -= c * std::log(std::max(d_hat.data()[i], ad::kLogEps));
  }
  return rec + kl_divergence(mu, sigma);
}

std::vector<CoPair> co_support(const Cooccurrence& cooc) {
  std::vector<CoPair> out;
  // X is symmetric, so iterating row j gives every i with X_ij > 0.
  for (int j = 0; j < cooc.counts.rows(); ++j) {
    const double xj = cooc.marginals[static_cast<std::size_t>(j)];
    if (xj <= 0.0) continue;
    cooc.counts.for_row(j, [&](int i, double x) {
      if (x > 0.0) out.push_back({i, j, x / xj});
    });
  }
  return out;
}

std::vector<CoPair> sample_co_batch(std::span<const CoPair> support, int n, std::mt19937_64& rng) {
  if (support.empty()) throw PreconditionError("co-occurrence support is empty");
  std::uniform_int_distribution<std::size_t> pick(0, support.size() - 1);
  std::vector<CoPair> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) out.push_back(support[pick(rng)]);
  return out;
}

namespace {

Matrix co_targets(std::span<const CoPair> batch) {
  Matrix p(static_cast<Eigen::Index>(batch.size()), 1);
  for (std::size_t k = 0; k < batch.size(); ++k) p(static_cast<Eigen::Index>(k), 0) = batch[k].conditional;
  const double total = p.sum();
  if (!(total > 0.0)) throw PreconditionError("co_loss: batch has no positive conditional probability");
  return p / total;
}

}  // namespace

Var co_loss(const BoxVars& words, Var word_log_volumes, std::span<const CoPair> batch, const BoxAlgebraConfig& cfg) {
  if (batch.empty()) throw PreconditionError("co_loss: empty batch");
  std::vector<int> is, js;
  for (const auto& p : batch) {
    is.push_back(p.i);
    js.push_back(p.j);
  }
  ad::Graph& g = *words.lower.graph();
  const Var target = g.constant(co_targets(batch));
  const Var inter = rowwise_log_intersection(gather_boxes(words, is), gather_boxes(words, js), cfg);
  const Var logits = ad::sub(inter, ad::gather_rows(word_log_volumes, js));
  const Var log_q = ad::sub(logits, ad::logsumexp(logits));
  return ad::neg(ad::sum(ad::mul(target, log_q)));
}

double co_loss(std::span<const BoxEmbed> words, std::span<const CoPair> batch, const BoxAlgebraConfig& cfg) {
  if (batch.empty()) throw PreconditionError("co_loss: empty batch");
  const Matrix p = co_targets(batch);
  std::vector<double> logits;
  for (const auto& c : batch) {
    logits.push_back(asym_containment(words[static_cast<std::size_t>(c.i)], words[static_cast<std::size_t>(c.j)], cfg));
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (const double l : logits) z += std::exp(l - m);
  const double lse = m + std::log(z);
  double loss = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) loss -= p(static_cast<Eigen::Index>(k), 0) * (logits[k] - lse);
  return loss;
}

Var ht_loss(const BoxVars& children, Var child_log_volumes, const BoxVars& parents, Var parent_log_volumes,
            std::span<const Link> links, double margin, const BoxAlgebraConfig& cfg) {
  if (links.empty()) throw PreconditionError("ht_loss: no parent-child links");
  std::vector<int> cs, ps;
  for (const auto& l : links) {
    cs.push_back(l.child);
    ps.push_back(l.parent);
  }
  const Var overlap = rowwise_log_intersection(gather_boxes(children, cs), gather_boxes(parents, ps), cfg);
  const Var gap = ad::sub(ad::gather_rows(parent_log_volumes, ps), ad::gather_rows(child_log_volumes, cs));
  const Var hinge = ad::relu(ad::add_scalar(ad::neg(gap), margin));
  return ad::sum(ad::sub(hinge, overlap));
}

double ht_loss(std::span<const BoxEmbed> parents, std::span<const BoxEmbed> children, double margin,
               const BoxAlgebraConfig& cfg) {
  if (parents.size() != children.size()) throw DimensionError("ht_loss: parents and children differ in count");
  double loss = 0.0;
  for (std::size_t k = 0; k < parents.size(); ++k) {
    const double gap = gumbel_log_volume(parents[k], cfg) - gumbel_log_volume(children[k], cfg);
    loss += -sym_affinity(children[k], parents[k], cfg) + std::max(0.0, margin - gap);
  }
  return loss;
}

double beta_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw PreconditionError("beta_schedule: negative epoch");
  if (cfg.gamma == 0) return cfg.beta_max;
  return cfg.beta_max * std::min(1.0, static_cast<double>(epoch) / static_cast<double>(cfg.gamma));
}

// ------------------------------------------------------------ training loop

Matrix dense_rows(const SparseMatrix& m, std::span<const int> rows) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    m.for_row(rows[r], [&](int c, double v) { out(static_cast<Eigen::Index>(r), c) = v; });
  }
  return out;
}

RecurClusResult recluster(ModelState& state, const TrainConfig& cfg) {
  state.topics.resize(1);
  state.parents.clear();
  if (cfg.levels < 2) return {};
  const auto words = state.words.boxes();
  const auto leaves = state.topics.front().boxes();
  RecurClusResult rc = recur_clus(words, leaves, cfg.levels, cfg.cluster, cfg.box);
  for (const auto& level : rc.upper) {
    BoxSlots slots;
    slots.assign(level);
    state.topics.push_back(std::move(slots));
  }
  state.parents = rc.parents;
  return rc;
}

void refresh_parents(ModelState& state) {
  state.parents.clear();
  for (int k = 0; k + 1 < state.num_levels(); ++k) state.parents.push_back(assign_parents(hier_relations(state, k)));
}

std::vector<Link> links_at(const ModelState& state, int level) {
  std::vector<Link> out;
  const auto& p = state.parents.at(static_cast<std::size_t>(level));
  for (std::size_t i = 0; i < p.size(); ++i) out.push_back({static_cast<int>(i), p[i]});
  return out;
}

ModelState initialize(const Corpus& corpus, const TrainConfig& cfg) {
  cfg.validate();
  ModelState state = init_model(cfg.model_config(corpus.vocab.size()), cfg.seed);
  recluster(state, cfg);
  return state;
}

namespace {

std::mt19937_64 epoch_rng(std::uint64_t seed, int epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x626f78u};
  return std::mt19937_64(seq);
}

Matrix normal_noise(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

std::vector<int> level_sizes(const ModelState& state) {
  std::vector<int> s;
  for (const auto& t : state.topics) s.push_back(t.size());
  return s;
}

}  // namespace

BatchLoss batch_loss(const ModelState& state, const GlobalVars& gv, const Matrix& tfidf, const Matrix& counts,
                     const Matrix& noise, std::span<const CoPair> co_pairs, double beta, const TrainConfig& cfg) {
  if (tfidf.rows() != counts.rows() || tfidf.rows() == 0) throw DimensionError("batch_loss: bad batch shapes");
  ad::Graph& g = *gv.words.lower.graph();
  const double b = static_cast<double>(tfidf.rows());
  const EncodeVars ev = encode(gv, g.constant(tfidf), noise);
  const Var d_hat = decode(ev.proportions, gv.phi, gv.cv);
  BatchLoss out;
  out.reconstruction = ad::scale(reconstruction_loss(g.constant(counts), d_hat), 1.0 / b);
  out.kl = ad::scale(kl_divergence(ev.mu, ev.sigma), 1.0 / b);
  out.total = ad::add(out.reconstruction, out.kl);
  if (cfg.alpha > 0.0 && !co_pairs.empty()) {
    const Var co = co_loss(gv.words, gv.word_log_volumes, co_pairs, cfg.box);
    out.co = co.scalar();
    out.total = ad::add(out.total, ad::scale(co, cfg.alpha));
  }
  if (beta > 0.0 && state.num_levels() > 1) {
    Var ht;
    for (int k = 0; k + 1 < state.num_levels(); ++k) {
      const auto links = links_at(state, k);
      const Var term = ht_loss(gv.topics[k], gv.topic_log_volumes[k], gv.topics[k + 1], gv.topic_log_volumes[k + 1],
                               links, cfg.margin, cfg.box);
      ht = k == 0 ? term : ad::add(ht, term);
    }
    out.ht = ht.scalar();
    out.total = ad::add(out.total, ad::scale(ht, beta));
  }
  return out;
}

EpochStats train_epoch(ModelState& state, const Corpus& corpus, int epoch, const TrainConfig& cfg) {
  EpochStats stats;
  stats.epoch = epoch;
  if (epoch < cfg.gamma && cfg.levels >= 2) {
    recluster(state, cfg);
    stats.reclustered = true;
  }
  stats.beta = beta_schedule(epoch, cfg);
  auto rng = epoch_rng(cfg.seed, epoch);
  std::vector<int> rows = corpus.rows_of(Split::kTrain);
  if (rows.empty()) throw PreconditionError("train_epoch: corpus has no training documents");
  std::shuffle(rows.begin(), rows.end(), rng);
  const auto support = cfg.alpha > 0.0 ? co_support(corpus.cooc) : std::vector<CoPair>{};
  const bool use_co = cfg.alpha > 0.0 && !support.empty();

  int batches = 0;
  stats.min_batch_kl = std::numeric_limits<double>::infinity();
  for (std::size_t start = 0; start < rows.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
    const std::size_t end = std::min(rows.size(), start + static_cast<std::size_t>(cfg.batch_size));
    const std::span<const int> batch(rows.data() + start, end - start);

    auto slots = state.slots();
    for (auto* s : slots) s->param.zero_grad();
    ad::Graph g;
    const GlobalVars gv = bind_model(state, g);
    const Matrix noise = normal_noise(static_cast<Eigen::Index>(batch.size()), state.config.latent_dim(), rng);
    const auto pairs = use_co ? sample_co_batch(support, cfg.co_batch_size, rng) : std::vector<CoPair>{};
    const BatchLoss loss = batch_loss(state, gv, dense_rows(corpus.tfidf, batch), dense_rows(corpus.counts, batch),
                                      noise, pairs, stats.beta, cfg);
    const Var total = loss.total;
    if (!std::isfinite(total.scalar())) {
      throw NonFiniteError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batches));
    }
    g.backward(total);
    std::vector<ad::Parameter*> params;
    params.reserve(slots.size());
    for (auto* s : slots) params.push_back(&s->param);
    clip_global_norm(params, cfg.clip_norm);
    for (auto* s : slots) adam_step(s->param.value, s->param.grad, s->adam, cfg.adam);

    stats.total += total.scalar();
    stats.reconstruction += loss.reconstruction.scalar();
    stats.kl += loss.kl.scalar();
    stats.min_batch_kl = std::min(stats.min_batch_kl, loss.kl.scalar());
    stats.co += loss.co;
    stats.ht += loss.ht;
    ++batches;
  }
  const double nb = static_cast<double>(batches);
  stats.total /= nb;
  stats.reconstruction /= nb;
  stats.kl /= nb;
  stats.co /= nb;
  stats.ht /= nb;
  stats.elbo = stats.reconstruction + stats.kl;
  refresh_parents(state);
  stats.cluster_sizes = level_sizes(state);
  return stats;
}

double evaluate_elbo(const ModelState& state, const Corpus& corpus, const std::vector<int>& rows, int batch_size) {
  if (rows.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t start = 0; start < rows.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(rows.size(), start + static_cast<std::size_t>(batch_size));
    const std::span<const int> batch(rows.data() + start, end - start);
    ad::Graph g;
    const GlobalVars gv = bind_constant(state, g);
    const Matrix noise = Matrix::Zero(static_cast<Eigen::Index>(batch.size()), state.config.latent_dim());
    const EncodeVars ev = encode(gv, g.constant(dense_rows(corpus.tfidf, batch)), noise);
    const Var d_hat = decode(ev.proportions, gv.phi, gv.cv);
    total += reconstruction_loss(g.constant(dense_rows(corpus.counts, batch)), d_hat).scalar();
    total += kl_divergence(ev.mu.value(), ev.sigma.value());
  }
  return total / static_cast<double>(rows.size());
}

FitResult resume(const Corpus& corpus, const TrainConfig& cfg, ModelState state, TrainProgress progress,
                 const EpochCallback& on_epoch) {
  cfg.validate();
  FitResult result;
  const auto valid = corpus.rows_of(Split::kValid);
  std::optional<ModelState> best;
  for (int epoch = progress.next_epoch; epoch < cfg.epochs; ++epoch) {
    EpochStats stats = train_epoch(state, corpus, epoch, cfg);
    stats.valid_elbo = evaluate_elbo(state, corpus, valid, cfg.batch_size);
    progress.next_epoch = epoch + 1;
    if (progress.best_epoch < 0 || stats.valid_elbo < progress.best_valid_elbo) {
      progress.best_epoch = epoch;
      progress.best_valid_elbo = stats.valid_elbo;
      best = state;
    }
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats, state, progress);
  }
  result.best_state = best ? std::move(*best) : state;
  result.state = std::move(state);
  result.progress = progress;
  return result;
}

FitResult fit(const Corpus& corpus, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  return resume(corpus, cfg, initialize(corpus, cfg), TrainProgress{}, on_epoch);
}

}  // namespace boxtax
