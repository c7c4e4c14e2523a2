#include "boxtax/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "boxtax/errors.hpp"

namespace boxtax {

using ad::Matrix;
using ad::Var;

void ModelConfig::validate() const {
  box.validate();
  if (vocab_size < 1) throw PreconditionError("model: vocab_size must be positive");
  if (hidden < 1) throw PreconditionError("model: hidden must be positive");
  if (leaf_topics < 1) throw PreconditionError("model: leaf_topics must be positive");
  if (levels < 1) throw PreconditionError("model: levels must be >= 1");
  if (latent < 0) throw PreconditionError("model: latent must be >= 0");
}

// ------------------------------------------------------------ BoxSlots

Matrix BoxSlots::lower() const { return params_min.value().unaryExpr([](double x) { return sigmoid(x); }); }

Matrix BoxSlots::upper() const {
  Matrix lo = lower();
  Matrix frac = params_size.value().unaryExpr([](double x) { return sigmoid(x); });
  return lo.array() + frac.array() * (1.0 - lo.array());
}

BoxEmbed BoxSlots::box(int i) const {
  const auto& pm = params_min.value();
  const auto& ps = params_size.value();
  return BoxEmbed::from_params(std::vector<double>(pm.row(i).begin(), pm.row(i).end()),
                               std::vector<double>(ps.row(i).begin(), ps.row(i).end()));
}

std::vector<BoxEmbed> BoxSlots::boxes() const {
  std::vector<BoxEmbed> out;
  out.reserve(static_cast<std::size_t>(size()));
  for (int i = 0; i < size(); ++i) out.push_back(box(i));
  return out;
}

void BoxSlots::assign(const std::vector<BoxEmbed>& boxes) {
  if (boxes.empty()) throw PreconditionError("BoxSlots::assign with no boxes");
  const int d = boxes.front().dim();
  Matrix pm(static_cast<Eigen::Index>(boxes.size()), d), ps(static_cast<Eigen::Index>(boxes.size()), d);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (boxes[i].dim() != d) throw DimensionError("BoxSlots::assign: mixed dimensions");
    const auto r = static_cast<Eigen::Index>(i);
    invert_box_transform(boxes[i].lower(), boxes[i].upper(), {pm.row(r).data(), static_cast<std::size_t>(d)},
                         {ps.row(r).data(), static_cast<std::size_t>(d)});
  }
  params_min = Slot(std::move(pm));
  params_size = Slot(std::move(ps));
}

std::vector<Slot*> ModelState::slots() {
  std::vector<Slot*> s = {&encoder.hidden_w, &encoder.hidden_b, &encoder.mu_w,    &encoder.mu_b,
                          &encoder.sigma_w,  &encoder.sigma_b,  &encoder.pi_w,    &encoder.pi_b,
                          &words.params_min, &words.params_size};
  for (auto& t : topics) {
    s.push_back(&t.params_min);
    s.push_back(&t.params_size);
  }
  return s;
}

// ------------------------------------------------------------ initialization

namespace {

Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double mean, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(mean, sd);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Matrix xavier(Eigen::Index fan_in, Eigen::Index fan_out, std::mt19937_64& rng) {
  return normal_matrix(fan_in, fan_out, 0.0, std::sqrt(2.0 / static_cast<double>(fan_in + fan_out)), rng);
}

}  // namespace

ModelState init_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  ModelState s;
  s.config = cfg;
  const int v = cfg.vocab_size, h = cfg.hidden, l = cfg.latent_dim(), t = cfg.leaf_topics, d = cfg.box.dim;
  s.encoder.hidden_w = Slot(xavier(v, h, rng));
  s.encoder.hidden_b = Slot(Matrix::Zero(1, h));
  s.encoder.mu_w = Slot(xavier(h, l, rng));
  s.encoder.mu_b = Slot(Matrix::Zero(1, l));
  s.encoder.sigma_w = Slot(xavier(h, l, rng));
  s.encoder.sigma_b = Slot(Matrix::Zero(1, l));
  s.encoder.pi_w = Slot(xavier(l, t, rng));
  s.encoder.pi_b = Slot(Matrix::Zero(1, t));
  s.words.params_min = Slot(normal_matrix(v, d, 0.0, 0.3, rng));
  s.words.params_size = Slot(normal_matrix(v, d, -2.0, 0.1, rng));
  BoxSlots leaves;
  leaves.params_min = Slot(normal_matrix(t, d, 0.0, 0.3, rng));
  leaves.params_size = Slot(normal_matrix(t, d, -1.0, 0.1, rng));
  s.topics.push_back(std::move(leaves));
  return s;
}

// ------------------------------------------------------------ graph building

namespace {

template <typename State, typename Bind>
GlobalVars bind_impl(State& state, Bind bind) {
  const auto& cfg = state.config.box;
  GlobalVars gv;
  auto& e = state.encoder;
  gv.enc = {bind(e.hidden_w), bind(e.hidden_b), bind(e.mu_w), bind(e.mu_b),
            bind(e.sigma_w),  bind(e.sigma_b),  bind(e.pi_w), bind(e.pi_b)};
  gv.words = box_corners(bind(state.words.params_min), bind(state.words.params_size));
  gv.word_log_volumes = log_volumes(gv.words, cfg);
  const Var word_lv_row = ad::transpose(gv.word_log_volumes);
  for (auto& level : state.topics) {
    gv.topics.push_back(box_corners(bind(level.params_min), bind(level.params_size)));
    gv.topic_log_volumes.push_back(log_volumes(gv.topics.back(), cfg));
  }
  const int levels = state.num_levels();
  for (int k = 0; k + 1 < levels; ++k) {
    const Var inter = pairwise_log_intersection(gv.topics[k], gv.topics[k + 1], cfg);
    gv.theta.push_back(ad::sub(inter, ad::transpose(gv.topic_log_volumes[k + 1])));
  }
  for (int k = 0; k < levels; ++k) {
    const Var inter = pairwise_log_intersection(gv.topics[k], gv.words, cfg);
    const Var score = ad::sub(ad::sub(inter, gv.topic_log_volumes[k]), word_lv_row);
    gv.phi.push_back(ad::row_softmax(score));
    gv.cv.push_back(ad::column_cv(gv.phi.back()));
  }
  return gv;
}

}  // namespace

GlobalVars bind_model(ModelState& state, ad::Graph& g) {
  return bind_impl(state, [&g](Slot& s) { return g.parameter(s.param); });
}

GlobalVars bind_constant(const ModelState& state, ad::Graph& g) {
  return bind_impl(state, [&g](const Slot& s) { return g.constant(s.param.value); });
}

EncodeVars encode(const GlobalVars& gv, Var tfidf, const Matrix& noise) {
  EncodeVars ev;
  ev.hidden = ad::relu(ad::affine(gv.enc.hidden_w, tfidf, gv.enc.hidden_b));
  ev.mu = ad::affine(gv.enc.mu_w, ev.hidden, gv.enc.mu_b);
  ev.sigma = ad::softplus(ad::affine(gv.enc.sigma_w, ev.hidden, gv.enc.sigma_b));
  ev.z = ad::gaussian_sample(ev.mu, ev.sigma, noise);
  ev.proportions.push_back(ad::row_softmax(ad::affine(gv.enc.pi_w, ev.z, gv.enc.pi_b)));
  for (const auto& theta : gv.theta) {
    ev.proportions.push_back(ad::row_softmax(ad::matmul(ev.proportions.back(), theta)));
  }
  return ev;
}

Var decode(std::span<const Var> proportions, std::span<const Var> phi, std::span<const Var> cv) {
  if (proportions.empty() || proportions.size() != phi.size() || phi.size() != cv.size()) {
    throw DimensionError("decode: need one proportion, distribution and CV per level");
  }
  Var total;
  for (std::size_t k = 0; k < phi.size(); ++k) {
    const Var weighted = ad::mul(ad::matmul(proportions[k], phi[k]), ad::add_scalar(cv[k], kCvGuard));
    const Var term = ad::div(weighted, ad::row_l2norm(weighted));
    total = k == 0 ? term : ad::add(total, term);
  }
  return ad::div(total, ad::row_sum(total));
}

// ------------------------------------------------------------ value-level API

namespace {

void require_finite(const Matrix& m, const char* stage) {
  if (!m.allFinite()) throw NonFiniteError(std::string("non-finite values in ") + stage);
}

}  // namespace

Matrix hier_relations(const ModelState& state, int level) {
  if (level < 0 || level + 1 >= state.num_levels()) {
    throw PreconditionError("hier_relations: level " + std::to_string(level) + " has no level above it");
  }
  ad::Graph g;
  const auto gv = bind_constant(state, g);
  return gv.theta[static_cast<std::size_t>(level)].value();
}

Matrix topic_word_dist(const ModelState& state, int level) {
  if (level < 0 || level >= state.num_levels()) throw PreconditionError("topic_word_dist: level out of range");
  ad::Graph g;
  const auto gv = bind_constant(state, g);
  return gv.phi[static_cast<std::size_t>(level)].value();
}

Matrix cv_weights(const Matrix& phi) {
  ad::Graph g;
  return ad::column_cv(g.constant(phi)).value();
}

EncodeResult encode(const ModelState& state, const Matrix& tfidf_row, const Matrix& noise) {
  if (tfidf_row.cols() != state.config.vocab_size) {
    throw DimensionError("encode: document has " + std::to_string(tfidf_row.cols()) + " entries, vocabulary " +
                         std::to_string(state.config.vocab_size));
  }
  ad::Graph g;
  const auto gv = bind_constant(state, g);
  const auto ev = encode(gv, g.constant(tfidf_row), noise);
  EncodeResult r;
  r.hidden = ev.hidden.value();
  require_finite(r.hidden, "encoder hidden layer");
  r.mu = ev.mu.value();
  require_finite(r.mu, "encoder mean");
  r.sigma = ev.sigma.value();
  require_finite(r.sigma, "encoder scale");
  r.z = ev.z.value();
  require_finite(r.z, "latent sample");
  for (const auto& p : ev.proportions) {
    r.proportions.push_back(p.value());
    require_finite(r.proportions.back(), "topic proportions");
  }
  return r;
}

Matrix decode(const std::vector<Matrix>& proportions, const std::vector<Matrix>& phi) {
  ad::Graph g;
  std::vector<Var> p, f, c;
  for (const auto& m : proportions) p.push_back(g.constant(m));
  for (const auto& m : phi) {
    f.push_back(g.constant(m));
    c.push_back(ad::column_cv(f.back()));
  }
  return decode(p, f, c).value();
}

SampledDocument sample_document(const ModelState& state, int length, std::uint64_t seed) {
  if (length < 0) throw PreconditionError("sample_document: negative length");
  std::mt19937_64 rng(seed);
  ad::Graph g;
  const auto gv = bind_constant(state, g);
  std::normal_distribution<double> normal;
  Matrix z(1, state.config.latent_dim());
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
  SampledDocument doc;
  Var pi = ad::row_softmax(ad::affine(gv.enc.pi_w, g.constant(z), gv.enc.pi_b));
  doc.proportions.push_back(pi.value());
  for (const auto& theta : gv.theta) {
    pi = ad::row_softmax(ad::matmul(pi, theta));
    doc.proportions.push_back(pi.value());
  }
  const int levels = state.num_levels();
  std::uniform_int_distribution<int> pick_level(0, levels - 1);
  std::vector<std::discrete_distribution<int>> pick_topic;
  std::vector<std::vector<std::discrete_distribution<int>>> pick_word(static_cast<std::size_t>(levels));
  for (int k = 0; k < levels; ++k) {
    const auto& p = doc.proportions[static_cast<std::size_t>(k)];
    pick_topic.emplace_back(p.data(), p.data() + p.size());
    const Matrix& phi = gv.phi[static_cast<std::size_t>(k)].value();
    for (Eigen::Index t = 0; t < phi.rows(); ++t) {
      pick_word[static_cast<std::size_t>(k)].emplace_back(phi.row(t).data(), phi.row(t).data() + phi.cols());
    }
  }
  for (int n = 0; n < length; ++n) {
    const int k = pick_level(rng);
    const int t = pick_topic[static_cast<std::size_t>(k)](rng);
    doc.levels.push_back(k);
    doc.words.push_back(pick_word[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)](rng));
  }
  return doc;
}

std::vector<int> top_keywords(const Matrix& phi, int topic, int n) {
  if (n < 1) throw PreconditionError("top_keywords: n must be >= 1");
  if (n > phi.cols()) throw PreconditionError("top_keywords: n exceeds vocabulary size");
  if (topic < 0 || topic >= phi.rows()) throw PreconditionError("top_keywords: topic out of range");
  std::vector<int> idx(static_cast<std::size_t>(phi.cols()));
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + n, idx.end(), [&](int a, int b) {
    const double va = phi(topic, a), vb = phi(topic, b);
    return va != vb ? va > vb : a < b;
  });
  idx.resize(static_cast<std::size_t>(n));
  return idx;
}

}  // namespace boxtax
