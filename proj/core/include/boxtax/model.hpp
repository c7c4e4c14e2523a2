#pragma once

// Box-embedding topic model: encoder, per-level topic proportions,
// hierarchical relations between adjacent levels, topic-word distributions
// and the CV-sharpened decoder.

#include <cstdint>
#include <vector>

#include "boxtax/adam.hpp"
#include "boxtax/autodiff.hpp"
#include "boxtax/box.hpp"
#include "boxtax/box_ops.hpp"

namespace boxtax {

struct ModelConfig {
  BoxAlgebraConfig box;
  int vocab_size = 0;
  int hidden = 256;
  int latent = 0;  // 0 means "same as leaf_topics"
  int leaf_topics = 50;
  int levels = 3;  // K, the requested taxonomy depth

  [[nodiscard]] int latent_dim() const { return latent > 0 ? latent : leaf_topics; }
  void validate() const;
};

/// A trainable tensor together with its optimizer moments.
struct Slot {
  ad::Parameter param;
  AdamState adam;

  Slot() = default;
  explicit Slot(ad::Matrix value) : param(std::move(value)), adam(AdamState::like(param.value)) {}
  [[nodiscard]] const ad::Matrix& value() const { return param.value; }
};

struct BoxSlots {
  Slot params_min;
  Slot params_size;

  [[nodiscard]] int size() const { return static_cast<int>(params_min.value().rows()); }
  /// Derived corners (n x D each).
  [[nodiscard]] ad::Matrix lower() const;
  [[nodiscard]] ad::Matrix upper() const;
  [[nodiscard]] BoxEmbed box(int i) const;
  [[nodiscard]] std::vector<BoxEmbed> boxes() const;
  /// Replaces all boxes by the given ones and zeroes the optimizer moments.
  void assign(const std::vector<BoxEmbed>& boxes);
};

struct Encoder {
  Slot hidden_w, hidden_b;  // f_h: relu(d W + b)
  Slot mu_w, mu_b;          // f_mu
  Slot sigma_w, sigma_b;    // f_sigma, softplus-activated
  Slot pi_w, pi_b;          // f_pi, logits over leaf topics
};

struct ModelState {
  ModelConfig config;
  Encoder encoder;
  BoxSlots words;
  std::vector<BoxSlots> topics;  // topics[0] = leaves; one entry per current level
  /// parents[k][i] = index of the level-(k+1) parent of topic i at level k,
  /// for every level below the top.
  std::vector<std::vector<int>> parents;

  [[nodiscard]] int num_levels() const { return static_cast<int>(topics.size()); }
  /// Every trainable slot in a fixed order: encoder, words, then levels bottom-up.
  std::vector<Slot*> slots();
};

/// Random initialization of encoder, word boxes and leaf topic boxes. Upper
/// levels are left empty for the clustering step to create.
ModelState init_model(const ModelConfig& cfg, std::uint64_t seed);

// ------------------------------------------------------------ graph building

/// Global (document-independent) quantities of one forward pass.
struct GlobalVars {
  BoxVars words;
  std::vector<BoxVars> topics;
  ad::Var word_log_volumes;              // |V| x 1
  std::vector<ad::Var> topic_log_volumes;  // |T_k| x 1
  std::vector<ad::Var> theta;  // theta[k]: |T_k| x |T_{k+1}|, log R_a(child | parent)
  std::vector<ad::Var> phi;    // phi[k]: |T_k| x |V|, row-stochastic
  std::vector<ad::Var> cv;     // cv[k]: 1 x |V|
  struct {
    ad::Var hidden_w, hidden_b, mu_w, mu_b, sigma_w, sigma_b, pi_w, pi_b;
  } enc;
};

/// Binds the model's parameters to a graph as differentiable leaves.
GlobalVars bind_model(ModelState& state, ad::Graph& g);
/// Same forward quantities with every parameter as a constant.
GlobalVars bind_constant(const ModelState& state, ad::Graph& g);

struct EncodeVars {
  ad::Var hidden, mu, sigma, z;
  std::vector<ad::Var> proportions;  // per level, B x |T_k|
};

/// Batched encoder. tfidf is B x |V|, noise is B x latent.
EncodeVars encode(const GlobalVars& gv, ad::Var tfidf, const ad::Matrix& noise);

/// Batched decoder; returns the normalized reconstruction d_hat (B x |V|).
ad::Var decode(std::span<const ad::Var> proportions, std::span<const ad::Var> phi, std::span<const ad::Var> cv);

inline constexpr double kCvGuard = 1e-10;

// ------------------------------------------------------------ value-level API

struct EncodeResult {
  ad::Matrix hidden, mu, sigma, z;
  std::vector<ad::Matrix> proportions;
};

/// Theta between level k and k+1 (0-based k).
ad::Matrix hier_relations(const ModelState& state, int level);
/// Topic-word distribution of level k (0-based).
ad::Matrix topic_word_dist(const ModelState& state, int level);
/// Column-wise coefficient of variation of a topic-word matrix (1 x |V|).
ad::Matrix cv_weights(const ad::Matrix& phi);
/// Encodes one TF-IDF row (1 x |V|) with the given latent noise (1 x latent).
/// Throws NonFiniteError if any stage is not finite.
EncodeResult encode(const ModelState& state, const ad::Matrix& tfidf_row, const ad::Matrix& noise);
/// d_hat for proportions (each 1 x |T_k| or B x |T_k|) and distributions.
ad::Matrix decode(const std::vector<ad::Matrix>& proportions, const std::vector<ad::Matrix>& phi);

struct SampledDocument {
  std::vector<int> words;
  std::vector<int> levels;
  std::vector<ad::Matrix> proportions;  // the per-level proportions used
};

/// Draws pi_1 from the logistic-normal prior via the encoder head, then for
/// every word a uniform level, a topic from pi_k and a word from phi_k.
SampledDocument sample_document(const ModelState& state, int length, std::uint64_t seed);

/// Indices of the n largest entries of phi row `topic`, ties to the lower index.
std::vector<int> top_keywords(const ad::Matrix& phi, int topic, int n);

}  // namespace boxtax
