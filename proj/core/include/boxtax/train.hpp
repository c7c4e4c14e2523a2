#pragma once

// Losses (ELBO, word co-occurrence containment, parent-child margin), the
// HT-weight warmup and the epoch loop with periodic recursive clustering.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "boxtax/box_ops.hpp"
#include "boxtax/cluster.hpp"
#include "boxtax/corpus.hpp"
#include "boxtax/model.hpp"

namespace boxtax {

struct TrainConfig {
  BoxAlgebraConfig box;  // box.dim is the embedding dimension D
  ClusterConfig cluster;
  AdamConfig adam;       // adam.learning_rate = 5e-3
  int levels = 3;        // K
  int leaf_topics = 50;
  int hidden = 256;
  int latent = 0;        // 0: same as leaf_topics
  double margin = 10.0;
  double alpha = 3.0;
  double beta_max = 0.005;
  int gamma = 100;       // epochs with recursive clustering
  int epochs = 300;
  int batch_size = 200;
  int co_batch_size = 1024;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;

  void validate() const;
  [[nodiscard]] ModelConfig model_config(int vocab_size) const;
};

// ------------------------------------------------------------ losses

/// 0.5 * sum(mu^2 + sigma^2 - 1 - 2 log sigma), summed over rows.
double kl_divergence(const ad::Matrix& mu, const ad::Matrix& sigma);
ad::Var kl_divergence(ad::Var mu, ad::Var sigma);

/// -sum_j counts_j log d_hat_j, summed over rows.
ad::Var reconstruction_loss(ad::Var counts, ad::Var d_hat);

/// Negative ELBO of a single document: reconstruction NLL plus KL.
double elbo_loss(const ad::Matrix& counts, const ad::Matrix& d_hat, const ad::Matrix& mu, const ad::Matrix& sigma);

struct CoPair {
  int i;  // conditioned-on word is j: P(i | j)
  int j;
  double conditional;
};

/// Every (i, j) with P(i | j) > 0.
std::vector<CoPair> co_support(const Cooccurrence& cooc);
/// Uniform sample with replacement from the support.
std::vector<CoPair> sample_co_batch(std::span<const CoPair> support, int n, std::mt19937_64& rng);

/// Cross-entropy between the normalized P(i|j) over the batch and the softmax
/// over the batch of log R_a(w_i | w_j).
ad::Var co_loss(const BoxVars& words, ad::Var word_log_volumes, std::span<const CoPair> batch,
                const BoxAlgebraConfig& cfg);
double co_loss(std::span<const BoxEmbed> words, std::span<const CoPair> batch, const BoxAlgebraConfig& cfg);

struct Link {
  int child;
  int parent;
};

/// sum over links of -log R_s(child, parent) + max(0, m - log Vol(parent) + log Vol(child)).
ad::Var ht_loss(const BoxVars& children, ad::Var child_log_volumes, const BoxVars& parents,
                ad::Var parent_log_volumes, std::span<const Link> links, double margin,
                const BoxAlgebraConfig& cfg);
double ht_loss(std::span<const BoxEmbed> parents, std::span<const BoxEmbed> children, double margin,
               const BoxAlgebraConfig& cfg);

/// beta_max * min(1, epoch / gamma); beta_max from the start when gamma == 0.
double beta_schedule(int epoch, const TrainConfig& cfg);

// ------------------------------------------------------------ training loop

struct EpochStats {
  int epoch = 0;
  double total = 0.0;           // mean over batches
  double elbo = 0.0;            // mean over batches of reconstruction + KL
  double reconstruction = 0.0;
  double kl = 0.0;
  double min_batch_kl = 0.0;
  double co = 0.0;
  double ht = 0.0;
  double beta = 0.0;
  double valid_elbo = 0.0;
  bool reclustered = false;
  std::vector<int> cluster_sizes;  // topics per level after the epoch
};

struct TrainProgress {
  int next_epoch = 0;
  int best_epoch = -1;
  double best_valid_elbo = 0.0;
};

/// Random init followed by one clustering pass that creates the upper levels.
ModelState initialize(const Corpus& corpus, const TrainConfig& cfg);

/// Rebuilds levels 2..K from the current word and leaf boxes, resets their
/// optimizer moments and the taxonomy links. Returns the clustering result.
RecurClusResult recluster(ModelState& state, const TrainConfig& cfg);

/// Recomputes every parent link from the current hierarchical relations.
void refresh_parents(ModelState& state);

/// Links between level k and k + 1 from state.parents.
std::vector<Link> links_at(const ModelState& state, int level);

struct BatchLoss {
  ad::Var total;
  ad::Var reconstruction;  // batch mean
  ad::Var kl;              // batch mean
  double co = 0.0;
  double ht = 0.0;
};

/// Loss of one minibatch on gv's graph: (rec + KL) / B + alpha * co + beta * ht.
/// The co term is skipped when co_pairs is empty, the ht term when beta is 0.
BatchLoss batch_loss(const ModelState& state, const GlobalVars& gv, const ad::Matrix& tfidf,
                     const ad::Matrix& counts, const ad::Matrix& noise, std::span<const CoPair> co_pairs,
                     double beta, const TrainConfig& cfg);

/// One epoch. Throws NonFiniteError on a NaN or infinite batch loss; the
/// state is then left as it was after the last good batch.
EpochStats train_epoch(ModelState& state, const Corpus& corpus, int epoch, const TrainConfig& cfg);

/// Mean negative ELBO over the given rows with zero latent noise.
double evaluate_elbo(const ModelState& state, const Corpus& corpus, const std::vector<int>& rows, int batch_size);

struct FitResult {
  ModelState state;
  ModelState best_state;
  TrainProgress progress;
  std::vector<EpochStats> history;
};

using EpochCallback = std::function<void(const EpochStats&, const ModelState&, const TrainProgress&)>;

FitResult fit(const Corpus& corpus, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Continues a run from a saved state and progress up to cfg.epochs.
FitResult resume(const Corpus& corpus, const TrainConfig& cfg, ModelState state, TrainProgress progress,
                 const EpochCallback& on_epoch = {});

/// Dense B x |V| block of the given sparse rows.
ad::Matrix dense_rows(const SparseMatrix& m, std::span<const int> rows);

}  // namespace boxtax
