#pragma once

#include <span>
#include <vector>

#include "lthm/corpus.hpp"
#include "lthm/em.hpp"
#include "lthm/matrix.hpp"
#include "lthm/model.hpp"
#include "lthm/ranking.hpp"

namespace lthm {

// Ranks every document by visible in-degree. The same ranking serves every
// source document.
RankedPrediction freq_rank(const CorpusView& train_view);

// Words and citations share the document mixture; each citation topic picks
// its target from a per-topic distribution over documents.
struct LinkLdaParams {
  Matrix theta;  // D x K
  Matrix beta;   // K x W
  Matrix omega;  // K x D

  std::size_t num_docs() const { return theta.rows(); }
  std::size_t num_topics() const { return theta.cols(); }
  void validate(double tol = kSimplexTolerance) const;
};

struct LinkLdaConfig {
  TrainConfig train;
  // Weight of citation topic counts relative to word topic counts in theta.
  double citation_weight = 1.0;
};

struct LinkLdaStats {
  Matrix word_topics;      // D x K
  Matrix citation_topics;  // D x K
  Matrix topic_words;      // K x W
  Matrix topic_citations;  // K x D
};

struct LinkLdaEStep {
  LinkLdaStats stats;
  double log_likelihood = 0.0;
  double objective = 0.0;
};

struct LinkLdaTrainResult {
  LinkLdaParams params;
  std::vector<TraceEntry> trace;
  bool converged = false;
};

LinkLdaParams link_lda_init(const CorpusView& view, const Hyperparams& hyper,
                            const TrainConfig& config);

// Posterior over the topic of a citation from doc `source` to `target`.
std::vector<double> link_lda_citation_posterior(const LinkLdaParams& params, DocIndex source,
                                                DocIndex target);

LinkLdaEStep link_lda_e_step(const CorpusView& view, const LinkLdaParams& params,
                             const Hyperparams& hyper, double citation_weight = 1.0,
                             std::size_t threads = 1);

LinkLdaParams link_lda_m_step(const LinkLdaStats& stats, const Hyperparams& hyper,
                              double citation_weight = 1.0);

LinkLdaTrainResult link_lda_train(const CorpusView& view, const Hyperparams& hyper,
                                  const LinkLdaConfig& config, const LinkLdaParams* init = nullptr,
                                  const std::function<void(std::size_t, const LinkLdaParams&)>&
                                      on_iter = {});

// score(d') = sum_z theta_source(z) omega_z(d').
RankedPrediction link_lda_score(std::span<const double> theta_source, const LinkLdaParams& params);

}  // namespace lthm
