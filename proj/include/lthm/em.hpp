#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "lthm/corpus.hpp"
#include "lthm/matrix.hpp"
#include "lthm/model.hpp"
#include "lthm/ranking.hpp"

namespace lthm {

// Instrumentation for the linear-time claims.
struct EStepCounters {
  std::size_t posterior_evals = 0;
  // Multiply-adds spent aggregating E(U): two per topic per no-link token for
  // the no-link probability and the residual sum, plus one per (doc, topic)
  // for the final product.
  std::size_t u_fast_ops = 0;
};

struct EStepOptions {
  bool links_enabled = true;
  std::size_t threads = 1;
};

struct EStepResult {
  SufficientStats stats;
  double log_likelihood = 0.0;
  double objective = 0.0;
  EStepCounters counters;
};

// Per-token posteriors over the word topic. `full` conditions on every
// observation; `without_link` drops the token's own link/no-link event.
struct TokenPosteriors {
  std::vector<std::size_t> doc_offsets;  // row of token (d, 0)
  Matrix full;
  Matrix without_link;

  std::span<const double> p(DocIndex d, std::size_t i) const { return full.row(doc_offsets[d] + i); }
  std::span<const double> p_hat(DocIndex d, std::size_t i) const {
    return without_link.row(doc_offsets[d] + i);
  }
};

// m(z) = sum_d lambda_d theta_d(z): probability that a word of topic z emits a
// link to some document.
std::vector<double> doc_link_mass(const ModelParams& params);

std::vector<double> token_posterior(const CorpusView& view, DocIndex d, std::size_t i,
                                    const ModelParams& params, std::span<const double> link_mass);

TokenPosteriors compute_posteriors(const CorpusView& view, const ModelParams& params);

// Reference E(U) by explicit enumeration over (target, link topic, word topic)
// for every no-link token. O(D K^2) per token; for tests and small corpora.
Matrix expected_u_naive(const CorpusView& view, const ModelParams& params);

// E(U) in O(K * tokens + D * K) from the link-event-removed posteriors.
Matrix expected_u_fast(const CorpusView& view, const ModelParams& params,
                       const TokenPosteriors& posteriors, std::span<const double> link_mass,
                       EStepCounters* counters = nullptr);

EStepResult e_step(const CorpusView& view, const ModelParams& params, const Hyperparams& hyper,
                   const EStepOptions& options = {});

ModelParams m_step(const SufficientStats& stats, const Hyperparams& hyper,
                   std::size_t total_tokens, bool links_enabled = true);

struct TraceEntry {
  std::size_t iter;
  double objective;
  double seconds;
  double sum_v;
  double sum_u;
  double sum_t;
};

struct TrainResult {
  ModelParams params;
  std::vector<TraceEntry> trace;
  bool converged = false;
};

// Called after every M-step with the 1-based iteration number.
using IterationCallback = std::function<void(std::size_t iter, const ModelParams&)>;

// EM from `init` (or init_params when null) until the relative objective
// change drops below config.tol or max_iters is reached. Throws
// NumericalError if the objective ever decreases by more than 1e-8.
TrainResult train(const CorpusView& view, const Hyperparams& hyper, const TrainConfig& config,
                  const ModelParams* init = nullptr, const IterationCallback& on_iter = {});

void write_trace_csv(const std::vector<TraceEntry>& trace, std::ostream& out);

struct FoldInOptions {
  std::size_t iters = 50;
  double tol = 1e-7;
};

// Estimates a topic mixture for unseen text with beta and lambda frozen.
// Every token is treated as a no-link observation.
std::vector<double> fold_in(std::span<const WordId> tokens, const ModelParams& params,
                            const Hyperparams& hyper, const FoldInOptions& options = {});

// score(d') = sum_i sum_z p_i(z) lambda_d' theta_d'(z), the expected number
// of links from the source text into d'.
RankedPrediction score_links(std::span<const WordId> tokens, std::span<const double> theta_source,
                             const ModelParams& params);

}  // namespace lthm
