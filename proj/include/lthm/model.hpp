#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lthm/corpus.hpp"
#include "lthm/matrix.hpp"

namespace lthm {

// Floor applied to MAP numerators before normalization.
inline constexpr double kMinMass = 1e-12;
inline constexpr double kSimplexTolerance = 1e-9;

// Fixed Dirichlet priors. alpha is over topics, eta over words; the link
// prior is gamma_doc on every document entry and gamma_null on the no-link
// entry.
struct Hyperparams {
  std::vector<double> alpha;
  std::vector<double> eta;
  double gamma_doc = 1.1;
  double gamma_null = 1.1;

  static Hyperparams symmetric(std::size_t K, std::size_t W, double alpha, double eta,
                               double gamma_doc, double gamma_null);

  // alpha = eta = gamma_doc = 1.1 and gamma_null scaled so that
  // gamma_null / gamma_doc ~ total_tokens / max(total_links, 1).
  static Hyperparams reference(std::size_t K, std::size_t W, std::size_t total_tokens,
                               std::size_t total_links);

  // Throws UsageError on non-positive entries. Returns a warning (empty if
  // none) when gamma_doc is not well below gamma_null.
  std::string validate(std::size_t K, std::size_t W) const;
};

struct ModelParams {
  Matrix theta;                 // D x K
  Matrix beta;                  // K x W
  std::vector<double> lambda;   // D + 1, last entry is the no-link mass

  std::size_t num_docs() const { return theta.rows(); }
  std::size_t num_topics() const { return theta.cols(); }
  std::size_t vocab_size() const { return beta.cols(); }
  double lambda_null() const { return lambda.back(); }

  // Throws NumericalError when a simplex constraint is violated.
  void validate(double tol = kSimplexTolerance) const;

  bool operator==(const ModelParams&) const = default;
};

// Expected counts from one E-step. F: doc-topic word counts, G: topic-word
// counts, V: incoming-link topic counts, U: matched target but mismatched
// topic counts, T: total target selections per document.
struct SufficientStats {
  Matrix F;
  Matrix G;
  Matrix V;
  Matrix U;
  std::vector<double> T;

  static SufficientStats zeros(std::size_t D, std::size_t K, std::size_t W);

  SufficientStats& merge(const SufficientStats& other);
  void recompute_totals();
};

struct TrainConfig {
  std::size_t num_topics = 20;
  std::size_t max_iters = 600;
  double tol = 1e-6;
  std::uint64_t seed = 1;
  bool disable_links = false;
  std::size_t threads = 1;
};

// Divides by the sum. Idempotent up to rounding.
void normalize(std::span<double> v);

// Floors entries at kMinMass, then normalizes. Used on MAP numerators, which
// can go negative when a prior entry is below 1.
void normalize_clamped(std::span<double> v);

// Gamma-normalization draw. Falls back to a one-hot on the largest
// concentration when every gamma draw underflows.
std::vector<double> sample_dirichlet(std::span<const double> alpha, std::mt19937_64& rng);

ModelParams init_params(const CorpusView& view, const Hyperparams& hyper,
                        const TrainConfig& config);

// sum_{a}(a_i - 1) log x_i plus the Dirichlet normalizer. Terms with
// a_i == 1 contribute 0 even when x_i == 0.
double log_dirichlet_density(std::span<const double> x, std::span<const double> alpha);

// log prior of all parameters. The lambda prior is skipped when links are
// disabled (lambda is then pinned to the no-link corner).
double log_prior(const ModelParams& params, const Hyperparams& hyper, bool links_enabled);

// Log posterior up to the evidence: sum over tokens of
// log sum_z theta_d(z) beta_z(w) Pr(link obs | z), plus log_prior.
double log_map_objective(const CorpusView& view, const ModelParams& params,
                         const Hyperparams& hyper, bool links_enabled = true);

}  // namespace lthm
