#include "lthm/model.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "lthm/error.hpp"

namespace lthm {

namespace {

void check_simplex(std::span<const double> v, double tol, const char* what) {
  double sum = 0.0;
  for (double x : v) {
    if (!(x >= 0.0) || !std::isfinite(x))
      throw NumericalError(std::string(what) + " has a negative or non-finite entry");
    sum += x;
  }
  if (std::abs(sum - 1.0) > tol)
    throw NumericalError(std::string(what) + " does not sum to 1");
}

double xlogy(double a, double x) { return a == 0.0 ? 0.0 : a * std::log(x); }

double log_sum_exp(std::span<const double> v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (mx == -std::numeric_limits<double>::infinity()) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

}  // namespace

Hyperparams Hyperparams::symmetric(std::size_t K, std::size_t W, double alpha, double eta,
                                   double gamma_doc, double gamma_null) {
  return Hyperparams{std::vector<double>(K, alpha), std::vector<double>(W, eta), gamma_doc,
                     gamma_null};
}

Hyperparams Hyperparams::reference(std::size_t K, std::size_t W, std::size_t total_tokens,
                                   std::size_t total_links) {
  const double gamma_doc = 1.1;
  const double ratio =
      static_cast<double>(total_tokens) / static_cast<double>(std::max<std::size_t>(total_links, 1));
  return symmetric(K, W, 1.1, 1.1, gamma_doc, gamma_doc * std::max(ratio, 1.0));
}

std::string Hyperparams::validate(std::size_t K, std::size_t W) const {
  if (alpha.size() != K) throw UsageError("alpha must have one entry per topic");
  if (eta.size() != W) throw UsageError("eta must have one entry per word");
  for (double a : alpha)
    if (!(a > 0.0)) throw UsageError("alpha entries must be positive");
  for (double e : eta)
    if (!(e > 0.0)) throw UsageError("eta entries must be positive");
  if (!(gamma_doc > 0.0) || !(gamma_null > 0.0))
    throw UsageError("gamma entries must be positive");
  if (gamma_doc >= gamma_null)
    return "gamma_doc >= gamma_null: the link prior does not favour the no-link outcome";
  return {};
}

void ModelParams::validate(double tol) const {
  if (beta.rows() != theta.cols()) throw NumericalError("theta/beta topic counts differ");
  if (lambda.size() != theta.rows() + 1) throw NumericalError("lambda has the wrong length");
  for (std::size_t d = 0; d < theta.rows(); ++d) check_simplex(theta.row(d), tol, "theta row");
  for (std::size_t z = 0; z < beta.rows(); ++z) check_simplex(beta.row(z), tol, "beta row");
  check_simplex(lambda, tol, "lambda");
}

SufficientStats SufficientStats::zeros(std::size_t D, std::size_t K, std::size_t W) {
  return SufficientStats{Matrix(D, K), Matrix(K, W), Matrix(D, K), Matrix(D, K),
                         std::vector<double>(D, 0.0)};
}

SufficientStats& SufficientStats::merge(const SufficientStats& other) {
  F += other.F;
  G += other.G;
  V += other.V;
  U += other.U;
  for (std::size_t d = 0; d < T.size(); ++d) T[d] += other.T[d];
  return *this;
}

void SufficientStats::recompute_totals() {
  for (std::size_t d = 0; d < V.rows(); ++d) {
    double t = 0.0;
    for (std::size_t z = 0; z < V.cols(); ++z) t += V(d, z) + U(d, z);
    T[d] = t;
  }
}

void normalize(std::span<double> v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  if (!(sum > 0.0)) throw NumericalError("cannot normalize a vector with no mass");
  for (double& x : v) x /= sum;
}

void normalize_clamped(std::span<double> v) {
  for (double& x : v) x = std::max(x, kMinMass);
  normalize(v);
}

std::vector<double> sample_dirichlet(std::span<const double> alpha, std::mt19937_64& rng) {
  std::vector<double> out(alpha.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    std::gamma_distribution<double> g(alpha[i], 1.0);
    out[i] = g(rng);
    sum += out[i];
  }
  if (!(sum > 0.0)) {
    auto best = std::max_element(alpha.begin(), alpha.end()) - alpha.begin();
    std::fill(out.begin(), out.end(), 0.0);
    out[static_cast<std::size_t>(best)] = 1.0;
    return out;
  }
  for (double& x : out) x /= sum;
  return out;
}

ModelParams init_params(const CorpusView& view, const Hyperparams& hyper,
                        const TrainConfig& config) {
  const auto& corpus = view.corpus();
  const std::size_t D = corpus.num_docs();
  const std::size_t K = config.num_topics;
  const std::size_t W = corpus.vocab_size();
  if (K < 1) throw UsageError("topic count must be >= 1");
  hyper.validate(K, W);

  std::mt19937_64 rng(config.seed);
  ModelParams p{Matrix(D, K), Matrix(K, W), std::vector<double>(D + 1, 0.0)};
  for (std::size_t z = 0; z < K; ++z) {
    auto row = sample_dirichlet(hyper.eta, rng);
    std::copy(row.begin(), row.end(), p.beta.row(z).begin());
  }
  for (std::size_t d = 0; d < D; ++d) {
    auto row = sample_dirichlet(hyper.alpha, rng);
    std::copy(row.begin(), row.end(), p.theta.row(d).begin());
  }

  if (config.disable_links) {
    p.lambda.back() = 1.0;
    return p;
  }
  auto indeg = in_degree(view);
  for (std::size_t d = 0; d < D; ++d)
    p.lambda[d] = static_cast<double>(indeg[d]) + hyper.gamma_doc - 1.0;
  p.lambda[D] = static_cast<double>(corpus.total_tokens()) -
                static_cast<double>(view.visible_link_count()) + hyper.gamma_null - 1.0;
  normalize_clamped(p.lambda);
  return p;
}

double log_dirichlet_density(std::span<const double> x, std::span<const double> alpha) {
  double a0 = 0.0;
  double out = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    a0 += alpha[i];
    out += xlogy(alpha[i] - 1.0, x[i]) - std::lgamma(alpha[i]);
  }
  return out + std::lgamma(a0);
}

double log_prior(const ModelParams& params, const Hyperparams& hyper, bool links_enabled) {
  double lp = 0.0;
  for (std::size_t d = 0; d < params.theta.rows(); ++d)
    lp += log_dirichlet_density(params.theta.row(d), hyper.alpha);
  for (std::size_t z = 0; z < params.beta.rows(); ++z)
    lp += log_dirichlet_density(params.beta.row(z), hyper.eta);
  if (links_enabled) {
    std::vector<double> gamma(params.lambda.size(), hyper.gamma_doc);
    gamma.back() = hyper.gamma_null;
    lp += log_dirichlet_density(params.lambda, gamma);
  }
  return lp;
}

double log_map_objective(const CorpusView& view, const ModelParams& params,
                         const Hyperparams& hyper, bool links_enabled) {
  const auto& corpus = view.corpus();
  const std::size_t K = params.num_topics();
  std::vector<double> no_link(K, 1.0);
  if (links_enabled) {
    for (std::size_t z = 0; z < K; ++z) {
      double m = 0.0;
      for (std::size_t d = 0; d < params.num_docs(); ++d) m += params.lambda[d] * params.theta(d, z);
      no_link[z] = 1.0 - m;
    }
  }
  std::vector<double> terms(K);
  double total = 0.0;
  double comp = 0.0;  // Neumaier compensation
  for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
    const auto& doc = corpus.doc(static_cast<DocIndex>(d));
    for (std::size_t i = 0; i < doc.size(); ++i) {
      const auto w = doc.tokens[i];
      const auto target = links_enabled ? view.link_target(static_cast<DocIndex>(d), i) : kNoLink;
      for (std::size_t z = 0; z < K; ++z) {
        double link = target == kNoLink
                          ? no_link[z]
                          : params.lambda[static_cast<std::size_t>(target)] *
                                params.theta(static_cast<std::size_t>(target), z);
        terms[z] = std::log(params.theta(d, z)) + std::log(params.beta(z, w)) + std::log(link);
      }
      double t = log_sum_exp(terms);
      double s = total + t;
      comp += std::abs(total) >= std::abs(t) ? (total - s) + t : (t - s) + total;
      total = s;
    }
  }
  double result = total + comp + log_prior(params, hyper, links_enabled);
  if (!std::isfinite(result)) throw NumericalError("log MAP objective is not finite");
  return result;
}

}  // namespace lthm
