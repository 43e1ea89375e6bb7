#include "lthm/em.hpp"

#include <chrono>
#include <cstdio>
#include <cmath>
#include <limits>
#include <ostream>

#include "lthm/error.hpp"
#include "lthm/parallel.hpp"

namespace lthm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kMonotonicitySlack = 1e-8;

// Log-space tables shared by every token evaluation of one E-step.
class PosteriorKernel {
 public:
  PosteriorKernel(const ModelParams& params, bool links_enabled)
      : K_(params.num_topics()),
        links_enabled_(links_enabled),
        log_theta_(params.theta.rows(), K_),
        log_beta_t_(params.vocab_size(), K_),
        log_lambda_(params.num_docs()) {
    for (std::size_t d = 0; d < params.num_docs(); ++d) {
      for (std::size_t z = 0; z < K_; ++z) log_theta_(d, z) = std::log(params.theta(d, z));
      log_lambda_[d] = std::log(params.lambda[d]);
    }
    for (std::size_t z = 0; z < K_; ++z)
      for (std::size_t w = 0; w < params.vocab_size(); ++w)
        log_beta_t_(w, z) = std::log(params.beta(z, w));
    if (links_enabled_) {
      link_mass_ = doc_link_mass(params);
      no_link_.resize(K_);
      for (std::size_t z = 0; z < K_; ++z) no_link_[z] = 1.0 - link_mass_[z];
    }
  }

  std::size_t num_topics() const { return K_; }
  std::span<const double> link_mass() const { return link_mass_; }

  // Fills p (full posterior) and p_hat (posterior without the link event) and
  // returns the token's log marginal likelihood. For no-link tokens
  // *no_link_prob receives Pr(no-link | other observations).
  double evaluate(DocIndex d, WordId w, std::int32_t target, std::span<double> p,
                  std::span<double> p_hat, double* no_link_prob) const {
    auto lt = log_theta_.row(d);
    auto lb = log_beta_t_.row(w);
    double mx = kNegInf;
    for (std::size_t z = 0; z < K_; ++z) {
      p_hat[z] = lt[z] + lb[z];
      mx = std::max(mx, p_hat[z]);
    }
    if (mx == kNegInf) throw NumericalError("token has zero likelihood");
    double s = 0.0;
    for (std::size_t z = 0; z < K_; ++z) {
      p_hat[z] = std::exp(p_hat[z] - mx);
      s += p_hat[z];
    }
    for (std::size_t z = 0; z < K_; ++z) p_hat[z] /= s;
    const double log_text = mx + std::log(s);

    if (!links_enabled_) {
      std::copy(p_hat.begin(), p_hat.end(), p.begin());
      if (no_link_prob) *no_link_prob = 1.0;
      return log_text;
    }

    if (target == kNoLink) {
      double nl = 0.0;
      for (std::size_t z = 0; z < K_; ++z) {
        p[z] = p_hat[z] * no_link_[z];
        nl += p[z];
      }
      if (!(nl > 0.0)) throw NumericalError("token has zero likelihood");
      for (std::size_t z = 0; z < K_; ++z) p[z] /= nl;
      if (no_link_prob) *no_link_prob = nl;
      return log_text + std::log(nl);
    }

    const auto t = static_cast<std::size_t>(target);
    auto ltt = log_theta_.row(t);
    double mx2 = kNegInf;
    for (std::size_t z = 0; z < K_; ++z) {
      p[z] = lt[z] + lb[z] + ltt[z];
      mx2 = std::max(mx2, p[z]);
    }
    if (mx2 == kNegInf || log_lambda_[t] == kNegInf) throw NumericalError("token has zero likelihood");
    double s2 = 0.0;
    for (std::size_t z = 0; z < K_; ++z) {
      p[z] = std::exp(p[z] - mx2);
      s2 += p[z];
    }
    for (std::size_t z = 0; z < K_; ++z) p[z] /= s2;
    return mx2 + std::log(s2) + log_lambda_[t];
  }

 private:
  std::size_t K_;
  bool links_enabled_;
  Matrix log_theta_;
  Matrix log_beta_t_;
  std::vector<double> log_lambda_;
  std::vector<double> link_mass_;
  std::vector<double> no_link_;
};

// Adds one no-link token's contribution to the topic-only bracket of E(U).
void accumulate_residual(std::span<const double> p_hat, double no_link_prob,
                         std::span<double> residual) {
  if (!(no_link_prob > 0.0)) throw NumericalError("no-link probability is not positive");
  const double inv = 1.0 / no_link_prob;
  for (std::size_t z = 0; z < residual.size(); ++z) residual[z] += (1.0 - p_hat[z]) * inv;
}

// E(U)[d, z] = lambda_d theta_d(z) residual(z).
void expand_residual(const ModelParams& params, std::span<const double> residual, Matrix& U) {
  for (std::size_t d = 0; d < params.num_docs(); ++d) {
    const double l = params.lambda[d];
    auto th = params.theta.row(d);
    auto u = U.row(d);
    for (std::size_t z = 0; z < residual.size(); ++z) u[z] = l * th[z] * residual[z];
  }
}

struct ShardStats {
  SufficientStats stats;
  std::vector<double> residual;
  CompensatedSum log_likelihood;
  EStepCounters counters;
};

double elapsed_seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

std::vector<double> doc_link_mass(const ModelParams& params) {
  std::vector<double> m(params.num_topics(), 0.0);
  for (std::size_t d = 0; d < params.num_docs(); ++d) {
    const double l = params.lambda[d];
    auto th = params.theta.row(d);
    for (std::size_t z = 0; z < m.size(); ++z) m[z] += l * th[z];
  }
  return m;
}

std::vector<double> token_posterior(const CorpusView& view, DocIndex d, std::size_t i,
                                    const ModelParams& params, std::span<const double> link_mass) {
  const std::size_t K = params.num_topics();
  const auto w = view.corpus().doc(d).tokens.at(i);
  const auto target = view.link_target(d, i);
  std::vector<double> p(K);
  double total = 0.0;
  for (std::size_t z = 0; z < K; ++z) {
    double link = target == kNoLink
                      ? 1.0 - link_mass[z]
                      : params.lambda[static_cast<std::size_t>(target)] *
                            params.theta(static_cast<std::size_t>(target), z);
    p[z] = params.theta(d, z) * params.beta(z, w) * link;
    total += p[z];
  }
  if (!(total > 0.0)) throw NumericalError("token has zero likelihood");
  for (double& x : p) x /= total;
  return p;
}

TokenPosteriors compute_posteriors(const CorpusView& view, const ModelParams& params) {
  const auto& corpus = view.corpus();
  const std::size_t K = params.num_topics();
  TokenPosteriors out;
  out.doc_offsets.resize(corpus.num_docs());
  std::size_t offset = 0;
  for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
    out.doc_offsets[d] = offset;
    offset += corpus.doc(static_cast<DocIndex>(d)).size();
  }
  out.full = Matrix(offset, K);
  out.without_link = Matrix(offset, K);
  PosteriorKernel kernel(params, true);
  for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
    const auto dd = static_cast<DocIndex>(d);
    const auto& doc = corpus.doc(dd);
    for (std::size_t i = 0; i < doc.size(); ++i) {
      const auto row = out.doc_offsets[d] + i;
      kernel.evaluate(dd, doc.tokens[i], view.link_target(dd, i), out.full.row(row),
                      out.without_link.row(row), nullptr);
    }
  }
  return out;
}

Matrix expected_u_naive(const CorpusView& view, const ModelParams& params) {
  const auto& corpus = view.corpus();
  const std::size_t D = params.num_docs();
  const std::size_t K = params.num_topics();
  Matrix U(D, K);
  Matrix joint(D, K);
  for (std::size_t src = 0; src < corpus.num_docs(); ++src) {
    const auto& doc = corpus.doc(static_cast<DocIndex>(src));
    for (std::size_t i = 0; i < doc.size(); ++i) {
      if (view.link_target(static_cast<DocIndex>(src), i) != kNoLink) continue;
      const auto w = doc.tokens[i];
      // Every configuration (word topic zw, target, link topic zl) consistent
      // with "no link": target is null, or zl != zw.
      double evidence = 0.0;
      joint.fill(0.0);
      for (std::size_t zw = 0; zw < K; ++zw) {
        const double text = params.theta(src, zw) * params.beta(zw, w);
        evidence += text * params.lambda_null();
        for (std::size_t t = 0; t < D; ++t) {
          for (std::size_t zl = 0; zl < K; ++zl) {
            if (zl == zw) continue;
            const double mass = text * params.lambda[t] * params.theta(t, zl);
            evidence += mass;
            joint(t, zl) += mass;
          }
        }
      }
      for (std::size_t t = 0; t < D; ++t)
        for (std::size_t z = 0; z < K; ++z) U(t, z) += joint(t, z) / evidence;
    }
  }
  return U;
}

Matrix expected_u_fast(const CorpusView& view, const ModelParams& params,
                       const TokenPosteriors& posteriors, std::span<const double> link_mass,
                       EStepCounters* counters) {
  const auto& corpus = view.corpus();
  const std::size_t K = params.num_topics();
  std::vector<double> residual(K, 0.0);
  std::size_t ops = 0;
  for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
    const auto dd = static_cast<DocIndex>(d);
    for (std::size_t i = 0; i < corpus.doc(dd).size(); ++i) {
      if (view.link_target(dd, i) != kNoLink) continue;
      auto p_hat = posteriors.p_hat(dd, i);
      double no_link = 1.0;
      for (std::size_t z = 0; z < K; ++z) no_link -= link_mass[z] * p_hat[z];
      accumulate_residual(p_hat, no_link, residual);
      ops += 2 * K;
    }
  }
  Matrix U(params.num_docs(), K);
  expand_residual(params, residual, U);
  ops += params.num_docs() * K;
  if (counters) counters->u_fast_ops += ops;
  return U;
}

EStepResult e_step(const CorpusView& view, const ModelParams& params, const Hyperparams& hyper,
                   const EStepOptions& options) {
  const auto& corpus = view.corpus();
  const std::size_t D = params.num_docs();
  const std::size_t K = params.num_topics();
  const std::size_t W = params.vocab_size();
  if (D != corpus.num_docs() || W != corpus.vocab_size())
    throw DataError("model shape does not match corpus");
  const PosteriorKernel kernel(params, options.links_enabled);

  auto shards = run_sharded<ShardStats>(D, options.threads, [&](std::size_t begin, std::size_t end) {
    ShardStats s{SufficientStats::zeros(D, K, W), std::vector<double>(K, 0.0), {}, {}};
    std::vector<double> p(K), p_hat(K);
    for (std::size_t d = begin; d < end; ++d) {
      const auto dd = static_cast<DocIndex>(d);
      const auto& doc = corpus.doc(dd);
      auto f = s.stats.F.row(d);
      for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto w = doc.tokens[i];
        const auto target = options.links_enabled ? view.link_target(dd, i) : kNoLink;
        double no_link = 1.0;
        s.log_likelihood.add(kernel.evaluate(dd, w, target, p, p_hat, &no_link));
        ++s.counters.posterior_evals;
        for (std::size_t z = 0; z < K; ++z) {
          f[z] += p[z];
          s.stats.G(z, w) += p[z];
        }
        if (!options.links_enabled) continue;
        if (target == kNoLink) {
          accumulate_residual(p_hat, no_link, s.residual);
          s.counters.u_fast_ops += 2 * K;
        } else {
          auto v = s.stats.V.row(static_cast<std::size_t>(target));
          for (std::size_t z = 0; z < K; ++z) v[z] += p[z];
        }
      }
    }
    return s;
  });

  EStepResult result;
  ShardStats& total = shards.front();
  for (std::size_t s = 1; s < shards.size(); ++s) {
    total.stats.merge(shards[s].stats);
    for (std::size_t z = 0; z < K; ++z) total.residual[z] += shards[s].residual[z];
    total.log_likelihood.add(shards[s].log_likelihood);
    total.counters.posterior_evals += shards[s].counters.posterior_evals;
    total.counters.u_fast_ops += shards[s].counters.u_fast_ops;
  }
  if (options.links_enabled) {
    expand_residual(params, total.residual, total.stats.U);
    total.counters.u_fast_ops += D * K;
  }
  total.stats.recompute_totals();

  result.stats = std::move(total.stats);
  result.counters = total.counters;
  result.log_likelihood = total.log_likelihood.value();
  result.objective = result.log_likelihood + log_prior(params, hyper, options.links_enabled);
  if (!std::isfinite(result.objective)) throw NumericalError("log MAP objective is not finite");
  return result;
}

ModelParams m_step(const SufficientStats& stats, const Hyperparams& hyper,
                   std::size_t total_tokens, bool links_enabled) {
  const std::size_t D = stats.F.rows();
  const std::size_t K = stats.F.cols();
  const std::size_t W = stats.G.cols();
  ModelParams p{Matrix(D, K), Matrix(K, W), std::vector<double>(D + 1, 0.0)};
  for (std::size_t z = 0; z < K; ++z) {
    auto row = p.beta.row(z);
    for (std::size_t w = 0; w < W; ++w) row[w] = stats.G(z, w) + hyper.eta[w] - 1.0;
    normalize_clamped(row);
  }
  for (std::size_t d = 0; d < D; ++d) {
    auto row = p.theta.row(d);
    for (std::size_t z = 0; z < K; ++z)
      row[z] = stats.F(d, z) + stats.V(d, z) + stats.U(d, z) + hyper.alpha[z] - 1.0;
    normalize_clamped(row);
  }
  if (!links_enabled) {
    p.lambda.back() = 1.0;
    return p;
  }
  double sum_t = 0.0;
  for (std::size_t d = 0; d < D; ++d) {
    p.lambda[d] = stats.T[d] + hyper.gamma_doc - 1.0;
    sum_t += stats.T[d];
  }
  p.lambda[D] = static_cast<double>(total_tokens) - sum_t + hyper.gamma_null - 1.0;
  normalize_clamped(p.lambda);
  return p;
}

TrainResult train(const CorpusView& view, const Hyperparams& hyper, const TrainConfig& config,
                  const ModelParams* init, const IterationCallback& on_iter) {
  if (config.max_iters < 1) throw UsageError("max_iters must be >= 1");
  if (!(config.tol >= 0.0)) throw UsageError("tol must be >= 0");
  const bool links = !config.disable_links;
  TrainResult result{init ? *init : init_params(view, hyper, config), {}, false};
  if (!links) {
    std::fill(result.params.lambda.begin(), result.params.lambda.end(), 0.0);
    result.params.lambda.back() = 1.0;
  }
  const EStepOptions opts{links, config.threads};
  const std::size_t N = view.corpus().total_tokens();
  double prev = 0.0;
  for (std::size_t it = 0; it < config.max_iters; ++it) {
    const auto start = std::chrono::steady_clock::now();
    auto es = e_step(view, result.params, hyper, opts);
    if (it > 0 && es.objective < prev - kMonotonicitySlack)
      throw NumericalError("EM monotonicity violated at iteration " + std::to_string(it + 1));
    result.params = m_step(es.stats, hyper, N, links);

    double sv = 0.0, su = 0.0, st = 0.0;
    for (double x : es.stats.V.data()) sv += x;
    for (double x : es.stats.U.data()) su += x;
    for (double x : es.stats.T) st += x;
    result.trace.push_back({it + 1, es.objective, elapsed_seconds(start), sv, su, st});
    if (on_iter) on_iter(it + 1, result.params);

    if (it > 0 && std::abs(es.objective - prev) <= config.tol * std::max(1.0, std::abs(prev))) {
      result.converged = true;
      break;
    }
    prev = es.objective;
  }
  return result;
}

void write_trace_csv(const std::vector<TraceEntry>& trace, std::ostream& out) {
  out << "iter,objective,seconds\n";
  char buf[96];
  for (const auto& e : trace) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.6f\n", e.iter, e.objective, e.seconds);
    out << buf;
  }
}

std::vector<double> fold_in(std::span<const WordId> tokens, const ModelParams& params,
                            const Hyperparams& hyper, const FoldInOptions& options) {
  const std::size_t K = params.num_topics();
  std::vector<double> theta(hyper.alpha.begin(), hyper.alpha.end());
  double a0 = 0.0;
  for (double a : theta) a0 += a;
  for (double& x : theta) x /= a0;
  if (tokens.empty()) return theta;
  for (auto w : tokens)
    if (w >= params.vocab_size()) throw DataError("fold-in token outside the vocabulary");

  const auto m = doc_link_mass(params);
  std::vector<double> counts(K), p(K), next(K);
  for (std::size_t it = 0; it < options.iters; ++it) {
    std::fill(counts.begin(), counts.end(), 0.0);
    for (auto w : tokens) {
      double s = 0.0;
      for (std::size_t z = 0; z < K; ++z) {
        p[z] = theta[z] * params.beta(z, w) * (1.0 - m[z]);
        s += p[z];
      }
      if (!(s > 0.0)) throw NumericalError("token has zero likelihood");
      for (std::size_t z = 0; z < K; ++z) counts[z] += p[z] / s;
    }
    for (std::size_t z = 0; z < K; ++z) next[z] = counts[z] + hyper.alpha[z] - 1.0;
    normalize_clamped(next);
    double change = 0.0;
    for (std::size_t z = 0; z < K; ++z) change = std::max(change, std::abs(next[z] - theta[z]));
    theta.swap(next);
    if (change < options.tol) break;
  }
  return theta;
}

RankedPrediction score_links(std::span<const WordId> tokens, std::span<const double> theta_source,
                             const ModelParams& params) {
  const std::size_t K = params.num_topics();
  std::vector<double> topic_mass(K, 0.0), p(K);
  for (auto w : tokens) {
    double s = 0.0;
    for (std::size_t z = 0; z < K; ++z) {
      p[z] = theta_source[z] * params.beta(z, w);
      s += p[z];
    }
    if (!(s > 0.0)) continue;
    for (std::size_t z = 0; z < K; ++z) topic_mass[z] += p[z] / s;
  }
  std::vector<double> scores(params.num_docs());
  for (std::size_t d = 0; d < params.num_docs(); ++d) {
    auto th = params.theta.row(d);
    double s = 0.0;
    for (std::size_t z = 0; z < K; ++z) s += topic_mass[z] * th[z];
    scores[d] = params.lambda[d] * s;
  }
  return rank_by_score(scores);
}

}  // namespace lthm
