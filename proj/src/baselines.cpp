#include "lthm/baselines.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "lthm/error.hpp"
#include "lthm/parallel.hpp"

namespace lthm {

namespace {

struct LinkLdaShard {
  LinkLdaStats stats;
  CompensatedSum words;
  CompensatedSum citations;
};

double log_sum_normalize(std::span<double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  if (!(s > 0.0)) throw NumericalError("observation has zero likelihood");
  for (double& x : v) x /= s;
  return std::log(s);
}

}  // namespace

RankedPrediction freq_rank(const CorpusView& train_view) {
  auto counts = in_degree(train_view);
  std::vector<double> scores(counts.begin(), counts.end());
  return rank_by_score(scores);
}

void LinkLdaParams::validate(double tol) const {
  ModelParams shim{theta, beta, std::vector<double>(theta.rows() + 1, 0.0)};
  shim.lambda.back() = 1.0;
  shim.validate(tol);
  for (std::size_t z = 0; z < omega.rows(); ++z) {
    double s = 0.0;
    for (double x : omega.row(z)) {
      if (!(x >= 0.0)) throw NumericalError("omega row has a negative entry");
      s += x;
    }
    if (std::abs(s - 1.0) > tol) throw NumericalError("omega row does not sum to 1");
  }
}

LinkLdaParams link_lda_init(const CorpusView& view, const Hyperparams& hyper,
                            const TrainConfig& config) {
  TrainConfig text_only = config;
  text_only.disable_links = true;
  // Same draws as init_params for theta and beta, so a shared seed gives the
  // same starting point as plain LDA.
  auto base = init_params(view, hyper, text_only);
  const std::size_t D = view.num_docs();
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<double> prior(D, hyper.gamma_doc);
  Matrix omega(config.num_topics, D);
  for (std::size_t z = 0; z < config.num_topics; ++z) {
    auto row = sample_dirichlet(prior, rng);
    std::copy(row.begin(), row.end(), omega.row(z).begin());
  }
  return LinkLdaParams{std::move(base.theta), std::move(base.beta), std::move(omega)};
}

std::vector<double> link_lda_citation_posterior(const LinkLdaParams& params, DocIndex source,
                                                DocIndex target) {
  const std::size_t K = params.num_topics();
  std::vector<double> p(K);
  for (std::size_t z = 0; z < K; ++z) p[z] = params.theta(source, z) * params.omega(z, target);
  log_sum_normalize(p);
  return p;
}

LinkLdaEStep link_lda_e_step(const CorpusView& view, const LinkLdaParams& params,
                             const Hyperparams& hyper, double citation_weight,
                             std::size_t threads) {
  const auto& corpus = view.corpus();
  const std::size_t D = params.num_docs();
  const std::size_t K = params.num_topics();
  const std::size_t W = params.beta.cols();

  auto shards = run_sharded<LinkLdaShard>(D, threads, [&](std::size_t begin, std::size_t end) {
    LinkLdaShard s{{Matrix(D, K), Matrix(D, K), Matrix(K, W), Matrix(K, D)}, {}, {}};
    std::vector<double> p(K);
    for (std::size_t d = begin; d < end; ++d) {
      const auto dd = static_cast<DocIndex>(d);
      const auto& doc = corpus.doc(dd);
      auto th = params.theta.row(d);
      for (auto w : doc.tokens) {
        for (std::size_t z = 0; z < K; ++z) p[z] = th[z] * params.beta(z, w);
        s.words.add(log_sum_normalize(p));
        for (std::size_t z = 0; z < K; ++z) {
          s.stats.word_topics(d, z) += p[z];
          s.stats.topic_words(z, w) += p[z];
        }
      }
      if (!view.links_visible(dd)) continue;
      for (const auto& link : doc.links()) {
        for (std::size_t z = 0; z < K; ++z) p[z] = th[z] * params.omega(z, link.target);
        s.citations.add(log_sum_normalize(p));
        for (std::size_t z = 0; z < K; ++z) {
          s.stats.citation_topics(d, z) += p[z];
          s.stats.topic_citations(z, link.target) += p[z];
        }
      }
    }
    return s;
  });

  LinkLdaShard& total = shards.front();
  for (std::size_t i = 1; i < shards.size(); ++i) {
    total.stats.word_topics += shards[i].stats.word_topics;
    total.stats.citation_topics += shards[i].stats.citation_topics;
    total.stats.topic_words += shards[i].stats.topic_words;
    total.stats.topic_citations += shards[i].stats.topic_citations;
    total.words.add(shards[i].words);
    total.citations.add(shards[i].citations);
  }

  LinkLdaEStep out;
  out.stats = std::move(total.stats);
  out.log_likelihood = total.words.value() + citation_weight * total.citations.value();
  double prior = 0.0;
  for (std::size_t d = 0; d < D; ++d) prior += log_dirichlet_density(params.theta.row(d), hyper.alpha);
  for (std::size_t z = 0; z < K; ++z) prior += log_dirichlet_density(params.beta.row(z), hyper.eta);
  std::vector<double> omega_prior(D, hyper.gamma_doc);
  for (std::size_t z = 0; z < K; ++z)
    prior += log_dirichlet_density(params.omega.row(z), omega_prior);
  out.objective = out.log_likelihood + prior;
  if (!std::isfinite(out.objective)) throw NumericalError("link-LDA objective is not finite");
  return out;
}

LinkLdaParams link_lda_m_step(const LinkLdaStats& stats, const Hyperparams& hyper,
                              double citation_weight) {
  const std::size_t D = stats.word_topics.rows();
  const std::size_t K = stats.word_topics.cols();
  const std::size_t W = stats.topic_words.cols();
  LinkLdaParams p{Matrix(D, K), Matrix(K, W), Matrix(K, D)};
  for (std::size_t z = 0; z < K; ++z) {
    auto b = p.beta.row(z);
    for (std::size_t w = 0; w < W; ++w) b[w] = stats.topic_words(z, w) + hyper.eta[w] - 1.0;
    normalize_clamped(b);
    auto o = p.omega.row(z);
    for (std::size_t d = 0; d < D; ++d) o[d] = stats.topic_citations(z, d) + hyper.gamma_doc - 1.0;
    normalize_clamped(o);
  }
  for (std::size_t d = 0; d < D; ++d) {
    auto th = p.theta.row(d);
    for (std::size_t z = 0; z < K; ++z)
      th[z] = stats.word_topics(d, z) + citation_weight * stats.citation_topics(d, z) +
              hyper.alpha[z] - 1.0;
    normalize_clamped(th);
  }
  return p;
}

LinkLdaTrainResult link_lda_train(
    const CorpusView& view, const Hyperparams& hyper, const LinkLdaConfig& config,
    const LinkLdaParams* init,
    const std::function<void(std::size_t, const LinkLdaParams&)>& on_iter) {
  const auto& tc = config.train;
  if (tc.max_iters < 1) throw UsageError("max_iters must be >= 1");
  if (!(config.citation_weight > 0.0)) throw UsageError("citation weight must be positive");
  LinkLdaTrainResult result{init ? *init : link_lda_init(view, hyper, tc), {}, false};
  double prev = 0.0;
  for (std::size_t it = 0; it < tc.max_iters; ++it) {
    const auto start = std::chrono::steady_clock::now();
    auto es = link_lda_e_step(view, result.params, hyper, config.citation_weight, tc.threads);
    if (it > 0 && es.objective < prev - 1e-8)
      throw NumericalError("EM monotonicity violated at iteration " + std::to_string(it + 1));
    result.params = link_lda_m_step(es.stats, hyper, config.citation_weight);
    double cites = 0.0;
    for (double x : es.stats.citation_topics.data()) cites += x;
    result.trace.push_back(
        {it + 1, es.objective,
         std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), cites,
         0.0, cites});
    if (on_iter) on_iter(it + 1, result.params);
    if (it > 0 && std::abs(es.objective - prev) <= tc.tol * std::max(1.0, std::abs(prev))) {
      result.converged = true;
      break;
    }
    prev = es.objective;
  }
  return result;
}

RankedPrediction link_lda_score(std::span<const double> theta_source, const LinkLdaParams& params) {
  std::vector<double> scores(params.num_docs(), 0.0);
  for (std::size_t z = 0; z < params.num_topics(); ++z) {
    auto o = params.omega.row(z);
    for (std::size_t d = 0; d < scores.size(); ++d) scores[d] += theta_source[z] * o[d];
  }
  return rank_by_score(scores);
}

}  // namespace lthm
