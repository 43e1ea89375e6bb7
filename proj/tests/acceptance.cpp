// Acceptance suite. Prints one PASS/FAIL line per criterion, followed by the
// measured values, and exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "lthm/baselines.hpp"
#include "lthm/em.hpp"
#include "lthm/error.hpp"
#include "lthm/eval.hpp"
#include "lthm/generator.hpp"
#include "oracles.hpp"

using namespace lthm;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome ac1_oracle_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<std::size_t> dd(1, 20), kk(1, 5), ww(1, 30);
  std::uniform_real_distribution<double> dens(0.0, 0.4), nul(0.05, 0.95);
  double worst_u = 0.0, worst_stats = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto D = dd(rng), K = kk(rng), W = ww(rng);
    auto c = testing::random_corpus(D, W, 20, dens(rng), rng);
    auto p = testing::random_params(D, K, W, rng, nul(rng));
    auto view = CorpusView::all_links(c);
    auto fast = expected_u_fast(view, p, compute_posteriors(view, p), doc_link_mass(p));
    worst_u = std::max(worst_u, max_abs_diff(fast, expected_u_naive(view, p)));
    auto hyper = Hyperparams::symmetric(K, W, 1.1, 1.1, 1.1, 10.0);
    auto es = e_step(view, p, hyper);
    auto oracle = testing::enumerate_e_step(view, p);
    for (auto [a, b] : {std::pair{&es.stats.F, &oracle.F}, {&es.stats.G, &oracle.G},
                        {&es.stats.V, &oracle.V}, {&es.stats.U, &oracle.U}})
      worst_stats = std::max(worst_stats, max_abs_diff(*a, *b));
    for (std::size_t d = 0; d < D; ++d)
      worst_stats = std::max(worst_stats, std::abs(es.stats.T[d] - oracle.T[d]));
  }
  const double secs = seconds_since(t0);
  return {worst_u <= 1e-9 && worst_stats <= 1e-9 && secs < 60.0,
          fmt("max|U_fast-U_naive|=%.3g max|stats-oracle|=%.3g time=%.2fs (50 corpora)", worst_u,
              worst_stats, secs)};
}

// ---------------------------------------------------------------------------

Outcome ac2_monotonicity() {
  struct Shape {
    const char* name;
    std::size_t D, W, N;
    double density;
    std::size_t K;
  };
  const Shape shapes[] = {{"small", 15, 30, 30, 0.10, 3},
                          {"linkless", 20, 40, 40, 0.0, 4},
                          {"dense", 30, 60, 50, 0.25, 5}};
  double worst_drop = 0.0;
  std::size_t runs = 0;
  for (const auto& s : shapes) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      std::mt19937_64 rng(seed * 1000 + s.D);
      auto c = testing::random_corpus(s.D, s.W, s.N, s.density, rng);
      auto view = CorpusView::all_links(c);
      auto hyper = Hyperparams::reference(s.K, s.W, c.total_tokens(), c.total_links());
      TrainConfig cfg;
      cfg.num_topics = s.K;
      cfg.max_iters = 100;
      cfg.tol = 0.0;
      cfg.seed = seed;
      TrainResult r;
      try {
        r = train(view, hyper, cfg);
      } catch (const NumericalError& e) {
        return {false, fmt("shape %s seed %llu: %s", s.name, static_cast<unsigned long long>(seed), e.what())};
      }
      for (std::size_t i = 1; i < r.trace.size(); ++i)
        worst_drop = std::max(worst_drop, r.trace[i - 1].objective - r.trace[i].objective);
      ++runs;
    }
  }
  return {worst_drop <= 1e-8,
          fmt("largest per-iteration decrease=%.3g over %zu runs x 100 iterations", worst_drop, runs)};
}

// ---------------------------------------------------------------------------

Outcome ac3_lda_reduction() {
  std::mt19937_64 rng(303);
  auto c = testing::random_corpus(25, 50, 60, 0.2, rng);
  auto view = CorpusView::all_links(c);
  const std::size_t K = 4;
  auto hyper = Hyperparams::symmetric(K, 50, 1.2, 1.1, 1.1, 50.0);
  TrainConfig cfg;
  cfg.num_topics = K;
  cfg.max_iters = 50;
  cfg.tol = 0.0;
  cfg.disable_links = true;
  cfg.seed = 17;
  auto init = init_params(view, hyper, cfg);
  Matrix theta = init.theta, beta = init.beta;
  double worst = 0.0;
  std::size_t iters = 0;
  train(view, hyper, cfg, &init, [&](std::size_t, const ModelParams& p) {
    testing::plain_lda_iteration(c, theta, beta, 1.2, 1.1);
    worst = std::max({worst, max_abs_diff(p.theta, theta), max_abs_diff(p.beta, beta)});
    ++iters;
  });
  return {worst <= 1e-10 && iters == 50,
          fmt("max|theta,beta - plain LDA|=%.3g over %zu iterations", worst, iters)};
}

// ---------------------------------------------------------------------------

Outcome ac4_recovery() {
  const auto t0 = Clock::now();
  GenConfig g;  // D=100, K=5, W=500, 100 tokens, reference priors
  g.seed = 404;
  auto truth = sample_corpus(g);
  const auto& c = truth.corpus;
  auto view = CorpusView::all_links(c);
  auto hyper = Hyperparams::reference(5, 500, c.total_tokens(), c.total_links());
  TrainConfig cfg;
  cfg.num_topics = 5;
  cfg.max_iters = 300;
  cfg.tol = 0.0;
  cfg.seed = 1;
  auto r = train(view, hyper, cfg);
  double mean_cos = 0.0;
  testing::best_matching(truth.params.beta, r.params.beta, &mean_cos);
  std::vector<double> true_l(truth.params.lambda.begin(), truth.params.lambda.end() - 1);
  std::vector<double> rec_l(r.params.lambda.begin(), r.params.lambda.end() - 1);
  const double rho = testing::pearson(true_l, rec_l);

  // Reference points for the beta threshold: counts under the true topic
  // assignments, and the MAP fixed point EM reaches when started at the truth.
  Matrix assigned(5, 500);
  for (DocIndex d = 0; d < c.num_docs(); ++d)
    for (std::size_t i = 0; i < c.doc(d).size(); ++i)
      assigned(truth.latents[d][i].topic, c.doc(d).tokens[i]) += 1.0;
  double cos_assigned = 0.0, cos_from_truth = 0.0;
  testing::best_matching(truth.params.beta, assigned, &cos_assigned);
  auto from_truth = train(view, hyper, cfg, &truth.params);
  testing::best_matching(truth.params.beta, from_truth.params.beta, &cos_from_truth);
  return {mean_cos >= 0.80 && rho >= 0.7,
          fmt("mean matched beta cosine=%.4f (>=0.80), lambda Pearson r=%.4f (>=0.7), links=%zu, "
              "time=%.1fs; reference: true-assignment counts %.4f, EM started at the truth %.4f",
              mean_cos, rho, c.total_links(), seconds_since(t0), cos_assigned, cos_from_truth)};
}

// ---------------------------------------------------------------------------

struct MethodHits {
  double lthm = 0, freq = 0, link_lda = 0;
};

struct OrderingRun {
  MethodHits test_hit5;
  MethodHits train_hit5;
  std::size_t links = 0;
  std::vector<EvalReport> reports;
};

// Pinned low-entropy theta: each document puts `peak` on topic d mod K.
GenConfig topical_config(std::uint64_t seed, double gamma_null, std::size_t docs = 100) {
  GenConfig g;
  g.num_docs = docs;
  g.num_topics = 5;
  g.vocab_size = 500;
  g.min_tokens = g.max_tokens = 100;
  g.gamma_null = gamma_null;
  g.seed = seed;
  const double peak = 0.9;
  Matrix theta(g.num_docs, g.num_topics, (1.0 - peak) / static_cast<double>(g.num_topics - 1));
  for (std::size_t d = 0; d < g.num_docs; ++d) theta(d, d % g.num_topics) = peak;
  g.theta = theta;
  return g;
}

OrderingRun ordering_run(const GenConfig& g, std::uint64_t split_seed) {
  auto truth = sample_corpus(g);
  const auto& c = truth.corpus;
  const std::size_t K = g.num_topics, W = g.vocab_size, D = c.num_docs();
  auto split = split_train_test(c, 0.1, split_seed);
  const auto& train_view = split.train;
  auto hyper = Hyperparams::reference(K, W, c.total_tokens(), train_view.visible_link_count());
  TrainConfig cfg;
  cfg.num_topics = K;
  cfg.max_iters = 200;
  cfg.tol = 1e-8;
  cfg.seed = split_seed;
  auto lthm = train(train_view, hyper, cfg).params;
  LinkLdaConfig lcfg{cfg, 1.0};
  auto llda = link_lda_train(train_view, hyper, lcfg).params;
  const auto freq = ranked_docs(freq_rank(train_view));

  std::vector<DocIndex> train_docs;
  for (DocIndex d = 0; d < D; ++d)
    if (!std::binary_search(split.test_docs.begin(), split.test_docs.end(), d)) train_docs.push_back(d);

  OrderingRun out;
  out.links = c.total_links();
  auto score = [&](const std::vector<DocIndex>& docs, const CorpusView& truth_view, MethodHits& hits) {
    std::vector<std::vector<DocIndex>> r_lthm, r_freq, r_llda;
    for (auto d : docs) {
      const auto& doc = c.doc(d);
      r_lthm.push_back(ranked_docs(score_links(doc.tokens, lthm.theta.row(d), lthm)));
      r_llda.push_back(ranked_docs(link_lda_score(llda.theta.row(d), llda)));
      r_freq.push_back(freq);
    }
    auto t = truth_sets(truth_view, docs);
    EvalReport rep{20,
                   {evaluate("lthm", r_lthm, t, D, 20), evaluate("freq", r_freq, t, D, 20),
                    evaluate("link-lda", r_llda, t, D, 20)}};
    hits = {rep.methods[0].hit[4], rep.methods[1].hit[4], rep.methods[2].hit[4]};
    out.reports.push_back(std::move(rep));
  };
  score(split.test_docs, split.test, out.test_hit5);
  score(train_docs, train_view, out.train_hit5);
  return out;
}

std::vector<EvalReport> g_reports;  // collected for the monotonicity part of AC8

Outcome ac5_ordering() {
  MethodHits mean;
  std::size_t links = 0;
  const int seeds = 5;
  for (int s = 1; s <= seeds; ++s) {
    auto run = ordering_run(topical_config(500 + s, 220.0), s);
    mean.lthm += run.test_hit5.lthm / seeds;
    mean.freq += run.test_hit5.freq / seeds;
    mean.link_lda += run.test_hit5.link_lda / seeds;
    links += run.links;
    for (auto& r : run.reports) g_reports.push_back(std::move(r));
  }
  const bool ordered = mean.lthm >= mean.freq && mean.lthm >= mean.link_lda;

  // Overfitting direction: link-LDA beats frequency on training sources but
  // loses to it on held-out sources, at sparse link density.
  std::string overfit = "not reproduced";
  std::string sparse_detail;
  const std::pair<std::size_t, double> sparse[] = {{100, 5000.0}, {300, 5000.0}, {300, 20000.0}};
  for (auto [docs, gamma_null] : sparse) {
    MethodHits tr, te;
    for (int s = 1; s <= seeds; ++s) {
      auto run = ordering_run(topical_config(700 + s, gamma_null, docs), 50 + s);
      tr.link_lda += run.train_hit5.link_lda / seeds;
      tr.freq += run.train_hit5.freq / seeds;
      te.link_lda += run.test_hit5.link_lda / seeds;
      te.freq += run.test_hit5.freq / seeds;
      for (auto& r : run.reports) g_reports.push_back(std::move(r));
    }
    sparse_detail += fmt(" [D=%zu gamma_null=%g: train link-lda %.3f vs freq %.3f, test link-lda %.3f vs freq %.3f]",
                         docs, gamma_null, tr.link_lda, tr.freq, te.link_lda, te.freq);
    if (tr.link_lda > tr.freq && te.link_lda < te.freq) overfit = "reproduced";
  }
  return {ordered, fmt("test hit@5 over %d seeds: lthm=%.3f freq=%.3f link-lda=%.3f (avg links %zu); "
                       "overfitting direction %s;",
                       seeds, mean.lthm, mean.freq, mean.link_lda, links / seeds, overfit.c_str()) +
                       sparse_detail};
}

// ---------------------------------------------------------------------------

struct IterTiming {
  double seconds;
  std::size_t evals;
  std::size_t tokens;
};

IterTiming time_iteration(std::size_t D, std::size_t K, std::size_t W, std::size_t tokens,
                          std::uint64_t seed) {
  GenConfig g;
  g.num_docs = D;
  g.num_topics = 5;
  g.vocab_size = W;
  g.min_tokens = g.max_tokens = tokens;
  g.gamma_null = 1.1 * static_cast<double>(D);
  g.seed = seed;
  auto truth = sample_corpus(g);
  const auto& c = truth.corpus;
  auto view = CorpusView::all_links(c);
  auto hyper = Hyperparams::reference(K, W, c.total_tokens(), c.total_links());
  TrainConfig cfg;
  cfg.num_topics = K;
  auto params = init_params(view, hyper, cfg);
  double best = 1e300;
  std::size_t evals = 0;
  for (int rep = 0; rep < 7; ++rep) {
    const auto t0 = Clock::now();
    auto es = e_step(view, params, hyper);
    auto next = m_step(es.stats, hyper, c.total_tokens());
    best = std::min(best, seconds_since(t0));
    evals = es.counters.posterior_evals;
    (void)next;
  }
  return {best, evals, c.total_tokens()};
}

Outcome ac6_complexity() {
  auto base = time_iteration(300, 10, 2000, 1000, 61);
  auto tokens2 = time_iteration(300, 10, 2000, 2000, 61);
  auto k2 = time_iteration(300, 20, 2000, 1000, 61);
  const double r_tokens = tokens2.seconds / base.seconds;
  const double r_k = k2.seconds / base.seconds;
  const bool counts = base.evals == base.tokens && tokens2.evals == tokens2.tokens && k2.evals == k2.tokens;
  return {r_tokens <= 2.5 && r_k <= 2.5 && counts,
          fmt("base %.4fs; 2x tokens %.4fs (ratio %.2f); 2x K %.4fs (ratio %.2f); posterior evals == "
              "tokens: %s (%zu)",
              base.seconds, tokens2.seconds, r_tokens, k2.seconds, r_k, counts ? "yes" : "no",
              base.evals)};
}

// ---------------------------------------------------------------------------

Outcome ac7_scale() {
  GenConfig g;
  g.num_docs = 8282;
  g.num_topics = 20;
  g.vocab_size = 10000;
  g.min_tokens = 100;
  g.max_tokens = 300;
  g.seed = 707;
  // Expected links per token ~ (1 - lambda_null) / K for independent
  // Dirichlet mixtures; aim for about 12911 links.
  const double tokens = 200.0 * 8282.0;
  const double link_share = 12911.0 * 20.0 / tokens;
  g.gamma_null = g.gamma_doc * 8282.0 * (1.0 - link_share) / link_share;
  const auto tg = Clock::now();
  auto truth = sample_corpus(g);
  const double gen_secs = seconds_since(tg);
  const auto& c = truth.corpus;
  auto view = CorpusView::all_links(c);
  auto hyper = Hyperparams::reference(20, g.vocab_size, c.total_tokens(), c.total_links());
  TrainConfig cfg;
  cfg.num_topics = 20;
  cfg.max_iters = 1;
  auto t0 = Clock::now();
  auto r = train(view, hyper, cfg);
  const double secs = seconds_since(t0);
  return {secs < 300.0 && r.trace.size() == 1,
          fmt("D=%zu tokens=%zu links=%zu K=20: one EM iteration (with init) %.2fs (generation %.1fs)",
              c.num_docs(), c.total_tokens(), c.total_links(), secs, gen_secs)};
}

// ---------------------------------------------------------------------------

Outcome ac8_metrics() {
  const std::size_t D = 105, sources = 100, trials = 200, n_max = 20;
  std::mt19937_64 rng(808);
  std::uniform_int_distribution<std::size_t> size(1, 6);
  std::vector<std::vector<DocIndex>> truth(sources);
  for (auto& t : truth) {
    std::vector<DocIndex> all(D);
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    t.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(size(rng)));
    std::sort(t.begin(), t.end());
  }
  std::vector<double> mean(n_max, 0.0);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    std::vector<std::vector<DocIndex>> rankings(sources, std::vector<DocIndex>(D));
    for (auto& r : rankings) {
      std::iota(r.begin(), r.end(), 0);
      std::shuffle(r.begin(), r.end(), rng);
    }
    auto c = evaluate("uniform", rankings, truth, D, n_max);
    for (std::size_t n = 0; n < n_max; ++n) mean[n] += c.hit[n] / trials;
    g_reports.push_back(EvalReport{n_max, {std::move(c)}});
  }
  double worst_z = 0.0;
  for (std::size_t n = 1; n <= n_max; ++n) {
    double expected = 0.0, var = 0.0;
    for (const auto& t : truth) {
      const double p = testing::hypergeometric_hit(D, t.size(), n);
      expected += p / sources;
      var += p * (1 - p);
    }
    const double sigma = std::sqrt(var) / sources / std::sqrt(static_cast<double>(trials));
    worst_z = std::max(worst_z, std::abs(mean[n - 1] - expected) / sigma);
  }
  std::size_t bad = 0;
  for (const auto& r : g_reports) {
    try {
      check_report(r);
    } catch (const NumericalError&) {
      ++bad;
    }
  }
  return {worst_z <= 3.0 && bad == 0,
          fmt("largest |hit - hypergeometric| = %.2f sigma over N=1..20; non-monotone reports: %zu of %zu",
              worst_z, bad, g_reports.size())};
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    const char* title;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"AC1", "fast E(U) and E-step match brute-force enumeration", ac1_oracle_equivalence},
      {"AC2", "EM objective is monotone", ac2_monotonicity},
      {"AC3", "links disabled reduces to plain LDA", ac3_lda_reduction},
      {"AC4", "parameter recovery on synthetic data", ac4_recovery},
      {"AC5", "LTHM hit@5 >= frequency and link-LDA", ac5_ordering},
      {"AC6", "per-iteration cost is linear in tokens and topics", ac6_complexity},
      {"AC7", "webkb-sized EM iteration under 5 minutes", ac7_scale},
      {"AC8", "metric harness matches the hypergeometric oracle", ac8_metrics},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s: %s -- %s\n", o.pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
