#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "lthm/corpus.hpp"
#include "lthm/matrix.hpp"
#include "lthm/model.hpp"

namespace lthm {

struct GenConfig {
  std::size_t num_docs = 100;
  std::size_t num_topics = 5;
  std::size_t vocab_size = 500;
  // Tokens per document drawn uniformly from [min_tokens, max_tokens].
  std::size_t min_tokens = 100;
  std::size_t max_tokens = 100;
  double alpha = 1.1;
  double eta = 1.1;
  double gamma_doc = 1.1;
  double gamma_null = 110.0;
  std::uint64_t seed = 1;

  // Pinned parameters bypass the corresponding Dirichlet draw.
  std::optional<Matrix> theta;
  std::optional<Matrix> beta;
  std::optional<std::vector<double>> lambda;

  void validate() const;
};

struct TokenLatent {
  std::uint32_t topic;       // z^W
  std::int32_t target;       // tau, kNoLink for the null outcome
  std::int32_t link_topic;   // z^L, -1 when tau is null
};

struct SyntheticTruth {
  ModelParams params;
  std::vector<std::vector<TokenLatent>> latents;
  Corpus corpus;
};

// Two-stage sampler: text first (beta, then theta and (z^W, w) per document),
// then lambda and per-token (tau, z^L), linking when the topics agree.
SyntheticTruth sample_corpus(const GenConfig& config);

// Re-applies the link rule to the recorded latents and compares with the
// corpus links.
bool replay_links(const SyntheticTruth& truth);

// Link frequency conditioned on the source token's topic.
struct LinkRates {
  Matrix links;                       // K x D link counts
  std::vector<std::size_t> tokens;    // tokens per topic
  double rate(std::size_t topic, std::size_t target) const {
    return tokens[topic] == 0 ? 0.0 : links(topic, target) / static_cast<double>(tokens[topic]);
  }
};

LinkRates empirical_link_rate(const SyntheticTruth& truth);

// Truth record: theta, beta, lambda and the latent arrays, one JSON line.
void write_truth(const SyntheticTruth& truth, std::ostream& out);

GenConfig read_gen_config(std::istream& in);

}  // namespace lthm
