#include "lthm/generator.hpp"

#include <ostream>
#include <random>
#include <string>

#include "json.hpp"
#include "lthm/error.hpp"

namespace lthm {

namespace {

using Categorical = std::discrete_distribution<std::size_t>;

Categorical categorical(std::span<const double> probs) { return Categorical(probs.begin(), probs.end()); }

std::vector<Categorical> row_categoricals(const Matrix& m) {
  std::vector<Categorical> out;
  out.reserve(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out.push_back(categorical(m.row(r)));
  return out;
}

std::vector<double> flatten(const Matrix& m) { return m.data(); }

}  // namespace

void GenConfig::validate() const {
  if (num_docs < 1 || num_topics < 1 || vocab_size < 1 || min_tokens < 1)
    throw UsageError("generator counts must be >= 1");
  if (max_tokens < min_tokens) throw UsageError("max_tokens must be >= min_tokens");
  if (!(alpha > 0) || !(eta > 0) || !(gamma_doc > 0) || !(gamma_null > 0))
    throw UsageError("generator hyperparameters must be positive");
  if (theta && (theta->rows() != num_docs || theta->cols() != num_topics))
    throw UsageError("pinned theta has the wrong shape");
  if (beta && (beta->rows() != num_topics || beta->cols() != vocab_size))
    throw UsageError("pinned beta has the wrong shape");
  if (lambda && lambda->size() != num_docs + 1)
    throw UsageError("pinned lambda has the wrong length");
}

SyntheticTruth sample_corpus(const GenConfig& config) {
  config.validate();
  const std::size_t D = config.num_docs;
  const std::size_t K = config.num_topics;
  const std::size_t W = config.vocab_size;
  std::mt19937_64 rng(config.seed);

  ModelParams params{Matrix(D, K), Matrix(K, W), std::vector<double>(D + 1)};

  // Stage 1: text.
  if (config.beta) {
    params.beta = *config.beta;
  } else {
    std::vector<double> eta(W, config.eta);
    for (std::size_t z = 0; z < K; ++z) {
      auto row = sample_dirichlet(eta, rng);
      std::copy(row.begin(), row.end(), params.beta.row(z).begin());
    }
  }
  auto topic_words = row_categoricals(params.beta);
  std::vector<double> alpha(K, config.alpha);
  std::uniform_int_distribution<std::size_t> length(config.min_tokens, config.max_tokens);
  std::vector<std::vector<TokenLatent>> latents(D);
  std::vector<std::vector<WordId>> words(D);
  for (std::size_t d = 0; d < D; ++d) {
    if (config.theta) {
      auto src = config.theta->row(d);
      std::copy(src.begin(), src.end(), params.theta.row(d).begin());
    } else {
      auto row = sample_dirichlet(alpha, rng);
      std::copy(row.begin(), row.end(), params.theta.row(d).begin());
    }
    const std::size_t n = length(rng);
    latents[d].reserve(n);
    words[d].reserve(n);
    auto doc_topics = categorical(params.theta.row(d));
    for (std::size_t i = 0; i < n; ++i) {
      const auto z = doc_topics(rng);
      const auto w = topic_words[z](rng);
      latents[d].push_back({static_cast<std::uint32_t>(z), kNoLink, -1});
      words[d].push_back(static_cast<WordId>(w));
    }
  }

  // Stage 2: links.
  if (config.lambda) {
    params.lambda = *config.lambda;
  } else {
    std::vector<double> gamma(D + 1, config.gamma_doc);
    gamma.back() = config.gamma_null;
    params.lambda = sample_dirichlet(gamma, rng);
  }
  auto choose_target = categorical(params.lambda);
  auto link_topics = row_categoricals(params.theta);
  std::vector<Document> docs(D);
  for (std::size_t d = 0; d < D; ++d) {
    docs[d].id = "d" + std::to_string(d);
    docs[d].tokens = words[d];
    docs[d].link_targets.assign(words[d].size(), kNoLink);
    for (std::size_t i = 0; i < latents[d].size(); ++i) {
      auto& lat = latents[d][i];
      const auto tau = choose_target(rng);
      if (tau == D) continue;
      lat.target = static_cast<std::int32_t>(tau);
      lat.link_topic = static_cast<std::int32_t>(link_topics[tau](rng));
      if (static_cast<std::uint32_t>(lat.link_topic) == lat.topic)
        docs[d].link_targets[i] = lat.target;
    }
  }

  std::vector<std::string> vocab(W);
  for (std::size_t w = 0; w < W; ++w) vocab[w] = "w" + std::to_string(w);
  return SyntheticTruth{std::move(params), std::move(latents),
                        Corpus(std::move(docs), Vocabulary(std::move(vocab)))};
}

bool replay_links(const SyntheticTruth& truth) {
  for (std::size_t d = 0; d < truth.latents.size(); ++d) {
    const auto& doc = truth.corpus.doc(static_cast<DocIndex>(d));
    for (std::size_t i = 0; i < truth.latents[d].size(); ++i) {
      const auto& lat = truth.latents[d][i];
      const bool linked = lat.target != kNoLink && lat.link_topic >= 0 &&
                          static_cast<std::uint32_t>(lat.link_topic) == lat.topic;
      const auto expected = linked ? lat.target : kNoLink;
      if (doc.link_targets[i] != expected) return false;
    }
  }
  return true;
}

LinkRates empirical_link_rate(const SyntheticTruth& truth) {
  const std::size_t K = truth.params.num_topics();
  const std::size_t D = truth.params.num_docs();
  LinkRates r{Matrix(K, D), std::vector<std::size_t>(K, 0)};
  for (std::size_t d = 0; d < truth.latents.size(); ++d) {
    const auto& doc = truth.corpus.doc(static_cast<DocIndex>(d));
    for (std::size_t i = 0; i < truth.latents[d].size(); ++i) {
      const auto z = truth.latents[d][i].topic;
      ++r.tokens[z];
      if (doc.link_targets[i] != kNoLink) r.links(z, static_cast<std::size_t>(doc.link_targets[i])) += 1.0;
    }
  }
  return r;
}

void write_truth(const SyntheticTruth& truth, std::ostream& out) {
  const auto& p = truth.params;
  nlohmann::json rec;
  rec["K"] = p.num_topics();
  rec["D"] = p.num_docs();
  rec["W"] = p.vocab_size();
  rec["theta"] = flatten(p.theta);
  rec["beta"] = flatten(p.beta);
  rec["lambda"] = p.lambda;
  auto topics = nlohmann::json::array();
  auto targets = nlohmann::json::array();
  auto link_topics = nlohmann::json::array();
  for (const auto& doc : truth.latents) {
    auto zt = nlohmann::json::array(), tt = nlohmann::json::array(), lt = nlohmann::json::array();
    for (const auto& l : doc) {
      zt.push_back(l.topic);
      tt.push_back(l.target);
      lt.push_back(l.link_topic);
    }
    topics.push_back(std::move(zt));
    targets.push_back(std::move(tt));
    link_topics.push_back(std::move(lt));
  }
  rec["word_topics"] = std::move(topics);
  rec["targets"] = std::move(targets);
  rec["link_topics"] = std::move(link_topics);
  out << rec.dump() << '\n';
}

GenConfig read_gen_config(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed generator config: ") + e.what());
  }
  GenConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  try {
    get("D", c.num_docs);
    get("K", c.num_topics);
    get("W", c.vocab_size);
    get("min_tokens", c.min_tokens);
    get("max_tokens", c.max_tokens);
    if (j.contains("tokens")) {
      c.min_tokens = c.max_tokens = j.at("tokens").get<std::size_t>();
    }
    get("alpha", c.alpha);
    get("eta", c.eta);
    get("gamma_doc", c.gamma_doc);
    get("gamma_null", c.gamma_null);
    get("seed", c.seed);
    auto matrix = [&](const char* key, std::size_t rows, std::size_t cols) {
      auto flat = j.at(key).get<std::vector<double>>();
      if (flat.size() != rows * cols) throw UsageError(std::string("pinned ") + key + " has the wrong size");
      Matrix m(rows, cols);
      m.data() = std::move(flat);
      return m;
    };
    if (j.contains("theta")) c.theta = matrix("theta", c.num_docs, c.num_topics);
    if (j.contains("beta")) c.beta = matrix("beta", c.num_topics, c.vocab_size);
    if (j.contains("lambda")) c.lambda = j.at("lambda").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad generator config field: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace lthm
