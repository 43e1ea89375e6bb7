#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lthm/baselines.hpp"
#include "lthm/corpus.hpp"
#include "lthm/model.hpp"

namespace lthm {

inline constexpr int kModelFormatVersion = 1;

enum class ModelKind { Lthm, Lda, LinkLda, Frequency };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

// Everything needed to score links against the corpus a model was trained on.
// theta/beta/lambda are used by Lthm and Lda, theta/beta/omega by LinkLda and
// in_degree by Frequency.
struct ModelFile {
  ModelKind kind = ModelKind::Lthm;
  std::vector<std::string> doc_ids;
  std::vector<std::string> vocab;
  std::uint64_t vocab_hash = 0;
  std::uint64_t corpus_hash = 0;
  ModelParams params;
  Matrix omega;
  std::vector<double> in_degree;
  Hyperparams hyper;
  TrainConfig config;
  double citation_weight = 1.0;

  std::size_t num_topics() const { return params.theta.cols(); }
};

// One JSON record on one line. Doubles are written with round-trip precision,
// so reloading is bit exact.
void write_model(const ModelFile& model, std::ostream& out);
ModelFile read_model(std::istream& in);
ModelFile load_model(const std::string& path);

LinkLdaParams link_lda_params(const ModelFile& model);

std::string hex_hash(std::uint64_t h);

}  // namespace lthm
