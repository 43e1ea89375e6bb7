#include "lthm/model_io.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"
#include "lthm/error.hpp"

namespace lthm {

namespace {

using nlohmann::json;

Matrix to_matrix(const json& j, std::size_t rows, std::size_t cols, const char* what) {
  auto flat = j.get<std::vector<double>>();
  if (flat.size() != rows * cols) throw DataError(std::string("model field '") + what + "' has the wrong size");
  Matrix m(rows, cols);
  m.data() = std::move(flat);
  return m;
}

std::uint64_t parse_hash(const std::string& s) {
  try {
    return std::stoull(s, nullptr, 16);
  } catch (const std::exception&) {
    throw DataError("bad hash '" + s + "' in model file");
  }
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Lthm: return "lthm";
    case ModelKind::Lda: return "lda";
    case ModelKind::LinkLda: return "link-lda";
    case ModelKind::Frequency: return "freq";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "lthm") return ModelKind::Lthm;
  if (name == "lda") return ModelKind::Lda;
  if (name == "link-lda") return ModelKind::LinkLda;
  if (name == "freq") return ModelKind::Frequency;
  throw UsageError("unknown model '" + name + "' (expected lthm, lda, link-lda or freq)");
}

std::string hex_hash(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_model(const ModelFile& model, std::ostream& out) {
  json rec;
  rec["version"] = kModelFormatVersion;
  rec["model"] = to_string(model.kind);
  rec["K"] = model.params.theta.cols();
  rec["D"] = model.doc_ids.size();
  rec["W"] = model.vocab.size();
  rec["doc_ids"] = model.doc_ids;
  rec["vocab"] = model.vocab;
  rec["vocab_hash"] = hex_hash(model.vocab_hash);
  rec["corpus_hash"] = hex_hash(model.corpus_hash);
  rec["theta"] = model.params.theta.data();
  rec["beta"] = model.params.beta.data();
  rec["lambda"] = model.params.lambda;
  if (model.kind == ModelKind::LinkLda) {
    rec["omega"] = model.omega.data();
    rec["citation_weight"] = model.citation_weight;
  }
  if (model.kind == ModelKind::Frequency) rec["in_degree"] = model.in_degree;
  rec["hyper"] = {{"alpha", model.hyper.alpha},
                  {"eta", model.hyper.eta},
                  {"gamma_doc", model.hyper.gamma_doc},
                  {"gamma_null", model.hyper.gamma_null}};
  rec["config"] = {{"topics", model.config.num_topics},
                   {"max_iters", model.config.max_iters},
                   {"tol", model.config.tol},
                   {"seed", model.config.seed},
                   {"disable_links", model.config.disable_links}};
  out << rec.dump() << '\n';
  if (!out) throw DataError("failed writing model file");
}

ModelFile read_model(std::istream& in) {
  std::string line;
  while (std::getline(in, line) && line.find_first_not_of(" \t\r") == std::string::npos) {
  }
  if (line.empty()) throw DataError("model file is empty");
  ModelFile m;
  try {
    auto rec = json::parse(line);
    if (rec.at("version").get<int>() != kModelFormatVersion)
      throw DataError("unsupported model file version");
    m.kind = parse_model_kind(rec.at("model").get<std::string>());
    const auto K = rec.at("K").get<std::size_t>();
    const auto D = rec.at("D").get<std::size_t>();
    const auto W = rec.at("W").get<std::size_t>();
    m.doc_ids = rec.at("doc_ids").get<std::vector<std::string>>();
    m.vocab = rec.at("vocab").get<std::vector<std::string>>();
    if (m.doc_ids.size() != D || m.vocab.size() != W) throw DataError("model header shape mismatch");
    m.vocab_hash = parse_hash(rec.at("vocab_hash").get<std::string>());
    m.corpus_hash = parse_hash(rec.at("corpus_hash").get<std::string>());
    m.params.theta = to_matrix(rec.at("theta"), D, K, "theta");
    m.params.beta = to_matrix(rec.at("beta"), K, W, "beta");
    m.params.lambda = rec.at("lambda").get<std::vector<double>>();
    if (m.kind == ModelKind::LinkLda) {
      m.omega = to_matrix(rec.at("omega"), K, D, "omega");
      m.citation_weight = rec.at("citation_weight").get<double>();
    }
    if (m.kind == ModelKind::Frequency) m.in_degree = rec.at("in_degree").get<std::vector<double>>();
    const auto& h = rec.at("hyper");
    m.hyper.alpha = h.at("alpha").get<std::vector<double>>();
    m.hyper.eta = h.at("eta").get<std::vector<double>>();
    m.hyper.gamma_doc = h.at("gamma_doc").get<double>();
    m.hyper.gamma_null = h.at("gamma_null").get<double>();
    const auto& c = rec.at("config");
    m.config.num_topics = c.at("topics").get<std::size_t>();
    m.config.max_iters = c.at("max_iters").get<std::size_t>();
    m.config.tol = c.at("tol").get<double>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
    m.config.disable_links = c.at("disable_links").get<bool>();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
  if (Vocabulary(m.vocab).hash() != m.vocab_hash) throw DataError("model vocabulary hash mismatch");
  return m;
}

ModelFile load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file '" + path + "'");
  return read_model(in);
}

LinkLdaParams link_lda_params(const ModelFile& model) {
  if (model.kind != ModelKind::LinkLda) throw UsageError("model is not a link-LDA model");
  return LinkLdaParams{model.params.theta, model.params.beta, model.omega};
}

}  // namespace lthm
