#include "cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "lthm/baselines.hpp"
#include "lthm/corpus.hpp"
#include "lthm/em.hpp"
#include "lthm/error.hpp"
#include "lthm/eval.hpp"
#include "lthm/generator.hpp"
#include "lthm/model_io.hpp"

namespace lthm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Files are staged in memory and written only once the command has succeeded,
// so a failing run leaves no partial outputs behind.
class OutputDir {
 public:
  void add(std::string name, std::string contents) {
    files_.emplace_back(std::move(name), std::move(contents));
  }

  void commit(const std::string& dir) const {
    fs::create_directories(dir);
    for (const auto& [name, contents] : files_) {
      const auto final_path = fs::path(dir) / name;
      const auto tmp = fs::path(dir) / (name + ".tmp");
      {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot write '" + tmp.string() + "'");
        out << contents;
        if (!out) throw DataError("failed writing '" + tmp.string() + "'");
      }
      fs::rename(tmp, final_path);
    }
  }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

json manifest(const std::string& command, json config, json inputs, std::uint64_t seed,
              double seconds) {
  return json{{"command", command},
              {"config", std::move(config)},
              {"input_hashes", std::move(inputs)},
              {"seed", seed},
              {"version", kVersion},
              {"timings", {{"seconds", seconds}}}};
}

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct TrainArgs {
  std::string corpus;
  std::string model = "lthm";
  std::size_t topics = 20;
  double alpha = 1.1;
  double eta = 1.1;
  double gamma_doc = 1.1;
  double gamma_null = 0.0;
  std::size_t iters = 600;
  double tol = 1e-6;
  std::uint64_t seed = 1;
  double split = 0.9;
  std::string split_file;
  bool deterministic = false;
  std::size_t threads = 1;
  std::size_t min_count = 1;
  std::string stopwords;
  double citation_weight = 1.0;
  std::string out;
};

struct PredictArgs {
  std::string model_file;
  std::string corpus;
  std::vector<std::string> docs;
  std::string split_file;
  bool fold_in = false;
  std::size_t fold_in_iters = 50;
  std::string out;
};

struct EvalArgs {
  std::vector<std::string> rankings;
  std::string corpus;
  std::string split_file;
  std::size_t n_max = 20;
  std::string subset = "test";
  std::string out;
};

struct GenArgs {
  std::string config;
  std::string out;
};

struct InspectArgs {
  std::string model_file;
  std::size_t top_words = 10;
  std::size_t top_links = 2;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto kind = parse_model_kind(a.model);
  if (!(a.split > 0.0 && a.split < 1.0)) throw UsageError("--split must lie in (0, 1)");

  VocabOptions vopts;
  vopts.min_count = a.min_count;
  json inputs;
  const std::string corpus_bytes = read_file(a.corpus);
  inputs["corpus"] = hex_hash(fnv1a_hash(corpus_bytes));
  if (!a.stopwords.empty()) {
    const auto sw = read_file(a.stopwords);
    std::istringstream ss(sw);
    vopts.stopwords = read_stopwords(ss);
    inputs["stopwords"] = hex_hash(fnv1a_hash(sw));
  }
  std::istringstream corpus_in(corpus_bytes);
  const Corpus corpus = parse_corpus(corpus_in, vopts);

  std::optional<Split> split;
  if (!a.split_file.empty()) {
    const auto sf = read_file(a.split_file);
    inputs["split"] = hex_hash(fnv1a_hash(sf));
    std::istringstream ss(sf);
    split = read_split(corpus, ss);
  } else {
    split = split_train_test(corpus, 1.0 - a.split, a.seed);
  }
  const CorpusView& view = split->train;

  const std::size_t K = kind == ModelKind::Frequency ? 0 : a.topics;
  const std::size_t W = corpus.vocab_size();
  double gamma_null = a.gamma_null;
  if (gamma_null <= 0.0)
    gamma_null = Hyperparams::reference(K, W, corpus.total_tokens(), view.visible_link_count()).gamma_null;
  Hyperparams hyper = Hyperparams::symmetric(K, W, a.alpha, a.eta, a.gamma_doc, gamma_null);

  TrainConfig config;
  config.num_topics = a.topics;
  config.max_iters = a.iters;
  config.tol = a.tol;
  config.seed = a.seed;
  config.disable_links = kind == ModelKind::Lda;
  config.threads = a.threads;

  ModelFile model;
  model.kind = kind;
  for (const auto& d : corpus.docs()) model.doc_ids.push_back(d.id);
  model.vocab = corpus.vocab().words();
  model.vocab_hash = corpus.vocab().hash();
  model.corpus_hash = corpus.hash();
  model.hyper = hyper;
  model.config = config;

  std::vector<TraceEntry> trace;
  if (kind == ModelKind::Frequency) {
    auto deg = in_degree(view);
    model.in_degree.assign(deg.begin(), deg.end());
    model.params.theta = Matrix(corpus.num_docs(), 0);
    model.params.beta = Matrix(0, W);
  } else {
    if (auto warning = hyper.validate(K, W); !warning.empty()) err << "warning: " << warning << '\n';
    if (kind == ModelKind::LinkLda) {
      LinkLdaConfig lc{config, a.citation_weight};
      auto r = link_lda_train(view, hyper, lc);
      model.params.theta = std::move(r.params.theta);
      model.params.beta = std::move(r.params.beta);
      model.omega = std::move(r.params.omega);
      model.citation_weight = a.citation_weight;
      trace = std::move(r.trace);
    } else {
      auto r = train(view, hyper, config);
      model.params = std::move(r.params);
      trace = std::move(r.trace);
    }
  }

  OutputDir dir;
  std::ostringstream ms, ts, ss, vs;
  write_model(model, ms);
  write_trace_csv(trace, ts);
  write_split(corpus, *split, ss);
  write_vocabulary(corpus.vocab(), vs);
  dir.add("model.jsonl", ms.str());
  dir.add("trace.csv", ts.str());
  dir.add("split.tsv", ss.str());
  dir.add("vocab.tsv", vs.str());
  json cfg{{"model", a.model},
           {"topics", K},
           {"alpha", a.alpha},
           {"eta", a.eta},
           {"gamma_doc", a.gamma_doc},
           {"gamma_null", gamma_null},
           {"iters", a.iters},
           {"tol", a.tol},
           {"split", a.split},
           {"deterministic", a.deterministic},
           {"threads", a.threads},
           {"min_count", a.min_count},
           {"citation_weight", a.citation_weight},
           {"disable_links", config.disable_links},
           {"iterations_run", trace.size()}};
  dir.add("manifest.json", manifest("train", cfg, inputs, a.seed, since(t0)).dump(2) + "\n");
  dir.commit(a.out);
  out << "trained " << a.model << " on " << corpus.num_docs() << " documents ("
      << view.visible_link_count() << " visible links), " << trace.size() << " iterations\n";
  return kOk;
}

RankedPrediction predict_one(const ModelFile& model, const Corpus& corpus, DocIndex d,
                             const PredictArgs& a) {
  const auto& doc = corpus.doc(d);
  switch (model.kind) {
    case ModelKind::Frequency:
      return rank_by_score(model.in_degree);
    case ModelKind::LinkLda: {
      auto params = link_lda_params(model);
      std::vector<double> theta(params.theta.row(d).begin(), params.theta.row(d).end());
      if (a.fold_in) {
        ModelParams text{params.theta, params.beta, std::vector<double>(corpus.num_docs() + 1, 0.0)};
        text.lambda.back() = 1.0;
        theta = fold_in(doc.tokens, text, model.hyper, {a.fold_in_iters, 1e-7});
      }
      return link_lda_score(theta, params);
    }
    case ModelKind::Lthm:
    case ModelKind::Lda: {
      std::vector<double> theta(model.params.theta.row(d).begin(), model.params.theta.row(d).end());
      if (a.fold_in) theta = fold_in(doc.tokens, model.params, model.hyper, {a.fold_in_iters, 1e-7});
      return score_links(doc.tokens, theta, model.params);
    }
  }
  return {};
}

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto model_bytes = read_file(a.model_file);
  std::istringstream model_in(model_bytes);
  const ModelFile model = read_model(model_in);
  const auto corpus_bytes = read_file(a.corpus);
  std::istringstream corpus_in(corpus_bytes);
  const Corpus corpus = parse_corpus(corpus_in, Vocabulary(model.vocab));
  if (corpus.hash() != model.corpus_hash)
    throw DataError("corpus does not match the corpus the model was trained on (hash mismatch)");

  json inputs{{"model", hex_hash(fnv1a_hash(model_bytes))},
              {"corpus", hex_hash(fnv1a_hash(corpus_bytes))}};
  std::vector<DocIndex> docs;
  if (!a.docs.empty()) {
    for (const auto& id : a.docs) {
      auto d = corpus.find_doc(id);
      if (!d) throw DataError("unknown document id '" + id + "'");
      docs.push_back(*d);
    }
  } else if (!a.split_file.empty()) {
    const auto sf = read_file(a.split_file);
    inputs["split"] = hex_hash(fnv1a_hash(sf));
    std::istringstream ss(sf);
    docs = read_split(corpus, ss).test_docs;
  } else {
    for (std::size_t d = 0; d < corpus.num_docs(); ++d) docs.push_back(static_cast<DocIndex>(d));
  }

  std::ostringstream rs;
  for (auto d : docs) {
    auto ranking = predict_one(model, corpus, d, a);
    json entries = json::array();
    for (const auto& s : ranking) entries.push_back(json::array({corpus.doc(s.doc).id, s.score}));
    rs << json{{"doc", corpus.doc(d).id}, {"ranking", std::move(entries)}}.dump() << '\n';
  }
  OutputDir dir;
  dir.add("rankings.jsonl", rs.str());
  json cfg{{"model", to_string(model.kind)},
           {"docs", docs.size()},
           {"fold_in", a.fold_in},
           {"fold_in_iters", a.fold_in_iters}};
  dir.add("manifest.json", manifest("predict", cfg, inputs, model.config.seed, since(t0)).dump(2) + "\n");
  dir.commit(a.out);
  out << "wrote rankings for " << docs.size() << " documents\n";
  return kOk;
}

std::map<DocIndex, std::vector<DocIndex>> read_rankings(const std::string& path,
                                                        const Corpus& corpus) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open rankings file '" + path + "'");
  std::map<DocIndex, std::vector<DocIndex>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto rec = json::parse(line);
      auto src = corpus.find_doc(rec.at("doc").get<std::string>());
      if (!src) throw DataError(path + ":" + std::to_string(lineno) + ": unknown source document");
      std::vector<DocIndex> ranked;
      for (const auto& e : rec.at("ranking")) {
        auto t = corpus.find_doc(e.at(0).get<std::string>());
        if (!t) throw DataError(path + ":" + std::to_string(lineno) + ": unknown ranked document");
        ranked.push_back(*t);
      }
      out[*src] = std::move(ranked);
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  if (a.subset != "test" && a.subset != "train") throw UsageError("--subset must be test or train");
  if (a.n_max < 1) throw UsageError("--nmax must be >= 1");
  const auto corpus_bytes = read_file(a.corpus);
  std::istringstream corpus_in(corpus_bytes);
  const Corpus corpus = parse_corpus(corpus_in);
  const auto sf = read_file(a.split_file);
  std::istringstream ss(sf);
  const Split split = read_split(corpus, ss);

  std::vector<DocIndex> sources;
  for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
    const bool is_test = split.test.links_visible(static_cast<DocIndex>(d));
    if (is_test == (a.subset == "test")) sources.push_back(static_cast<DocIndex>(d));
  }
  const CorpusView& truth_view = a.subset == "test" ? split.test : split.train;
  const auto truth = truth_sets(truth_view, sources);

  json inputs{{"corpus", hex_hash(fnv1a_hash(corpus_bytes))}, {"split", hex_hash(fnv1a_hash(sf))}};
  EvalReport report;
  report.n_max = a.n_max;
  for (const auto& entry : a.rankings) {
    auto eq = entry.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--rankings expects method=path");
    const auto method = entry.substr(0, eq);
    const auto path = entry.substr(eq + 1);
    inputs["rankings:" + method] = hex_hash(fnv1a_hash(read_file(path)));
    auto all = read_rankings(path, corpus);
    std::vector<std::vector<DocIndex>> rankings;
    for (auto d : sources) {
      auto it = all.find(d);
      if (it == all.end())
        throw DataError("method '" + method + "' has no ranking for document '" + corpus.doc(d).id + "'");
      rankings.push_back(it->second);
    }
    report.methods.push_back(evaluate(method, rankings, truth, corpus.num_docs(), a.n_max));
  }
  check_report(report);
  std::ostringstream cs;
  emit_curves(report, cs);
  OutputDir dir;
  dir.add("curves.csv", cs.str());
  json cfg{{"nmax", a.n_max}, {"subset", a.subset}, {"methods", report.methods.size()}};
  dir.add("manifest.json", manifest("eval", cfg, inputs, 0, since(t0)).dump(2) + "\n");
  dir.commit(a.out);
  for (const auto& m : report.methods) {
    out << m.method << ": " << m.evaluated_docs << " documents, hit@" << a.n_max << " = "
        << m.hit.back() << '\n';
  }
  return kOk;
}

int cmd_gen(const GenArgs& a, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg_bytes = read_file(a.config);
  std::istringstream cfg_in(cfg_bytes);
  const GenConfig config = read_gen_config(cfg_in);
  const auto truth = sample_corpus(config);
  std::ostringstream cs, ts;
  serialize_corpus(truth.corpus, cs);
  write_truth(truth, ts);
  OutputDir dir;
  dir.add("corpus.jsonl", cs.str());
  dir.add("truth.jsonl", ts.str());
  json cfg{{"D", config.num_docs}, {"K", config.num_topics}, {"W", config.vocab_size},
           {"min_tokens", config.min_tokens}, {"max_tokens", config.max_tokens},
           {"alpha", config.alpha}, {"eta", config.eta}, {"gamma_doc", config.gamma_doc},
           {"gamma_null", config.gamma_null}, {"links", truth.corpus.total_links()}};
  dir.add("manifest.json",
          manifest("gen", cfg, json{{"config", hex_hash(fnv1a_hash(cfg_bytes))}}, config.seed, since(t0))
                  .dump(2) +
              "\n");
  dir.commit(a.out);
  out << "generated " << truth.corpus.num_docs() << " documents, " << truth.corpus.total_tokens()
      << " tokens, " << truth.corpus.total_links() << " links\n";
  return kOk;
}

int cmd_inspect(const InspectArgs& a, std::ostream& out) {
  const ModelFile model = load_model(a.model_file);
  if (model.kind != ModelKind::Lthm && model.kind != ModelKind::Lda)
    throw UsageError("inspect needs an lthm or lda model");
  const auto& p = model.params;
  const std::size_t K = p.num_topics();
  const std::size_t D = p.num_docs();
  char buf[64];
  for (std::size_t z = 0; z < K; ++z) {
    out << "topic " << z << '\n';
    auto words = rank_by_score(p.beta.row(z));
    out << "  words:";
    for (std::size_t i = 0; i < std::min(a.top_words, words.size()); ++i) {
      std::snprintf(buf, sizeof buf, " %.6f", words[i].score);
      out << ' ' << model.vocab[words[i].doc] << buf;
    }
    out << '\n';
    std::vector<double> link(D);
    double total = 0.0;
    for (std::size_t d = 0; d < D; ++d) {
      link[d] = p.lambda[d] * p.theta(d, z);
      total += link[d];
    }
    if (total > 0.0)
      for (double& x : link) x /= total;
    auto links = rank_by_score(link);
    out << "  links:";
    for (std::size_t i = 0; i < std::min(a.top_links, links.size()); ++i) {
      std::snprintf(buf, sizeof buf, " %.6f", links[i].score);
      out << ' ' << model.doc_ids[links[i].doc] << buf;
    }
    out << '\n';
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latent topic hypertext model: train, predict, evaluate, generate, inspect"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a model on the train view of a corpus");
  train_cmd->add_option("--corpus", ta.corpus, "Corpus file (line-delimited JSON)")->required();
  train_cmd->add_option("--model", ta.model, "lthm, lda, link-lda or freq")->capture_default_str();
  train_cmd->add_option("--topics", ta.topics, "Number of topics")->capture_default_str();
  train_cmd->add_option("--alpha", ta.alpha, "Symmetric Dirichlet prior on theta")->capture_default_str();
  train_cmd->add_option("--eta", ta.eta, "Symmetric Dirichlet prior on beta")->capture_default_str();
  train_cmd->add_option("--gamma-doc", ta.gamma_doc, "Link prior per document")->capture_default_str();
  train_cmd->add_option("--gamma-null", ta.gamma_null,
                        "No-link prior; 0 picks gamma_doc * tokens / links")
      ->capture_default_str();
  train_cmd->add_option("--iters", ta.iters, "Maximum EM iterations")->capture_default_str();
  train_cmd->add_option("--tol", ta.tol, "Relative objective change to stop at")->capture_default_str();
  train_cmd->add_option("--seed", ta.seed, "Seed for initialization and the split")->capture_default_str();
  train_cmd->add_option("--split", ta.split, "Fraction of documents in the train set")->capture_default_str();
  train_cmd->add_option("--split-file", ta.split_file, "Reuse an existing split file");
  train_cmd->add_flag("--deterministic", ta.deterministic,
                      "Fixed shard order and merge order (always on; recorded in the manifest)");
  train_cmd->add_option("--threads", ta.threads, "E-step worker threads")->capture_default_str();
  train_cmd->add_option("--min-count", ta.min_count, "Minimum word frequency")->capture_default_str();
  train_cmd->add_option("--stopwords", ta.stopwords, "Whitespace separated stopword file");
  train_cmd->add_option("--citation-weight", ta.citation_weight, "link-LDA citation weight")
      ->capture_default_str();
  train_cmd->add_option("--out", ta.out, "Output directory")->required();

  PredictArgs pa;
  auto* predict_cmd = app.add_subcommand("predict", "Rank link targets for documents");
  predict_cmd->add_option("--model-file", pa.model_file, "Model file written by train")->required();
  predict_cmd->add_option("--corpus", pa.corpus, "Corpus the model was trained on")->required();
  predict_cmd->add_option("--docs", pa.docs, "Source document ids (default: all)")->delimiter(',');
  predict_cmd->add_option("--split-file", pa.split_file, "Rank the test documents of this split");
  predict_cmd->add_flag("--fold-in", pa.fold_in, "Re-estimate the source mixture from its text");
  predict_cmd->add_option("--fold-in-iters", pa.fold_in_iters, "Fold-in iterations")->capture_default_str();
  predict_cmd->add_option("--out", pa.out, "Output directory")->required();

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Hit rate, precision and recall curves");
  eval_cmd->add_option("--rankings", ea.rankings, "method=rankings.jsonl, repeatable")->required();
  eval_cmd->add_option("--corpus", ea.corpus, "Corpus file")->required();
  eval_cmd->add_option("--split-file", ea.split_file, "Split file written by train")->required();
  eval_cmd->add_option("--nmax", ea.n_max, "Largest cutoff N")->capture_default_str();
  eval_cmd->add_option("--subset", ea.subset, "Evaluate on test or train documents")->capture_default_str();
  eval_cmd->add_option("--out", ea.out, "Output directory")->required();

  GenArgs ga;
  auto* gen_cmd = app.add_subcommand("gen", "Sample a synthetic corpus");
  gen_cmd->add_option("--config", ga.config, "Generator config (JSON)")->required();
  gen_cmd->add_option("--out", ga.out, "Output directory")->required();

  InspectArgs ia;
  auto* inspect_cmd = app.add_subcommand("inspect", "Top words and links per topic");
  inspect_cmd->add_option("--model-file", ia.model_file, "Model file written by train")->required();
  inspect_cmd->add_option("--top-words", ia.top_words, "Words per topic")->capture_default_str();
  inspect_cmd->add_option("--top-links", ia.top_links, "Link targets per topic")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train_cmd) return cmd_train(ta, out, err);
    if (*predict_cmd) return cmd_predict(pa, out);
    if (*eval_cmd) return cmd_eval(ea, out);
    if (*gen_cmd) return cmd_gen(ga, out);
    if (*inspect_cmd) return cmd_inspect(ia, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}

}  // namespace lthm::cli
