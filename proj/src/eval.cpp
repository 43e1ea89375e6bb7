#include "lthm/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "lthm/error.hpp"

namespace lthm {

std::vector<std::vector<DocIndex>> truth_sets(const CorpusView& view,
                                              std::span<const DocIndex> docs) {
  std::vector<std::vector<DocIndex>> out;
  out.reserve(docs.size());
  for (auto d : docs) {
    std::vector<DocIndex> targets;
    if (view.links_visible(d))
      for (const auto& l : view.corpus().doc(d).links()) targets.push_back(l.target);
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
    out.push_back(std::move(targets));
  }
  return out;
}

MethodCurves evaluate(const std::string& method,
                      std::span<const std::vector<DocIndex>> rankings,
                      std::span<const std::vector<DocIndex>> truth, std::size_t num_docs,
                      std::size_t n_max) {
  if (rankings.size() != truth.size())
    throw DataError("method '" + method + "': rankings and truth cover different documents");
  MethodCurves c{method, std::vector<double>(n_max, 0.0), std::vector<double>(n_max, 0.0),
                 std::vector<double>(n_max, 0.0), 0};
  std::vector<char> is_true(num_docs, 0);
  for (std::size_t j = 0; j < truth.size(); ++j) {
    for (auto t : truth[j])
      if (t >= num_docs) throw DataError("truth references unknown document " + std::to_string(t));
    if (truth[j].empty()) continue;
    if (rankings[j].size() < n_max)
      throw DataError("method '" + method + "': ranking shorter than N_max");
    for (auto t : truth[j]) is_true[t] = 1;
    std::size_t hits = 0;
    for (std::size_t n = 0; n < n_max; ++n) {
      const auto r = rankings[j][n];
      if (r >= num_docs) throw DataError("ranking references unknown document");
      if (is_true[r]) ++hits;
      const double h = static_cast<double>(hits);
      c.hit[n] += hits > 0 ? 1.0 : 0.0;
      c.precision[n] += h / static_cast<double>(n + 1);
      c.recall[n] += h / static_cast<double>(truth[j].size());
    }
    for (auto t : truth[j]) is_true[t] = 0;
    ++c.evaluated_docs;
  }
  if (c.evaluated_docs > 0) {
    const double inv = 1.0 / static_cast<double>(c.evaluated_docs);
    for (std::size_t n = 0; n < n_max; ++n) {
      c.hit[n] *= inv;
      c.precision[n] *= inv;
      c.recall[n] *= inv;
    }
  }
  return c;
}

void check_report(const EvalReport& report) {
  for (const auto& m : report.methods) {
    for (std::size_t n = 0; n < m.hit.size(); ++n) {
      for (double v : {m.hit[n], m.precision[n], m.recall[n]})
        if (!(v >= 0.0 && v <= 1.0)) throw NumericalError("metric outside [0, 1] for " + m.method);
      if (n > 0 && (m.hit[n] < m.hit[n - 1] || m.recall[n] < m.recall[n - 1]))
        throw NumericalError("hit or recall curve decreases for " + m.method);
    }
  }
}

void emit_curves(const EvalReport& report, std::ostream& out) {
  out << "method,N,hit,precision,recall\n";
  char buf[128];
  for (const auto& m : report.methods) {
    for (std::size_t n = 0; n < m.hit.size(); ++n) {
      std::snprintf(buf, sizeof buf, ",%zu,%.17g,%.17g,%.17g\n", n + 1, m.hit[n], m.precision[n],
                    m.recall[n]);
      out << m.method << buf;
    }
  }
  if (!out) throw DataError("failed writing curves");
}

void emit_curves(const EvalReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  emit_curves(report, out);
}

EvalReport read_curves(std::istream& in) {
  EvalReport report;
  report.n_max = 0;
  std::string line;
  if (!std::getline(in, line) || line != "method,N,hit,precision,recall")
    throw DataError("curves file has an unexpected header");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string method, n, hit, prec, rec;
    if (!std::getline(row, method, ',') || !std::getline(row, n, ',') ||
        !std::getline(row, hit, ',') || !std::getline(row, prec, ',') || !std::getline(row, rec))
      throw DataError("line " + std::to_string(lineno) + ": expected 5 fields");
    if (report.methods.empty() || report.methods.back().method != method)
      report.methods.push_back({method, {}, {}, {}, 0});
    auto& m = report.methods.back();
    try {
      if (std::stoul(n) != m.hit.size() + 1)
        throw DataError("line " + std::to_string(lineno) + ": N out of order");
      m.hit.push_back(std::stod(hit));
      m.precision.push_back(std::stod(prec));
      m.recall.push_back(std::stod(rec));
    } catch (const std::logic_error&) {
      throw DataError("line " + std::to_string(lineno) + ": bad number");
    }
    report.n_max = std::max(report.n_max, m.hit.size());
  }
  return report;
}

}  // namespace lthm
