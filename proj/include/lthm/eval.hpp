#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "lthm/corpus.hpp"

namespace lthm {

// Curves for one method; entry n-1 holds the value at cutoff N = n.
struct MethodCurves {
  std::string method;
  std::vector<double> hit;
  std::vector<double> precision;
  std::vector<double> recall;
  std::size_t evaluated_docs = 0;
};

struct EvalReport {
  std::size_t n_max = 20;
  std::vector<MethodCurves> methods;
};

// Distinct outgoing link targets of each listed document, ascending.
std::vector<std::vector<DocIndex>> truth_sets(const CorpusView& view,
                                              std::span<const DocIndex> docs);

// rankings[j] and truth[j] belong to the same source document. Sources with
// an empty truth set are skipped. Throws DataError when a ranking is shorter
// than n_max or a truth entry is not a valid document.
MethodCurves evaluate(const std::string& method,
                      std::span<const std::vector<DocIndex>> rankings,
                      std::span<const std::vector<DocIndex>> truth, std::size_t num_docs,
                      std::size_t n_max);

// Throws NumericalError if hit or recall decrease in N or any value leaves
// [0, 1].
void check_report(const EvalReport& report);

// CSV `method,N,hit,precision,recall`, N ascending within each method.
void emit_curves(const EvalReport& report, std::ostream& out);
void emit_curves(const EvalReport& report, const std::string& path);
EvalReport read_curves(std::istream& in);

}  // namespace lthm
