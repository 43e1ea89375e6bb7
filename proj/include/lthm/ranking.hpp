#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "lthm/corpus.hpp"

namespace lthm {

struct ScoredDoc {
  DocIndex doc;
  double score;
  bool operator==(const ScoredDoc&) const = default;
};

// Total order over candidate documents, best first.
using RankedPrediction = std::vector<ScoredDoc>;

// Sorts by score descending, ties by ascending doc index.
inline RankedPrediction rank_by_score(std::span<const double> scores) {
  RankedPrediction out(scores.size());
  for (std::size_t d = 0; d < scores.size(); ++d)
    out[d] = {static_cast<DocIndex>(d), scores[d]};
  std::stable_sort(out.begin(), out.end(),
                   [](const ScoredDoc& a, const ScoredDoc& b) { return a.score > b.score; });
  return out;
}

inline std::vector<DocIndex> ranked_docs(const RankedPrediction& r) {
  std::vector<DocIndex> out;
  out.reserve(r.size());
  for (const auto& s : r) out.push_back(s.doc);
  return out;
}

}  // namespace lthm
