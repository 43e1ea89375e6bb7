#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace lthm {

// Splits [0, n) into `shards` contiguous ranges and runs work(begin, end) on
// each, one thread per shard. Results come back in shard order so callers can
// merge deterministically.
template <class Partial, class Work>
std::vector<Partial> run_sharded(std::size_t n, std::size_t shards, Work&& work) {
  shards = std::clamp<std::size_t>(shards, 1, std::max<std::size_t>(n, 1));
  std::vector<Partial> out(shards);
  if (shards == 1) {
    out[0] = work(std::size_t{0}, n);
    return out;
  }
  std::vector<std::exception_ptr> errors(shards);
  std::vector<std::thread> pool;
  pool.reserve(shards);
  for (std::size_t s = 0; s < shards; ++s) {
    const std::size_t begin = n * s / shards;
    const std::size_t end = n * (s + 1) / shards;
    pool.emplace_back([&, s, begin, end] {
      try {
        out[s] = work(begin, end);
      } catch (...) {
        errors[s] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) {
    double t = sum_ + x;
    comp_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
    sum_ = t;
  }
  void add(const CompensatedSum& other) {
    add(other.sum_);
    add(other.comp_);
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace lthm
