#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace cachesub {

// Neumaier-compensated accumulator. The demand synthesizer and the share
// computations add up to 1e7 terms spanning many orders of magnitude; a
// plain double accumulator loses several digits there.
class KahanSum {
 public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double rel_diff(double a, double b) {
  double scale = std::max(std::abs(a), std::abs(b));
  if (scale == 0.0) return 0.0;
  return std::abs(a - b) / scale;
}

// 64-bit FNV-1a, used to fingerprint scenario files in output metadata.
inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

// splitmix64 step; used to derive independent sub-seeds (per ANO, per
// repetition) from one scenario seed in a documented, reproducible way.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Fisher-Yates shuffle driven by an explicit mt19937_64 so results are
// identical across platforms (std::shuffle's algorithm is unspecified).
// Index draws use modulo reduction; the bias is irrelevant for our use and
// the draw sequence is fully determined by the seed.
template <typename T>
void deterministic_shuffle(std::vector<T>& v, std::mt19937_64& gen) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(gen() % i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace cachesub
