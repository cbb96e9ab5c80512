#pragma once
// Deterministic random streams with hierarchical key derivation.
//
// Every stream is identified by a 64-bit key. Child streams are derived by
// mixing the parent key with a label hash and an index, so a stream's output
// depends only on the path of (label, index) pairs from the master seed —
// never on scheduling or on how many draws other streams have consumed.
// The generator itself is std::mt19937_64, whose output sequence is fully
// specified by the C++ standard, giving bit-identical results across
// platforms. std::*_distribution adapters are implementation-defined and are
// deliberately not used here.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace hcb {

// splitmix64 finalizer; used only to mix derivation keys, not to generate
// variates.
inline std::uint64_t mix_key(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// FNV-1a, for turning purpose labels ("env", "episode", ...) into key salt.
inline std::uint64_t hash_label(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t key) : key_(key), engine_(key) {}

  // Derives an independent stream for (label, index) under this stream's key.
  RandomStream child(std::string_view label, std::uint64_t index = 0) const {
    std::uint64_t k = mix_key(key_ ^ hash_label(label));
    return RandomStream(mix_key(k + index));
  }

  // Stable identifier of this stream (used for collision auditing).
  std::uint64_t key() const { return key_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random mantissa bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Index ~ weights; weights must be nonnegative and sum to ~1 (used for the
  // context distribution). Rounding leftovers fall into the last bucket.
  int categorical(const std::vector<double>& weights) {
    if (weights.empty()) throw std::invalid_argument("categorical: no weights");
    double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
  }

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
};

}  // namespace hcb
