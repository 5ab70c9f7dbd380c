#pragma once

#include <cstdint>

namespace sinkcpd {

/// Counter-based generator "sinkcpd-ctr64 v1": the k-th draw of stream
/// (seed, stream) is splitmix64(key + k * golden), with key derived from both.
/// Output depends only on (seed, stream, k), never on platform or library
/// distribution implementations. Bump kVersion if the mapping ever changes.
class CounterRng {
 public:
  static constexpr int kVersion = 1;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Independent generator for a sub-stream, e.g. one per trial.
  CounterRng split(std::uint64_t sub_stream) const;

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sinkcpd
