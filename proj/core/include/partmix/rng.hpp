#pragma once

#include <array>
#include <cstdint>

// Deterministic random streams. Every consumer derives its own stream from
// (master_seed, replication_index, purpose_tag) through a SplitMix64 chain,
// so results are independent of execution order and thread count. The
// generator core is xoshiro256++; streams are never shared.

namespace partmix {

enum class StreamPurpose : std::uint64_t {
  kTrainingSample = 1,
  kMissingness = 2,
  kTestSample = 3,
  kInitialization = 4,
};

class RngStream {
 public:
  /// Stream keyed by (master_seed, replication_index, purpose_tag):
  /// the key is folded by SplitMix64 and expanded into the xoshiro state.
  RngStream(std::uint64_t master_seed, std::uint64_t replication,
            StreamPurpose purpose);
  explicit RngStream(std::uint64_t seed)
      : RngStream(seed, 0, StreamPurpose::kTrainingSample) {}

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01();

  /// Standard normal via Box-Muller; the spare deviate is cached.
  double normal();

  bool bernoulli(double p) { return uniform01() < p; }

  /// Unbiased integer in [0, n); n > 0.
  std::uint64_t uniform_below(std::uint64_t n);

 private:
  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace partmix
