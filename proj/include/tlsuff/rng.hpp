#pragma once

#include <cstdint>
#include <string_view>

namespace tlsuff {

// Counter-based pseudo-random stream. Output i is a pure function of
// (key, i): the SplitMix64 output mix applied to key + i * golden-gamma.
// Streams with distinct keys are independent for Monte Carlo purposes, and
// a stream's output sequence does not depend on any other stream, so
// replications can be generated on any schedule with identical results.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() {
    std::uint64_t z = key_ + (++counter_) * kGamma;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on the open interval (0,1); never returns an endpoint.
  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via the inverse CDF (see normal_quantile).
  double next_normal();

  std::uint64_t key() const { return key_; }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Derives a stream key by folding the seed, a textual experiment id, a
// purpose tag and a replication index through the SplitMix64 mix. The same
// inputs always yield the same key.
std::uint64_t derive_stream_key(std::uint64_t base_seed, std::string_view experiment_id,
                                std::uint64_t purpose, std::uint64_t index);

inline RngStream derive_stream(std::uint64_t base_seed, std::string_view experiment_id,
                               std::uint64_t purpose, std::uint64_t index) {
  return RngStream(derive_stream_key(base_seed, experiment_id, purpose, index));
}

}  // namespace tlsuff
