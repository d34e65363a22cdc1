#include "tlsuff/rng.hpp"

#include "tlsuff/normal.hpp"

namespace tlsuff {

namespace {

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fold(std::uint64_t acc, std::uint64_t word) {
  return mix64(acc + kGamma + word);
}

}  // namespace

double RngStream::next_normal() { return normal_quantile(next_unit()); }

std::uint64_t derive_stream_key(std::uint64_t base_seed, std::string_view experiment_id,
                                std::uint64_t purpose, std::uint64_t index) {
  std::uint64_t acc = fold(0x7c1592a6b2c0f1e5ULL, base_seed);
  for (unsigned char c : experiment_id) {
    acc = fold(acc, c);
  }
  acc = fold(acc, experiment_id.size());
  acc = fold(acc, purpose);
  acc = fold(acc, index);
  return acc;
}

}  // namespace tlsuff
