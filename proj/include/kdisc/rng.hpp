#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace kdisc {

/// 64-bit finalizer from SplitMix64. Bijective on uint64.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// FNV-1a hash of a label.
std::uint64_t hash_label(std::string_view label) noexcept;

/// Seed-splitting rule shared by every module:
///   child = mix64(parent ^ mix64(hash_label(label)))
std::uint64_t derive_seed(std::uint64_t parent, std::string_view label) noexcept;

/// A seeded random stream. The engine is std::mt19937_64 seeded with the
/// stream's 64-bit seed; uniforms use the top 53 bits of one engine draw and
/// normals use the basic Box-Muller transform (the second variate of each pair
/// is cached). A stream is single-owner: split it before handing randomness to
/// another thread or replicate.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::string label = "root");

  std::uint64_t seed() const noexcept { return seed_; }
  const std::string& label() const noexcept { return label_; }

  RngStream split(std::string_view label) const;
  RngStream split(std::string_view label, std::uint64_t index) const;

  /// Uniform on [0, 1).
  double uniform();
  double normal();
  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound);

  std::vector<double> uniform(std::size_t n);
  std::vector<double> normal(std::size_t n);
  /// Uniform random permutation of 0..n-1 (Fisher-Yates).
  std::vector<std::size_t> permutation(std::size_t n);

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::string label_;
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace kdisc
