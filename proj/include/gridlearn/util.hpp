#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gridlearn {

enum class ErrorKind {
  EmptyValueSet,
  SceneInfeasible,
  StepAfterDone,
  NotReachable,
  BudgetExhausted,
  DomainError,
  MissingAnnotation,
  DimensionMismatch,
  ContextOverflow,
  EmptyMask,
  ZeroVector,
  SchemeMismatch,
  CorruptDataset,
  ConfigError,
  IoError,
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent child seed from a base seed and up to three stream labels.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                                    std::uint64_t c = 0) {
  return mix64(mix64(mix64(mix64(base) ^ a) ^ (b * 0x632be59bd9b4e019ULL)) ^
               (c * 0x85157af5ULL));
}

/// Seeded random stream. Wraps mt19937_64 and implements the distribution
/// helpers by hand so that every platform draws the same numbers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). Exact (rejection sampling).
  std::size_t uniform_index(std::size_t n);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// True with probability p; p = 0 never fires and p = 1 always fires.
  bool bernoulli(double p) { return uniform01() < p; }

  double normal();

  template <typename Container>
  const auto& pick(const Container& items) {
    return items[uniform_index(items.size())];
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// 64-bit FNV-1a, used for content hashes of configs, datasets and checkpoints.
class Fnv1a {
 public:
  void update(const void* data, std::size_t size);
  void update(std::string_view text) { update(text.data(), text.size()); }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::uint64_t fnv1a(std::string_view text);
std::string to_hex(std::uint64_t value);

}  // namespace gridlearn
