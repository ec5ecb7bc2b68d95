#include "gridlearn/util.hpp"

#include <cmath>
#include <cstdio>

namespace gridlearn {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::EmptyValueSet: return "EmptyValueSet";
    case ErrorKind::SceneInfeasible: return "SceneInfeasible";
    case ErrorKind::StepAfterDone: return "StepAfterDone";
    case ErrorKind::NotReachable: return "NotReachable";
    case ErrorKind::BudgetExhausted: return "BudgetExhausted";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::MissingAnnotation: return "MissingAnnotation";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ContextOverflow: return "ContextOverflow";
    case ErrorKind::EmptyMask: return "EmptyMask";
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::SchemeMismatch: return "SchemeMismatch";
    case ErrorKind::CorruptDataset: return "CorruptDataset";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

std::size_t Rng::uniform_index(std::size_t n) {
  if (n <= 1) return 0;
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  std::uint64_t draw = engine_();
  while (draw >= limit) draw = engine_();
  return static_cast<std::size_t>(draw % bound);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  const double u2 = uniform01();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

void Fnv1a::update(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    state_ ^= bytes[i];
    state_ *= 0x100000001b3ULL;
  }
}

std::uint64_t fnv1a(std::string_view text) {
  Fnv1a h;
  h.update(text);
  return h.digest();
}

std::string to_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace gridlearn
