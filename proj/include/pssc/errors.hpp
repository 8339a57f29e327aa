#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pssc {

// Caller broke a documented precondition (shape, symmetry, range).
class ContractViolation : public std::invalid_argument {
 public:
  explicit ContractViolation(const std::string& what) : std::invalid_argument(what) {}
};

// Invalid run configuration (cluster counts, subspace rank, sample sizes).
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// An iterative factorization hit its iteration cap.
class FactorizationError : public std::runtime_error {
 public:
  explicit FactorizationError(const std::string& what) : std::runtime_error(what) {}
};

// A loss term became NaN/Inf.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& term, const std::string& what)
      : std::runtime_error(what), term_(term) {}
  const std::string& term() const noexcept { return term_; }

 private:
  std::string term_;
};

// Malformed input file; offset is the byte position where parsing failed.
class IngestionError : public std::runtime_error {
 public:
  IngestionError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

namespace detail {
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractViolation(msg);
}
}  // namespace detail

}  // namespace pssc
