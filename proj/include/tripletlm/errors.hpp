#pragma once

#include <stdexcept>
#include <string>

namespace tripletlm {

/// Base of every error raised by the library. `kind()` is a short stable tag
/// used in machine-parseable CLI error lines.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

// Zero-norm vector entered a cosine/angular computation.
class DegenerateVectorError : public Error {
 public:
  explicit DegenerateVectorError(const std::string& message)
      : Error("degenerate_vector", message) {}
};

class ContractViolation : public Error {
 public:
  explicit ContractViolation(const std::string& message)
      : Error("contract_violation", message) {}
};

class MiningError : public Error {
 public:
  explicit MiningError(const std::string& message) : Error("mining", message) {}
};

class IngestionError : public Error {
 public:
  explicit IngestionError(const std::string& message)
      : Error("ingestion", message) {}
};

class LookupError : public Error {
 public:
  explicit LookupError(const std::string& message) : Error("lookup", message) {}
};

class EvaluationError : public Error {
 public:
  explicit EvaluationError(const std::string& message)
      : Error("evaluation", message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config", message) {}
};

class CheckpointError : public Error {
 public:
  explicit CheckpointError(const std::string& message)
      : Error("checkpoint", message) {}
};

}  // namespace tripletlm
