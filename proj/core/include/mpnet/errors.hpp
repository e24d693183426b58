#pragma once

#include <stdexcept>
#include <string>

namespace mpnet {

/// Malformed or truncated artifact file (weights, manifests, datasets).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Training produced a non-finite loss; carries seed and epoch for triage.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::uint64_t seed, int epoch, const std::string& what)
      : std::runtime_error(what), seed(seed), epoch(epoch) {}
  std::uint64_t seed;
  int epoch;
};

/// A model emitted a non-finite value; signals weight corruption, not a
/// planning failure.
class ModelOutputError : public std::runtime_error {
 public:
  explicit ModelOutputError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mpnet
