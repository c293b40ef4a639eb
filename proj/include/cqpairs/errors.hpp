#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace cqpairs {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Structurally invalid input: out-of-range residues, duplicates, malformed
// documents, mismatched p across inputs. Distinct from a false verification
// result, which is a regular return value.
struct InvalidInputError : Error {
  using Error::Error;
};

// Dataset ingestion failure; the message carries file and line context.
struct IngestError : Error {
  using Error::Error;
};

// Inconsistent run configuration (kernel needs values, p mismatch, ...).
struct ConfigError : Error {
  using Error::Error;
};

// Corrupt or inconsistent difference-set cache file.
struct CacheError : Error {
  using Error::Error;
};

// Exhaustive search ran out of steps; carries the set size being tried
// when the budget ran out.
struct BudgetExceededError : Error {
  BudgetExceededError(const std::string& msg, int k) : Error(msg), last_k(k) {}
  int last_k;
};

// A quorum system failed all-pairs verification; carries the first
// uncovered block pair.
struct AllPairsError : Error {
  AllPairsError(const std::string& msg, int j, int k) : Error(msg), uncovered{j, k} {}
  std::pair<int, int> uncovered;
};

// Pearson correlation is undefined for a constant row.
struct UndefinedCorrelationError : Error {
  using Error::Error;
};

}  // namespace cqpairs
