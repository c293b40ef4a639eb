#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cqpairs/errors.hpp"

namespace cqpairs {

// A relaxed (p,k)-difference set: k distinct residues mod p whose pairwise
// differences realize every nonzero residue at least once. Sets produced by
// this module are canonical: sorted ascending with elements[0] == 0 (any set
// can be translated into this form without changing its difference coverage).
struct DifferenceSet {
  int p = 0;
  std::vector<int> elements;

  int k() const { return static_cast<int>(elements.size()); }

  friend bool operator==(const DifferenceSet&, const DifferenceSet&) = default;
};

// Smallest k with k(k-1)+1 >= p. This bounds the quorum size from below;
// it does not guarantee a set of that size exists for every p.
inline int minimal_k_lower_bound(int p) {
  if (p < 1) throw InvalidInputError("minimal_k_lower_bound: p must be >= 1");
  int k = 1;
  while (k * (k - 1) + 1 < p) ++k;
  return k;
}

namespace detail {

inline void check_structure(const DifferenceSet& ds) {
  if (ds.p < 1) throw InvalidInputError("difference set: p must be >= 1");
  if (ds.elements.empty()) throw InvalidInputError("difference set: no elements");
  for (std::size_t i = 0; i < ds.elements.size(); ++i) {
    const int a = ds.elements[i];
    if (a < 0 || a >= ds.p)
      throw InvalidInputError("difference set: element " + std::to_string(a) +
                              " out of range [0," + std::to_string(ds.p) + ")");
    if (i > 0 && ds.elements[i - 1] >= a)
      throw InvalidInputError("difference set: elements must be sorted and distinct");
  }
}

}  // namespace detail

// True iff every d in 1..p-1 equals (a_i - a_j) mod p for some pair of
// elements. Translation-invariant: the set need not contain 0. Structural
// violations throw InvalidInputError; they never read as a false result.
inline bool verify_difference_set(const DifferenceSet& ds) {
  detail::check_structure(ds);
  const int p = ds.p;
  if (p == 1) return true;  // no nonzero residues to cover
  std::vector<char> seen(static_cast<std::size_t>(p), 0);
  int covered = 0;
  for (int a : ds.elements) {
    for (int b : ds.elements) {
      if (a == b) continue;
      int d = a - b;
      if (d < 0) d += p;
      if (!seen[static_cast<std::size_t>(d)]) {
        seen[static_cast<std::size_t>(d)] = 1;
        ++covered;
      }
    }
  }
  return covered == p - 1;
}

// One step is one attempted prefix extension in the depth-first search.
// Steps are deterministic per p, so the default is machine-independent; it
// covers every p <= 64 with ~4x headroom (the worst case there is p = 53 at
// ~1.6e7 steps) and completes in seconds.
inline constexpr std::uint64_t kDefaultSearchBudget = 64'000'000;

namespace detail {

// Incrementally maintained difference coverage of the current prefix.
struct DiffCoverage {
  explicit DiffCoverage(int modulus)
      : p(modulus), count(static_cast<std::size_t>(modulus), 0) {}

  int p;
  std::vector<int> count;  // per-residue multiplicity
  int covered = 0;         // residues in 1..p-1 with multiplicity > 0

  void add(const std::vector<int>& elems, int x) {
    for (int a : elems) {
      bump(x - a);
      bump(a - x);
    }
  }
  void remove(const std::vector<int>& elems, int x) {
    for (int a : elems) {
      drop(x - a);
      drop(a - x);
    }
  }

 private:
  void bump(int d) {
    d %= p;
    if (d < 0) d += p;
    if (d != 0 && count[static_cast<std::size_t>(d)]++ == 0) ++covered;
  }
  void drop(int d) {
    d %= p;
    if (d < 0) d += p;
    if (d != 0 && --count[static_cast<std::size_t>(d)] == 0) --covered;
  }
};

// Lexicographic DFS over sorted prefixes {0 < a_2 < ... < a_k}. The prune
// only discards prefixes that provably cannot reach full coverage, so the
// first complete set found is the lexicographic minimum for this k.
inline bool extend_prefix(std::vector<int>& elems, DiffCoverage& cov, int k, int p,
                          std::uint64_t& steps, std::uint64_t budget) {
  const int size = static_cast<int>(elems.size());
  if (size == k) return cov.covered == p - 1;
  const int slots = k - size;
  for (int x = elems.back() + 1; x <= p - slots; ++x) {
    if (++steps > budget)
      throw BudgetExceededError("difference-set search budget exhausted at p=" +
                                    std::to_string(p) + " k=" + std::to_string(k),
                                k);
    cov.add(elems, x);
    // a future element joining a set of size s contributes at most 2s new
    // differences; summed over the remaining slots:
    const int rest = slots - 1;
    if (cov.covered + rest * (2 * (size + 1) + rest - 1) >= p - 1) {
      elems.push_back(x);
      if (extend_prefix(elems, cov, k, p, steps, budget)) return true;
      elems.pop_back();
    }
    cov.remove(elems, x);
  }
  return false;
}

}  // namespace detail

// Exhaustive search for a minimum-cardinality relaxed difference set,
// trying k = minimal_k_lower_bound(p) upward. Returns the lexicographically
// smallest set at the first k that admits one, with a_1 = 0 fixed to quotient
// out translation. Deterministic for a given p.
inline DifferenceSet search_minimal(int p, std::optional<std::uint64_t> budget = {}) {
  if (p < 1) throw InvalidInputError("search_minimal: p must be >= 1");
  if (p == 1) return {1, {0}};
  const std::uint64_t limit = budget.value_or(kDefaultSearchBudget);
  std::uint64_t steps = 0;
  // fallback_consecutive exhibits a set of size floor(p/2)+1, so the loop
  // always terminates at or before that k
  for (int k = minimal_k_lower_bound(p); k <= p / 2 + 1; ++k) {
    std::vector<int> elems{0};
    detail::DiffCoverage cov(p);
    if (detail::extend_prefix(elems, cov, k, p, steps, limit)) return {p, std::move(elems)};
  }
  throw Error("search_minimal: exhausted every k up to the consecutive-set size");
}

// {0, 1, ..., floor(p/2)}: consecutive residues realize every difference
// d <= floor(p/2) directly and the remaining ones as negations mod p.
// Always valid, never smaller than the searched minimum.
inline DifferenceSet fallback_consecutive(int p) {
  if (p < 1) throw InvalidInputError("fallback_consecutive: p must be >= 1");
  std::vector<int> elems(static_cast<std::size_t>(p / 2 + 1));
  std::iota(elems.begin(), elems.end(), 0);
  return {p, std::move(elems)};
}

// File-backed cache of searched sets, one record per line:
//   p k a_1,a_2,...,a_k
// in decimal, sorted by p. Loaded lazily; every record is re-verified on
// load and a corrupt record raises CacheError rather than being used.
class DiffsetCache {
 public:
  explicit DiffsetCache(std::filesystem::path path) : path_(std::move(path)) {}

  std::optional<DifferenceSet> lookup(int p) {
    ensure_loaded();
    auto it = sets_.find(p);
    if (it == sets_.end()) return std::nullopt;
    return it->second;
  }

  void store(const DifferenceSet& ds) {
    ensure_loaded();
    if (ds.elements.empty() || ds.elements.front() != 0 || !verify_difference_set(ds))
      throw CacheError("refusing to cache an invalid or non-canonical set for p=" +
                       std::to_string(ds.p));
    sets_[ds.p] = ds;
    rewrite();
  }

  std::size_t size() {
    ensure_loaded();
    return sets_.size();
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  void ensure_loaded() {
    if (loaded_) return;
    loaded_ = true;
    std::ifstream in(path_);
    if (!in) return;  // no cache file yet
    std::string line;
    int line_no = 0;
    int prev_p = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      sets_.emplace(parse_record(line, line_no, prev_p));
    }
  }

  std::pair<int, DifferenceSet> parse_record(const std::string& line, int line_no,
                                             int& prev_p) {
    const auto fail = [&](const std::string& why) -> CacheError {
      return CacheError(path_.string() + ":" + std::to_string(line_no) +
                        ": corrupt cache record (" + why + ")");
    };
    std::istringstream ls(line);
    int p = 0, k = 0;
    std::string csv, extra;
    if (!(ls >> p >> k >> csv)) throw fail("expected 'p k a_1,...,a_k'");
    if (ls >> extra) throw fail("trailing tokens");
    if (p < 1 || k < 1) throw fail("p and k must be positive");
    std::vector<int> elems;
    std::size_t pos = 0;
    while (pos <= csv.size()) {
      const std::size_t comma = std::min(csv.find(',', pos), csv.size());
      int value = 0;
      const auto [ptr, ec] = std::from_chars(csv.data() + pos, csv.data() + comma, value);
      if (ec != std::errc() || ptr != csv.data() + comma) throw fail("bad element list");
      elems.push_back(value);
      pos = comma + 1;
    }
    if (static_cast<int>(elems.size()) != k) throw fail("k does not match element count");
    DifferenceSet ds{p, std::move(elems)};
    try {
      if (ds.elements.front() != 0 || !verify_difference_set(ds))
        throw fail("set fails difference verification");
    } catch (const InvalidInputError& e) {
      throw fail(e.what());
    }
    if (p <= prev_p) throw fail("records must be strictly sorted by p");
    prev_p = p;
    return {p, std::move(ds)};
  }

  void rewrite() {
    std::ofstream out(path_, std::ios::trunc);
    if (!out) throw CacheError("cannot write cache file " + path_.string());
    for (const auto& [p, ds] : sets_) {
      out << p << ' ' << ds.k() << ' ';
      for (std::size_t i = 0; i < ds.elements.size(); ++i) {
        if (i) out << ',';
        out << ds.elements[i];
      }
      out << '\n';
    }
  }

  std::filesystem::path path_;
  std::map<int, DifferenceSet> sets_;
  bool loaded_ = false;
};

// Cache-aware search: hits skip the exhaustive run, misses are searched
// and persisted.
inline DifferenceSet search_minimal_cached(int p, DiffsetCache& cache,
                                           std::optional<std::uint64_t> budget = {}) {
  if (auto hit = cache.lookup(p)) return *hit;
  DifferenceSet ds = search_minimal(p, budget);
  cache.store(ds);
  return ds;
}

}  // namespace cqpairs
