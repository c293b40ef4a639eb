#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cqpairs/diffset.hpp"
#include "cqpairs/errors.hpp"

namespace cqpairs {

// P cyclic translates of a difference set over block indices 0..p-1:
// quorums[i] = sorted {(a + i) mod p : a in base}. Block i is a member of
// quorums[i] because the canonical base contains 0. Hand-built or imported
// systems may violate the generated-system invariants; the verifiers below
// report that instead of assuming it.
struct QuorumSystem {
  int p = 0;
  DifferenceSet base;  // generating set; empty for hand-built systems
  std::vector<std::vector<int>> quorums;

  int workers() const { return static_cast<int>(quorums.size()); }
};

// Unordered block pairs (j,k), j <= k, laid out row-major:
// (0,0)..(0,p-1),(1,1)..(1,p-1),...
inline std::size_t pair_count(int p) {
  return static_cast<std::size_t>(p) * (static_cast<std::size_t>(p) + 1) / 2;
}
inline std::size_t pair_index(int j, int k, int p) {
  return static_cast<std::size_t>(j) * static_cast<std::size_t>(p) -
         static_cast<std::size_t>(j) * (static_cast<std::size_t>(j) - 1) / 2 +
         static_cast<std::size_t>(k - j);
}

namespace detail {

inline void check_system(const QuorumSystem& q) {
  if (q.p < 1) throw InvalidInputError("quorum system: p must be >= 1");
  for (std::size_t i = 0; i < q.quorums.size(); ++i) {
    const auto& s = q.quorums[i];
    for (std::size_t m = 0; m < s.size(); ++m) {
      if (s[m] < 0 || s[m] >= q.p)
        throw InvalidInputError("quorum " + std::to_string(i) + ": block index " +
                                std::to_string(s[m]) + " out of range [0," +
                                std::to_string(q.p) + ")");
      if (m > 0 && s[m - 1] >= s[m])
        throw InvalidInputError("quorum " + std::to_string(i) +
                                ": members must be sorted and distinct");
    }
  }
}

// membership[i][b] = 1 iff block b is in quorum i
inline std::vector<std::vector<char>> membership(const QuorumSystem& q) {
  std::vector<std::vector<char>> member(q.quorums.size(),
                                        std::vector<char>(static_cast<std::size_t>(q.p), 0));
  for (std::size_t i = 0; i < q.quorums.size(); ++i)
    for (int b : q.quorums[i]) member[i][static_cast<std::size_t>(b)] = 1;
  return member;
}

}  // namespace detail

// Builds the P cyclic translates of a canonical difference set. The base is
// verified first; an invalid base is rejected before generation.
inline QuorumSystem generate(const DifferenceSet& base) {
  if (!verify_difference_set(base))
    throw InvalidInputError("generate: base is not a relaxed difference set (p=" +
                            std::to_string(base.p) + ")");
  if (base.elements.front() != 0)
    throw InvalidInputError("generate: base must be canonical (contain 0)");
  QuorumSystem q{base.p, base, {}};
  q.quorums.reserve(static_cast<std::size_t>(base.p));
  for (int i = 0; i < base.p; ++i) {
    std::vector<int> s;
    s.reserve(base.elements.size());
    for (int a : base.elements) s.push_back((a + i) % base.p);
    std::sort(s.begin(), s.end());
    q.quorums.push_back(std::move(s));
  }
  return q;
}

struct AllPairsResult {
  bool ok = false;
  // witnesses[pair_index(j,k,p)] lists every quorum containing both j and k,
  // ascending. The scheduler chooses owners from these lists.
  std::vector<std::vector<int>> witnesses;
  std::optional<std::pair<int, int>> counterexample;  // first uncovered pair
};

// The all-pairs property: every unordered block pair (j,k), j <= k, lives
// together in at least one quorum. Self-pairs included; intra-block element
// pairs still need a worker that holds the block.
inline AllPairsResult verify_all_pairs(const QuorumSystem& q) {
  detail::check_system(q);
  const auto member = detail::membership(q);
  AllPairsResult res;
  res.ok = true;
  res.witnesses.assign(pair_count(q.p), {});
  for (int j = 0; j < q.p; ++j) {
    for (int k = j; k < q.p; ++k) {
      auto& w = res.witnesses[pair_index(j, k, q.p)];
      for (std::size_t i = 0; i < q.quorums.size(); ++i)
        if (member[i][static_cast<std::size_t>(j)] && member[i][static_cast<std::size_t>(k)])
          w.push_back(static_cast<int>(i));
      if (w.empty() && !res.counterexample) {
        res.ok = false;
        res.counterexample = std::make_pair(j, k);
      }
    }
  }
  return res;
}

struct PropertyReport {
  bool coverage = false;               // union of quorums is all of 0..p-1
  bool pairwise_intersection = false;  // every two quorums share a block
  bool equal_size = false;             // all quorums have the same size
  bool equal_responsibility = false;   // every block sits in the same number
                                       // of quorums, and that number is the
                                       // common quorum size
  bool all_pairs = false;

  bool all() const {
    return coverage && pairwise_intersection && equal_size && equal_responsibility &&
           all_pairs;
  }
};

inline PropertyReport verify_quorum_properties(const QuorumSystem& q) {
  detail::check_system(q);
  const auto member = detail::membership(q);
  const std::size_t nq = q.quorums.size();
  PropertyReport rep;

  std::vector<int> responsibility(static_cast<std::size_t>(q.p), 0);
  for (std::size_t i = 0; i < nq; ++i)
    for (int b : q.quorums[i]) ++responsibility[static_cast<std::size_t>(b)];

  rep.coverage = std::all_of(responsibility.begin(), responsibility.end(),
                             [](int c) { return c > 0; });

  rep.pairwise_intersection = nq > 0;
  for (std::size_t i = 0; i < nq && rep.pairwise_intersection; ++i) {
    for (std::size_t j = i; j < nq && rep.pairwise_intersection; ++j) {
      bool meet = false;
      for (int b : q.quorums[i])
        if (member[j][static_cast<std::size_t>(b)]) {
          meet = true;
          break;
        }
      rep.pairwise_intersection = meet;
    }
  }

  rep.equal_size = nq > 0;
  for (std::size_t i = 1; i < nq; ++i)
    if (q.quorums[i].size() != q.quorums[0].size()) rep.equal_size = false;

  const int k = nq > 0 ? static_cast<int>(q.quorums[0].size()) : 0;
  rep.equal_responsibility =
      !responsibility.empty() &&
      std::all_of(responsibility.begin(), responsibility.end(),
                  [&](int c) { return c == responsibility[0]; }) &&
      (!rep.equal_size || responsibility[0] == k);

  rep.all_pairs = verify_all_pairs(q).ok;
  return rep;
}

}  // namespace cqpairs
