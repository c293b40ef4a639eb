#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cqpairs/errors.hpp"
#include "cqpairs/partition.hpp"
#include "cqpairs/quorum.hpp"

namespace cqpairs {

enum class OwnerPolicy { FirstWitness, Balanced };

inline const char* to_string(OwnerPolicy p) {
  return p == OwnerPolicy::FirstWitness ? "first-witness" : "balanced";
}
inline std::optional<OwnerPolicy> parse_policy(std::string_view s) {
  if (s == "first-witness") return OwnerPolicy::FirstWitness;
  if (s == "balanced") return OwnerPolicy::Balanced;
  return std::nullopt;
}

// Exactly-one owner for every unordered block pair (j,k), j <= k. Owners are
// worker (= quorum) indices; feasibility means both blocks are in the
// owner's quorum. Self-pairs are pinned to their own worker.
struct Schedule {
  int p = 0;
  OwnerPolicy policy = OwnerPolicy::Balanced;
  std::vector<int> owner;                  // indexed by pair_index(j,k,p)
  std::vector<std::uint64_t> workload;     // element-pair cost per worker

  int owner_of(int j, int k) const {
    if (j > k) std::swap(j, k);
    return owner[pair_index(j, k, p)];
  }
};

// Element pairs contributed by one block pair: full cross product for
// distinct blocks, intra-block pairs for a self-pair.
inline std::uint64_t element_pair_cost(const Partition& part, int j, int k) {
  const std::uint64_t sj = part.block_size(j);
  const std::uint64_t sk = part.block_size(k);
  return j == k ? sj * (sj - 1) / 2 : sj * sk;
}

// first-witness: every pair goes to its lowest containing quorum.
// balanced: pairs are handed out in descending element-pair cost, each to
// the candidate with the least accumulated cost (ties: lowest index; cost
// ties in the ordering: lexicographic pair order). Both policies pin
// owner(i,i) = i whenever block i is in quorum i, which generated systems
// always satisfy.
inline Schedule build_schedule(const QuorumSystem& q, const Partition& part,
                               OwnerPolicy policy) {
  if (part.p != q.p)
    throw InvalidInputError("build_schedule: partition has p=" + std::to_string(part.p) +
                            " but quorum system has p=" + std::to_string(q.p));
  const AllPairsResult ap = verify_all_pairs(q);
  if (!ap.ok)
    throw AllPairsError("build_schedule: system fails all-pairs at block pair (" +
                            std::to_string(ap.counterexample->first) + "," +
                            std::to_string(ap.counterexample->second) + ")",
                        ap.counterexample->first, ap.counterexample->second);

  const int p = q.p;
  Schedule s{p, policy, std::vector<int>(pair_count(p), -1),
             std::vector<std::uint64_t>(q.quorums.size(), 0)};

  const auto assign = [&](int j, int k, int w) {
    s.owner[pair_index(j, k, p)] = w;
    s.workload[static_cast<std::size_t>(w)] += element_pair_cost(part, j, k);
  };

  const auto member = detail::membership(q);
  std::vector<std::pair<int, int>> open;  // pairs not pinned below
  for (int i = 0; i < p; ++i) {
    if (static_cast<std::size_t>(i) < member.size() && member[i][static_cast<std::size_t>(i)])
      assign(i, i, i);
    else
      open.emplace_back(i, i);  // imported system without i in quorum i
  }
  for (int j = 0; j < p; ++j)
    for (int k = j + 1; k < p; ++k) open.emplace_back(j, k);

  if (policy == OwnerPolicy::Balanced) {
    std::stable_sort(open.begin(), open.end(), [&](const auto& a, const auto& b) {
      const std::uint64_t ca = element_pair_cost(part, a.first, a.second);
      const std::uint64_t cb = element_pair_cost(part, b.first, b.second);
      if (ca != cb) return ca > cb;
      return a < b;
    });
  }

  for (const auto& [j, k] : open) {
    const auto& wit = ap.witnesses[pair_index(j, k, p)];
    int best = wit[0];
    if (policy == OwnerPolicy::Balanced) {
      for (int w : wit)
        if (s.workload[static_cast<std::size_t>(w)] <
            s.workload[static_cast<std::size_t>(best)])
          best = w;
    }
    assign(j, k, best);
  }
  return s;
}

struct BalanceReport {
  std::vector<std::uint64_t> block_pairs;    // per worker
  std::vector<std::uint64_t> element_pairs;  // per worker cost
  std::uint64_t total_block_pairs = 0;
  std::uint64_t total_element_pairs = 0;
  double cost_max_over_mean = 0.0;
  double cost_max_over_min = 0.0;  // +inf when some worker has zero cost
  double block_max_over_mean = 0.0;
  double block_max_over_min = 0.0;
};

inline BalanceReport balance_report(const Schedule& s) {
  if (s.workload.empty())
    throw InvalidInputError(
        "balance_report: schedule carries no workloads (imported documents need "
        "recompute_workload against a partition first)");
  BalanceReport rep;
  rep.element_pairs = s.workload;
  rep.block_pairs.assign(s.workload.size(), 0);
  for (int o : s.owner) {
    ++rep.block_pairs[static_cast<std::size_t>(o)];
    ++rep.total_block_pairs;
  }
  for (std::uint64_t c : s.workload) rep.total_element_pairs += c;

  const auto ratios = [](const std::vector<std::uint64_t>& v, double& max_over_mean,
                         double& max_over_min) {
    const std::uint64_t mx = *std::max_element(v.begin(), v.end());
    const std::uint64_t mn = *std::min_element(v.begin(), v.end());
    double total = 0;
    for (std::uint64_t c : v) total += static_cast<double>(c);
    const double mean = total / static_cast<double>(v.size());
    max_over_mean = mean > 0 ? static_cast<double>(mx) / mean : 1.0;
    max_over_min = mn > 0 ? static_cast<double>(mx) / static_cast<double>(mn)
                          : std::numeric_limits<double>::infinity();
  };
  ratios(rep.element_pairs, rep.cost_max_over_mean, rep.cost_max_over_min);
  ratios(rep.block_pairs, rep.block_max_over_mean, rep.block_max_over_min);
  return rep;
}

}  // namespace cqpairs
