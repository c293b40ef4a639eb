#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cqpairs/diffset.hpp"
#include "cqpairs/engine.hpp"
#include "cqpairs/quorum.hpp"
#include "cqpairs/schedule.hpp"

namespace cqpairs {

inline nlohmann::json to_json(const DifferenceSet& ds) {
  return {{"p", ds.p},
          {"k", ds.k()},
          {"elements", ds.elements},
          {"lower_bound", minimal_k_lower_bound(ds.p)},
          {"optimal", ds.k() == minimal_k_lower_bound(ds.p)}};
}

// {p, base:[...], quorums:[[...],...]}; round-trips losslessly (members are
// kept sorted on both sides).
inline nlohmann::json to_json(const QuorumSystem& q) {
  return {{"p", q.p}, {"base", q.base.elements}, {"quorums", q.quorums}};
}

inline QuorumSystem quorum_from_json(const nlohmann::json& j) {
  try {
    QuorumSystem q;
    q.p = j.at("p").get<int>();
    q.base.p = q.p;
    q.base.elements = j.value("base", std::vector<int>{});
    q.quorums = j.at("quorums").get<std::vector<std::vector<int>>>();
    for (auto& s : q.quorums) std::sort(s.begin(), s.end());
    detail::check_system(q);
    return q;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInputError(std::string("quorum document: ") + e.what());
  }
}

// {p, policy, owner:[[j,k,i],...]} sorted by (j,k). Workloads are not part
// of the document; rebuild them against a partition when needed.
inline nlohmann::json to_json(const Schedule& s) {
  nlohmann::json owners = nlohmann::json::array();
  for (int j = 0; j < s.p; ++j)
    for (int k = j; k < s.p; ++k)
      owners.push_back({j, k, s.owner[pair_index(j, k, s.p)]});
  return {{"p", s.p}, {"policy", to_string(s.policy)}, {"owner", owners}};
}

inline Schedule schedule_from_json(const nlohmann::json& j) {
  try {
    Schedule s;
    s.p = j.at("p").get<int>();
    if (s.p < 1) throw InvalidInputError("schedule document: p must be >= 1");
    const auto policy = parse_policy(j.at("policy").get<std::string>());
    if (!policy)
      throw InvalidInputError("schedule document: unknown policy '" +
                              j.at("policy").get<std::string>() + "'");
    s.policy = *policy;
    s.owner.assign(pair_count(s.p), -1);
    const auto& owners = j.at("owner");
    std::size_t at = 0;
    for (int j2 = 0; j2 < s.p; ++j2) {
      for (int k = j2; k < s.p; ++k, ++at) {
        if (at >= owners.size())
          throw InvalidInputError("schedule document: missing pair (" +
                                  std::to_string(j2) + "," + std::to_string(k) + ")");
        const auto& rec = owners.at(at);
        if (rec.size() != 3 || rec.at(0).get<int>() != j2 || rec.at(1).get<int>() != k)
          throw InvalidInputError("schedule document: owner records must cover every "
                                  "pair (j,k), j <= k, in order");
        const int o = rec.at(2).get<int>();
        if (o < 0) throw InvalidInputError("schedule document: negative owner");
        s.owner[pair_index(j2, k, s.p)] = o;
      }
    }
    if (at != owners.size())
      throw InvalidInputError("schedule document: extra owner records");
    // documents carry no workloads; call recompute_workload against a
    // partition before asking for balance numbers
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInputError(std::string("schedule document: ") + e.what());
  }
}

// Re-derives per-worker element-pair costs for a schedule that came from a
// document (documents do not carry workloads).
inline void recompute_workload(Schedule& s, const Partition& part, int workers) {
  if (part.p != s.p)
    throw InvalidInputError("recompute_workload: partition does not match schedule");
  s.workload.assign(static_cast<std::size_t>(workers), 0);
  for (int j = 0; j < s.p; ++j)
    for (int k = j; k < s.p; ++k) {
      const int o = s.owner[pair_index(j, k, s.p)];
      if (o < 0 || o >= workers)
        throw InvalidInputError("recompute_workload: owner out of range");
      s.workload[static_cast<std::size_t>(o)] += element_pair_cost(part, j, k);
    }
}

inline nlohmann::json to_json(const PropertyReport& rep) {
  return {{"coverage", rep.coverage},
          {"pairwise_intersection", rep.pairwise_intersection},
          {"equal_size", rep.equal_size},
          {"equal_responsibility", rep.equal_responsibility},
          {"all_pairs", rep.all_pairs},
          {"all", rep.all()}};
}

inline nlohmann::json to_json(const BalanceReport& rep) {
  return {{"block_pairs", rep.block_pairs},
          {"element_pairs", rep.element_pairs},
          {"total_block_pairs", rep.total_block_pairs},
          {"total_element_pairs", rep.total_element_pairs},
          {"cost_max_over_mean", rep.cost_max_over_mean},
          {"cost_max_over_min", rep.cost_max_over_min},
          {"block_max_over_mean", rep.block_max_over_mean},
          {"block_max_over_min", rep.block_max_over_min}};
}

inline nlohmann::json to_json(const ReplicationStats& rep) {
  return {{"p", rep.p},
          {"k", rep.k},
          {"n", rep.n},
          {"elements_per_worker", rep.elements_per_worker},
          {"max_elements", rep.max_elements},
          {"min_elements", rep.min_elements},
          {"mean_elements", rep.mean_elements},
          {"fraction", rep.fraction},
          {"reduction_vs_full", rep.reduction_vs_full},
          {"atom_baseline", rep.atom_baseline},
          {"force_baseline", rep.force_baseline},
          {"vs_force", rep.vs_force}};
}

inline nlohmann::json run_report_json(const RunReport& rep) {
  nlohmann::json workers = nlohmann::json::array();
  for (const auto& w : rep.per_worker)
    workers.push_back({{"worker", w.worker},
                       {"blocks_held", w.blocks_held},
                       {"elements_held", w.elements_held},
                       {"block_pairs", w.block_pairs},
                       {"element_pairs", w.element_pairs},
                       {"kernel_seconds", w.kernel_seconds}});
  nlohmann::json j{{"kernel", kernel_name(rep.kernel)},
                   {"n", rep.n},
                   {"dim", rep.dim},
                   {"p", rep.p},
                   {"thread_width", rep.thread_width},
                   {"element_pairs_total", rep.element_pairs_total},
                   {"per_worker", workers},
                   {"replication", to_json(rep.replication)}};
  if (rep.matrix)
    j["flagged_entries"] = rep.matrix->flagged_count();
  else
    j["handshake_total"] = rep.handshake_total;
  return j;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInputError(path.string() + ": " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InvalidInputError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace cqpairs
