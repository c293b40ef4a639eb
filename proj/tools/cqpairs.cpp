// cqpairs: search/generate/verify/schedule/run/bench for cyclic-quorum
// all-pairs computation. Subcommands compose through files:
//   search -> gen -> schedule -> run
// Exit status: 0 success, 1 verification/assertion failure, 2 usage or
// input error.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cqpairs/diffset.hpp"
#include "cqpairs/engine.hpp"
#include "cqpairs/json_io.hpp"
#include "cqpairs/partition.hpp"
#include "cqpairs/quorum.hpp"
#include "cqpairs/schedule.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerification = 1;
constexpr int kExitUsage = 2;

std::string format_set(const std::vector<int>& elems) {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < elems.size(); ++i) {
    if (i) os << ',';
    os << elems[i];
  }
  os << '}';
  return os.str();
}

std::optional<std::filesystem::path> cache_path(const std::string& flag) {
  if (!flag.empty()) return std::filesystem::path(flag);
  if (const char* env = std::getenv("CQPAIRS_CACHE"); env && *env)
    return std::filesystem::path(env);
  return std::nullopt;
}

struct SearchFlags {
  int p = 0;
  std::uint64_t budget = 0;
  bool budget_set = false;
  std::string cache;
  bool fallback = false;
};

cqpairs::DifferenceSet obtain_set(const SearchFlags& f) {
  std::optional<std::uint64_t> budget;
  if (f.budget_set) budget = f.budget;
  try {
    if (auto path = cache_path(f.cache)) {
      cqpairs::DiffsetCache cache(*path);
      return cqpairs::search_minimal_cached(f.p, cache, budget);
    }
    return cqpairs::search_minimal(f.p, budget);
  } catch (const cqpairs::BudgetExceededError& e) {
    if (!f.fallback) throw;
    std::cerr << "warning: " << e.what()
              << "; using the consecutive fallback set, which is NOT minimal\n";
    return cqpairs::fallback_consecutive(f.p);
  }
}

void add_search_flags(CLI::App* cmd, SearchFlags& f, CLI::Option*& budget_opt) {
  cmd->add_option("--p", f.p, "number of blocks/workers")
      ->required()
      ->check(CLI::PositiveNumber);
  budget_opt = cmd->add_option("--budget", f.budget, "search step limit");
  cmd->add_option("--cache", f.cache,
                  "difference-set cache file (or set CQPAIRS_CACHE)");
  cmd->add_flag("--fallback", f.fallback,
                "fall back to the consecutive set when the budget runs out");
}

cqpairs::QuorumSystem system_for(const SearchFlags& f, const std::string& quorums_file) {
  if (!quorums_file.empty()) {
    auto q = cqpairs::quorum_from_json(cqpairs::read_json_file(quorums_file));
    if (f.p != 0 && q.p != f.p)
      throw cqpairs::ConfigError("--p " + std::to_string(f.p) + " does not match p=" +
                                 std::to_string(q.p) + " from " + quorums_file);
    return q;
  }
  return cqpairs::generate(obtain_set(f));
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cyclic-quorum all-pairs toolkit"};
  app.require_subcommand(1);
  int exit_code = kExitOk;

  // --- search ---------------------------------------------------------
  SearchFlags search_flags;
  CLI::Option* search_budget_opt = nullptr;
  std::string search_out;
  auto* search = app.add_subcommand("search", "find a minimal relaxed difference set");
  add_search_flags(search, search_flags, search_budget_opt);
  search->add_option("--out", search_out, "write the set as JSON");
  search->callback([&] {
    search_flags.budget_set = search_budget_opt->count() > 0;
    const auto ds = obtain_set(search_flags);
    const int lb = cqpairs::minimal_k_lower_bound(ds.p);
    std::cout << "p=" << ds.p << " k=" << ds.k() << " set=" << format_set(ds.elements)
              << " lower_bound=" << lb << " optimal=" << (ds.k() == lb ? "yes" : "no")
              << "\n";
    if (!search_out.empty()) cqpairs::write_json_file(search_out, cqpairs::to_json(ds));
  });

  // --- gen ------------------------------------------------------------
  SearchFlags gen_flags;
  CLI::Option* gen_budget_opt = nullptr;
  std::string gen_set, gen_out;
  auto* gen = app.add_subcommand("gen", "generate a cyclic quorum system");
  add_search_flags(gen, gen_flags, gen_budget_opt);
  gen->add_option("--set", gen_set, "use this base set (comma-separated) instead of searching");
  gen->add_option("--out", gen_out, "write the quorum system as JSON");
  gen->callback([&] {
    gen_flags.budget_set = gen_budget_opt->count() > 0;
    cqpairs::DifferenceSet base;
    if (!gen_set.empty()) {
      base.p = gen_flags.p;
      std::stringstream ss(gen_set);
      std::string tok;
      while (std::getline(ss, tok, ','))
        base.elements.push_back(std::stoi(tok));
      std::sort(base.elements.begin(), base.elements.end());
    } else {
      base = obtain_set(gen_flags);
    }
    const auto q = cqpairs::generate(base);
    const auto rep = cqpairs::verify_quorum_properties(q);
    std::cout << "p=" << q.p << " k=" << base.k() << " quorums=" << q.workers()
              << " all_pairs=" << (rep.all_pairs ? "yes" : "no")
              << " properties=" << (rep.all() ? "ok" : "VIOLATED") << "\n";
    if (!gen_out.empty()) cqpairs::write_json_file(gen_out, cqpairs::to_json(q));
    if (!rep.all()) exit_code = kExitVerification;
  });

  // --- verify ---------------------------------------------------------
  std::string verify_quorums, verify_out;
  auto* verify = app.add_subcommand("verify", "check quorum properties and all-pairs coverage");
  verify->add_option("--quorums", verify_quorums, "quorum system JSON")->required();
  verify->add_option("--out", verify_out, "write the property report as JSON");
  verify->callback([&] {
    const auto q = cqpairs::quorum_from_json(cqpairs::read_json_file(verify_quorums));
    const auto rep = cqpairs::verify_quorum_properties(q);
    const auto ap = cqpairs::verify_all_pairs(q);
    std::cout << "coverage=" << (rep.coverage ? "ok" : "FAIL")
              << " pairwise_intersection=" << (rep.pairwise_intersection ? "ok" : "FAIL")
              << " equal_size=" << (rep.equal_size ? "ok" : "FAIL")
              << " equal_responsibility=" << (rep.equal_responsibility ? "ok" : "FAIL")
              << " all_pairs=" << (rep.all_pairs ? "ok" : "FAIL") << "\n";
    if (ap.counterexample)  // blocks are labeled D_1..D_P on output, 0-based in files
      std::cout << "uncovered pair: (D_" << ap.counterexample->first + 1 << ",D_"
                << ap.counterexample->second + 1 << ")\n";
    if (!verify_out.empty()) {
      auto j = cqpairs::to_json(rep);
      if (ap.counterexample)
        j["counterexample"] = {ap.counterexample->first, ap.counterexample->second};
      cqpairs::write_json_file(verify_out, j);
    }
    if (!rep.all()) exit_code = kExitVerification;
  });

  // --- schedule -------------------------------------------------------
  std::string sched_quorums, sched_out, sched_policy = "balanced";
  std::size_t sched_n = 0;
  auto* sched = app.add_subcommand("schedule", "assign block pairs to workers");
  sched->add_option("--quorums", sched_quorums, "quorum system JSON")->required();
  sched->add_option("--n", sched_n, "element count for the cost model")
      ->required()
      ->check(CLI::PositiveNumber);
  sched->add_option("--policy", sched_policy, "ownership policy")
      ->check(CLI::IsMember({"first-witness", "balanced"}));
  sched->add_option("--out", sched_out, "write the schedule as JSON");
  sched->callback([&] {
    const auto q = cqpairs::quorum_from_json(cqpairs::read_json_file(sched_quorums));
    const auto part = cqpairs::split(sched_n, q.p);
    const auto s = cqpairs::build_schedule(q, part, *cqpairs::parse_policy(sched_policy));
    const auto bal = cqpairs::balance_report(s);
    std::cout << "p=" << s.p << " policy=" << cqpairs::to_string(s.policy)
              << " block_pairs=" << bal.total_block_pairs
              << " element_pairs=" << bal.total_element_pairs
              << " cost_max_over_mean=" << bal.cost_max_over_mean << "\n";
    if (!sched_out.empty()) cqpairs::write_json_file(sched_out, cqpairs::to_json(s));
  });

  // --- run --------------------------------------------------------------
  SearchFlags run_flags;
  CLI::Option* run_budget_opt = nullptr;
  std::string run_input, run_format = "csv", run_kernel = "handshake-count";
  std::string run_policy = "balanced", run_out, run_report, run_quorums, run_schedule;
  int run_workers = 1;
  auto* runc = app.add_subcommand("run", "execute an all-pairs kernel");
  runc->add_option("--input", run_input, "element data file")->required();
  runc->add_option("--format", run_format, "input format")
      ->check(CLI::IsMember({"csv", "bin", "count"}));
  runc->add_option("--p", run_flags.p, "number of blocks/workers")->check(CLI::PositiveNumber);
  runc->add_option("--kernel", run_kernel, "all-pairs kernel")
      ->check(CLI::IsMember({"handshake-count", "pearson-correlation", "sum-abs-diff"}));
  runc->add_option("--workers", run_workers, "thread width")->check(CLI::PositiveNumber);
  runc->add_option("--policy", run_policy, "ownership policy")
      ->check(CLI::IsMember({"first-witness", "balanced"}));
  runc->add_option("--quorums", run_quorums, "use this quorum system JSON instead of searching");
  runc->add_option("--schedule", run_schedule, "use this schedule JSON (needs --quorums)");
  run_budget_opt = runc->add_option("--budget", run_flags.budget, "search step limit");
  runc->add_option("--cache", run_flags.cache, "difference-set cache file");
  runc->add_flag("--fallback", run_flags.fallback, "consecutive set when budget runs out");
  runc->add_option("--out", run_out, "write the kernel result (binary matrix / decimal text)");
  runc->add_option("--report", run_report, "write the run report as JSON");
  runc->callback([&] {
    run_flags.budget_set = run_budget_opt->count() > 0;
    if (!run_schedule.empty() && run_quorums.empty())
      throw cqpairs::ConfigError("--schedule requires --quorums");
    if (run_quorums.empty() && run_flags.p == 0)
      throw cqpairs::ConfigError("run needs --p or --quorums");
    const auto table = cqpairs::ingest(run_input, *cqpairs::parse_table_format(run_format));
    const auto q = system_for(run_flags, run_quorums);
    const auto part = cqpairs::split(table.n, q.p);
    cqpairs::Schedule s;
    if (!run_schedule.empty()) {
      s = cqpairs::schedule_from_json(cqpairs::read_json_file(run_schedule));
      if (s.p != q.p)
        throw cqpairs::ConfigError("schedule p does not match quorum system p");
      cqpairs::recompute_workload(s, part, q.workers());
    } else {
      s = cqpairs::build_schedule(q, part, *cqpairs::parse_policy(run_policy));
    }
    const auto rep =
        cqpairs::run(table, q, s, *cqpairs::parse_kernel(run_kernel), {run_workers, false});
    std::cout << "kernel=" << cqpairs::kernel_name(rep.kernel) << " n=" << rep.n
              << " p=" << rep.p << " threads=" << rep.thread_width << "\n";
    std::cout << "pairs=" << rep.element_pairs_total << "\n";
    if (rep.matrix) std::cout << "flagged=" << rep.matrix->flagged_count() << "\n";
    std::cout << "replication_fraction=" << rep.replication.fraction
              << " max_elements=" << rep.replication.max_elements << "\n";
    if (!run_out.empty()) cqpairs::write_result(std::filesystem::path(run_out), rep);
    if (!run_report.empty())
      cqpairs::write_json_file(run_report, cqpairs::run_report_json(rep));
  });

  // --- bench ------------------------------------------------------------
  SearchFlags bench_flags;
  CLI::Option* bench_budget_opt = nullptr;
  std::string bench_input, bench_format = "csv", bench_kernel = "pearson-correlation";
  std::string bench_policy = "balanced", bench_workers_list = "1,2,4", bench_out;
  int bench_repeats = 3;
  auto* bench = app.add_subcommand("bench", "time the same run across thread widths");
  bench->add_option("--input", bench_input, "element data file")->required();
  bench->add_option("--format", bench_format, "input format")
      ->check(CLI::IsMember({"csv", "bin", "count"}));
  bench->add_option("--p", bench_flags.p, "number of blocks/workers")
      ->required()
      ->check(CLI::PositiveNumber);
  bench->add_option("--kernel", bench_kernel, "all-pairs kernel")
      ->check(CLI::IsMember({"handshake-count", "pearson-correlation", "sum-abs-diff"}));
  bench->add_option("--workers-list", bench_workers_list, "comma-separated thread widths");
  bench->add_option("--repeats", bench_repeats, "runs per width (median reported)")
      ->check(CLI::PositiveNumber);
  bench->add_option("--policy", bench_policy, "ownership policy")
      ->check(CLI::IsMember({"first-witness", "balanced"}));
  bench_budget_opt = bench->add_option("--budget", bench_flags.budget, "search step limit");
  bench->add_option("--cache", bench_flags.cache, "difference-set cache file");
  bench->add_flag("--fallback", bench_flags.fallback, "consecutive set when budget runs out");
  bench->add_option("--out", bench_out, "write the timing table as JSON");
  bench->callback([&] {
    bench_flags.budget_set = bench_budget_opt->count() > 0;
    std::vector<int> widths;
    std::stringstream ss(bench_workers_list);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      const int w = std::stoi(tok);
      if (w < 1) throw cqpairs::ConfigError("--workers-list entries must be >= 1");
      widths.push_back(w);
    }
    if (widths.empty()) throw cqpairs::ConfigError("--workers-list is empty");
    const auto table = cqpairs::ingest(bench_input, *cqpairs::parse_table_format(bench_format));
    const auto q = cqpairs::generate(obtain_set(bench_flags));
    const auto part = cqpairs::split(table.n, q.p);
    const auto s = cqpairs::build_schedule(q, part, *cqpairs::parse_policy(bench_policy));
    const auto kernel = *cqpairs::parse_kernel(bench_kernel);

    nlohmann::json rows = nlohmann::json::array();
    double fraction = 0;
    for (int w : widths) {
      std::vector<double> times;
      for (int r = 0; r < bench_repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto rep = cqpairs::run(table, q, s, kernel, {w, false});
        times.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        fraction = rep.replication.fraction;
      }
      const double med = median(times);
      std::cout << "workers=" << w << " median_seconds=" << med
                << " fraction=" << fraction << "\n";
      rows.push_back({{"workers", w}, {"median_seconds", med}, {"runs", times}});
    }
    if (!bench_out.empty())
      cqpairs::write_json_file(bench_out,
                               {{"kernel", bench_kernel},
                                {"n", table.n},
                                {"p", q.p},
                                {"k", q.base.k()},
                                {"repeats", bench_repeats},
                                {"policy", bench_policy},
                                {"fraction", fraction},
                                {"rows", rows}});
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return kExitUsage;
  } catch (const cqpairs::BudgetExceededError& e) {
    std::cerr << "error: " << e.what()
              << " (raise --budget or pass --fallback for a non-minimal set)\n";
    return kExitVerification;
  } catch (const cqpairs::AllPairsError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitVerification;
  } catch (const cqpairs::InvalidInputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const cqpairs::IngestError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const cqpairs::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const cqpairs::CacheError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const cqpairs::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitVerification;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return exit_code;
}
