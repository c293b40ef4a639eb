#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "cqpairs/errors.hpp"
#include "cqpairs/partition.hpp"
#include "cqpairs/quorum.hpp"
#include "cqpairs/schedule.hpp"

namespace cqpairs {

// handshake-count      emits 1 per element pair, reduction = ordered sum
// pearson-correlation  emits a correlation per pair into an n x n symmetric
//                      result, reduction = disjoint placement
// sum-abs-diff         emits sum_f |x_f - y_f| per pair, disjoint placement
enum class KernelKind { HandshakeCount, Pearson, SumAbsDiff };

inline const char* kernel_name(KernelKind k) {
  switch (k) {
    case KernelKind::HandshakeCount: return "handshake-count";
    case KernelKind::Pearson: return "pearson-correlation";
    case KernelKind::SumAbsDiff: return "sum-abs-diff";
  }
  return "?";
}

inline std::optional<KernelKind> parse_kernel(std::string_view s) {
  if (s == "handshake-count") return KernelKind::HandshakeCount;
  if (s == "pearson-correlation") return KernelKind::Pearson;
  if (s == "sum-abs-diff") return KernelKind::SumAbsDiff;
  return std::nullopt;
}

inline bool kernel_needs_values(KernelKind k) { return k != KernelKind::HandshakeCount; }

namespace detail {

// nullopt when either row is constant (zero variance)
inline std::optional<double> pearson_or_nullopt(std::span<const double> x,
                                                std::span<const double> y) {
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace detail

// Sample Pearson correlation, in [-1,1] up to floating error. Throws
// UndefinedCorrelationError for a constant row; the engine flags such
// entries instead of crashing.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw InvalidInputError("pearson: rows must have equal length >= 2");
  const auto r = detail::pearson_or_nullopt(x, y);
  if (!r) throw UndefinedCorrelationError("pearson: correlation undefined for a constant row");
  return *r;
}

inline double sum_abs_diff(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty())
    throw InvalidInputError("sum_abs_diff: rows must have equal nonzero length");
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
  return s;
}

// Dense symmetric n x n kernel output. Every off-diagonal entry is written
// exactly once by the pair's owner (disjoint placement, so worker
// interleaving cannot change the result). Undefined entries hold 0.0 with
// the flag set; the matrix never carries NaN or Inf. Diagonal entries are
// definitional (self-correlation 1, self-distance 0), not computed pairs.
struct PairMatrix {
  std::size_t n = 0;
  std::vector<double> values;        // row-major n*n
  std::vector<std::uint8_t> flags;   // 1 = undefined entry

  explicit PairMatrix(std::size_t size = 0)
      : n(size), values(size * size, 0.0), flags(size * size, 0) {}

  double at(std::size_t x, std::size_t y) const { return values[x * n + y]; }
  bool flagged_at(std::size_t x, std::size_t y) const { return flags[x * n + y] != 0; }

  void place(std::size_t x, std::size_t y, double v, bool flag) {
    const double stored = flag ? 0.0 : v;
    values[x * n + y] = stored;
    values[y * n + x] = stored;
    flags[x * n + y] = flag ? 1 : 0;
    flags[y * n + x] = flag ? 1 : 0;
  }

  std::uint64_t flagged_count() const {
    std::uint64_t c = 0;
    for (std::uint8_t f : flags) c += f;
    return c;
  }
};

struct ReplicationStats {
  int p = 0;
  int k = 0;  // quorum size (largest, when sizes differ)
  std::uint64_t n = 0;
  std::vector<std::uint64_t> elements_per_worker;
  std::uint64_t max_elements = 0;
  std::uint64_t min_elements = 0;
  double mean_elements = 0;
  double fraction = 0;           // k/p share of the global dataset
  double reduction_vs_full = 0;  // 1 - k/p
  double atom_baseline = 0;      // n/p elements per process, full communication
  double force_baseline = 0;     // 2n/sqrt(p) elements, dual-array scheme
  double vs_force = 0;           // max_elements / force_baseline
};

// Memory accounting: how much of the dataset each worker materializes under
// the quorum placement, against the full-replication, atom (n/p), and
// force-decomposition (2n/sqrt p) comparators.
inline ReplicationStats replication_report(const QuorumSystem& q, const Partition& part) {
  if (part.p != q.p)
    throw ConfigError("replication_report: partition p=" + std::to_string(part.p) +
                      " does not match quorum system p=" + std::to_string(q.p));
  detail::check_system(q);
  ReplicationStats rep;
  rep.p = q.p;
  rep.n = part.n();
  for (const auto& s : q.quorums) {
    std::uint64_t held = 0;
    for (int b : s) held += part.block_size(b);
    rep.elements_per_worker.push_back(held);
    rep.k = std::max(rep.k, static_cast<int>(s.size()));
  }
  if (!q.base.elements.empty()) rep.k = q.base.k();
  if (rep.elements_per_worker.empty())
    throw ConfigError("replication_report: system has no quorums");
  rep.max_elements =
      *std::max_element(rep.elements_per_worker.begin(), rep.elements_per_worker.end());
  rep.min_elements =
      *std::min_element(rep.elements_per_worker.begin(), rep.elements_per_worker.end());
  double total = 0;
  for (std::uint64_t e : rep.elements_per_worker) total += static_cast<double>(e);
  rep.mean_elements = total / static_cast<double>(rep.elements_per_worker.size());
  rep.fraction = static_cast<double>(rep.k) / static_cast<double>(rep.p);
  rep.reduction_vs_full = 1.0 - rep.fraction;
  rep.atom_baseline = static_cast<double>(rep.n) / static_cast<double>(rep.p);
  rep.force_baseline = 2.0 * static_cast<double>(rep.n) / std::sqrt(static_cast<double>(rep.p));
  rep.vs_force = static_cast<double>(rep.max_elements) / rep.force_baseline;
  return rep;
}

struct WorkerStats {
  int worker = 0;
  std::uint64_t blocks_held = 0;
  std::uint64_t elements_held = 0;
  std::uint64_t block_pairs = 0;
  std::uint64_t element_pairs = 0;
  double kernel_seconds = 0;
};

struct RunOptions {
  int workers = 1;           // thread width; logical workers stay one per quorum
  bool record_reads = false; // log each worker's materialized element indices
};

struct RunReport {
  KernelKind kernel = KernelKind::HandshakeCount;
  std::size_t n = 0;
  std::size_t dim = 0;
  int p = 0;
  int thread_width = 1;
  std::uint64_t element_pairs_total = 0;
  std::uint64_t handshake_total = 0;        // scalar kernel result
  std::optional<PairMatrix> matrix;         // dense kernel result
  std::vector<WorkerStats> per_worker;
  std::vector<std::vector<std::size_t>> reads;  // per worker, sorted, if recorded
  ReplicationStats replication;
};

namespace detail {

// One logical worker's private copy of its quorum's blocks. Rows are looked
// up through the block offset table; an index outside the quorum has no
// offset and is a hard error, which is what keeps workers shared-nothing.
struct WorkerStore {
  std::vector<double> rows;                 // contiguous block copies
  std::vector<std::ptrdiff_t> block_offset; // per block, -1 = not held
  const Partition* part = nullptr;
  std::size_t dim = 0;

  const double* row(std::size_t x) const {
    const int b = part->block_of(x);
    const std::ptrdiff_t off = block_offset[static_cast<std::size_t>(b)];
    if (off < 0) throw Error("worker read outside its quorum: element " + std::to_string(x));
    const std::size_t local = static_cast<std::size_t>(off) + (x - part->block_begin(b));
    return rows.data() + local * dim;
  }
};

}  // namespace detail

// Executes the kernel over every owned block pair on p shared-nothing
// logical workers, spread across opt.workers threads. Each worker first
// copies exactly the blocks of its quorum out of the shared table and then
// computes from those copies alone. The merged result is bit-identical for
// any thread width and interleaving.
inline RunReport run(const ElementTable& table, const QuorumSystem& q, const Schedule& s,
                     KernelKind kernel, RunOptions opt = {}) {
  detail::check_system(q);
  if (s.p != q.p)
    throw ConfigError("run: schedule p=" + std::to_string(s.p) +
                      " does not match quorum system p=" + std::to_string(q.p));
  if (table.n < static_cast<std::size_t>(q.p))
    throw ConfigError("run: table has n=" + std::to_string(table.n) +
                      " elements but p=" + std::to_string(q.p));
  if (kernel_needs_values(kernel) && !table.has_values())
    throw ConfigError(std::string("run: kernel ") + kernel_name(kernel) +
                      " needs element values but the table is index-only");
  if (kernel == KernelKind::Pearson && table.dim < 2)
    throw ConfigError("run: pearson-correlation needs dim >= 2");
  if (opt.workers < 1) throw ConfigError("run: workers must be >= 1");
  if (s.owner.size() != pair_count(q.p))
    throw ConfigError("run: schedule shape does not match the quorum system");

  const Partition part = split(table.n, q.p);
  const auto member = detail::membership(q);
  const int nworkers = q.workers();

  // feasibility: every pair's owner must hold both blocks
  std::vector<std::vector<std::pair<int, int>>> owned(static_cast<std::size_t>(nworkers));
  for (int j = 0; j < q.p; ++j) {
    for (int k = j; k < q.p; ++k) {
      const int o = s.owner[pair_index(j, k, q.p)];
      if (o < 0 || o >= nworkers)
        throw ConfigError("run: pair (" + std::to_string(j) + "," + std::to_string(k) +
                          ") has no valid owner");
      if (!member[static_cast<std::size_t>(o)][static_cast<std::size_t>(j)] ||
          !member[static_cast<std::size_t>(o)][static_cast<std::size_t>(k)])
        throw ConfigError("run: schedule infeasible, worker " + std::to_string(o) +
                          " does not hold blocks of pair (" + std::to_string(j) + "," +
                          std::to_string(k) + ")");
      owned[static_cast<std::size_t>(o)].emplace_back(j, k);
    }
  }

  RunReport rep;
  rep.kernel = kernel;
  rep.n = table.n;
  rep.dim = table.dim;
  rep.p = q.p;
  rep.thread_width = std::min<int>(opt.workers, nworkers);
  rep.per_worker.assign(static_cast<std::size_t>(nworkers), {});
  if (opt.record_reads) rep.reads.assign(static_cast<std::size_t>(nworkers), {});

  std::vector<std::uint64_t> counts(static_cast<std::size_t>(nworkers), 0);
  if (kernel_needs_values(kernel)) {
    rep.matrix.emplace(table.n);
    // definitional diagonal, written once before workers start
    for (std::size_t x = 0; x < table.n; ++x) {
      if (kernel == KernelKind::Pearson) {
        bool constant = true;
        const auto row = table.row(x);
        for (std::size_t f = 1; f < table.dim; ++f)
          if (row[f] != row[0]) {
            constant = false;
            break;
          }
        rep.matrix->place(x, x, 1.0, constant);
      } else {
        rep.matrix->place(x, x, 0.0, false);
      }
    }
  }

  const auto worker_body = [&](int w) {
    const auto& quorum = q.quorums[static_cast<std::size_t>(w)];
    WorkerStats& stats = rep.per_worker[static_cast<std::size_t>(w)];
    stats.worker = w;
    stats.blocks_held = quorum.size();

    detail::WorkerStore store;
    store.part = &part;
    store.dim = table.dim;
    store.block_offset.assign(static_cast<std::size_t>(q.p), -1);
    std::vector<std::size_t>* reads = opt.record_reads ? &rep.reads[static_cast<std::size_t>(w)] : nullptr;
    for (int b : quorum) {
      store.block_offset[static_cast<std::size_t>(b)] =
          static_cast<std::ptrdiff_t>(store.rows.size() / std::max<std::size_t>(table.dim, 1));
      for (std::size_t x = part.block_begin(b); x < part.block_end(b); ++x) {
        if (table.has_values()) {
          const auto row = table.row(x);
          store.rows.insert(store.rows.end(), row.begin(), row.end());
        }
        if (reads) reads->push_back(x);
        ++stats.elements_held;
      }
    }
    if (reads) std::sort(reads->begin(), reads->end());

    const auto emit = [&](std::size_t x, std::size_t y) {
      ++stats.element_pairs;
      switch (kernel) {
        case KernelKind::HandshakeCount:
          ++counts[static_cast<std::size_t>(w)];
          break;
        case KernelKind::Pearson: {
          const auto r = detail::pearson_or_nullopt({store.row(x), table.dim},
                                                    {store.row(y), table.dim});
          rep.matrix->place(x, y, r.value_or(0.0), !r.has_value());
          break;
        }
        case KernelKind::SumAbsDiff:
          rep.matrix->place(x, y,
                            sum_abs_diff({store.row(x), table.dim}, {store.row(y), table.dim}),
                            false);
          break;
      }
    };

    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& [j, k] : owned[static_cast<std::size_t>(w)]) {
      ++stats.block_pairs;
      if (j == k) {
        for (std::size_t x = part.block_begin(j); x < part.block_end(j); ++x)
          for (std::size_t y = x + 1; y < part.block_end(j); ++y) emit(x, y);
      } else {
        // blocks are contiguous and j < k, so x < y always holds
        for (std::size_t x = part.block_begin(j); x < part.block_end(j); ++x)
          for (std::size_t y = part.block_begin(k); y < part.block_end(k); ++y) emit(x, y);
      }
    }
    stats.kernel_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  if (rep.thread_width <= 1) {
    for (int w = 0; w < nworkers; ++w) worker_body(w);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(rep.thread_width));
    for (int t = 0; t < rep.thread_width; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (int w = next.fetch_add(1); w < nworkers; w = next.fetch_add(1)) worker_body(w);
        } catch (...) {
          errors[static_cast<std::size_t>(t)] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  // ordered reduction by worker index
  for (int w = 0; w < nworkers; ++w) {
    rep.handshake_total += counts[static_cast<std::size_t>(w)];
    rep.element_pairs_total += rep.per_worker[static_cast<std::size_t>(w)].element_pairs;
  }
  rep.replication = replication_report(q, part);
  return rep;
}

// Numeric kernels export the dense matrix in the binary-matrix layout the
// partition module ingests; the scalar kernel exports decimal text.
inline void write_result(std::ostream& out, const RunReport& rep) {
  if (rep.matrix)
    write_binary_matrix(out, rep.matrix->n, rep.matrix->n, rep.matrix->values);
  else
    out << rep.handshake_total << '\n';
}

inline void write_result(const std::filesystem::path& path, const RunReport& rep) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestError("cannot write " + path.string());
  write_result(out, rep);
}

}  // namespace cqpairs
