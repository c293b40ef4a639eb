#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <vector>

#include "cqpairs/engine.hpp"
#include "cqpairs/json_io.hpp"

using namespace cqpairs;

namespace {

ElementTable random_table(std::size_t n, std::size_t dim, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  ElementTable t{n, dim, {}};
  t.values.resize(n * dim);
  for (double& v : t.values) v = dist(rng);
  return t;
}

// Oracle correlation via raw moments, a different algebraic route than the
// engine's centered two-pass.
double oracle_pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxy += x[i] * y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
  }
  const double cov = sxy - sx * sy / n;
  const double vx = sxx - sx * sx / n;
  const double vy = syy - sy * sy / n;
  return cov / std::sqrt(vx * vy);
}

double oracle_sad(std::span<const double> x, std::span<const double> y) {
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
  return s;
}

// Single-loop brute force over all unordered pairs.
PairMatrix brute_force(const ElementTable& t, KernelKind kernel) {
  PairMatrix m(t.n);
  for (std::size_t x = 0; x < t.n; ++x) m.place(x, x, kernel == KernelKind::Pearson ? 1.0 : 0.0, false);
  for (std::size_t x = 0; x < t.n; ++x)
    for (std::size_t y = x + 1; y < t.n; ++y)
      m.place(x, y,
              kernel == KernelKind::Pearson ? oracle_pearson(t.row(x), t.row(y))
                                            : oracle_sad(t.row(x), t.row(y)),
              false);
  return m;
}

bool close(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

RunReport run_for(const ElementTable& t, int p, KernelKind kernel, int workers,
                  bool record_reads = false,
                  OwnerPolicy policy = OwnerPolicy::Balanced) {
  const QuorumSystem q = generate(search_minimal(p));
  const Schedule s = build_schedule(q, split(t.n, p), policy);
  return run(t, q, s, kernel, {workers, record_reads});
}

}  // namespace

TEST_CASE("pearson kernel") {
  const std::vector<double> a{1, 2, 3}, b{2, 4, 6}, c{3, 2, 1};
  CHECK(pearson(a, b) == Catch::Approx(1.0));
  CHECK(pearson(a, c) == Catch::Approx(-1.0));
  const std::vector<double> d{1, 0, 1, 0}, e{0, 1, 0, 1};
  CHECK(pearson(d, e) == Catch::Approx(-1.0));

  const std::vector<double> flat{2, 2, 2};
  CHECK_THROWS_AS(pearson(a, flat), UndefinedCorrelationError);
  const std::vector<double> one{1};
  CHECK_THROWS_AS(pearson(one, one), InvalidInputError);
  CHECK_THROWS_AS(pearson(a, d), InvalidInputError);
}

TEST_CASE("sum_abs_diff kernel") {
  const std::vector<double> a{1, 2, 3}, b{2, 0, 3};
  CHECK(sum_abs_diff(a, b) == Catch::Approx(3.0));
  CHECK(sum_abs_diff(a, a) == 0.0);
  CHECK_THROWS_AS(sum_abs_diff(a, std::vector<double>{1}), InvalidInputError);
}

TEST_CASE("handshake counts") {
  const ElementTable t{8, 0, {}};
  const RunReport rep = run_for(t, 4, KernelKind::HandshakeCount, 2);
  CHECK(rep.handshake_total == 28);
  CHECK(rep.element_pairs_total == 28);

  const ElementTable big{100, 0, {}};
  CHECK(run_for(big, 7, KernelKind::HandshakeCount, 1).handshake_total == 4950);
}

TEST_CASE("pearson on perfectly linear rows") {
  ElementTable t{3, 3, {1, 2, 3, 2, 4, 6, 3, 2, 1}};
  const RunReport rep = run_for(t, 1, KernelKind::Pearson, 1);
  REQUIRE(rep.matrix.has_value());
  CHECK(rep.matrix->at(0, 1) == Catch::Approx(1.0));
  CHECK(rep.matrix->at(0, 2) == Catch::Approx(-1.0));
  CHECK(rep.matrix->at(1, 2) == Catch::Approx(-1.0));
  CHECK(rep.matrix->at(2, 0) == rep.matrix->at(0, 2));
  CHECK(rep.matrix->at(1, 1) == 1.0);
  CHECK(rep.matrix->flagged_count() == 0);
}

TEST_CASE("distributed results equal the single-loop brute force") {
  const ElementTable t = random_table(60, 5, 20260809);
  for (const KernelKind kernel : {KernelKind::Pearson, KernelKind::SumAbsDiff}) {
    const PairMatrix want = brute_force(t, kernel);
    for (int p : {1, 5, 13}) {
      INFO("kernel=" << kernel_name(kernel) << " p=" << p);
      const RunReport rep = run_for(t, p, kernel, 2);
      REQUIRE(rep.matrix.has_value());
      REQUIRE(rep.matrix->n == want.n);
      for (std::size_t x = 0; x < t.n; ++x)
        for (std::size_t y = 0; y < t.n; ++y) {
          INFO("entry (" << x << "," << y << ")");
          REQUIRE(close(rep.matrix->at(x, y), want.at(x, y)));
        }
      CHECK(rep.element_pairs_total == t.n * (t.n - 1) / 2);
    }
  }
}

TEST_CASE("output is identical across thread widths and runs") {
  const ElementTable t = random_table(50, 4, 7);
  const int p = 7;
  const RunReport base = run_for(t, p, KernelKind::Pearson, 1);
  REQUIRE(base.matrix.has_value());
  for (int workers : {1, 2, p}) {
    const RunReport rep = run_for(t, p, KernelKind::Pearson, workers);
    REQUIRE(rep.matrix.has_value());
    CHECK(rep.matrix->values == base.matrix->values);  // bitwise
    CHECK(rep.matrix->flags == base.matrix->flags);
  }
  const ElementTable counts{64, 0, {}};
  const std::uint64_t h1 = run_for(counts, 13, KernelKind::HandshakeCount, 1).handshake_total;
  const std::uint64_t h2 = run_for(counts, 13, KernelKind::HandshakeCount, 13).handshake_total;
  CHECK(h1 == h2);
}

TEST_CASE("workers read exactly their quorum's blocks") {
  const ElementTable t = random_table(52, 3, 99);
  const int p = 13;
  const QuorumSystem q = generate(search_minimal(p));
  const Partition part = split(t.n, p);
  const Schedule s = build_schedule(q, part, OwnerPolicy::Balanced);
  const RunReport rep = run(t, q, s, KernelKind::SumAbsDiff, {2, true});
  REQUIRE(rep.reads.size() == static_cast<std::size_t>(p));
  for (int w = 0; w < p; ++w) {
    std::vector<std::size_t> quorum_elements;
    for (int b : q.quorums[static_cast<std::size_t>(w)])
      for (std::size_t x = part.block_begin(b); x < part.block_end(b); ++x)
        quorum_elements.push_back(x);
    std::sort(quorum_elements.begin(), quorum_elements.end());
    CHECK(rep.reads[static_cast<std::size_t>(w)] == quorum_elements);
  }
}

TEST_CASE("memory bound and conservation") {
  for (const auto& [n, p] : std::vector<std::pair<std::size_t, int>>{
           {100, 7}, {100, 16}, {64, 13}, {40, 40}}) {
    INFO("n=" << n << " p=" << p);
    const ElementTable t{n, 0, {}};
    const QuorumSystem q = generate(search_minimal(p));
    const RunReport rep =
        run(t, q, build_schedule(q, split(n, p), OwnerPolicy::Balanced),
            KernelKind::HandshakeCount, {2, false});
    const std::uint64_t cap = static_cast<std::uint64_t>(q.base.k()) * ((n + p - 1) / p);
    std::uint64_t pair_sum = 0;
    for (const auto& w : rep.per_worker) {
      CHECK(w.elements_held <= cap);
      pair_sum += w.element_pairs;
    }
    CHECK(pair_sum == static_cast<std::uint64_t>(n) * (n - 1) / 2);
    CHECK(rep.handshake_total == pair_sum);
  }
}

TEST_CASE("constant rows are flagged, never NaN") {
  ElementTable t{4, 3, {1, 2, 3, 5, 5, 5, 2, 1, 0, 5, 5, 5}};
  const RunReport rep = run_for(t, 1, KernelKind::Pearson, 1);
  REQUIRE(rep.matrix.has_value());
  // rows 1 and 3 are constant: every pair touching them is flagged, and the
  // constant-constant pair too
  CHECK(rep.matrix->flagged_at(0, 1));
  CHECK(rep.matrix->flagged_at(1, 2));
  CHECK(rep.matrix->flagged_at(1, 3));
  CHECK(rep.matrix->flagged_at(1, 1));  // definitional diagonal of a constant row
  CHECK_FALSE(rep.matrix->flagged_at(0, 2));
  for (double v : rep.matrix->values) CHECK(std::isfinite(v));
  CHECK(rep.matrix->at(0, 1) == 0.0);
}

TEST_CASE("configuration errors") {
  const ElementTable counts{30, 0, {}};
  const ElementTable narrow = random_table(30, 1, 5);
  const QuorumSystem q = generate(search_minimal(5));
  const Schedule s = build_schedule(q, split(30, 5), OwnerPolicy::Balanced);

  CHECK_THROWS_AS(run(counts, q, s, KernelKind::Pearson, {1, false}), ConfigError);
  CHECK_THROWS_AS(run(counts, q, s, KernelKind::SumAbsDiff, {1, false}), ConfigError);
  CHECK_THROWS_AS(run(narrow, q, s, KernelKind::Pearson, {1, false}), ConfigError);

  const QuorumSystem other = generate(search_minimal(4));
  CHECK_THROWS_AS(run(counts, other, s, KernelKind::HandshakeCount, {1, false}), ConfigError);

  const ElementTable tiny{3, 0, {}};
  CHECK_THROWS_AS(run(tiny, q, s, KernelKind::HandshakeCount, {1, false}), ConfigError);

  CHECK_THROWS_AS(run(counts, q, s, KernelKind::HandshakeCount, {0, false}), ConfigError);

  // infeasible schedule: owner that does not hold the pair's blocks
  Schedule bad = s;
  bad.owner[pair_index(0, 0, 5)] = 2;  // quorum 2 does not contain block 0
  CHECK_THROWS_AS(run(counts, q, bad, KernelKind::HandshakeCount, {1, false}), ConfigError);
}

TEST_CASE("imported schedule documents run directly") {
  const QuorumSystem q = generate(search_minimal(7));
  const Partition part = split(49, 7);
  const Schedule built = build_schedule(q, part, OwnerPolicy::Balanced);
  const Schedule imported = schedule_from_json(to_json(built));

  // no workloads in the document: balance needs them, run does not
  CHECK_THROWS_AS(balance_report(imported), InvalidInputError);
  const ElementTable t{49, 0, {}};
  CHECK(run(t, q, imported, KernelKind::HandshakeCount, {2, false}).handshake_total == 1176);
}

TEST_CASE("replication accounting") {
  SECTION("p=16, n=1600: the paper's 16-process shape") {
    const QuorumSystem q = generate(search_minimal(16));
    const ReplicationStats rep = replication_report(q, split(1600, 16));
    CHECK(rep.k == 5);
    for (std::uint64_t held : rep.elements_per_worker) CHECK(held == 500);
    CHECK(rep.fraction == 0.3125);  // exactly 5/16
    CHECK(rep.reduction_vs_full == Catch::Approx(0.6875));
    CHECK(rep.atom_baseline == Catch::Approx(100.0));
  }
  SECTION("p=1 holds everything") {
    const QuorumSystem q = generate(search_minimal(1));
    const ReplicationStats rep = replication_report(q, split(9, 1));
    CHECK(rep.fraction == 1.0);
    CHECK(rep.max_elements == 9);
  }
  SECTION("p=7, n=700 against the dual-array baseline") {
    const QuorumSystem q = generate(search_minimal(7));
    const ReplicationStats rep = replication_report(q, split(700, 7));
    CHECK(rep.max_elements == 300);
    CHECK(rep.force_baseline == Catch::Approx(2.0 * 700.0 / std::sqrt(7.0)));
    CHECK(rep.vs_force < 0.60);  // ~43% fewer elements than two N/sqrt(P) arrays
  }
}

TEST_CASE("result export formats") {
  SECTION("dense result round-trips through the binary-matrix reader") {
    const ElementTable t = random_table(12, 4, 3);
    const RunReport rep = run_for(t, 3, KernelKind::SumAbsDiff, 1);
    std::ostringstream out(std::ios::binary);
    write_result(out, rep);
    std::istringstream in(out.str(), std::ios::binary);
    const ElementTable back = ingest_binary(in);
    CHECK(back.n == 12);
    CHECK(back.dim == 12);
    CHECK(back.values == rep.matrix->values);
  }
  SECTION("scalar result is decimal text") {
    const ElementTable t{10, 0, {}};
    const RunReport rep = run_for(t, 4, KernelKind::HandshakeCount, 1);
    std::ostringstream out;
    write_result(out, rep);
    CHECK(out.str() == "45\n");
  }
}

TEST_CASE("run report JSON shape") {
  const ElementTable t = random_table(30, 3, 11);
  const RunReport rep = run_for(t, 5, KernelKind::SumAbsDiff, 2);
  const nlohmann::json j = run_report_json(rep);
  CHECK(j.at("kernel") == "sum-abs-diff");
  CHECK(j.at("n") == 30);
  CHECK(j.at("p") == 5);
  CHECK(j.at("per_worker").size() == 5);
  CHECK(j.at("element_pairs_total") == 435);
  CHECK(j.at("replication").at("fraction") == Catch::Approx(3.0 / 5.0));
}
