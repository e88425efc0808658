#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include <gibbsflow/analysis.hpp>

using namespace gibbsflow;
using Catch::Matchers::WithinAbs;

namespace {

MCParams quick_mc(std::uint64_t seed) {
  MCParams mc;
  mc.sweeps = 4000;
  mc.burn_in = 200;
  mc.replicas = 4;
  mc.seed = seed;
  return mc;
}

}  // namespace

TEST_CASE("bad-configuration gap without coupling") {
  auto r = bad_config_gap(Interaction::zero(2), 0, 0.5, 1.0, {}, 2, {2, 4}, quick_mc(1));
  for (const auto& row : r.rows) {
    if (row.method == "mc") {
      CHECK(std::abs(row.gap) < 3 * row.stderr_ + 1e-12);
    } else {
      CHECK(std::abs(row.gap) < 1e-14);
    }
  }
}

TEST_CASE("bad-configuration gap: exact against Monte Carlo") {
  auto r = bad_config_gap(ising_interaction(0.6, 0, 2), 0, 0.7, 1.0, {}, 2, {3, 4}, quick_mc(2));
  int pairs = 0;
  for (std::size_t i = 0; i + 1 < r.rows.size(); ++i) {
    if (r.rows[i].method == "mc" && r.rows[i + 1].method == "exact") {
      const auto& mc = r.rows[i];
      const auto& ex = r.rows[i + 1];
      CHECK(std::abs(mc.plus_mean - ex.plus_mean) < 3 * mc.plus_stderr);
      CHECK(std::abs(mc.minus_mean - ex.minus_mean) < 3 * mc.minus_stderr);
      ++pairs;
    }
  }
  CHECK(pairs == 2);
  std::ostringstream os;
  write_gap_scan_csv(os, r);
  CHECK(os.str().rfind("t,L,annulus,eta,boundary,observable,method,gap,stderr,", 0) == 0);
  CHECK(os.str().find("plus/minus") != std::string::npos);
}

TEST_CASE("evolved conditional probability by brute force") {
  // nu S(t) on a 3x3 box computed with evolve_law, then conditioned.
  Box b = Box::cube(2, 3, Topology::open);
  auto u = ising_interaction(0.8, 0, 2);
  const double t = 0.6;
  auto nu = exact_measure({u, b});
  auto evolved = evolve_law(nu.prob, RateSpec::product(b, 0), t / kRateToKernelTime);
  auto k = single_site_kernel(t, 0);
  std::mt19937_64 g(3);
  for (int i = 0; i < 10; ++i) {
    auto eta = Configuration::from_index(b, g() % 512);
    const Site x = g() % 9;
    const std::uint64_t s = eta.index();
    const std::uint64_t sp = s | (std::uint64_t{1} << x), sm = s & ~(std::uint64_t{1} << x);
    CHECK_THAT(detail::evolved_conditional(nu, k, eta, x), WithinAbs(evolved[sp] / (evolved[sp] + evolved[sm]), 1e-12));
  }
}

TEST_CASE("transition scan bookkeeping") {
  MCParams mc = quick_mc(4);
  mc.sweeps = 400;
  auto r = transition_scan(ising_interaction(1.0, 0, 2), 0, 1.0, {}, {0.05, 3.0}, 2, {4}, mc);
  CHECK(r.metadata.contains("crossover"));
  CHECK_THROWS_AS(transition_scan(ising_interaction(1.0, 0, 2), 0, 1.0, {}, {}, 2, {4}, mc), InvalidArgument);
  CHECK_THROWS_AS(transition_scan(ising_interaction(1.0, 0, 2), 0, 1.0, {}, {1.0, 0.5}, 2, {4}, mc), InvalidArgument);
  GapScanRow row;
  row.gap = 0.5;
  row.stderr_ = 0.05;
  CHECK(gap_significant(row));
  row.stderr_ = 0.2;
  CHECK_FALSE(gap_significant(row));
}

TEST_CASE("cluster horizon") {
  auto same = cluster_horizon(ising_interaction(0.5, 0, 2), ising_interaction(0.5, 0, 2));
  CHECK(same.C == 0.0);
  CHECK(same.C_enum == 0.0);
  CHECK(same.t0 > 0);
  const double t0 = cluster_horizon(ising_interaction(1, 0, 2), Interaction::zero(2)).t0;
  auto is = cluster_horizon(ising_interaction(1, 0, 2), Interaction::zero(2), {t0 / 4, t0 / 2});
  CHECK_THAT(is.C_bound, WithinAbs(4.0, 1e-12));
  CHECK_THAT(is.C_enum, WithinAbs(4.0, 1e-12));
  CHECK(is.t0 > 0);
  CHECK(is.t0 < same.t0);
  REQUIRE(is.per_t.size() == 2);
  CHECK(is.per_t[0].bound < is.per_t[1].bound);
  CHECK_THAT(is.per_t[0].eps_t, WithinAbs(flip_probability(t0 / 4) / (1 - flip_probability(t0 / 4)), 1e-15));
  // At t0 the series ratio a e^{1 - alpha} is exactly 1/2.
  auto at = cluster_horizon(ising_interaction(1, 0, 2), Interaction::zero(2), {is.t0});
  const double ratio = at.connectivity * std::exp(1 - at.per_t[0].alpha_t);
  CHECK_THAT(ratio, WithinAbs(0.5, 1e-9));
  double prev = INFINITY;
  for (double beta : {0.1, 0.5, 1.0, 2.0, 5.0}) {
    const double t0 = cluster_horizon(ising_interaction(beta, 0.2, 3), Interaction::zero(3)).t0;
    CHECK(t0 > 0);
    CHECK(t0 < prev);
    prev = t0;
  }
  CHECK_THROWS_AS(cluster_horizon(Interaction::zero(1), Interaction::zero(2)), InvalidArgument);
}

TEST_CASE("derivative of the evolved measure") {
  Box b({6}, Topology::open);
  // nu = mu: the derivative is mu^x/mu.
  const double eps = 0.3;
  const double hmu = 0.5 * std::log((1 + eps) / (1 - eps));
  auto same = rn_derivative_check(ising_interaction(0, hmu, 1), RateSpec::product(b, eps), 0.4, 2);
  for (std::uint64_t s = 0; s < 64; ++s) {
    const double expect = ((s >> 2) & 1U) ? std::exp(-2 * hmu) : std::exp(2 * hmu);
    CHECK_THAT(same.direct[s], WithinAbs(expect, 1e-12));
  }
  CHECK(same.cluster.empty());

  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  for (int i = 0; i < 20; ++i) {
    Box bx = (i % 2) ? Box({2, 4}, Topology::open) : Box({9}, Topology::open);
    Interaction un(bx.dimension(), {{{Coords(static_cast<std::size_t>(bx.dimension()), 0)}, {u(g), u(g)}}});
    un = un + ising_interaction(u(g), 0, bx.dimension());
    auto r = rn_derivative_check(un, RateSpec::product(bx, std::abs(u(g))), 0.05 + std::abs(u(g)), g() % bx.size());
    CHECK(r.max_ab < 1e-10);
  }

  // Weak coupling: the truncated expansion is accurate at t = 0.05.
  auto weak = [](double beta, double t, int k) {
    return rn_derivative_check(ising_interaction(beta, 0, 1), RateSpec::product(Box({8}, Topology::open), 0), t, 4, k);
  };
  auto c = weak(0.1, 0.05, 3);
  REQUIRE(c.cluster.size() == 256);
  CHECK(c.max_ab < 1e-10);
  CHECK(c.max_ac < 1e-3);
  // The error falls like eps_t^k inside the convergence region.
  double prev = INFINITY;
  for (int k = 1; k <= 5; ++k) {
    const double e = weak(0.5, 0.001, k).max_ac;
    CHECK(e < prev * 0.05);
    prev = e;
  }
}

TEST_CASE("continuity probe") {
  auto rows = continuity_probe(ising_interaction(0.5, 0, 1), 0, 0.02, {4, 6, 8, 10});
  REQUIRE(rows.size() == 4);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].fixed_radius > rows[i - 1].fixed_radius);
    CHECK(rows[i].variation < rows[i - 1].variation);
  }
  // Without interaction the derivative does not depend on anything.
  for (const auto& r : continuity_probe(Interaction::zero(1), 0.2, 0.3, {4, 6})) CHECK(r.variation < 1e-12);
}

TEST_CASE("Dobrushin certificate of the evolved measure") {
  auto a = dobrushin_evolved(ising_interaction(0.2, 0, 2), 0, 1.0, 1.0);
  CHECK_THAT(a.norm, WithinAbs(1.6, 1e-12));
  CHECK(a.satisfied);
  auto b = dobrushin_evolved(ising_interaction(0.3, 0, 2), 0.1, 1.0, 0.5);
  CHECK_THAT(b.norm, WithinAbs(2.4, 1e-12));
  CHECK_FALSE(b.satisfied);
  CHECK_THROWS_AS(dobrushin_evolved(ising_interaction(0.2, 0, 2), 0, 0, 1), InvalidArgument);
}
