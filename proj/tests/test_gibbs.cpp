#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include <gibbsflow/gibbs.hpp>

using namespace gibbsflow;
using Catch::Matchers::WithinAbs;

namespace {

// Boltzmann table of the nearest-neighbour Ising model on a torus, summing
// bonds by hand.
std::vector<double> torus_ising_oracle(const Box& b, double beta, double h) {
  const std::size_t n = b.size();
  std::vector<double> w(std::size_t{1} << n);
  double z = 0;
  for (std::uint64_t s = 0; s < w.size(); ++s) {
    auto spin = [&](Site x) { return ((s >> x) & 1U) ? 1.0 : -1.0; };
    double e = 0;
    for (Site x = 0; x < n; ++x) {
      e -= h * spin(x);
      Coords c = b.coords(x);
      for (int k = 0; k < b.dimension(); ++k) {
        Coords c2 = c;
        c2[static_cast<std::size_t>(k)] = (c2[static_cast<std::size_t>(k)] + 1) % b.extent(k);
        e -= beta * spin(x) * spin(b.index(c2));
      }
    }
    w[s] = std::exp(-e);
    z += w[s];
  }
  for (double& v : w) v /= z;
  return w;
}

}  // namespace

TEST_CASE("exact measure basics") {
  Box b({3}, Topology::open);
  auto m = exact_measure({Interaction::zero(1), b});
  for (double p : m.prob) CHECK_THAT(p, WithinAbs(0.125, 1e-15));

  Box one({1}, Topology::open);
  const double h = 0.37;
  auto s = exact_measure({ising_interaction(0, h, 1), one});
  CHECK_THAT(s.prob[1], WithinAbs(std::exp(h) / (std::exp(h) + std::exp(-h)), 1e-15));

  Box t = Box::cube(2, 2, Topology::torus);
  auto ex = exact_measure({ising_interaction(0.4, 0, 2), t});
  auto oracle = torus_ising_oracle(t, 0.4, 0);
  double sum = 0;
  for (std::size_t k = 0; k < oracle.size(); ++k) {
    CHECK_THAT(ex.prob[k], WithinAbs(oracle[k], 1e-12));
    CHECK(ex.prob[k] > 0);
    sum += ex.prob[k];
  }
  CHECK_THAT(sum, WithinAbs(1.0, 1e-12));

  CHECK_THROWS_AS(exact_measure({Interaction::zero(1), Box({21}, Topology::open)}), CapacityExceeded);
}

TEST_CASE("conditional probabilities") {
  Box b({3}, Topology::open);
  auto ctx = Configuration::uniform(b, 1);
  CHECK(conditional_prob({Interaction::zero(1), b}, 1, ctx) == 0.5);
  const double beta = 0.6;
  const double expect = std::exp(2 * beta) / (std::exp(2 * beta) + std::exp(-2 * beta));
  CHECK_THAT(conditional_prob({ising_interaction(beta, 0, 1), b}, 1, ctx), WithinAbs(expect, 1e-15));

  // Summing the exact table gives the same value.
  std::mt19937_64 g(3);
  Box sq = Box::cube(2, 3, Topology::open);
  GibbsSpec spec{ising_interaction(0.5, 0.2, 2), sq, uniform_boundary(sq, 1, -1)};
  auto m = exact_measure(spec);
  for (int rep = 0; rep < 20; ++rep) {
    std::uint64_t s = g() & ((1U << 9) - 1);
    const Site x = g() % 9;
    const std::uint64_t sp = s | (1U << x), sm = s & ~(std::uint64_t{1} << x);
    const double sum_rule = m.prob[sp] / (m.prob[sp] + m.prob[sm]);
    CHECK_THAT(conditional_prob(spec, x, Configuration::from_index(sq, s)), WithinAbs(sum_rule, 1e-12));
  }

  // Locality: spins beyond the range do not matter.
  Box line({7}, Topology::open);
  GibbsSpec ls{ising_interaction(0.8, 0.1, 1), line};
  auto c1 = Configuration::uniform(line, 1);
  auto c2 = c1;
  c2.set(0, -1);
  c2.set(6, -1);
  CHECK(conditional_prob(ls, 3, c1) == conditional_prob(ls, 3, c2));
}

TEST_CASE("transfer matrix") {
  auto zero = Interaction::zero(1);
  CHECK_THAT(transfer_matrix_1d(zero, 10, ChainBoundary::periodic).partition, WithinAbs(1024.0, 1e-9));
  auto u = ising_interaction(0.7, 0.3, 1);
  for (auto bc : {ChainBoundary::free, ChainBoundary::fixed, ChainBoundary::periodic}) {
    for (std::size_t n : {1U, 2U, 3U, 5U}) {
      Box b({static_cast<int>(n)}, bc == ChainBoundary::periodic ? Topology::torus : Topology::open);
      Boundary bound = FreeBoundary{};
      if (bc == ChainBoundary::fixed) bound = boundary_from(b, 1, [&](const Coords& c) { return c[0] < 0 ? 1 : -1; });
      auto m = exact_measure({u, b, bound});
      auto tm = transfer_matrix_1d(u, n, bc, 1, -1);
      CHECK_THAT(tm.log_partition, WithinAbs(m.log_partition, 1e-12));
      for (Site x = 0; x < n; ++x) CHECK_THAT(tm.marginal_plus[x], WithinAbs(m.marginal_plus(x), 1e-12));
    }
  }
  // Periodic Z equals the trace of T^n.
  const double beta = 0.7, h = 0.3;
  double t[2][2];
  for (int a = 0; a < 2; ++a) {
    for (int c = 0; c < 2; ++c) {
      const double sa = a ? 1 : -1, sc = c ? 1 : -1;
      t[a][c] = std::exp(beta * sa * sc + h * sa);
    }
  }
  double p[2][2] = {{1, 0}, {0, 1}};
  for (int k = 0; k < 6; ++k) {
    double q[2][2] = {{0, 0}, {0, 0}};
    for (int a = 0; a < 2; ++a)
      for (int c = 0; c < 2; ++c)
        for (int e = 0; e < 2; ++e) q[a][c] += p[a][e] * t[e][c];
    for (int a = 0; a < 2; ++a)
      for (int c = 0; c < 2; ++c) p[a][c] = q[a][c];
  }
  CHECK_THAT(transfer_matrix_1d(u, 6, ChainBoundary::periodic).partition, WithinAbs(p[0][0] + p[1][1], 1e-9));
  CHECK_THROWS_AS(transfer_matrix_1d(Interaction(1, {{{{0}, {2}}, {0, 0, 0, 0}}}), 4, ChainBoundary::free),
                  Unsupported);
  CHECK_THROWS_AS(transfer_matrix_1d(ising_interaction(1, 0, 2), 4, ChainBoundary::free), Unsupported);
}

TEST_CASE("heat-bath update satisfies detailed balance") {
  std::mt19937_64 g(9);
  Box b = Box::cube(2, 3, Topology::torus);
  CompiledModel m(ising_interaction(0.9, 0.2, 2), b);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<std::int8_t> s(9);
    for (auto& v : s) v = (g() & 1U) ? 1 : -1;
    const Site x = g() % 9;
    auto sx = s;
    sx[x] = static_cast<std::int8_t>(-sx[x]);
    const double p_plus = heat_bath_plus(m.plus_minus_gap(s.data(), x));
    const double forward = s[x] > 0 ? 1 - p_plus : p_plus;  // move to sigma^x
    const double backward = s[x] > 0 ? p_plus : 1 - p_plus;
    const double lhs = forward * std::exp(-m.energy(s.data()));
    const double rhs = backward * std::exp(-m.energy(sx.data()));
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(lhs, rhs));
  }
}

TEST_CASE("sampler estimates") {
  MCParams mc;
  mc.sweeps = 4000;
  mc.burn_in = 200;
  mc.replicas = 2;
  mc.seed = 5;
  Box b = Box::cube(2, 4, Topology::torus);
  auto zero = glauber_sample({Interaction::zero(2), b}, mc, magnetization_observable(16));
  CHECK(std::abs(zero.mean) < 3 * zero.stderr_);

  GibbsSpec spec{ising_interaction(0.3, 0, 2), b};
  auto ex = exact_measure(spec);
  auto mag_sq = [](const std::int8_t* s) {
    double m = 0;
    for (int i = 0; i < 16; ++i) m += s[i];
    return m * m / 256.0;
  };
  double exact = 0;
  for (std::uint64_t s = 0; s < ex.prob.size(); ++s) {
    const double m = (2.0 * std::popcount(s) - 16) / 16;
    exact += ex.prob[s] * m * m;
  }
  auto est = glauber_sample(spec, mc, mag_sq);
  CHECK(std::abs(est.mean - exact) < 3 * est.stderr_);
  auto mag = glauber_sample(spec, mc, magnetization_observable(16));
  CHECK(std::abs(mag.mean - ex.magnetization()) < 3 * mag.stderr_);

  // Same seed, same stream.
  auto s1 = glauber_series(spec, mc, magnetization_observable(16));
  auto s2 = glauber_series(spec, mc, magnetization_observable(16));
  CHECK(s1 == s2);
  MCParams threaded = mc;
  threaded.threads = 2;
  CHECK(glauber_series(spec, threaded, magnetization_observable(16)) == s1);

  // Single-site boxes bypass the chain.
  Box one({1}, Topology::open);
  auto single = glauber_sample({ising_interaction(0, 0.4, 1), one}, mc, spin_observable(0));
  CHECK_THAT(single.mean, WithinAbs(std::tanh(0.4), 1e-15));
  CHECK(single.stderr_ == 0.0);
}

TEST_CASE("sampler coverage over seeds") {
  Box b({3, 3}, Topology::open);
  GibbsSpec spec{ising_interaction(0.4, 0.1, 2), b, uniform_boundary(b, 1, 1)};
  const double exact = exact_measure(spec).mean_spin(b.origin());
  MCParams mc;
  mc.sweeps = 4096;
  mc.burn_in = 100;
  mc.replicas = 4;
  int covered = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    mc.seed = seed;
    auto e = glauber_sample(spec, mc, spin_observable(b.origin()));
    covered += std::abs(e.mean - exact) <= 3 * e.stderr_ ? 1 : 0;
  }
  CHECK(covered >= 99);
}

TEST_CASE("two-boundary gap") {
  MCParams mc;
  mc.sweeps = 1000;
  mc.burn_in = 200;
  mc.replicas = 2;
  mc.seed = 1;
  auto zero = two_bc_gap([](const Box&) { return Interaction::zero(2); }, 2, {6}, mc);
  CHECK(std::abs(zero[0].gap) < 3 * zero[0].gap_stderr + 1e-12);

  auto cold = two_bc_gap([](const Box&) { return ising_interaction(1.0, 0, 2); }, 2, {16}, mc);
  CHECK(cold[0].gap > 1.0);

  mc.sweeps = 2000;
  auto hot = two_bc_gap([](const Box&) { return ising_interaction(0.2, 0, 2); }, 2, {4, 8, 16}, mc);
  CHECK(hot[2].gap < hot[0].gap);
  CHECK(std::abs(hot[2].gap) < 3 * hot[2].gap_stderr + 0.02);

  std::ostringstream os;
  write_gap_csv(os, cold);
  CHECK(os.str().rfind("volume,boundary,observable,mean,stderr,sweeps,seed\n16,plus,spin@origin,", 0) == 0);
}
