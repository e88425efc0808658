#include <catch_amalgamated.hpp>

#include <cmath>

#include <gibbsflow/dynamics.hpp>
#include <gibbsflow/gibbs.hpp>
#include <gibbsflow/twolayer.hpp>

using namespace gibbsflow;
using Catch::Matchers::WithinAbs;

TEST_CASE("fields match kernel log ratios") {
  for (int i = 0; i < 50; ++i) {
    const double t = 0.02 + 0.2 * i;
    for (int j = 1; j <= 10; ++j) {
      const double delta = 0.1 * j;
      auto a = fields(t, delta);
      auto b = fields_from_kernel(t, delta);
      CHECK_THAT(a.h1, WithinAbs(b.h1, 1e-12));
      CHECK_THAT(a.h2, WithinAbs(b.h2, 1e-12));
      CHECK_THAT(a.h12, WithinAbs(b.h12, 1e-12));
    }
  }
  for (double t : {0.01, 1.0, 30.0}) {
    auto f = fields(t, 1.0);
    CHECK(f.h1 == 0.0);
    CHECK(f.h2 == 0.0);
    CHECK_THAT(f.h12, WithinAbs(0.5 * std::log((1 + std::exp(-t)) / (1 - std::exp(-t))), 1e-13));
  }
  CHECK_THAT(fields(std::log(3.0), 1.0).h12, WithinAbs(0.5 * std::log(2.0), 1e-15));
  // h2 - h1 = -log(delta)/2 at every t
  auto late = fields(40.0, 0.5);
  CHECK_THAT(std::exp(2 * (late.h2 - late.h1)), WithinAbs(2.0, 1e-12));
  CHECK_THAT(late.h1, WithinAbs(0.0, 1e-15));
  CHECK_THROWS_AS(fields(0, 1), InvalidArgument);
  CHECK_THROWS_AS(fields(1, 0), InvalidArgument);
  CHECK_THROWS_AS(fields(1, 1.5), InvalidArgument);
}

TEST_CASE("coupling field decreases and stays positive") {
  for (double delta : {0.2, 0.5, 1.0}) {
    double prev = INFINITY;
    for (int i = 1; i <= 400; ++i) {
      const double t = 0.05 * i;
      const double h = fields(t, delta).h12;
      CHECK(h > 0);
      CHECK(h < prev);
      CHECK(single_site_kernel(t, epsilon_from_delta(delta)).det() >= 0);
      prev = h;
    }
  }
}

TEST_CASE("joint Hamiltonian on a single site") {
  Box one({1}, Topology::open);
  const double t = 0.7, delta = 0.6;
  auto f = fields(t, delta);
  auto k = single_site_kernel(t, epsilon_from_delta(delta));
  const double h = 0.3;
  auto u = ising_interaction(0, h, 1);
  double z = 0, w[2][2];
  for (int s = 0; s < 2; ++s) {
    for (int e = 0; e < 2; ++e) {
      w[s][e] = std::exp(-joint_hamiltonian(u, f, Configuration::uniform(one, s ? 1 : -1),
                                            Configuration::uniform(one, e ? 1 : -1)));
      z += w[s][e];
    }
  }
  const double nu_plus = std::exp(h) / (std::exp(h) + std::exp(-h));
  for (int s = 0; s < 2; ++s) {
    for (int e = 0; e < 2; ++e) {
      const double b = (s ? nu_plus : 1 - nu_plus) * k.p[s][e];
      CHECK_THAT(w[s][e] / z, WithinAbs(b, 1e-14));
    }
  }
  CHECK_THROWS_AS(joint_hamiltonian(u, f, Configuration::uniform(one, 1), Configuration::uniform(Box({2}, Topology::open), 1)),
                  InvalidArgument);
}

TEST_CASE("joint law marginal on a small torus") {
  Box t = Box::cube(2, 2, Topology::torus);
  auto u = ising_interaction(0.5, 0, 2);
  const double rate_t = 0.4, delta = 0.5;
  auto f = fields(kRateToKernelTime * rate_t, delta);
  std::vector<double> marg(16, 0.0);
  double z = 0;
  for (std::uint64_t s = 0; s < 16; ++s) {
    for (std::uint64_t e = 0; e < 16; ++e) {
      const double w = std::exp(-joint_hamiltonian(u, f, Configuration::from_index(t, s), Configuration::from_index(t, e)));
      marg[e] += w;
      z += w;
    }
  }
  for (auto& v : marg) v /= z;
  auto nu = exact_measure({u, t}).prob;
  auto evolved = evolve_law(nu, RateSpec::product(t, epsilon_from_delta(delta)), rate_t);
  CHECK(total_variation(marg, evolved) < 1e-12);
}

TEST_CASE("joint consistency over Ising chains and tori") {
  for (double beta : {0.0, 0.4, 1.0}) {
    for (double delta : {1.0, 0.5}) {
      for (double t : {0.1, 1.0, 5.0}) {
        for (const Box& b : {Box({5}, Topology::open), Box::cube(2, 3, Topology::torus)}) {
          auto u = ising_interaction(beta, 0, b.dimension());
          auto r = joint_consistency(u, RateSpec::product(b, epsilon_from_delta(delta)), t);
          CHECK(r.tv < 1e-12);
          CHECK(r.marginal_tv < 1e-12);
        }
      }
    }
  }
  Box b({3}, Topology::open);
  CHECK_THROWS_AS(joint_consistency(Interaction::zero(1), RateSpec::from_interaction(ising_interaction(0.1, 0, 1), b), 1.0),
                  Unsupported);
  CHECK_THROWS_AS(joint_consistency(Interaction::zero(1), RateSpec::product(Box({13}, Topology::open), 0), 1.0),
                  CapacityExceeded);
}

TEST_CASE("constrained Hamiltonian fields") {
  Box b = Box::cube(2, 4, Topology::torus);
  const double t = 0.8;
  auto f = fields(t, 1.0);
  auto plus = constrained_hamiltonian(ising_interaction(1, 0, 2), 0, t, 1.0, Configuration::uniform(b, 1));
  for (double v : plus.site_fields()) CHECK_THAT(v, WithinAbs(f.h12, 1e-15));

  auto alt = alternating(b);
  auto stag = constrained_hamiltonian(ising_interaction(1, 0, 2), 0, t, 1.0, alt);
  for (Site x = 0; x < b.size(); ++x) CHECK_THAT(stag.site_fields()[x], WithinAbs(f.h12 * alt[x], 1e-15));
  // Ising pair part unchanged.
  CHECK(to_json(stag.without_site_fields()).dump() == to_json(ising_interaction(1, 0, 2).without_site_fields()).dump());

  // Compensation: all-minus eta and h = h12 cancel.
  const double h = 0.05;
  const double tc = compensation_time(h, 1.0);
  CHECK_THAT(fields(tc, 1.0).h12, WithinAbs(h, 1e-10));
  auto comp = constrained_hamiltonian(ising_interaction(1, 0, 2), h, tc, 1.0, Configuration::uniform(b, -1));
  for (double v : comp.site_fields()) CHECK_THAT(v, WithinAbs(0.0, 1e-10));

  // delta < 1 adds h1 everywhere.
  auto d = fields(t, 0.5);
  auto withh1 = constrained_hamiltonian(Interaction::zero(2), 0, t, 0.5, Configuration::uniform(b, 1));
  CHECK_THAT(withh1.site_fields()[0], WithinAbs(d.h1 + d.h12, 1e-15));
  CHECK_THROWS_AS(compensation_time(-1, 1), InvalidArgument);
}

TEST_CASE("constrained conditional law matches the joint law") {
  // Conditioning the joint measure on eta gives exp(-H_t(., eta)).
  Box b({4}, Topology::open);
  auto u = ising_interaction(0.7, 0, 1);
  const double t = 0.5, delta = 0.7;
  auto f = fields(t, delta);
  auto eta = Configuration(b, {1, -1, -1, 1});
  auto constrained = exact_measure({constrained_hamiltonian(u, 0, t, delta, eta), b}).prob;
  std::vector<double> w(16);
  double z = 0;
  for (std::uint64_t s = 0; s < 16; ++s) z += (w[s] = std::exp(-joint_hamiltonian(u, f, Configuration::from_index(b, s), eta)));
  for (std::uint64_t s = 0; s < 16; ++s) CHECK_THAT(constrained[s], WithinAbs(w[s] / z, 1e-13));
}
