#include <catch_amalgamated.hpp>

#include <random>

#include <gibbsflow/interaction.hpp>

using namespace gibbsflow;
using Catch::Matchers::WithinAbs;

namespace {

// Independent nearest-neighbour Ising energy with explicit bond loops.
double ising_oracle(const Configuration& c, double beta, double h) {
  const Box& b = c.box();
  double e = 0;
  for (Site x = 0; x < b.size(); ++x) {
    e -= h * c[x];
    Coords cx = b.coords(x);
    for (int k = 0; k < b.dimension(); ++k) {
      Coords e_k(static_cast<std::size_t>(b.dimension()), 0);
      e_k[static_cast<std::size_t>(k)] = 1;
      auto y = b.shifted(cx, e_k);
      if (y) e -= beta * c[x] * c[*y];
    }
  }
  return e;
}

Configuration random_config(const Box& b, std::mt19937_64& g) {
  std::vector<std::int8_t> s(b.size());
  for (auto& v : s) v = (g() & 1U) ? 1 : -1;
  return Configuration(b, s);
}

Interaction random_interaction(int d, std::mt19937_64& g) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<TranslationClass> cls;
  Coords o(static_cast<std::size_t>(d), 0), e1 = o, e2 = o;
  e1[0] = 1;
  e2[static_cast<std::size_t>(d - 1)] = (d > 1) ? 1 : 2;
  if (d > 1) e2[0] = 1;
  cls.push_back({{o}, {u(g), u(g)}});
  cls.push_back({{o, e1}, {u(g), u(g), u(g), u(g)}});
  std::vector<double> t3(8);
  for (auto& v : t3) v = u(g);
  cls.push_back({{o, e1, e2}, t3});
  return Interaction(d, cls);
}

}  // namespace

TEST_CASE("Ising interaction values") {
  auto zero = ising_interaction(0, 0, 2);
  CHECK(zero.is_zero());
  CHECK(zero.range() == 1);
  Box b = Box::cube(2, 3, Topology::open);
  CHECK(hamiltonian(zero, Configuration::uniform(b, 1)) == 0.0);

  auto u = ising_interaction(1, 0, 1);
  Box two({2}, Topology::open);
  CHECK_THAT(hamiltonian(u, Configuration::uniform(two, 1)), WithinAbs(-1.0, 1e-15));

  auto v = ising_interaction(0.5, 0.2, 1);
  Box one({1}, Topology::open);
  CHECK_THAT(hamiltonian(v, Configuration::uniform(one, 1)), WithinAbs(-0.2, 1e-15));
}

TEST_CASE("Hamiltonians agree with the explicit bond sum") {
  std::mt19937_64 g(1);
  for (auto topo : {Topology::open, Topology::torus}) {
    Box b({3, 4}, topo);
    for (int i = 0; i < 20; ++i) {
      auto c = random_config(b, g);
      CHECK_THAT(hamiltonian(ising_interaction(0.7, -0.3, 2), c), WithinAbs(ising_oracle(c, 0.7, -0.3), 1e-12));
    }
  }
}

TEST_CASE("fixed boundary adds crossing bonds") {
  auto u = ising_interaction(1, 0, 1);
  Box one({1}, Topology::open);
  auto bc = uniform_boundary(one, 1, 1);
  CHECK_THAT(hamiltonian_bc(u, Configuration::uniform(one, 1), bc), WithinAbs(-2.0, 1e-15));
  CHECK_THAT(hamiltonian_bc(u, Configuration::uniform(one, -1), bc), WithinAbs(2.0, 1e-15));
  CHECK(hamiltonian_bc(ising_interaction(0, 0, 1), Configuration::uniform(one, 1), bc) == 0.0);

  // Collar thinner than the range.
  Interaction wide(1, {{{{0}, {2}}, {0, 1, 1, 0}}});
  REQUIRE(wide.range() == 2);
  try {
    hamiltonian_bc(wide, Configuration::uniform(one, 1), uniform_boundary(one, 1, 1));
    FAIL("expected an error");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("required width 2") != std::string::npos);
  }
}

TEST_CASE("energy_delta matches the full difference") {
  std::mt19937_64 g(2);
  auto u1 = ising_interaction(1, 0, 1);
  Box ring({4}, Topology::torus);
  for (Site x = 0; x < 4; ++x) CHECK_THAT(energy_delta(u1, Configuration::uniform(ring, 1), x), WithinAbs(4.0, 1e-15));
  CHECK(energy_delta(ising_interaction(0, 0, 1), Configuration::uniform(ring, 1), 0) == 0.0);

  Box b = Box::cube(2, 3, Topology::open);
  for (int i = 0; i < 50; ++i) {
    auto u = random_interaction(2, g);
    auto c = random_config(b, g);
    auto outer = random_config(Box::cube(2, 3 + 2 * u.range(), Topology::open), g);
    Boundary bcs[2] = {FreeBoundary{}, FixedBoundary{outer, u.range()}};
    for (const auto& bc : bcs) {
      for (Site x = 0; x < b.size(); ++x) {
        const double d = energy_delta(u, c, x, bc);
        CHECK_THAT(d, WithinAbs(hamiltonian_bc(u, flip(c, x), bc) - hamiltonian_bc(u, c, bc), 1e-12));
        CHECK_THAT(d + energy_delta(u, flip(c, x), x, bc), WithinAbs(0.0, 1e-12));
      }
    }
  }
}

TEST_CASE("torus Hamiltonians are translation invariant") {
  std::mt19937_64 g(3);
  Box t({3, 4}, Topology::torus);
  for (int i = 0; i < 20; ++i) {
    auto u = random_interaction(2, g);
    auto c = random_config(t, g);
    const double h = hamiltonian(u, c);
    CHECK(hamiltonian(u, c.translated({1, 0})) == Catch::Approx(h).epsilon(1e-14));
    CHECK(hamiltonian(u, c.translated({2, 3})) == Catch::Approx(h).epsilon(1e-14));
  }
}

TEST_CASE("canonical form merges translated classes") {
  Interaction a(1, {{{{0}, {1}}, {1, 2, 3, 4}}, {{{1}, {0}}, {1, 3, 2, 4}}});
  REQUIRE(a.classes().size() == 1);
  CHECK(a.classes()[0].table == std::vector<double>{2, 4, 6, 8});
  CHECK_THROWS_AS(Interaction(1, {{{{1}, {2}}, {0, 0, 0, 0}}}), InvalidArgument);
}

TEST_CASE("Dobrushin norm") {
  auto zero = dobrushin_norm(ising_interaction(0, 0, 2));
  CHECK(zero.norm == 0.0);
  CHECK(zero.satisfied);
  auto a = dobrushin_norm(ising_interaction(0.2, 0, 2));
  CHECK_THAT(a.norm, WithinAbs(1.6, 1e-12));
  CHECK(a.satisfied);
  auto b = dobrushin_norm(ising_interaction(0.3, 0, 2));
  CHECK_THAT(b.norm, WithinAbs(2.4, 1e-12));
  CHECK_FALSE(b.satisfied);
  for (int d = 1; d <= 3; ++d) {
    for (double beta : {0.1, 0.25, 0.7}) {
      CHECK_THAT(dobrushin_norm(ising_interaction(beta, 0.4, d)).norm, WithinAbs(4 * d * beta, 1e-12));
    }
  }
  // Single-site terms do not count.
  auto u = ising_interaction(0.2, 0, 2);
  CHECK(dobrushin_norm(u + ising_interaction(0, 3.0, 2)).norm == a.norm);
  CHECK_NOTHROW(dobrushin_norm(u.with_site_fields(std::vector<double>(9, 0.5))));
  std::vector<double> uneven(9, 0.5);
  uneven[3] = -0.5;
  CHECK_THROWS_AS(dobrushin_norm(u.with_site_fields(uneven)), InvalidArgument);
}

TEST_CASE("Dobrushin norm against single-site enumeration") {
  // sup_x sum_{A containing x} (|A|-1) sup|U(A,.)-U(A,.)| by listing every
  // translate of every class through the origin.
  std::mt19937_64 g(4);
  for (int i = 0; i < 10; ++i) {
    auto u = random_interaction(2, g);
    double acc = 0;
    for (const auto& c : u.classes()) {
      double lo = 1e300, hi = -1e300;
      for (double v : c.table) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      // the class has |A| translates containing the origin
      for (std::size_t j = 0; j < c.arity(); ++j) acc += (static_cast<double>(c.arity()) - 1) * (hi - lo);
    }
    CHECK_THAT(dobrushin_norm(u).norm, WithinAbs(acc, 1e-12));
  }
}

TEST_CASE("difference interaction and norms") {
  auto is = ising_interaction(0.4, 0.3, 2);
  CHECK(difference_interaction(is, is).is_zero());
  CHECK(difference_interaction(is, is).range() == 1);
  auto neg = difference_interaction(Interaction::zero(2), is);
  Box b = Box::cube(2, 3, Topology::torus);
  std::mt19937_64 g(5);
  for (int i = 0; i < 10; ++i) {
    auto c = random_config(b, g);
    CHECK_THAT(hamiltonian(neg, c), WithinAbs(-hamiltonian(is, c), 1e-12));
  }
  CHECK(interaction_norm(Interaction::zero(2)) == 0.0);
  CHECK_THAT(interaction_norm(ising_interaction(1, 0, 2)), WithinAbs(4.0, 1e-15));
  for (int i = 0; i < 20; ++i) {
    auto u = random_interaction(2, g), v = random_interaction(2, g);
    CHECK(interaction_norm(u + v) <= interaction_norm(u) + interaction_norm(v) + 1e-12);
  }
  // 2 (d beta + |h|) for U_mu = 0, U_nu = Ising.
  CHECK_THAT(2 * energy_per_site_bound(neg), WithinAbs(2 * (2 * 0.4 + 0.3), 1e-12));
}

TEST_CASE("JSON round trip keeps key order") {
  auto u = ising_interaction(0.4, 0.1, 2).with_site_fields({0.1, 0.2, 0.3, 0.4});
  auto j = to_json(u);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  CHECK(keys == std::vector<std::string>{"dimension", "range", "classes", "site_fields"});
  auto back = interaction_from_json(j);
  CHECK(to_json(back).dump() == j.dump());
  CHECK_THROWS_AS(interaction_from_json(nlohmann::ordered_json::parse(R"({"classes": 3})")), InvalidArgument);
}
