#ifndef GIBBSFLOW_ANALYSIS_HPP
#define GIBBSFLOW_ANALYSIS_HPP

// Gibbsianness diagnostics for evolved measures: boundary-sensitivity scans
// of the constrained system, the small-time cluster-expansion horizon,
// Radon-Nikodym derivative checks and the Dobrushin certificate.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynamics.hpp"
#include "errors.hpp"
#include "gibbs.hpp"
#include "interaction.hpp"
#include "io.hpp"
#include "lattice.hpp"
#include "twolayer.hpp"

namespace gibbsflow {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Bad-configuration scans

struct EtaSpec {
  SpecialKind kind = SpecialKind::alternating;
  double p = 0;
  std::uint64_t seed = 0;
};

struct GapScanRow {
  double t = 0;
  int side = 0;
  std::string annulus;
  std::string eta;
  std::string boundary_pair = "plus/minus";
  std::string observable;
  std::string method;
  double gap = 0;
  double stderr_ = 0;
  double plus_mean = 0;
  double plus_stderr = 0;
  double minus_mean = 0;
  double minus_stderr = 0;
};

struct GapScanResult {
  std::vector<GapScanRow> rows;
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();
  std::optional<double> crossover;
};

inline constexpr std::size_t kGapExactCap = 16;
inline constexpr double kCrossoverThreshold = 0.2;

/// eta on the open cube of the given side, cut from the largest cube so
/// that all volumes share one centred pattern.
inline Configuration eta_for_side(const EtaSpec& spec, int dimension, int side, int largest) {
  Box big = Box::cube(dimension, largest, Topology::open);
  Configuration eta = special_config(spec.kind, big, spec.p, spec.seed);
  return centered_restriction(eta, Box::cube(dimension, side, Topology::open));
}

namespace detail {

// P(eta(x) = + | eta on the rest of the box) for the evolved measure
// nu S(t) on the box, nu with free boundary. Kernel time t.
inline double evolved_conditional(const ExactMeasure& nu, const SingleSiteKernel& k, const Configuration& eta, Site x) {
  const std::size_t n = nu.box.size();
  double w[2] = {0, 0};
  for (int v = 0; v < 2; ++v) {
    std::vector<int> e(n);
    for (Site y = 0; y < n; ++y) e[y] = eta[y] > 0 ? 1 : 0;
    e[x] = v;
    double acc = 0;
    for (std::uint64_t s = 0; s < nu.prob.size(); ++s) {
      double p = nu.prob[s];
      for (Site y = 0; y < n && p > 0; ++y) p *= k.p[(s >> y) & 1U][e[y]];
      acc += p;
    }
    w[v] = acc;
  }
  return w[1] / (w[0] + w[1]);
}

}  // namespace detail

/// Plus/minus boundary gap of <sigma(origin)> in the constrained system
/// U_nu + (h + h1(t) + h12(t) eta(x)) sigma(x), for every side. Kernel time t.
/// Sides whose cube has at most 16 sites also get the exact gap and the
/// conditional-probability gap of the evolved measure itself.
inline GapScanResult bad_config_gap(const Interaction& u_nu, double h, double t, double delta, const EtaSpec& eta_spec,
                                    int dimension, const std::vector<int>& sides, const MCParams& mc,
                                    std::uint32_t tag = 0) {
  if (sides.empty()) throw InvalidArgument("no volumes given");
  const int largest = *std::max_element(sides.begin(), sides.end());
  const DynamicalFields f = fields(t, delta);
  GapScanResult res;
  for (int side : sides) {
    Box box = Box::cube(dimension, side, Topology::open);
    Configuration eta = eta_for_side(eta_spec, dimension, side, largest);
    Interaction u = constrained_hamiltonian(u_nu, h, t, delta, eta);
    const int collar = std::max(1, u.range());
    const Site x = box.origin();
    GapScanRow row;
    row.t = t;
    row.side = side;
    row.annulus = "collar";
    row.eta = to_string(eta_spec.kind);
    row.observable = "spin@origin";
    row.method = "mc";
    Estimate est[2];
    for (int b = 0; b < 2; ++b) {
      const int bc = b == 0 ? 1 : -1;
      GibbsSpec spec{u, box, uniform_boundary(box, collar, bc)};
      est[b] = glauber_sample(spec, mc, spin_observable(x), Configuration::uniform(box, bc),
                              mix_tag(tag, static_cast<std::uint64_t>(side) * 2 + static_cast<std::uint64_t>(b)));
    }
    row.plus_mean = est[0].mean;
    row.plus_stderr = est[0].stderr_;
    row.minus_mean = est[1].mean;
    row.minus_stderr = est[1].stderr_;
    row.gap = row.plus_mean - row.minus_mean;
    row.stderr_ = std::hypot(row.plus_stderr, row.minus_stderr);
    res.rows.push_back(row);

    if (box.size() <= kGapExactCap) {
      GapScanRow ex = row;
      ex.method = "exact";
      double m[2];
      for (int b = 0; b < 2; ++b) {
        const int bc = b == 0 ? 1 : -1;
        m[b] = exact_measure(GibbsSpec{u, box, uniform_boundary(box, collar, bc)}).mean_spin(x);
      }
      ex.plus_mean = m[0];
      ex.minus_mean = m[1];
      ex.plus_stderr = ex.minus_stderr = ex.stderr_ = 0;
      ex.gap = m[0] - m[1];
      res.rows.push_back(ex);

      if (side >= 3) {
        // Evolved measure on the whole cube; eta fixed on the inner block
        // [1, side-1)^d, the outer shell set to all-plus or all-minus.
        Interaction u_h = u_nu + ising_interaction(0.0, h, dimension);
        const ExactMeasure nu = exact_measure(GibbsSpec{u_h, box, FreeBoundary{}});
        const SingleSiteKernel k = single_site_kernel(t, epsilon_from_delta(delta));
        Region inner = Region::block(box, Coords(static_cast<std::size_t>(dimension), 1),
                                     Coords(static_cast<std::size_t>(dimension), side - 1));
        GapScanRow cp = row;
        cp.method = "exact-evolved";
        cp.observable = "cond-prob@origin";
        cp.annulus = "inner=[1," + std::to_string(side - 1) + ")";
        double p[2];
        for (int b = 0; b < 2; ++b) {
          Configuration shell = Configuration::uniform(box, b == 0 ? 1 : -1);
          p[b] = detail::evolved_conditional(nu, k, patch(eta, shell, inner), x);
        }
        cp.plus_mean = p[0];
        cp.minus_mean = p[1];
        cp.plus_stderr = cp.minus_stderr = cp.stderr_ = 0;
        cp.gap = p[0] - p[1];
        res.rows.push_back(cp);
      }
    }
  }
  res.metadata["h"] = h;
  res.metadata["delta"] = delta;
  res.metadata["dimension"] = dimension;
  res.metadata["h12"] = f.h12;
  res.metadata["seed"] = mc.seed;
  return res;
}

/// A row is significant when gap - 3 stderr exceeds the threshold.
inline bool gap_significant(const GapScanRow& r, double threshold = kCrossoverThreshold) {
  return r.gap - 3.0 * r.stderr_ > threshold;
}

/// bad_config_gap over a strictly increasing grid of kernel times. The
/// crossover is the first time whose largest-volume Monte Carlo gap is
/// significant. The scan is evidence about finite volumes, not a proof.
inline GapScanResult transition_scan(const Interaction& u_nu, double h, double delta, const EtaSpec& eta,
                                     const std::vector<double>& t_grid, int dimension, const std::vector<int>& sides,
                                     const MCParams& mc, double threshold = kCrossoverThreshold) {
  if (t_grid.empty()) throw InvalidArgument("empty time grid");
  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    if (!(t_grid[i] > t_grid[i - 1])) throw InvalidArgument("time grid must be strictly increasing");
  }
  const int largest = *std::max_element(sides.begin(), sides.end());
  GapScanResult out;
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    GapScanResult r = bad_config_gap(u_nu, h, t_grid[i], delta, eta, dimension, sides, mc,
                                     mix_tag(0x7363616e, static_cast<std::uint64_t>(i)));
    for (const auto& row : r.rows) {
      if (!out.crossover && row.method == "mc" && row.side == largest && gap_significant(row, threshold)) {
        out.crossover = row.t;
      }
      out.rows.push_back(row);
    }
  }
  out.metadata["h"] = h;
  out.metadata["delta"] = delta;
  out.metadata["dimension"] = dimension;
  out.metadata["threshold"] = threshold;
  out.metadata["seed"] = mc.seed;
  out.metadata["crossover"] = out.crossover ? nlohmann::ordered_json(*out.crossover) : nlohmann::ordered_json(nullptr);
  return out;
}

inline const std::vector<std::string>& gap_scan_header() {
  static const std::vector<std::string> h{"t",          "L",          "annulus",    "eta",
                                          "boundary",   "observable", "method",     "gap",
                                          "stderr",     "plus_mean",  "plus_stderr", "minus_mean",
                                          "minus_stderr"};
  return h;
}

inline void write_gap_scan_csv(std::ostream& os, const GapScanResult& r) {
  CsvWriter w(os);
  w.header(gap_scan_header());
  for (const auto& row : r.rows) {
    w.field(row.t).field(row.side).field(row.annulus).field(row.eta).field(row.boundary_pair);
    w.field(row.observable).field(row.method).field(row.gap).field(row.stderr_);
    w.field(row.plus_mean).field(row.plus_stderr).field(row.minus_mean).field(row.minus_stderr);
    w.end();
  }
}

// ---------------------------------------------------------------------------
// Small-time horizon

struct HorizonRow {
  double t = 0;
  double eps_t = 0;
  double alpha_t = 0;
  double bound = 0;
};

struct ClusterHorizon {
  double C = 0;        // constant used for t0
  double C_bound = 0;  // 2 (sum over classes of sup|U| + max site field)
  double C_enum = 0;   // 2 max |H|/|Lambda| over small tori
  double connectivity = 0;
  double t0 = 0;
  std::string criterion;
  std::vector<HorizonRow> per_t;
};

/// Probability that a unit-rate spin is flipped at time t, and
/// eps_t = delta_t / (1 - delta_t).
inline double flip_probability(double t) { return -0.5 * std::expm1(-2.0 * t); }
inline double eps_of_t(double t) {
  const double d = flip_probability(t);
  return d / (1.0 - d);
}

/// 2 max_sigma |H(sigma)| / |Lambda| over tori of side >= 2 with at most
/// `cap` sites.
inline double enumerate_norm_constant(const Interaction& u, std::size_t cap = 16) {
  const int d = u.dimension();
  const Interaction plain = u.has_site_fields() ? u.without_site_fields() : u;
  double best = 0;
  std::vector<int> ext;
  // Extents are generated non-decreasing along the axes; permutations give
  // the same values.
  std::function<void(std::size_t)> rec = [&](std::size_t vol) {
    if (static_cast<int>(ext.size()) == d) {
      Box box(ext, Topology::torus);
      CompiledModel m(plain, box);
      std::vector<std::int8_t> s(vol);
      for (std::uint64_t k = 0; k < (std::uint64_t{1} << vol); ++k) {
        decode_state(k, vol, s.data());
        best = std::max(best, 2.0 * std::abs(m.energy(s.data())) / static_cast<double>(vol));
      }
      return;
    }
    for (int e = ext.empty() ? 2 : ext.back(); vol * static_cast<std::size_t>(e) <= cap; ++e) {
      ext.push_back(e);
      rec(vol * static_cast<std::size_t>(e));
      ext.pop_back();
    }
  };
  rec(1);
  return best;
}

/// Horizon below which the polymer weights satisfy
/// sum_n a^n e^{-alpha_t n} e^n < 1, alpha_t = -C + log(1/eps_t), where a
/// bounds the growth of connected sets (default 2de). Times are unit-rate
/// flip times.
inline ClusterHorizon cluster_horizon(const Interaction& u_nu, const Interaction& u_mu,
                                      const std::vector<double>& t_grid = {}, double connectivity = 0) {
  if (u_nu.dimension() != u_mu.dimension()) throw InvalidArgument("interaction dimensions differ");
  const int d = u_nu.dimension();
  const Interaction diff = difference_interaction(u_mu, u_nu);
  ClusterHorizon ch;
  ch.connectivity = connectivity > 0 ? connectivity : 2.0 * d * std::exp(1.0);
  ch.C_bound = 2.0 * energy_per_site_bound(diff);
  ch.C_enum = enumerate_norm_constant(diff);
  ch.C = ch.C_bound;
  ch.criterion = "sum_n (a e^{1-alpha_t})^n < 1 with a = " + fmt_num(ch.connectivity);
  const double eps_star = std::exp(-1.0 - ch.C) / (2.0 * ch.connectivity);
  const double delta_star = eps_star / (1.0 + eps_star);
  ch.t0 = -0.5 * std::log1p(-2.0 * delta_star);
  for (double t : t_grid) {
    HorizonRow r;
    r.t = t;
    r.eps_t = eps_of_t(t);
    r.alpha_t = -ch.C + std::log(1.0 / r.eps_t);
    const double x = ch.connectivity * std::exp(1.0 - r.alpha_t);
    r.bound = x < 1 ? x / (1.0 - x) : std::numeric_limits<double>::infinity();
    ch.per_t.push_back(r);
  }
  return ch;
}

// ---------------------------------------------------------------------------
// Radon-Nikodym derivative of the evolved measure

struct RnCheck {
  std::vector<double> direct;    // (a) nu_t(sigma^x)/nu_t(sigma)
  std::vector<double> weighted;  // (b) via E_sigma exp(H^{mu,nu}(sigma_t))
  std::vector<double> cluster;   // (c) truncated cluster sum, empty if unavailable
  double max_ab = 0;
  double max_ac = kNaN;
  double max_bc = kNaN;
  int k = 0;
};

namespace detail {

struct PolymerSystem {
  std::vector<std::uint32_t> polymers;  // site masks
  // Clusters: ordered tuples with their Ursell coefficient divided by m!.
  std::vector<std::vector<std::uint32_t>> tuples;
  std::vector<double> coeff;
};

inline PolymerSystem build_polymers(const CompiledModel& model, int k) {
  const std::size_t n = model.box().size();
  std::vector<std::uint32_t> adj(n, 0);
  for (Site x = 0; x < n; ++x) {
    for (Site y : model.neighbours(x)) adj[x] |= (1U << y);
  }
  PolymerSystem ps;
  std::set<std::uint32_t> found;
  std::vector<std::uint32_t> frontier;
  for (Site x = 0; x < n; ++x) frontier.push_back(1U << x);
  for (int size = 1; size <= k && !frontier.empty(); ++size) {
    std::vector<std::uint32_t> next;
    for (std::uint32_t p : frontier) {
      if (!found.insert(p).second) continue;
      if (size == k) continue;
      std::uint32_t nb = 0;
      for (Site x = 0; x < n; ++x) {
        if ((p >> x) & 1U) nb |= adj[x];
      }
      nb &= ~p;
      for (Site y = 0; y < n; ++y) {
        if ((nb >> y) & 1U) next.push_back(p | (1U << y));
      }
    }
    frontier.swap(next);
  }
  ps.polymers.assign(found.begin(), found.end());
  const std::size_t np = ps.polymers.size();
  auto closure = [&](std::uint32_t p) {
    std::uint32_t c = p;
    for (Site x = 0; x < n; ++x) {
      if ((p >> x) & 1U) c |= adj[x];
    }
    return c;
  };
  std::vector<std::uint32_t> cl(np);
  for (std::size_t i = 0; i < np; ++i) cl[i] = closure(ps.polymers[i]);
  auto incompatible = [&](std::size_t i, std::size_t j) { return (cl[i] & ps.polymers[j]) != 0; };

  // Ursell function: sum over connected spanning subgraphs of the
  // incompatibility graph of (-1)^{edges}.
  auto ursell = [&](const std::vector<std::uint32_t>& idx) {
    const std::size_t m = idx.size();
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = a + 1; b < m; ++b) {
        if (incompatible(idx[a], idx[b])) edges.emplace_back(a, b);
      }
    }
    double sum = 0;
    const std::size_t ne = edges.size();
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << ne); ++mask) {
      std::vector<std::size_t> parent(m);
      for (std::size_t a = 0; a < m; ++a) parent[a] = a;
      std::function<std::size_t(std::size_t)> root = [&](std::size_t a) {
        return parent[a] == a ? a : parent[a] = root(parent[a]);
      };
      std::size_t comps = m;
      for (std::size_t e = 0; e < ne; ++e) {
        if ((mask >> e) & 1U) {
          auto ra = root(edges[e].first), rb = root(edges[e].second);
          if (ra != rb) {
            parent[ra] = rb;
            --comps;
          }
        }
      }
      if (comps == 1) sum += (std::popcount(mask) % 2 == 0) ? 1.0 : -1.0;
    }
    return sum;
  };

  std::vector<std::uint32_t> cur;
  std::function<void(int)> rec = [&](int budget) {
    if (!cur.empty()) {
      const double u = ursell(cur);
      if (u != 0) {
        double fact = 1;
        for (std::size_t i = 2; i <= cur.size(); ++i) fact *= static_cast<double>(i);
        ps.tuples.push_back(cur);
        ps.coeff.push_back(u / fact);
      }
    }
    for (std::uint32_t i = 0; i < np; ++i) {
      const int sz = std::popcount(ps.polymers[i]);
      if (sz > budget) continue;
      cur.push_back(i);
      rec(budget - sz);
      cur.pop_back();
    }
  };
  rec(k);
  return ps;
}

}  // namespace detail

/// d(nu_t^x)/d(nu_t) at every sigma, three ways, for product rates on a
/// small box; nu is the Gibbs measure of u_nu on the rate box (free on open
/// boxes, periodic on tori) and t is RateSpec time. The cluster form needs
/// unbiased rates (eps = 0) and is truncated at total cluster size k.
inline RnCheck rn_derivative_check(const Interaction& u_nu, const RateSpec& rates, double t, Site x, int k = 3) {
  if (!rates.is_product()) throw Unsupported("derivative check needs product dynamics");
  const Box& box = rates.box();
  box.check(x);
  const std::size_t n = box.size();
  if (n > kGeneratorCap) throw CapacityExceeded("derivative check limited to 12 sites");
  const std::size_t m = std::size_t{1} << n;
  const std::size_t bit = std::size_t{1} << x;
  FiniteGenerator gen(rates);
  CompiledModel model(u_nu, box);
  const std::vector<double> h_nu = enumerate_energies(model, kGeneratorCap);

  RnCheck out;
  out.k = k;
  // (a) direct ratio of the evolved table.
  std::vector<double> nu;
  boltzmann_normalise(h_nu, nu);
  const std::vector<double> nut = evolve_law(nu, gen, t);
  out.direct.resize(m);
  for (std::size_t s = 0; s < m; ++s) out.direct[s] = nut[s ^ bit] / nut[s];

  // (b) mu^x/mu times S(t)g(sigma^x)/S(t)g(sigma) with g = exp(H^{mu,nu}),
  // H^{mu,nu} = H_mu - H_nu and H_mu the single-site field of the rates.
  const std::vector<double> mu = reversible_measure(gen);
  const double eps = rates.product_epsilon();
  const double h_mu = 0.5 * std::log((1.0 + eps) / (1.0 - eps));
  std::vector<double> hdiff(m);
  double hmax = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < m; ++s) {
    const double sum = 2.0 * std::popcount(s) - static_cast<double>(n);
    hdiff[s] = -h_mu * sum - h_nu[s];
    hmax = std::max(hmax, hdiff[s]);
  }
  std::vector<double> g(m);
  for (std::size_t s = 0; s < m; ++s) g[s] = std::exp(hdiff[s] - hmax);
  const std::vector<double> sg = apply_semigroup(g, gen, t);
  out.weighted.resize(m);
  for (std::size_t s = 0; s < m; ++s) out.weighted[s] = mu[s ^ bit] / mu[s] * sg[s ^ bit] / sg[s];
  for (std::size_t s = 0; s < m; ++s) out.max_ab = std::max(out.max_ab, std::abs(out.direct[s] - out.weighted[s]));

  // (c) cluster expansion of log sum_gamma eps_t^{|gamma|} exp(H(sigma^gamma) - H(sigma)), H = -H_nu.
  if (eps == 0.0 && n <= 32) {
    const detail::PolymerSystem ps = detail::build_polymers(model, k);
    const double et = eps_of_t(t);
    auto log_z = [&](std::size_t s) {
      std::vector<double> w(ps.polymers.size());
      for (std::size_t i = 0; i < w.size(); ++i) {
        const std::uint32_t p = ps.polymers[i];
        w[i] = std::pow(et, std::popcount(p)) * std::exp(h_nu[s] - h_nu[s ^ p]);
      }
      double acc = 0;
      for (std::size_t c = 0; c < ps.tuples.size(); ++c) {
        double prod = ps.coeff[c];
        for (std::uint32_t i : ps.tuples[c]) prod *= w[i];
        acc += prod;
      }
      return acc;
    };
    out.cluster.resize(m);
    out.max_ac = 0;
    out.max_bc = 0;
    for (std::size_t s = 0; s < m; ++s) {
      out.cluster[s] = std::exp(h_nu[s] - h_nu[s ^ bit]) * std::exp(log_z(s ^ bit) - log_z(s));
      out.max_ac = std::max(out.max_ac, std::abs(out.direct[s] - out.cluster[s]));
      out.max_bc = std::max(out.max_bc, std::abs(out.weighted[s] - out.cluster[s]));
    }
  }
  return out;
}

struct ContinuityRow {
  int side = 0;
  int fixed_radius = 0;
  double variation = 0;
};

/// Boundary sensitivity of d(nu_t^x)/d(nu_t) at the centre x: sigma is
/// all-plus within distance side/2 - 1 of x and free beyond; the row holds
/// max - min of the derivative over the free spins. Open cubes, product
/// rates with bias eps, RateSpec time t.
inline std::vector<ContinuityRow> continuity_probe(const Interaction& u_nu, double eps, double t,
                                                   const std::vector<int>& sides) {
  std::vector<ContinuityRow> rows;
  const int d = u_nu.dimension();
  for (int side : sides) {
    Box box = Box::cube(d, side, Topology::open);
    const RateSpec rates = RateSpec::product(box, eps);
    const Site x = box.origin();
    const std::size_t bit = std::size_t{1} << x;
    const ExactMeasure nu = exact_measure(GibbsSpec{u_nu, box, FreeBoundary{}}, kGeneratorCap);
    const std::vector<double> nut = evolve_law(nu.prob, rates, t);
    const int r = side / 2 - 1;
    const Coords cx = box.coords(x);
    std::uint64_t fixed_mask = 0;
    for (Site y = 0; y < box.size(); ++y) {
      const Coords cy = box.coords(y);
      int dist = 0;
      for (int a = 0; a < d; ++a) dist = std::max(dist, std::abs(cy[static_cast<std::size_t>(a)] - cx[static_cast<std::size_t>(a)]));
      if (dist <= r) fixed_mask |= (std::uint64_t{1} << y);
    }
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::uint64_t s = 0; s < nut.size(); ++s) {
      if ((s & fixed_mask) != fixed_mask) continue;
      const double v = nut[s ^ bit] / nut[s];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    rows.push_back({side, r, hi - lo});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Dobrushin certificate for the evolved measure

/// The constrained Hamiltonians differ from U_nu only in single-site terms,
/// so the norm is U_nu's at every t. Satisfied means nu S(t) is Gibbs for
/// all t; not satisfied is inconclusive.
inline DobrushinReport dobrushin_evolved(const Interaction& u_nu, double h, double t, double delta) {
  (void)h;
  check_field_args(t, delta);
  return dobrushin_norm(u_nu.without_site_fields());
}

}  // namespace gibbsflow

#endif  // GIBBSFLOW_ANALYSIS_HPP
