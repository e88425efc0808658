#ifndef GIBBSFLOW_TWOLAYER_HPP
#define GIBBSFLOW_TWOLAYER_HPP

// The joint law of (sigma_0, sigma_t) under independent biased flips.
//
// With nu ~ exp(-H_nu) and kernel p_t, the pair (sigma, eta) has weight
// exp(-H_t(sigma, eta)) where
//   H_t = H_nu(sigma) - h1 sum sigma - h2 sum eta - h12 sum sigma eta.
// Times here are kernel times (relaxation rate 1) unless a function says
// otherwise.

#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "dynamics.hpp"
#include "errors.hpp"
#include "gibbs.hpp"
#include "interaction.hpp"
#include "lattice.hpp"

namespace gibbsflow {

struct DynamicalFields {
  double t = 0;
  double delta = 1;
  double h1 = 0;
  double h2 = 0;
  double h12 = 0;
};

/// delta = (1 - eps)/(1 + eps).
inline double delta_from_epsilon(double eps) { return (1.0 - eps) / (1.0 + eps); }
inline double epsilon_from_delta(double delta) { return (1.0 - delta) / (1.0 + delta); }

inline void check_field_args(double t, double delta) {
  if (!(t > 0)) throw InvalidArgument("fields need t > 0");
  if (!(delta > 0 && delta <= 1)) throw InvalidArgument("delta must lie in (0,1]");
}

inline DynamicalFields fields(double t, double delta) {
  check_field_args(t, delta);
  const double e = std::exp(-t);
  DynamicalFields f;
  f.t = t;
  f.delta = delta;
  if (delta == 1.0) {
    f.h1 = 0;
    f.h2 = 0;
  } else {
    f.h1 = 0.25 * (std::log1p(delta * e) - std::log1p(e / delta));
    f.h2 = -0.5 * std::log(delta) + f.h1;
  }
  const double om = -std::expm1(-t);
  f.h12 = 0.25 * (std::log1p(delta * e) + std::log1p(e / delta) - 2.0 * std::log(om));
  return f;
}

/// The same fields read off the kernel: quarter-log ratios of p_t entries.
inline DynamicalFields fields_from_kernel(double t, double delta) {
  check_field_args(t, delta);
  const SingleSiteKernel k = single_site_kernel(t, epsilon_from_delta(delta));
  const double pp = k.p[1][1], pm = k.p[1][0], mp = k.p[0][1], mm = k.p[0][0];
  DynamicalFields f;
  f.t = t;
  f.delta = delta;
  f.h1 = 0.25 * std::log((pp * pm) / (mp * mm));
  f.h2 = 0.25 * std::log((pp * mp) / (pm * mm));
  f.h12 = 0.25 * std::log((pp * mm) / (pm * mp));
  return f;
}

/// H_t(sigma, eta), with H_nu free on open boxes and periodic on tori.
inline double joint_hamiltonian(const Interaction& u_nu, const DynamicalFields& f, const Configuration& sigma,
                                const Configuration& eta) {
  if (!(sigma.box() == eta.box())) throw InvalidArgument("sigma and eta live on different boxes");
  double e = hamiltonian(u_nu, sigma);
  for (Site x = 0; x < sigma.size(); ++x) {
    e -= f.h1 * sigma[x] + f.h2 * eta[x] + f.h12 * sigma[x] * eta[x];
  }
  return e;
}

/// U_nu with the extra single-site field h + h1(t) + h12(t) eta(x) at each
/// site. The eta-only term is dropped since it is constant in sigma.
inline Interaction constrained_hamiltonian(const Interaction& u_nu, double h, double t, double delta,
                                           const Configuration& eta) {
  const DynamicalFields f = fields(t, delta);
  std::vector<double> site(eta.size());
  for (Site x = 0; x < eta.size(); ++x) site[x] = h + f.h1 + f.h12 * eta[x];
  if (u_nu.has_site_fields()) {
    if (u_nu.site_fields().size() != site.size()) throw InvalidArgument("site fields do not match eta");
    for (Site x = 0; x < site.size(); ++x) site[x] += u_nu.site_fields()[x];
  }
  return u_nu.with_site_fields(std::move(site));
}

/// The kernel time t with h12(t) = h (bisection to 1e-10 in h12).
inline double compensation_time(double h, double delta) {
  if (!(h > 0)) throw InvalidArgument("compensation needs h > 0");
  if (!(delta > 0 && delta <= 1)) throw InvalidArgument("delta must lie in (0,1]");
  double lo = 1e-300, hi = 1.0;
  while (fields(hi, delta).h12 > h) hi *= 2.0;
  while (fields(lo, delta).h12 < h) lo *= 0.5;  // unreachable for finite h, kept for safety
  lo = std::min(lo, hi * 0.5);
  for (int it = 0; it < 2000; ++it) {
    const double mid = (lo < 1e-12 * hi) ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    const double v = fields(mid, delta).h12 - h;
    if (std::abs(v) < 1e-10 && hi - lo < 1e-10 * hi) return mid;
    if (v > 0) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-15 * hi) break;
  }
  return 0.5 * (lo + hi);
}

struct JointConsistency {
  double max_abs = 0;      // max |A - B| over all pairs
  double tv = 0;           // total variation between the joint laws
  double marginal_tv = 0;  // eta-marginal of A against evolve_law
};

/// Compares, over all (sigma, eta), the law exp(-H_t)/Z against
/// nu(sigma) prod p(sigma(x), eta(x)), and the eta-marginal against
/// exact evolution. `t` is RateSpec time; the kernel runs for 2t. nu uses
/// the free Hamiltonian on open boxes and the periodic one on tori.
inline JointConsistency joint_consistency(const Interaction& u_nu, const RateSpec& rates, double t) {
  if (!rates.is_product()) throw Unsupported("joint consistency needs product dynamics");
  const Box& box = rates.box();
  const std::size_t n = box.size();
  if (n > kGeneratorCap) throw CapacityExceeded("joint consistency limited to 12 sites");
  const double eps = rates.product_epsilon();
  const double tk = kRateToKernelTime * t;
  const DynamicalFields f = fields(tk, delta_from_epsilon(eps));
  const SingleSiteKernel k = single_site_kernel(tk, eps);

  const ExactMeasure nu = exact_measure(GibbsSpec{u_nu, box, FreeBoundary{}}, kGeneratorCap);
  CompiledModel model(u_nu, box);
  const std::size_t m = std::size_t{1} << n;
  const double dn = static_cast<double>(n);

  // A(sigma, eta) = a_s[sigma] * a_e[|eta|] * a_c[#disagreements] / Z, where
  // |.| counts plus spins. Both A and B depend on eta only through |eta| and
  // the overlap |sigma & eta|.
  std::vector<double> energy = enumerate_energies(model, kGeneratorCap);
  double emin = energy[0];
  for (double v : energy) emin = std::min(emin, v);
  std::vector<double> a_s(m), a_e(n + 1), a_c(n + 1);
  std::vector<std::uint8_t> plus(m);
  for (std::size_t s = 0; s < m; ++s) {
    plus[s] = static_cast<std::uint8_t>(std::popcount(s));
    a_s[s] = std::exp(-(energy[s] - emin) + f.h1 * (2.0 * plus[s] - dn));
  }
  for (std::size_t d = 0; d <= n; ++d) {
    a_e[d] = std::exp(f.h2 * (2.0 * static_cast<double>(d) - dn));
    a_c[d] = std::exp(f.h12 * (dn - 2.0 * static_cast<double>(d)));
  }
  long double z = 0;
  for (std::size_t s = 0; s < m; ++s) {
    long double row = 0;
    for (std::size_t e = 0; e < m; ++e) {
      row += a_e[plus[e]] * a_c[static_cast<std::size_t>(plus[s] + plus[e]) - 2U * plus[s & e]];
    }
    z += row * a_s[s];
  }

  // B(sigma, eta) = nu(sigma) prod_x p(sigma(x), eta(x)) via counts of the four pair types.
  auto powtab = [&](double base) {
    std::vector<double> v(n + 1, 1.0);
    for (std::size_t i = 1; i <= n; ++i) v[i] = v[i - 1] * base;
    return v;
  };
  const auto ppp = powtab(k.p[1][1]), ppm = powtab(k.p[1][0]), pmp = powtab(k.p[0][1]), pmm = powtab(k.p[0][0]);

  JointConsistency out;
  std::vector<double> marg(m, 0.0);
  std::vector<double> ta((n + 1) * (n + 1)), tb((n + 1) * (n + 1));
  long double tv = 0;
  for (std::size_t s = 0; s < m; ++s) {
    const std::size_t ps = plus[s];
    const double as = a_s[s] / static_cast<double>(z);
    // Tables over (|eta|, overlap).
    for (std::size_t pe = 0; pe <= n; ++pe) {
      for (std::size_t o = 0; o <= std::min(ps, pe); ++o) {
        if (ps + pe > n + o) continue;
        ta[pe * (n + 1) + o] = as * a_e[pe] * a_c[ps + pe - 2 * o];
        tb[pe * (n + 1) + o] = nu.prob[s] * ppp[o] * ppm[ps - o] * pmp[pe - o] * pmm[n - ps - pe + o];
      }
    }
    for (std::size_t e = 0; e < m; ++e) {
      const std::size_t idx = plus[e] * (n + 1) + plus[s & e];
      const double a = ta[idx];
      const double d = std::abs(a - tb[idx]);
      out.max_abs = std::max(out.max_abs, d);
      tv += d;
      marg[e] += a;
    }
  }
  out.tv = static_cast<double>(0.5L * tv);
  out.marginal_tv = total_variation(marg, evolve_law(nu.prob, rates, t));
  return out;
}

}  // namespace gibbsflow

#endif  // GIBBSFLOW_TWOLAYER_HPP
