#ifndef GIBBSFLOW_DYNAMICS_HPP
#define GIBBSFLOW_DYNAMICS_HPP

// Spin-flip dynamics on finite boxes.
//
// Two time scales appear. SingleSiteKernel uses the generator with
// relaxation rate 1: each spin flips + -> - at rate (1-eps)/2 and - -> + at
// rate (1+eps)/2. RateSpec rates have baseline c = 1 (product rates
// c(x,sigma) = 1 - eps sigma(x)), which relax twice as fast. The kernel at
// time 2t therefore describes RateSpec dynamics run for time t; see
// kRateToKernelTime.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <ostream>
#include <queue>
#include <string>
#include <vector>

#include "errors.hpp"
#include "interaction.hpp"
#include "io.hpp"
#include "lattice.hpp"
#include "rng.hpp"

namespace gibbsflow {

inline constexpr double kRateToKernelTime = 2.0;

// ---------------------------------------------------------------------------
// Single-site kernel

struct SingleSiteKernel {
  double t = 0;
  double epsilon = 0;
  double p[2][2] = {{1, 0}, {0, 1}};  // p[a][b], index 0 = minus, 1 = plus

  static int idx(int spin) { return spin > 0 ? 1 : 0; }
  double operator()(int from, int to) const { return p[idx(from)][idx(to)]; }
  double det() const { return p[1][1] * p[0][0] - p[1][0] * p[0][1]; }
};

inline SingleSiteKernel single_site_kernel(double t, double epsilon) {
  if (!(t >= 0)) throw InvalidArgument("time must be >= 0");
  if (!(epsilon >= 0 && epsilon < 1)) throw InvalidArgument("bias must lie in [0,1)");
  SingleSiteKernel k;
  k.t = t;
  k.epsilon = epsilon;
  const double pi_plus = 0.5 * (1.0 + epsilon);
  const double pi_minus = 0.5 * (1.0 - epsilon);
  const double moved = -std::expm1(-t);  // 1 - e^{-t}
  k.p[1][0] = pi_minus * moved;
  k.p[0][1] = pi_plus * moved;
  k.p[1][1] = 1.0 - k.p[1][0];
  k.p[0][0] = 1.0 - k.p[0][1];
  return k;
}

// ---------------------------------------------------------------------------
// Rates

using PerturbationFn = std::function<double(Site, const std::int8_t*)>;

class RateSpec {
 public:
  enum class Kind { interaction, product, perturbation };

  /// c(x,sigma) = exp(-(H(sigma^x) - H(sigma))/2) for H built from U_mu on
  /// the box. Reversible with respect to exp(-H).
  static RateSpec from_interaction(const Interaction& u_mu, const Box& box, const Boundary& boundary = FreeBoundary{}) {
    RateSpec r;
    r.kind_ = Kind::interaction;
    r.box_ = box;
    r.range_ = u_mu.range();
    r.model_ = std::make_shared<const CompiledModel>(u_mu, box, boundary);
    double spread = 0;
    for (const auto& c : u_mu.classes()) spread += static_cast<double>(c.arity()) * c.oscillation();
    double f = 0;
    for (double v : u_mu.site_fields()) f = std::max(f, std::abs(v));
    spread += 2.0 * f;
    r.eps_min_ = std::exp(-0.5 * spread);
    r.max_ = std::exp(0.5 * spread);
    return r;
  }

  /// c(x,sigma) = 1 - eps sigma(x): independent flips with stationary
  /// law ((1+eps)/2, (1-eps)/2).
  static RateSpec product(const Box& box, double epsilon) {
    if (!(epsilon >= 0 && epsilon < 1)) throw InvalidArgument("bias must lie in [0,1)");
    RateSpec r;
    r.kind_ = Kind::product;
    r.box_ = box;
    r.epsilon_ = epsilon;
    r.eps_min_ = 1.0 - epsilon;
    r.max_ = 1.0 + epsilon;
    return r;
  }

  /// c(x,sigma) = 1 + eps(x,sigma) with |eps| <= sup_eps < 1 and
  /// eps(x,sigma) = eps(x,-sigma). `range` bounds the distance from x of the
  /// spins eps(x,.) reads.
  static RateSpec perturbation(const Box& box, PerturbationFn eps, double sup_eps, int range) {
    if (!(sup_eps >= 0 && sup_eps < 1)) throw InvalidArgument("perturbation size must lie in [0,1)");
    if (range < 0) throw InvalidArgument("range must be >= 0");
    RateSpec r;
    r.kind_ = Kind::perturbation;
    r.box_ = box;
    r.range_ = range;
    r.eps_ = std::move(eps);
    r.eps_min_ = 1.0 - sup_eps;
    r.max_ = 1.0 + sup_eps;
    // Spin-flip symmetry and the size bound, on every configuration of small
    // boxes and on a fixed pseudo-random sample otherwise.
    const std::size_t n = box.size();
    std::vector<std::int8_t> s(n), neg(n);
    auto check = [&] {
      for (std::size_t i = 0; i < n; ++i) neg[i] = static_cast<std::int8_t>(-s[i]);
      for (Site x = 0; x < n; ++x) {
        const double a = r.eps_(x, s.data());
        if (std::abs(a) > sup_eps * (1 + 1e-12)) throw InvalidArgument("perturbation exceeds its declared bound");
        if (std::abs(a - r.eps_(x, neg.data())) > 1e-12) {
          throw InvalidArgument("perturbation must satisfy eps(x,sigma) = eps(x,-sigma)");
        }
      }
    };
    if (n <= 12) {
      for (std::uint64_t k = 0; k < (std::uint64_t{1} << n); ++k) {
        for (std::size_t i = 0; i < n; ++i) s[i] = ((k >> i) & 1U) ? 1 : -1;
        check();
      }
    } else {
      Engine g = make_engine(0x70657274, 0, 1);
      for (int rep = 0; rep < 256; ++rep) {
        for (auto& v : s) v = uniform01(g) < 0.5 ? 1 : -1;
        check();
      }
    }
    return r;
  }

  Kind kind() const { return kind_; }
  bool is_product() const { return kind_ == Kind::product; }
  double product_epsilon() const {
    if (!is_product()) throw Unsupported("not a product rate specification");
    return epsilon_;
  }
  const Box& box() const { return box_; }
  int range() const { return range_; }
  double min_rate() const { return eps_min_; }
  double max_rate() const { return max_; }

  double rate(const std::int8_t* s, Site x) const {
    switch (kind_) {
      case Kind::interaction: return std::exp(-0.5 * model_->flip_delta(s, x));
      case Kind::product: return 1.0 - epsilon_ * s[x];
      case Kind::perturbation: return 1.0 + eps_(x, s);
    }
    return 0;
  }
  double rate(const Configuration& c, Site x) const {
    box_.check(x);
    return rate(c.spins().data(), x);
  }

  /// Sites whose rate depends on the spin at x, x included.
  std::vector<Site> dependents(Site x) const {
    box_.check(x);
    std::vector<Site> out{x};
    if (kind_ == Kind::interaction) {
      auto nb = model_->neighbours(x);
      out.insert(out.end(), nb.begin(), nb.end());
    } else if (kind_ == Kind::perturbation) {
      const Coords cx = box_.coords(x);
      for (Site y = 0; y < box_.size(); ++y) {
        if (y == x) continue;
        const Coords cy = box_.coords(y);
        int dist = 0;
        for (int k = 0; k < box_.dimension(); ++k) {
          int dd = std::abs(cx[static_cast<std::size_t>(k)] - cy[static_cast<std::size_t>(k)]);
          if (box_.is_torus()) dd = std::min(dd, box_.extent(k) - dd);
          dist = std::max(dist, dd);
        }
        if (dist <= range_) out.push_back(y);
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  Kind kind_ = Kind::product;
  Box box_;
  int range_ = 0;
  double epsilon_ = 0;
  double eps_min_ = 1;
  double max_ = 1;
  std::shared_ptr<const CompiledModel> model_;
  PerturbationFn eps_;
};

// ---------------------------------------------------------------------------
// Exact evolution on small boxes

inline constexpr std::size_t kGeneratorCap = 12;

class FiniteGenerator {
 public:
  explicit FiniteGenerator(const RateSpec& rates, std::size_t cap = kGeneratorCap) : n_(rates.box().size()) {
    if (n_ > cap) {
      throw CapacityExceeded("exact evolution over " + std::to_string(n_) + " sites exceeds the cap of " +
                             std::to_string(cap) + "; use gillespie_simulate");
    }
    states_ = std::size_t{1} << n_;
    rate_.resize(states_ * n_);
    exit_.assign(states_, 0.0);
    std::vector<std::int8_t> s(n_);
    for (std::size_t k = 0; k < states_; ++k) {
      for (std::size_t i = 0; i < n_; ++i) s[i] = ((k >> i) & 1U) ? 1 : -1;
      for (Site x = 0; x < n_; ++x) {
        const double c = rates.rate(s.data(), x);
        rate_[k * n_ + x] = c;
        exit_[k] += c;
      }
      lambda_ = std::max(lambda_, exit_[k]);
    }
  }

  std::size_t sites() const { return n_; }
  std::size_t states() const { return states_; }
  double rate(std::size_t state, Site x) const { return rate_[state * n_ + x]; }
  double uniform_rate() const { return lambda_; }

  /// p -> p P with P = I + Q / lambda.
  void step_forward(const std::vector<double>& p, std::vector<double>& out) const {
    out.assign(states_, 0.0);
    for (std::size_t k = 0; k < states_; ++k) {
      double v = p[k] * (1.0 - exit_[k] / lambda_);
      for (Site x = 0; x < n_; ++x) {
        const std::size_t j = k ^ (std::size_t{1} << x);
        v += p[j] * rate_[j * n_ + x] / lambda_;
      }
      out[k] = v;
    }
  }

  /// f -> P f.
  void step_backward(const std::vector<double>& f, std::vector<double>& out) const {
    out.assign(states_, 0.0);
    for (std::size_t k = 0; k < states_; ++k) {
      double v = f[k] * (1.0 - exit_[k] / lambda_);
      for (Site x = 0; x < n_; ++x) v += rate_[k * n_ + x] * f[k ^ (std::size_t{1} << x)] / lambda_;
      out[k] = v;
    }
  }

 private:
  std::size_t n_ = 0;
  std::size_t states_ = 0;
  std::vector<double> rate_;
  std::vector<double> exit_;
  double lambda_ = 0;
};

inline constexpr double kPoissonTail = 1e-13;

namespace detail {

template <class Step>
std::vector<double> uniformize(const std::vector<double>& v, double lambda, double t, Step&& step) {
  if (!(t >= 0)) throw InvalidArgument("time must be >= 0");
  if (t == 0 || lambda == 0) return v;
  const double lt = lambda * t;
  std::vector<double> acc(v.size(), 0.0), cur = v, next;
  double mass = 0;
  const double kmax = lt + 20.0 * std::sqrt(lt) + 100.0;
  for (std::size_t k = 0;; ++k) {
    const double kk = static_cast<double>(k);
    const double w = std::exp(-lt + kk * std::log(lt) - std::lgamma(kk + 1.0));
    if (w > 0) {
      for (std::size_t i = 0; i < v.size(); ++i) acc[i] += w * cur[i];
    }
    mass += w;
    if ((kk > lt && 1.0 - mass < kPoissonTail) || kk > kmax) break;
    step(cur, next);
    cur.swap(next);
  }
  return acc;
}

}  // namespace detail

/// law -> law exp(t L) by uniformisation.
inline std::vector<double> evolve_law(const std::vector<double>& law, const FiniteGenerator& gen, double t) {
  if (law.size() != gen.states()) throw InvalidArgument("law size does not match the state space");
  return detail::uniformize(law, gen.uniform_rate(), t,
                            [&](const std::vector<double>& a, std::vector<double>& b) { gen.step_forward(a, b); });
}
inline std::vector<double> evolve_law(const std::vector<double>& law, const RateSpec& rates, double t) {
  return evolve_law(law, FiniteGenerator(rates), t);
}

/// f -> exp(t L) f, i.e. (S(t) f)(sigma) = E_sigma f(sigma_t).
inline std::vector<double> apply_semigroup(const std::vector<double>& f, const FiniteGenerator& gen, double t) {
  if (f.size() != gen.states()) throw InvalidArgument("function size does not match the state space");
  return detail::uniformize(f, gen.uniform_rate(), t,
                            [&](const std::vector<double>& a, std::vector<double>& b) { gen.step_backward(a, b); });
}
inline std::vector<double> apply_semigroup(const std::vector<double>& f, const RateSpec& rates, double t) {
  return apply_semigroup(f, FiniteGenerator(rates), t);
}

/// Law of the product of single-site kernels at kernel time 2t, started from `law`.
inline std::vector<double> evolve_product_closed_form(const std::vector<double>& law, std::size_t n, double epsilon,
                                                      double t) {
  const SingleSiteKernel k = single_site_kernel(kRateToKernelTime * t, epsilon);
  std::vector<double> cur = law, next(law.size());
  for (std::size_t x = 0; x < n; ++x) {
    const std::size_t bit = std::size_t{1} << x;
    for (std::size_t s = 0; s < law.size(); ++s) {
      const int from = (s & bit) ? 1 : 0;
      next[s] = cur[s] * k.p[from][from] + cur[s ^ bit] * k.p[1 - from][from];
    }
    cur.swap(next);
  }
  return cur;
}

/// The invariant law of reversible rates, from detailed balance along a
/// spanning tree of the hypercube; every other edge is checked.
inline std::vector<double> reversible_measure(const FiniteGenerator& gen) {
  const std::size_t n = gen.sites();
  const std::size_t m = gen.states();
  std::vector<double> logp(m, std::numeric_limits<double>::quiet_NaN());
  logp[0] = 0;
  std::queue<std::size_t> q;
  q.push(0);
  while (!q.empty()) {
    const std::size_t s = q.front();
    q.pop();
    for (Site x = 0; x < n; ++x) {
      const std::size_t j = s ^ (std::size_t{1} << x);
      const double v = logp[s] + std::log(gen.rate(s, x)) - std::log(gen.rate(j, x));
      if (std::isnan(logp[j])) {
        logp[j] = v;
        q.push(j);
      } else if (std::abs(logp[j] - v) > 1e-9 * std::max(1.0, std::abs(v))) {
        throw Unsupported("rates are not reversible");
      }
    }
  }
  const double mx = *std::max_element(logp.begin(), logp.end());
  std::vector<double> p(m);
  double z = 0;
  for (std::size_t k = 0; k < m; ++k) z += (p[k] = std::exp(logp[k] - mx));
  for (double& v : p) v /= z;
  return p;
}
inline std::vector<double> reversible_measure(const RateSpec& rates) { return reversible_measure(FiniteGenerator(rates)); }

/// (T(s,t) f)(sigma) = E_nu(f(sigma_s) | sigma_t = sigma) for the reversible
/// dynamics started from nu: S(t-s)(f S(s)g) / S(t)g with g = d nu / d mu.
/// T(t,t) is the identity.
inline std::vector<double> backwards_operator(const std::vector<double>& nu, const RateSpec& rates, double s, double t,
                                              const std::vector<double>& f) {
  if (!(s >= 0 && s <= t)) throw InvalidArgument("backwards operator needs 0 <= s <= t");
  FiniteGenerator gen(rates);
  if (nu.size() != gen.states() || f.size() != gen.states()) throw InvalidArgument("table sizes do not match");
  const std::vector<double> mu = reversible_measure(gen);
  std::vector<double> g(nu.size());
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = nu[k] / mu[k];
  std::vector<double> h = apply_semigroup(g, gen, s);
  for (std::size_t k = 0; k < h.size(); ++k) h[k] *= f[k];
  std::vector<double> num = apply_semigroup(h, gen, t - s);
  std::vector<double> den = apply_semigroup(g, gen, t);
  for (std::size_t k = 0; k < num.size(); ++k) num[k] /= den[k];
  return num;
}

inline double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw InvalidArgument("tables differ in size");
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return 0.5 * d;
}

// ---------------------------------------------------------------------------
// Discrete-time approximation

inline constexpr std::size_t kPcaCap = 10;

/// Synchronous update: each spin flips independently with probability
/// c(x,sigma)/n.
class PcaKernel {
 public:
  PcaKernel(const RateSpec& rates, double n, std::size_t cap = kPcaCap) : n_(n), sites_(rates.box().size()) {
    if (!(n > rates.max_rate())) {
      throw InvalidArgument("discretisation n must exceed the maximal rate " + fmt_num(rates.max_rate()));
    }
    if (sites_ > cap) throw CapacityExceeded("discrete-time kernel limited to " + std::to_string(cap) + " sites");
    states_ = std::size_t{1} << sites_;
    flip_.resize(states_ * sites_);
    std::vector<std::int8_t> s(sites_);
    for (std::size_t k = 0; k < states_; ++k) {
      for (std::size_t i = 0; i < sites_; ++i) s[i] = ((k >> i) & 1U) ? 1 : -1;
      for (Site x = 0; x < sites_; ++x) flip_[k * sites_ + x] = rates.rate(s.data(), x) / n;
    }
  }

  double n() const { return n_; }
  std::size_t states() const { return states_; }

  double transition(std::size_t from, std::size_t to) const {
    double p = 1;
    for (Site x = 0; x < sites_; ++x) {
      const double q = flip_[from * sites_ + x];
      p *= (((from ^ to) >> x) & 1U) ? q : 1.0 - q;
    }
    return p;
  }

  /// Row-major one-step matrix.
  std::vector<double> matrix() const {
    std::vector<double> m(states_ * states_);
    for (std::size_t a = 0; a < states_; ++a) {
      for (std::size_t b = 0; b < states_; ++b) m[a * states_ + b] = transition(a, b);
    }
    return m;
  }

  std::vector<double> apply(const std::vector<double>& law, std::size_t steps) const {
    if (law.size() != states_) throw InvalidArgument("law size does not match the state space");
    const std::vector<double> m = matrix();
    std::vector<double> cur = law, next(states_);
    for (std::size_t k = 0; k < steps; ++k) {
      std::fill(next.begin(), next.end(), 0.0);
      for (std::size_t a = 0; a < states_; ++a) {
        if (cur[a] == 0) continue;
        const double* row = &m[a * states_];
        for (std::size_t b = 0; b < states_; ++b) next[b] += cur[a] * row[b];
      }
      cur.swap(next);
    }
    return cur;
  }

 private:
  double n_;
  std::size_t sites_;
  std::size_t states_ = 0;
  std::vector<double> flip_;
};

inline std::size_t pca_steps(double n, double t) { return static_cast<std::size_t>(std::floor(n * t + 1e-9)); }

/// Flip probability of one spin after floor(nt) steps with c = 1.
inline double pca_flip_probability(double n, double t) {
  const double k = static_cast<double>(pca_steps(n, t));
  return 0.5 * (1.0 - std::pow(1.0 - 2.0 / n, k));
}

// ---------------------------------------------------------------------------
// Trajectories

struct FlipEvent {
  double t = 0;
  Site site = 0;
};

struct Trajectory {
  Configuration initial;
  double horizon = 0;
  std::vector<FlipEvent> events;

  std::size_t flips_at(Site y) const {
    return static_cast<std::size_t>(
        std::count_if(events.begin(), events.end(), [y](const FlipEvent& e) { return e.site == y; }));
  }

  /// Configuration at time `time` (right-continuous).
  Configuration at(double time) const {
    Configuration c = initial;
    for (const auto& e : events) {
      if (e.t > time) break;
      c.flip_in_place(e.site);
    }
    return c;
  }
  Configuration final_state() const { return at(horizon); }

  /// One JSON object per line: {"t":..., "site":...}.
  void write_jsonl(std::ostream& os) const {
    for (const auto& e : events) os << "{\"t\":" << fmt_num(e.t) << ",\"site\":" << e.site << "}\n";
  }
};

/// Next-event simulation up to time t. Deterministic for a given seed and
/// stream.
inline Trajectory gillespie_simulate(const Configuration& initial, const RateSpec& rates, double t, std::uint64_t seed,
                                     std::uint64_t stream = 0) {
  if (!(t >= 0)) throw InvalidArgument("horizon must be >= 0");
  if (!(initial.box() == rates.box())) throw InvalidArgument("initial configuration does not match the rate box");
  Trajectory tr;
  tr.initial = initial;
  tr.horizon = t;
  Engine g = make_engine(seed, stream, 0x67696c6c);
  std::vector<std::int8_t> s = initial.spins();
  const std::size_t n = s.size();
  std::vector<double> c(n);
  for (Site x = 0; x < n; ++x) c[x] = rates.rate(s.data(), x);
  std::vector<std::vector<Site>> deps(n);
  for (Site x = 0; x < n; ++x) deps[x] = rates.dependents(x);
  double now = 0;
  while (true) {
    double total = 0;
    for (double v : c) total += v;
    now += exponential(g, total);
    if (now > t) break;
    double u = uniform01(g) * total;
    Site pick = n - 1;
    for (Site x = 0; x < n; ++x) {
      if (u < c[x]) {
        pick = x;
        break;
      }
      u -= c[x];
    }
    s[pick] = static_cast<std::int8_t>(-s[pick]);
    tr.events.push_back({now, pick});
    for (Site y : deps[pick]) c[y] = rates.rate(s.data(), y);
  }
  return tr;
}

/// log Psi_x: the log density of the path with x flipped throughout
/// relative to the path itself,
///   sum_y int log(c(y, w^x_s-)/c(y, w_s-)) dN^y_s + sum_y int (c(y,w_s) - c(y,w^x_s)) ds.
/// Only sites whose rate depends on x contribute.
inline double girsanov_log_weight(const Trajectory& tr, const RateSpec& rates, Site x) {
  const std::vector<Site> dep = rates.dependents(x);
  std::vector<std::int8_t> s = tr.initial.spins();
  std::vector<std::int8_t> sx = s;
  sx[x] = static_cast<std::int8_t>(-sx[x]);
  auto drift = [&] {
    double d = 0;
    for (Site y : dep) d += rates.rate(s.data(), y) - rates.rate(sx.data(), y);
    return d;
  };
  double logw = 0;
  double last = 0;
  for (const auto& e : tr.events) {
    logw += drift() * (e.t - last);
    last = e.t;
    if (std::binary_search(dep.begin(), dep.end(), e.site)) {
      logw += std::log(rates.rate(sx.data(), e.site)) - std::log(rates.rate(s.data(), e.site));
    }
    s[e.site] = static_cast<std::int8_t>(-s[e.site]);
    sx[e.site] = static_cast<std::int8_t>(-sx[e.site]);
  }
  logw += drift() * (tr.horizon - last);
  return logw;
}

inline double girsanov_weight(const Trajectory& tr, const RateSpec& rates, Site x) {
  return std::exp(girsanov_log_weight(tr, rates, x));
}

/// The a-priori bound exp(2Ct) (M/eps)^N on Psi_x, with N the number of
/// flips at sites whose rate depends on x and C = |B|(M - eps)/2 for that
/// set B.
inline double girsanov_bound(const Trajectory& tr, const RateSpec& rates, Site x) {
  const std::vector<Site> dep = rates.dependents(x);
  std::size_t flips = 0;
  for (const auto& e : tr.events) flips += std::binary_search(dep.begin(), dep.end(), e.site) ? 1 : 0;
  const double c = 0.5 * static_cast<double>(dep.size()) * (rates.max_rate() - rates.min_rate());
  return std::exp(2.0 * c * tr.horizon) * std::pow(rates.max_rate() / rates.min_rate(), static_cast<double>(flips));
}

/// Log density of the path law under `rates` relative to independent
/// unit-rate flips from the same initial configuration.
inline double girsanov_log_density(const Trajectory& tr, const RateSpec& rates) {
  std::vector<std::int8_t> s = tr.initial.spins();
  const std::size_t n = s.size();
  auto escape = [&] {
    double d = 0;
    for (Site y = 0; y < n; ++y) d += 1.0 - rates.rate(s.data(), y);
    return d;
  };
  double logd = 0;
  double last = 0;
  for (const auto& e : tr.events) {
    logd += escape() * (e.t - last);
    last = e.t;
    logd += std::log(rates.rate(s.data(), e.site));
    s[e.site] = static_cast<std::int8_t>(-s[e.site]);
  }
  logd += escape() * (tr.horizon - last);
  return logd;
}

}  // namespace gibbsflow

#endif  // GIBBSFLOW_DYNAMICS_HPP
