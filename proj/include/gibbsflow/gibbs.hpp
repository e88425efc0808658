#ifndef GIBBSFLOW_GIBBS_HPP
#define GIBBSFLOW_GIBBS_HPP

// Finite-volume Gibbs measures mu(sigma) ~ exp(-H(sigma)): exact enumeration,
// the 1D transfer matrix, and a heat-bath sampler.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "interaction.hpp"
#include "io.hpp"
#include "lattice.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace gibbsflow {

inline constexpr std::size_t kExactCap = 20;

struct GibbsSpec {
  Interaction interaction;
  Box box;
  Boundary boundary = FreeBoundary{};
};

/// Probability table indexed by state index (bit i set iff spin i is +1).
struct ExactMeasure {
  Box box;
  std::vector<double> prob;
  double log_partition = 0;

  double marginal_plus(Site x) const {
    double p = 0;
    for (std::uint64_t s = 0; s < prob.size(); ++s) {
      if ((s >> x) & 1U) p += prob[s];
    }
    return p;
  }
  double mean_spin(Site x) const { return 2.0 * marginal_plus(x) - 1.0; }
  double magnetization() const {
    double m = 0;
    for (std::uint64_t s = 0; s < prob.size(); ++s) {
      m += prob[s] * (2.0 * std::popcount(s) - static_cast<double>(box.size()));
    }
    return m / static_cast<double>(box.size());
  }
};

/// Spins of state `s` written into `out` (n entries).
inline void decode_state(std::uint64_t s, std::size_t n, std::int8_t* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = ((s >> i) & 1U) ? 1 : -1;
}

/// Energies H(state) for every state of the box, by state index.
inline std::vector<double> enumerate_energies(const CompiledModel& model, std::size_t cap = kExactCap) {
  const std::size_t n = model.box().size();
  if (n > cap) {
    throw CapacityExceeded("exact enumeration over " + std::to_string(n) + " sites exceeds the cap of " +
                           std::to_string(cap) + "; use the Monte Carlo sampler");
  }
  std::vector<double> e(std::size_t{1} << n);
  std::vector<std::int8_t> s(n);
  for (std::uint64_t k = 0; k < e.size(); ++k) {
    decode_state(k, n, s.data());
    e[k] = model.energy(s.data());
  }
  return e;
}

/// exp(-E) normalised; returns log Z.
inline double boltzmann_normalise(const std::vector<double>& energy, std::vector<double>& prob) {
  double emin = energy[0];
  for (double v : energy) emin = std::min(emin, v);
  prob.resize(energy.size());
  double z = 0;
  for (std::size_t k = 0; k < energy.size(); ++k) {
    prob[k] = std::exp(-(energy[k] - emin));
    z += prob[k];
  }
  for (double& p : prob) p /= z;
  return -emin + std::log(z);
}

inline ExactMeasure exact_measure(const GibbsSpec& spec, std::size_t cap = kExactCap) {
  CompiledModel model(spec.interaction, spec.box, spec.boundary);
  ExactMeasure m;
  m.box = spec.box;
  m.log_partition = boltzmann_normalise(enumerate_energies(model, cap), m.prob);
  return m;
}

/// mu(sigma(x) = +1 | sigma = context off x). The value of context at x is
/// ignored.
inline double conditional_prob(const GibbsSpec& spec, Site x, const Configuration& context) {
  if (!(context.box() == spec.box)) throw InvalidArgument("context does not live on the spec box");
  spec.box.check(x);
  CompiledModel model(spec.interaction, spec.box, spec.boundary);
  const double gap = model.plus_minus_gap(context.spins().data(), x);
  return 1.0 / (1.0 + std::exp(gap));
}

// ---------------------------------------------------------------------------
// Transfer matrix for nearest-neighbour chains

enum class ChainBoundary { free, fixed, periodic };

struct TransferResult {
  double log_partition = 0;
  double partition = 0;
  std::vector<double> marginal_plus;
};

/// Partition function and single-site marginals of a d=1, range<=1
/// interaction on a chain of n sites. For fixed boundaries `left` and
/// `right` are the spins just outside the chain.
inline TransferResult transfer_matrix_1d(const Interaction& u, std::size_t n, ChainBoundary bc, int left = 1,
                                         int right = 1) {
  if (u.dimension() != 1) throw Unsupported("transfer matrix needs a one-dimensional interaction");
  if (u.range() > 1) throw Unsupported("transfer matrix needs range <= 1");
  if (n == 0) throw InvalidArgument("chain length must be >= 1");
  std::array<double, 2> single{0.0, 0.0};  // by spin: [minus, plus]
  std::array<double, 4> pair{0.0, 0.0, 0.0, 0.0};
  for (const auto& c : u.classes()) {
    if (c.arity() == 1) {
      single[0] += c.table[0];
      single[1] += c.table[1];
    } else if (c.arity() == 2 && c.offsets[1] == Coords{1}) {
      for (int i = 0; i < 4; ++i) pair[static_cast<std::size_t>(i)] += c.table[static_cast<std::size_t>(i)];
    } else {
      throw Unsupported("transfer matrix supports single-site and nearest-neighbour terms only");
    }
  }
  if (u.has_site_fields() && u.site_fields().size() != n) throw InvalidArgument("site fields do not match chain");
  auto field = [&](std::size_t i) { return u.has_site_fields() ? u.site_fields()[i] : 0.0; };
  // b[a][c]: bond weight for left spin a, right spin c (0 = minus, 1 = plus).
  double b[2][2];
  for (int a = 0; a < 2; ++a) {
    for (int c = 0; c < 2; ++c) b[a][c] = std::exp(-pair[static_cast<std::size_t>(a | (c << 1))]);
  }
  auto w = [&](std::size_t i, int a) {
    const double s = a ? 1.0 : -1.0;
    return std::exp(-single[static_cast<std::size_t>(a)] + field(i) * s);
  };

  TransferResult r;
  r.marginal_plus.assign(n, 0.0);

  if (bc != ChainBoundary::periodic) {
    const int lb = left > 0 ? 1 : 0;
    const int rb = right > 0 ? 1 : 0;
    const bool fixed = bc == ChainBoundary::fixed;
    std::vector<std::array<double, 2>> alpha(n), beta(n);
    std::vector<double> la(n), lb_(n);
    for (int a = 0; a < 2; ++a) alpha[0][static_cast<std::size_t>(a)] = w(0, a) * (fixed ? b[lb][a] : 1.0);
    double acc = 0;
    for (std::size_t i = 0;; ++i) {
      double sum = alpha[i][0] + alpha[i][1];
      alpha[i][0] /= sum;
      alpha[i][1] /= sum;
      acc += std::log(sum);
      la[i] = acc;
      if (i + 1 == n) break;
      for (int c = 0; c < 2; ++c) {
        alpha[i + 1][static_cast<std::size_t>(c)] =
            (alpha[i][0] * b[0][c] + alpha[i][1] * b[1][c]) * w(i + 1, c);
      }
    }
    acc = 0;
    for (std::size_t i = n; i-- > 0;) {
      if (i + 1 == n) {
        for (int a = 0; a < 2; ++a) beta[i][static_cast<std::size_t>(a)] = fixed ? b[a][rb] : 1.0;
      } else {
        for (int a = 0; a < 2; ++a) {
          beta[i][static_cast<std::size_t>(a)] =
              b[a][0] * w(i + 1, 0) * beta[i + 1][0] + b[a][1] * w(i + 1, 1) * beta[i + 1][1];
        }
      }
      double sum = beta[i][0] + beta[i][1];
      beta[i][0] /= sum;
      beta[i][1] /= sum;
      acc += std::log(sum);
      lb_[i] = acc;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double p = alpha[i][1] * beta[i][1];
      const double m = alpha[i][0] * beta[i][0];
      r.marginal_plus[i] = p / (p + m);
    }
    r.log_partition = la[n - 1] + lb_[n - 1] + std::log(alpha[n - 1][0] * beta[n - 1][0] + alpha[n - 1][1] * beta[n - 1][1]);
    r.partition = std::exp(r.log_partition);
    return r;
  }

  // Periodic: Z = Tr prod_i (D_i B), with D_i = diag(w_i).
  using M2 = std::array<double, 4>;  // row-major 2x2
  auto mul = [](const M2& x, const M2& y) {
    return M2{x[0] * y[0] + x[1] * y[2], x[0] * y[1] + x[1] * y[3], x[2] * y[0] + x[3] * y[2],
              x[2] * y[1] + x[3] * y[3]};
  };
  auto step = [&](std::size_t i, int only = -1) {
    M2 m{};
    for (int a = 0; a < 2; ++a) {
      if (only >= 0 && a != only) continue;
      for (int c = 0; c < 2; ++c) m[static_cast<std::size_t>(2 * a + c)] = w(i, a) * b[a][c];
    }
    return m;
  };
  auto normalise = [](M2& m, double& logscale) {
    double s = std::abs(m[0]) + std::abs(m[1]) + std::abs(m[2]) + std::abs(m[3]);
    for (double& v : m) v /= s;
    logscale += std::log(s);
  };
  std::vector<M2> prefix(n + 1), suffix(n + 1);
  std::vector<double> lp(n + 1, 0.0), ls(n + 1, 0.0);
  prefix[0] = M2{1, 0, 0, 1};
  for (std::size_t i = 0; i < n; ++i) {
    prefix[i + 1] = mul(prefix[i], step(i));
    lp[i + 1] = lp[i];
    normalise(prefix[i + 1], lp[i + 1]);
  }
  suffix[n] = M2{1, 0, 0, 1};
  for (std::size_t i = n; i-- > 0;) {
    suffix[i] = mul(step(i), suffix[i + 1]);
    ls[i] = ls[i + 1];
    normalise(suffix[i], ls[i]);
  }
  const M2& full = prefix[n];
  r.log_partition = lp[n] + std::log(full[0] + full[3]);
  r.partition = std::exp(r.log_partition);
  for (std::size_t i = 0; i < n; ++i) {
    M2 plus = mul(mul(prefix[i], step(i, 1)), suffix[i + 1]);
    M2 minus = mul(mul(prefix[i], step(i, 0)), suffix[i + 1]);
    const double p = plus[0] + plus[3];
    const double m = minus[0] + minus[3];
    r.marginal_plus[i] = p / (p + m);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Heat-bath sampler

struct MCParams {
  std::size_t sweeps = 1000;
  std::size_t burn_in = 100;
  std::size_t replicas = 1;
  std::size_t thinning = 1;
  std::uint64_t seed = 0;
  bool random_scan = false;
  unsigned threads = 0;

  void validate() const {
    if (sweeps < 1 || replicas < 1 || thinning < 1) {
      throw InvalidArgument("sweeps, replicas and thinning must be >= 1");
    }
  }
};

inline constexpr std::size_t kBatches = 32;

/// Heat-bath probability of +1 given H(+) - H(-).
inline double heat_bath_plus(double gap) { return 1.0 / (1.0 + std::exp(gap)); }

class GlauberChain {
 public:
  GlauberChain(std::shared_ptr<const CompiledModel> model, const Configuration& start, Engine engine,
               bool random_scan = false)
      : model_(std::move(model)), spins_(start.spins()), engine_(engine), random_scan_(random_scan) {
    if (!(start.box() == model_->box())) throw InvalidArgument("start configuration does not match box");
  }

  void update(Site x) {
    const double p = heat_bath_plus(model_->plus_minus_gap(spins_.data(), x));
    spins_[x] = uniform01(engine_) < p ? 1 : -1;
  }

  /// One sweep: n updates, in site order or at uniformly random sites.
  void sweep() {
    const std::size_t n = spins_.size();
    if (random_scan_) {
      for (std::size_t i = 0; i < n; ++i) {
        update(static_cast<Site>(uniform01(engine_) * static_cast<double>(n)));
      }
    } else {
      for (Site x = 0; x < n; ++x) update(x);
    }
  }

  const std::vector<std::int8_t>& spins() const { return spins_; }
  Configuration configuration() const { return Configuration(model_->box(), spins_); }

 private:
  std::shared_ptr<const CompiledModel> model_;
  std::vector<std::int8_t> spins_;
  Engine engine_;
  bool random_scan_;
};

struct Estimate {
  double mean = 0;
  double stderr_ = 0;
  std::size_t samples = 0;
};

using Observable = std::function<double(const std::int8_t*)>;

inline Observable spin_observable(Site x) {
  return [x](const std::int8_t* s) { return static_cast<double>(s[x]); };
}

inline Observable magnetization_observable(std::size_t n) {
  return [n](const std::int8_t* s) {
    double m = 0;
    for (std::size_t i = 0; i < n; ++i) m += s[i];
    return m / static_cast<double>(n);
  };
}

/// Batch-means summary: each replica series is cut into (up to) 32 equal
/// batches; batch means of all replicas are pooled in replica order.
inline Estimate batch_means(const std::vector<std::vector<double>>& series) {
  std::vector<double> means;
  std::size_t samples = 0;
  for (const auto& s : series) {
    samples += s.size();
    const std::size_t nb = std::min(kBatches, s.size());
    if (nb == 0) continue;
    const std::size_t len = s.size() / nb;
    for (std::size_t b = 0; b < nb; ++b) {
      double acc = 0;
      for (std::size_t i = b * len; i < (b + 1) * len; ++i) acc += s[i];
      means.push_back(acc / static_cast<double>(len));
    }
  }
  Estimate e;
  e.samples = samples;
  if (means.empty()) return e;
  double m = 0;
  for (double v : means) m += v;
  m /= static_cast<double>(means.size());
  e.mean = m;
  if (means.size() > 1) {
    double var = 0;
    for (double v : means) var += (v - m) * (v - m);
    var /= static_cast<double>(means.size() - 1);
    e.stderr_ = std::sqrt(var / static_cast<double>(means.size()));
  }
  return e;
}

/// Observable series of every replica. Replica r uses the stream
/// (params.seed, r, tag).
inline std::vector<std::vector<double>> glauber_series(const GibbsSpec& spec, const MCParams& params,
                                                       const Observable& f,
                                                       const std::optional<Configuration>& start = std::nullopt,
                                                       std::uint32_t tag = 0) {
  params.validate();
  auto model = std::make_shared<const CompiledModel>(spec.interaction, spec.box, spec.boundary);
  const Configuration init = start ? *start : Configuration::uniform(spec.box, 1);
  std::vector<std::vector<double>> series(params.replicas);
  parallel_for(params.replicas, params.threads, [&](std::size_t r) {
    GlauberChain chain(model, init, make_engine(params.seed, r, tag), params.random_scan);
    for (std::size_t i = 0; i < params.burn_in; ++i) chain.sweep();
    auto& out = series[r];
    out.reserve(params.sweeps / params.thinning);
    for (std::size_t i = 1; i <= params.sweeps; ++i) {
      chain.sweep();
      if (i % params.thinning == 0) out.push_back(f(chain.spins().data()));
    }
  });
  return series;
}

/// Mean of f under the Gibbs measure with a batch-means standard error.
/// Single-site volumes are evaluated in closed form.
inline Estimate glauber_sample(const GibbsSpec& spec, const MCParams& params, const Observable& f,
                               const std::optional<Configuration>& start = std::nullopt, std::uint32_t tag = 0) {
  params.validate();
  if (spec.box.size() == 1) {
    CompiledModel model(spec.interaction, spec.box, spec.boundary);
    std::int8_t s = 1;
    const double p = heat_bath_plus(model.plus_minus_gap(&s, 0));
    std::int8_t plus = 1, minus = -1;
    return Estimate{p * f(&plus) + (1.0 - p) * f(&minus), 0.0, 0};
  }
  return batch_means(glauber_series(spec, params, f, start, tag));
}

// ---------------------------------------------------------------------------
// Boundary sensitivity

struct GapRow {
  int side = 0;
  Estimate plus;
  Estimate minus;
  double gap = 0;
  double gap_stderr = 0;
  std::size_t sweeps = 0;
  std::uint64_t seed = 0;
};

using InteractionFactory = std::function<Interaction(const Box&)>;

/// <sigma(origin)> under all-plus and all-minus boundaries on open cubes of
/// the given sides. Each chain starts from the configuration matching its
/// boundary.
inline std::vector<GapRow> two_bc_gap(const InteractionFactory& factory, int dimension, const std::vector<int>& sides,
                                      const MCParams& params, std::uint32_t tag = 0) {
  std::vector<GapRow> rows;
  for (int side : sides) {
    Box box = Box::cube(dimension, side, Topology::open);
    Interaction u = factory(box);
    const int collar = std::max(1, u.range());
    GapRow row;
    row.side = side;
    row.sweeps = params.sweeps;
    row.seed = params.seed;
    for (int bc : {1, -1}) {
      GibbsSpec spec{u, box, uniform_boundary(box, collar, bc)};
      Estimate e = glauber_sample(spec, params, spin_observable(box.origin()), Configuration::uniform(box, bc),
                                  mix_tag(tag, static_cast<std::uint64_t>(side) * 2 + (bc > 0 ? 0 : 1)));
      (bc > 0 ? row.plus : row.minus) = e;
    }
    row.gap = row.plus.mean - row.minus.mean;
    row.gap_stderr = std::hypot(row.plus.stderr_, row.minus.stderr_);
    rows.push_back(row);
  }
  return rows;
}

/// CSV with columns volume, boundary, observable, mean, stderr, sweeps, seed.
inline void write_gap_csv(std::ostream& os, const std::vector<GapRow>& rows, const std::string& observable = "spin@origin") {
  CsvWriter w(os);
  w.header({"volume", "boundary", "observable", "mean", "stderr", "sweeps", "seed"});
  for (const auto& r : rows) {
    for (int bc : {1, -1}) {
      const Estimate& e = bc > 0 ? r.plus : r.minus;
      w.field(r.side).field(bc > 0 ? "plus" : "minus").field(observable).field(e.mean).field(e.stderr_);
      w.field(r.sweeps).field(r.seed);
      w.end();
    }
  }
}

}  // namespace gibbsflow

#endif  // GIBBSFLOW_GIBBS_HPP
