#ifndef GIBBSFLOW_INTERACTION_HPP
#define GIBBSFLOW_INTERACTION_HPP

// Finite-range interactions and the Hamiltonians built from them.
//
// An interaction is a list of translation classes plus optional per-site
// fields. A translation class is an offset pattern A0 (containing the
// origin) together with the coupling U(A0, .) tabulated over {-1,+1}^A0;
// the class contributes U(a + A0, .) for every anchor a. Tables are indexed
// by bit masks: bit i is set iff the spin at offsets[i] is +1.
//
// Site fields f_x add the single-site energy -f_x sigma(x); they carry the
// non-translation-invariant part of constrained Hamiltonians.
//
// Probabilities are proportional to exp(-H).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "lattice.hpp"

namespace gibbsflow {

inline constexpr std::size_t kMaxClassSize = 6;

struct TranslationClass {
  std::vector<Coords> offsets;
  std::vector<double> table;

  std::size_t arity() const { return offsets.size(); }

  double oscillation() const {
    auto [lo, hi] = std::minmax_element(table.begin(), table.end());
    return *hi - *lo;
  }
  double sup_abs() const {
    double m = 0;
    for (double v : table) m = std::max(m, std::abs(v));
    return m;
  }
  bool is_zero() const {
    return std::all_of(table.begin(), table.end(), [](double v) { return v == 0.0; });
  }
  /// Chebyshev diameter of the offset pattern.
  int diameter() const {
    int d = 0;
    for (const auto& a : offsets) {
      for (const auto& b : offsets) {
        for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a[k] - b[k]));
      }
    }
    return d;
  }
};

namespace detail {

// Translate so the lexicographically smallest offset is the origin, sort the
// offsets and permute the table to match.
inline TranslationClass canonical(const TranslationClass& in) {
  const std::size_t k = in.offsets.size();
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) { return in.offsets[a] < in.offsets[b]; });
  TranslationClass out;
  const Coords base = in.offsets[perm[0]];
  for (std::size_t j = 0; j < k; ++j) {
    Coords c = in.offsets[perm[j]];
    for (std::size_t a = 0; a < c.size(); ++a) c[a] -= base[a];
    out.offsets.push_back(std::move(c));
  }
  out.table.assign(in.table.size(), 0.0);
  for (std::size_t idx = 0; idx < in.table.size(); ++idx) {
    std::size_t old_idx = 0;
    for (std::size_t j = 0; j < k; ++j) {
      if ((idx >> j) & 1U) old_idx |= (std::size_t{1} << perm[j]);
    }
    out.table[idx] = in.table[old_idx];
  }
  return out;
}

}  // namespace detail

class Interaction {
 public:
  Interaction() = default;

  Interaction(int dimension, std::vector<TranslationClass> classes, std::vector<double> site_fields = {},
              int declared_range = 0)
      : dimension_(dimension), site_fields_(std::move(site_fields)) {
    if (dimension < 1) throw InvalidArgument("interaction dimension must be >= 1");
    std::map<std::vector<Coords>, std::vector<double>> merged;
    for (const auto& c : classes) {
      if (c.offsets.empty() || c.offsets.size() > kMaxClassSize) {
        throw InvalidArgument("class support must have between 1 and 6 sites");
      }
      if (c.table.size() != (std::size_t{1} << c.offsets.size())) {
        throw InvalidArgument("coupling table must have 2^|A0| entries");
      }
      bool has_origin = false;
      for (const auto& o : c.offsets) {
        if (static_cast<int>(o.size()) != dimension) throw InvalidArgument("offset dimension mismatch");
        has_origin = has_origin || std::all_of(o.begin(), o.end(), [](int v) { return v == 0; });
      }
      if (!has_origin) throw InvalidArgument("class support must contain the origin");
      std::vector<Coords> sorted = c.offsets;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw InvalidArgument("class support has repeated offsets");
      }
      TranslationClass can = detail::canonical(c);
      auto [it, inserted] = merged.try_emplace(can.offsets, can.table);
      if (!inserted) {
        for (std::size_t i = 0; i < can.table.size(); ++i) it->second[i] += can.table[i];
      }
    }
    for (auto& [off, tab] : merged) classes_.push_back(TranslationClass{off, tab});
    range_ = declared_range;
    for (const auto& c : classes_) range_ = std::max(range_, c.diameter());
  }

  static Interaction zero(int dimension) { return Interaction(dimension, {}); }

  int dimension() const { return dimension_; }
  int range() const { return range_; }
  const std::vector<TranslationClass>& classes() const { return classes_; }
  const std::vector<double>& site_fields() const { return site_fields_; }
  bool has_site_fields() const { return !site_fields_.empty(); }

  bool site_fields_constant() const {
    return std::all_of(site_fields_.begin(), site_fields_.end(),
                       [&](double f) { return f == site_fields_.front(); });
  }

  bool is_zero() const {
    return std::all_of(classes_.begin(), classes_.end(), [](const auto& c) { return c.is_zero(); }) &&
           std::all_of(site_fields_.begin(), site_fields_.end(), [](double f) { return f == 0.0; });
  }

  /// True when no class couples two or more sites.
  bool is_single_site() const {
    return std::all_of(classes_.begin(), classes_.end(),
                       [](const auto& c) { return c.arity() == 1 || c.is_zero(); });
  }

  Interaction with_site_fields(std::vector<double> fields) const {
    Interaction out = *this;
    out.site_fields_ = std::move(fields);
    return out;
  }
  Interaction without_site_fields() const { return with_site_fields({}); }

  Interaction scaled(double factor) const {
    Interaction out = *this;
    for (auto& c : out.classes_) {
      for (double& v : c.table) v *= factor;
    }
    for (double& f : out.site_fields_) f *= factor;
    return out;
  }

  friend Interaction operator+(const Interaction& a, const Interaction& b) {
    if (a.dimension_ != b.dimension_) throw InvalidArgument("interaction dimensions differ");
    std::vector<TranslationClass> cls = a.classes_;
    cls.insert(cls.end(), b.classes_.begin(), b.classes_.end());
    std::vector<double> fields;
    if (a.has_site_fields() && b.has_site_fields()) {
      if (a.site_fields_.size() != b.site_fields_.size()) throw InvalidArgument("site field sizes differ");
      fields = a.site_fields_;
      for (std::size_t i = 0; i < fields.size(); ++i) fields[i] += b.site_fields_[i];
    } else {
      fields = a.has_site_fields() ? a.site_fields_ : b.site_fields_;
    }
    return Interaction(a.dimension_, std::move(cls), std::move(fields), std::max(a.range_, b.range_));
  }
  friend Interaction operator-(const Interaction& a, const Interaction& b) { return a + b.scaled(-1.0); }

 private:
  int dimension_ = 1;
  int range_ = 0;
  std::vector<TranslationClass> classes_;
  std::vector<double> site_fields_;
};

/// Nearest-neighbour Ising interaction: -beta sigma(x)sigma(y) per bond and
/// -h sigma(x) per site.
inline Interaction ising_interaction(double beta, double h, int dimension) {
  if (dimension < 1) throw InvalidArgument("dimension must be >= 1");
  std::vector<TranslationClass> cls;
  for (int k = 0; k < dimension; ++k) {
    Coords o(static_cast<std::size_t>(dimension), 0);
    Coords e = o;
    e[static_cast<std::size_t>(k)] = 1;
    cls.push_back({{o, e}, {-beta, beta, beta, -beta}});
  }
  cls.push_back({{Coords(static_cast<std::size_t>(dimension), 0)}, {h, -h}});
  return Interaction(dimension, std::move(cls));
}

/// U_mu - U_nu, the interaction of the difference Hamiltonian H^{mu,nu}.
inline Interaction difference_interaction(const Interaction& u_mu, const Interaction& u_nu) {
  return u_mu - u_nu;
}

// ---------------------------------------------------------------------------
// Boundary conditions

struct FreeBoundary {};

/// Spins outside an open box. `outer` lives on the box enlarged by `collar`
/// sites on every side; its central part is ignored.
struct FixedBoundary {
  Configuration outer;
  int collar = 0;
};

using Boundary = std::variant<FreeBoundary, FixedBoundary>;

inline FixedBoundary uniform_boundary(const Box& inner, int collar, int spin) {
  std::vector<int> ext = inner.extents();
  for (int& e : ext) e += 2 * collar;
  return FixedBoundary{Configuration::uniform(Box(ext, Topology::open), spin), collar};
}

/// Outer configuration built from a function of the coordinates relative to
/// the inner box (coordinates outside [0, side) denote collar sites).
template <class Fn>
FixedBoundary boundary_from(const Box& inner, int collar, Fn&& spin_at) {
  std::vector<int> ext = inner.extents();
  for (int& e : ext) e += 2 * collar;
  Box outer(ext, Topology::open);
  std::vector<std::int8_t> s(outer.size());
  for (Site y = 0; y < outer.size(); ++y) {
    Coords c = outer.coords(y);
    for (int& v : c) v -= collar;
    s[y] = static_cast<std::int8_t>(spin_at(c));
  }
  return FixedBoundary{Configuration(outer, std::move(s)), collar};
}

// ---------------------------------------------------------------------------
// Compiled local model: the terms of an interaction placed on a concrete box
// with a concrete boundary condition.

struct CompiledTerm {
  std::uint32_t table = 0;  // offset into CompiledModel::tables_
  std::uint8_t n_var = 0;
  std::array<std::uint32_t, kMaxClassSize> site{};
  std::array<std::uint8_t, kMaxClassSize> bit{};
  std::uint32_t fixed_bits = 0;  // bits contributed by boundary spins
};

class CompiledModel {
 public:
  CompiledModel(const Interaction& u, const Box& box, const Boundary& boundary = FreeBoundary{}) : box_(box) {
    if (u.dimension() != box.dimension()) throw InvalidArgument("interaction and box dimensions differ");
    const FixedBoundary* fixed = std::get_if<FixedBoundary>(&boundary);
    if (fixed != nullptr) {
      if (box.is_torus()) throw InvalidArgument("a torus takes no boundary condition");
      if (fixed->collar < u.range()) {
        throw InvalidArgument("boundary collar of width " + std::to_string(fixed->collar) +
                              " is thinner than the required width " + std::to_string(u.range()));
      }
      for (int k = 0; k < box.dimension(); ++k) {
        if (fixed->outer.box().extent(k) != box.extent(k) + 2 * fixed->collar) {
          throw InvalidArgument("boundary configuration does not match box plus collar");
        }
      }
    }
    if (u.has_site_fields()) {
      if (u.site_fields().size() != box.size()) throw InvalidArgument("site fields do not match box size");
      fields_ = u.site_fields();
    } else {
      fields_.assign(box.size(), 0.0);
    }
    const int d = box.dimension();
    const int r = u.range();
    for (const auto& cls : u.classes()) {
      const auto base = static_cast<std::uint32_t>(tables_.size());
      tables_.insert(tables_.end(), cls.table.begin(), cls.table.end());
      // Anchors range over the box, widened by the range when a fixed
      // boundary lets terms stick out.
      const int pad = (fixed != nullptr) ? r : 0;
      Coords lo(static_cast<std::size_t>(d), -pad);
      Coords hi(static_cast<std::size_t>(d));
      for (int k = 0; k < d; ++k) hi[static_cast<std::size_t>(k)] = box.extent(k) + pad;
      Coords a = lo;
      while (true) {
        place(cls, base, a, fixed);
        int k = d - 1;
        while (k >= 0) {
          auto kk = static_cast<std::size_t>(k);
          if (++a[kk] < hi[kk]) break;
          a[kk] = lo[kk];
          --k;
        }
        if (k < 0) break;
      }
    }
    // Per-site term lists (a term listed once even if a site repeats in it).
    std::vector<std::vector<std::uint32_t>> per(box.size());
    for (std::uint32_t t = 0; t < terms_.size(); ++t) {
      const auto& term = terms_[t];
      for (std::uint8_t j = 0; j < term.n_var; ++j) {
        auto& lst = per[term.site[j]];
        if (lst.empty() || lst.back() != t) lst.push_back(t);
      }
    }
    offsets_.assign(box.size() + 1, 0);
    for (Site x = 0; x < box.size(); ++x) offsets_[x + 1] = offsets_[x] + per[x].size();
    for (auto& lst : per) site_terms_.insert(site_terms_.end(), lst.begin(), lst.end());
  }

  const Box& box() const { return box_; }
  const std::vector<CompiledTerm>& terms() const { return terms_; }
  const std::vector<double>& fields() const { return fields_; }

  double term_value(const CompiledTerm& t, const std::int8_t* s) const {
    std::uint32_t idx = t.fixed_bits;
    for (std::uint8_t j = 0; j < t.n_var; ++j) {
      if (s[t.site[j]] > 0) idx |= (1U << t.bit[j]);
    }
    return tables_[t.table + idx];
  }

  double energy(const Configuration& c) const { return energy(c.spins().data()); }

  double energy(const std::int8_t* s) const {
    double e = 0;
    for (const auto& t : terms_) e += term_value(t, s);
    for (Site x = 0; x < fields_.size(); ++x) e -= fields_[x] * s[x];
    return e;
  }

  /// H with sigma(x)=+1 minus H with sigma(x)=-1, other spins as in s.
  double plus_minus_gap(const std::int8_t* s, Site x) const {
    double e = 0;
    for (std::size_t i = offsets_[x]; i < offsets_[x + 1]; ++i) {
      const auto& t = terms_[site_terms_[i]];
      std::uint32_t base = t.fixed_bits;
      std::uint32_t xb = 0;
      for (std::uint8_t j = 0; j < t.n_var; ++j) {
        if (t.site[j] == x) {
          xb |= (1U << t.bit[j]);
        } else if (s[t.site[j]] > 0) {
          base |= (1U << t.bit[j]);
        }
      }
      e += tables_[t.table + (base | xb)] - tables_[t.table + base];
    }
    return e - 2.0 * fields_[x];
  }

  /// H(sigma^x) - H(sigma) from the terms containing x only.
  double flip_delta(const std::int8_t* s, Site x) const {
    const double g = plus_minus_gap(s, x);
    return s[x] > 0 ? -g : g;
  }

  /// Sites sharing at least one term with x, excluding x.
  std::vector<Site> neighbours(Site x) const {
    std::vector<Site> out;
    for (std::size_t i = offsets_[x]; i < offsets_[x + 1]; ++i) {
      const auto& t = terms_[site_terms_[i]];
      for (std::uint8_t j = 0; j < t.n_var; ++j) {
        if (t.site[j] != x) out.push_back(t.site[j]);
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 private:
  void place(const TranslationClass& cls, std::uint32_t base, const Coords& anchor, const FixedBoundary* fixed) {
    CompiledTerm term;
    term.table = base;
    bool any_inside = false;
    bool all_inside = true;
    bool unresolved = false;
    for (std::size_t j = 0; j < cls.offsets.size(); ++j) {
      auto s = box_.shifted(anchor, cls.offsets[j]);
      if (s.has_value()) {
        any_inside = true;
        term.site[term.n_var] = static_cast<std::uint32_t>(*s);
        term.bit[term.n_var] = static_cast<std::uint8_t>(j);
        ++term.n_var;
      } else {
        all_inside = false;
        if (fixed != nullptr) {
          Coords c = anchor;
          for (std::size_t k = 0; k < c.size(); ++k) c[k] += cls.offsets[j][k] + fixed->collar;
          if (!fixed->outer.box().contains(c)) {
            unresolved = true;
          } else if (fixed->outer[fixed->outer.box().index(c)] > 0) {
            term.fixed_bits |= (1U << j);
          }
        }
      }
    }
    const bool keep = (fixed != nullptr) ? any_inside : all_inside;
    if (keep && unresolved) throw InvalidArgument("boundary collar too thin");
    if (keep) terms_.push_back(term);
  }

  Box box_;
  std::vector<double> tables_;
  std::vector<CompiledTerm> terms_;
  std::vector<double> fields_;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> site_terms_;
};

/// Free-boundary Hamiltonian on an open box (sum over A inside the box), or
/// the periodic Hamiltonian on a torus.
inline double hamiltonian(const Interaction& u, const Configuration& sigma) {
  return CompiledModel(u, sigma.box()).energy(sigma);
}

/// Hamiltonian with boundary condition: sum over A meeting the box, spins
/// outside the box read from the boundary.
inline double hamiltonian_bc(const Interaction& u, const Configuration& sigma, const Boundary& boundary) {
  return CompiledModel(u, sigma.box(), boundary).energy(sigma);
}

/// H(sigma^x) - H(sigma), from the terms containing x.
inline double energy_delta(const Interaction& u, const Configuration& sigma, Site x,
                           const Boundary& boundary = FreeBoundary{}) {
  sigma.box().check(x);
  CompiledModel m(u, sigma.box(), boundary);
  return m.flip_delta(sigma.spins().data(), x);
}

// ---------------------------------------------------------------------------
// Norms

struct ClassContribution {
  std::vector<Coords> offsets;
  double value = 0;
};

struct DobrushinReport {
  double norm = 0;
  bool satisfied = true;
  std::vector<ClassContribution> per_class;
};

/// sup_x sum_{A containing x} (|A|-1) sup |U(A,s) - U(A,s')|, evaluated
/// exactly over the translation classes. Single-site terms contribute zero.
inline DobrushinReport dobrushin_norm(const Interaction& u) {
  if (u.has_site_fields() && !u.site_fields_constant()) {
    throw InvalidArgument("Dobrushin norm needs translation-invariant site fields");
  }
  DobrushinReport rep;
  for (const auto& c : u.classes()) {
    const double k = static_cast<double>(c.arity());
    const double v = k * (k - 1.0) * c.oscillation();
    rep.per_class.push_back({c.offsets, v});
    rep.norm += v;
  }
  rep.satisfied = rep.norm < 2.0;
  return rep;
}

/// sum_{A containing x} sup |U(A,.)|, maximised over x.
inline double interaction_norm(const Interaction& u) {
  double n = 0;
  for (const auto& c : u.classes()) n += static_cast<double>(c.arity()) * c.sup_abs();
  double f = 0;
  for (double v : u.site_fields()) f = std::max(f, std::abs(v));
  return n + f;
}

/// Upper bound on sup_Lambda sup_sigma |H_Lambda(sigma)| / |Lambda|: one
/// term per class per site plus the largest site field.
inline double energy_per_site_bound(const Interaction& u) {
  double n = 0;
  for (const auto& c : u.classes()) n += c.sup_abs();
  double f = 0;
  for (double v : u.site_fields()) f = std::max(f, std::abs(v));
  return n + f;
}

// ---------------------------------------------------------------------------
// JSON: {"dimension", "range", "classes": [{"offsets", "table"}], "site_fields"}
// in that key order.

inline nlohmann::ordered_json to_json(const Interaction& u) {
  nlohmann::ordered_json j;
  j["dimension"] = u.dimension();
  j["range"] = u.range();
  j["classes"] = nlohmann::ordered_json::array();
  for (const auto& c : u.classes()) {
    nlohmann::ordered_json cj;
    cj["offsets"] = c.offsets;
    cj["table"] = c.table;
    j["classes"].push_back(std::move(cj));
  }
  j["site_fields"] = u.site_fields();
  return j;
}

inline Interaction interaction_from_json(const nlohmann::ordered_json& j) {
  try {
    std::vector<TranslationClass> cls;
    for (const auto& cj : j.at("classes")) {
      cls.push_back({cj.at("offsets").get<std::vector<Coords>>(), cj.at("table").get<std::vector<double>>()});
    }
    std::vector<double> fields;
    if (j.contains("site_fields")) fields = j.at("site_fields").get<std::vector<double>>();
    return Interaction(j.at("dimension").get<int>(), std::move(cls), std::move(fields), j.value("range", 0));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed interaction document: ") + e.what());
  }
}

}  // namespace gibbsflow

#endif  // GIBBSFLOW_INTERACTION_HPP
