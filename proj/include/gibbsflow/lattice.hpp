#ifndef GIBBSFLOW_LATTICE_HPP
#define GIBBSFLOW_LATTICE_HPP

// Finite hypercubic boxes, spin configurations and site regions.
//
// Sites are indexed row-major: the first axis varies slowest and the last
// axis fastest, so on a 2x2 box the sites are (0,0), (0,1), (1,0), (1,1).
// Every CSV and enumeration order in the library follows this indexing.
//
// Configurations over small boxes are also identified with integers: bit i
// of the state index is set iff the spin at site i is +1.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace gibbsflow {

using Site = std::size_t;
using Coords = std::vector<int>;

enum class Topology { open, torus };

class Box {
 public:
  Box() = default;

  Box(std::vector<int> extents, Topology topology)
      : extents_(std::move(extents)), topology_(topology) {
    if (extents_.empty()) throw InvalidArgument("box dimension must be >= 1");
    for (int e : extents_) {
      if (e < 1) throw InvalidArgument("box side lengths must be >= 1");
    }
    strides_.assign(extents_.size(), 1);
    for (std::size_t k = extents_.size() - 1; k > 0; --k) {
      strides_[k - 1] = strides_[k] * static_cast<std::size_t>(extents_[k]);
    }
    size_ = strides_[0] * static_cast<std::size_t>(extents_[0]);
  }

  /// Hypercube of side `side` in `dimension` dimensions.
  static Box cube(int dimension, int side, Topology topology) {
    if (dimension < 1) throw InvalidArgument("box dimension must be >= 1");
    return Box(std::vector<int>(static_cast<std::size_t>(dimension), side), topology);
  }

  int dimension() const { return static_cast<int>(extents_.size()); }
  const std::vector<int>& extents() const { return extents_; }
  int extent(int axis) const { return extents_[static_cast<std::size_t>(axis)]; }
  Topology topology() const { return topology_; }
  bool is_torus() const { return topology_ == Topology::torus; }
  std::size_t size() const { return size_; }

  bool contains(const Coords& c) const {
    for (std::size_t k = 0; k < extents_.size(); ++k) {
      if (c[k] < 0 || c[k] >= extents_[k]) return false;
    }
    return true;
  }

  Site index(const Coords& c) const {
    if (c.size() != extents_.size() || !contains(c)) {
      throw InvalidSite("coordinates outside box");
    }
    Site s = 0;
    for (std::size_t k = 0; k < extents_.size(); ++k) {
      s += strides_[k] * static_cast<std::size_t>(c[k]);
    }
    return s;
  }

  Coords coords(Site s) const {
    check(s);
    Coords c(extents_.size());
    for (std::size_t k = 0; k < extents_.size(); ++k) {
      c[k] = static_cast<int>(s / strides_[k]);
      s %= strides_[k];
    }
    return c;
  }

  /// Site reached from `c` by adding `offset`; wraps on a torus, empty when
  /// the result leaves an open box.
  std::optional<Site> shifted(const Coords& c, const Coords& offset) const {
    Site s = 0;
    for (std::size_t k = 0; k < extents_.size(); ++k) {
      int v = c[k] + offset[k];
      if (topology_ == Topology::torus) {
        v %= extents_[k];
        if (v < 0) v += extents_[k];
      } else if (v < 0 || v >= extents_[k]) {
        return std::nullopt;
      }
      s += strides_[k] * static_cast<std::size_t>(v);
    }
    return s;
  }

  /// The site at the centre, coordinate side/2 along every axis.
  Site origin() const {
    Coords c(extents_.size());
    for (std::size_t k = 0; k < extents_.size(); ++k) c[k] = extents_[k] / 2;
    return index(c);
  }

  void check(Site s) const {
    if (s >= size_) {
      throw InvalidSite("site " + std::to_string(s) + " outside box of " +
                        std::to_string(size_) + " sites");
    }
  }

  friend bool operator==(const Box& a, const Box& b) {
    return a.extents_ == b.extents_ && a.topology_ == b.topology_;
  }

 private:
  std::vector<int> extents_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
  Topology topology_ = Topology::open;
};

class Configuration {
 public:
  Configuration() = default;

  Configuration(Box box, std::vector<std::int8_t> spins)
      : box_(std::move(box)), spins_(std::move(spins)) {
    if (spins_.size() != box_.size()) {
      throw InvalidArgument("spin count does not match box size");
    }
    for (auto s : spins_) {
      if (s != 1 && s != -1) throw InvalidArgument("spins must be +1 or -1");
    }
  }

  static Configuration uniform(const Box& box, int spin) {
    return Configuration(box, std::vector<std::int8_t>(box.size(), static_cast<std::int8_t>(spin)));
  }

  static Configuration from_index(const Box& box, std::uint64_t state) {
    if (box.size() > 64) throw CapacityExceeded("state index needs <= 64 sites");
    std::vector<std::int8_t> s(box.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = ((state >> i) & 1U) ? 1 : -1;
    return Configuration(box, std::move(s));
  }

  std::uint64_t index() const {
    if (spins_.size() > 64) throw CapacityExceeded("state index needs <= 64 sites");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < spins_.size(); ++i) {
      if (spins_[i] > 0) v |= (std::uint64_t{1} << i);
    }
    return v;
  }

  const Box& box() const { return box_; }
  std::size_t size() const { return spins_.size(); }
  int operator[](Site x) const { return spins_[x]; }
  int spin(Site x) const {
    box_.check(x);
    return spins_[x];
  }
  const std::vector<std::int8_t>& spins() const { return spins_; }

  void set(Site x, int value) {
    box_.check(x);
    if (value != 1 && value != -1) throw InvalidArgument("spins must be +1 or -1");
    spins_[x] = static_cast<std::int8_t>(value);
  }
  void flip_in_place(Site x) {
    box_.check(x);
    spins_[x] = static_cast<std::int8_t>(-spins_[x]);
  }

  Configuration flipped(Site x) const {
    Configuration c = *this;
    c.flip_in_place(x);
    return c;
  }

  /// tau_v: the configuration whose spin at y is this configuration's spin at y+v.
  Configuration translated(const Coords& v) const {
    if (!box_.is_torus()) throw Unsupported("translation requires a torus");
    Configuration out = *this;
    for (Site y = 0; y < box_.size(); ++y) {
      out.spins_[y] = spins_[*box_.shifted(box_.coords(y), v)];
    }
    return out;
  }

  double magnetization() const {
    double m = 0;
    for (auto s : spins_) m += s;
    return m / static_cast<double>(spins_.size());
  }

  friend bool operator==(const Configuration& a, const Configuration& b) {
    return a.box_ == b.box_ && a.spins_ == b.spins_;
  }

 private:
  Box box_;
  std::vector<std::int8_t> spins_;
};

/// Free function form of the single-site flip sigma^x.
inline Configuration flip(const Configuration& sigma, Site x) { return sigma.flipped(x); }

/// A finite set of sites of a box, kept sorted.
class Region {
 public:
  Region() = default;
  Region(Box box, std::vector<Site> sites) : box_(std::move(box)), sites_(std::move(sites)) {
    for (Site s : sites_) box_.check(s);
    std::sort(sites_.begin(), sites_.end());
    sites_.erase(std::unique(sites_.begin(), sites_.end()), sites_.end());
  }

  static Region all(const Box& box) {
    std::vector<Site> s(box.size());
    std::iota(s.begin(), s.end(), Site{0});
    return Region(box, std::move(s));
  }

  /// Sites whose coordinates lie in [lo, hi) on every axis.
  static Region block(const Box& box, const Coords& lo, const Coords& hi) {
    std::vector<Site> s;
    for (Site x = 0; x < box.size(); ++x) {
      Coords c = box.coords(x);
      bool in = true;
      for (int k = 0; k < box.dimension(); ++k) {
        in = in && c[k] >= lo[k] && c[k] < hi[k];
      }
      if (in) s.push_back(x);
    }
    return Region(box, std::move(s));
  }

  /// outer \ inner.
  static Region annulus(const Region& inner, const Region& outer) {
    if (!(inner.box_ == outer.box_)) throw InvalidArgument("regions live in different boxes");
    std::vector<Site> s;
    std::set_difference(outer.sites_.begin(), outer.sites_.end(), inner.sites_.begin(),
                        inner.sites_.end(), std::back_inserter(s));
    return Region(outer.box_, std::move(s));
  }

  const Box& box() const { return box_; }
  const std::vector<Site>& sites() const { return sites_; }
  std::size_t size() const { return sites_.size(); }
  bool empty() const { return sites_.empty(); }
  bool contains(Site x) const { return std::binary_search(sites_.begin(), sites_.end(), x); }

 private:
  Box box_;
  std::vector<Site> sites_;
};

/// sigma on `region`, zeta everywhere else.
inline Configuration patch(const Configuration& sigma, const Configuration& zeta, const Region& region) {
  if (!(sigma.box() == zeta.box()) || !(sigma.box() == region.box())) {
    throw InvalidArgument("patch operands live in different boxes");
  }
  Configuration out = zeta;
  for (Site x : region.sites()) out.set(x, sigma[x]);
  return out;
}

enum class SpecialKind { all_plus, all_minus, alternating, perturbed_alternating };

/// Parity of the coordinate sum: +1 on even sites, -1 on odd sites.
inline int parity_spin(const Coords& c) {
  int sum = 0;
  for (int v : c) sum += v;
  return (sum % 2 == 0) ? 1 : -1;
}

/// Alternating configuration, (-1)^{sum of coordinates}. Tori need even sides.
inline Configuration alternating(const Box& box) {
  if (box.is_torus()) {
    for (int e : box.extents()) {
      if (e % 2 != 0) throw InvalidArgument("alternating configuration on a torus needs even side lengths");
    }
  }
  std::vector<std::int8_t> s(box.size());
  for (Site x = 0; x < box.size(); ++x) s[x] = static_cast<std::int8_t>(parity_spin(box.coords(x)));
  return Configuration(box, std::move(s));
}

/// Alternating configuration in which every + spin is turned to - independently
/// with probability p. Sites are visited in index order and consume one
/// uniform draw each when they carry a + spin.
inline Configuration perturbed_alternating(const Box& box, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("flip probability must lie in [0,1]");
  Configuration c = alternating(box);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x65746161u};
  std::mt19937_64 gen(seq);
  for (Site x = 0; x < box.size(); ++x) {
    if (c[x] > 0) {
      double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
      if (u < p) c.set(x, -1);
    }
  }
  return c;
}

inline Configuration special_config(SpecialKind kind, const Box& box, double p = 0.0, std::uint64_t seed = 0) {
  switch (kind) {
    case SpecialKind::all_plus: return Configuration::uniform(box, 1);
    case SpecialKind::all_minus: return Configuration::uniform(box, -1);
    case SpecialKind::alternating: return alternating(box);
    case SpecialKind::perturbed_alternating: return perturbed_alternating(box, p, seed);
  }
  throw InvalidArgument("unknown special configuration");
}

inline std::string to_string(SpecialKind k) {
  switch (k) {
    case SpecialKind::all_plus: return "all-plus";
    case SpecialKind::all_minus: return "all-minus";
    case SpecialKind::alternating: return "alternating";
    case SpecialKind::perturbed_alternating: return "perturbed-alternating";
  }
  return "?";
}

inline SpecialKind special_kind_from_string(const std::string& s) {
  if (s == "all-plus") return SpecialKind::all_plus;
  if (s == "all-minus") return SpecialKind::all_minus;
  if (s == "alternating") return SpecialKind::alternating;
  if (s == "perturbed-alternating") return SpecialKind::perturbed_alternating;
  throw InvalidArgument("unknown configuration kind '" + s + "'");
}

/// Copy of `big` restricted to `small`, with the centres of the two boxes
/// aligned. Both boxes must have the same dimension and small must fit.
inline Configuration centered_restriction(const Configuration& big, const Box& small) {
  const Box& b = big.box();
  if (b.dimension() != small.dimension()) throw InvalidArgument("dimension mismatch");
  Coords shift(static_cast<std::size_t>(b.dimension()));
  for (int k = 0; k < b.dimension(); ++k) {
    if (small.extent(k) > b.extent(k)) throw InvalidArgument("restriction box larger than source");
    shift[static_cast<std::size_t>(k)] = b.extent(k) / 2 - small.extent(k) / 2;
  }
  std::vector<std::int8_t> s(small.size());
  for (Site x = 0; x < small.size(); ++x) {
    Coords c = small.coords(x);
    for (int k = 0; k < b.dimension(); ++k) c[static_cast<std::size_t>(k)] += shift[static_cast<std::size_t>(k)];
    s[x] = static_cast<std::int8_t>(big[b.index(c)]);
  }
  return Configuration(small, std::move(s));
}

}  // namespace gibbsflow

#endif  // GIBBSFLOW_LATTICE_HPP
