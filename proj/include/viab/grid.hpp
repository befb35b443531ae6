// Copyright 2026 The viab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Uniform square grid over (X, Y, phi) times a finite mode axis, and a
// bit-packed membership set over it.
//
// Grid points along each continuous axis sit at lo + 2 r i. The cell of a
// grid point is the closed infinity-norm ball of radius r around it, so
// neighbouring cells share their faces. The phi axis always starts at 0 and
// wraps with period 2 pi, which forces r = pi / n_phi.

#ifndef VIAB_GRID_HPP_
#define VIAB_GRID_HPP_

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "viab/angles.hpp"
#include "viab/state.hpp"

namespace viab {

// A run of consecutive indices along one axis. On a wrapping axis the run
// continues modulo the axis count.
struct AxisSpan {
  std::size_t first = 0;
  std::size_t len = 0;
};

// One axis of the grid.
struct AxisGrid {
  double lo = 0.0;
  double r = 0.5;
  std::size_t count = 1;
  bool wrap = false;

  double Hi() const { return lo + 2.0 * r * static_cast<double>(count - 1); }
  double Center(std::size_t i) const {
    return lo + 2.0 * r * static_cast<double>(i);
  }

  // Distance from p to the centre of index i, circular on wrapping axes.
  double Distance(double p, std::size_t i) const {
    if (wrap) return std::abs(WrapPi(p - Center(i)));
    return std::abs(p - Center(i));
  }

  // All indices whose centre lies within `radius` of p. Returns nullopt when
  // p is outside the covered interval [lo - r, hi + r] of a non-wrapping
  // axis (NaN included).
  std::optional<AxisSpan> Span(double p, double radius) const {
    const double h = 2.0 * r;
    if (wrap) {
      if (!std::isfinite(p)) return std::nullopt;
      const double u = WrapTwoPi(p - lo);
      auto ok = [&](long k) {
        return std::abs(u - h * static_cast<double>(k)) <= radius;
      };
      long a = static_cast<long>(std::ceil((u - radius) / h));
      long b = static_cast<long>(std::floor((u + radius) / h));
      FixUp(ok, a, b);
      if (a > b) {
        a = b = std::lround(u / h);
      }
      const long n = static_cast<long>(count);
      const long len = b - a + 1;
      if (len >= n) return AxisSpan{0, count};
      const long first = ((a % n) + n) % n;
      return AxisSpan{static_cast<std::size_t>(first),
                      static_cast<std::size_t>(len)};
    }
    if (!(p >= lo - r && p <= Hi() + r)) return std::nullopt;
    auto ok = [&](long k) {
      return std::abs(p - (lo + h * static_cast<double>(k))) <= radius;
    };
    const double t = (p - lo) / h;
    long a = static_cast<long>(std::ceil(t - radius / h));
    long b = static_cast<long>(std::floor(t + radius / h));
    FixUp(ok, a, b);
    a = std::max(a, 0L);
    b = std::min(b, static_cast<long>(count) - 1);
    if (a > b) {
      // Only reachable through rounding exactly on a cell face.
      a = b = std::clamp(std::lround(t), 0L, static_cast<long>(count) - 1);
    }
    return AxisSpan{static_cast<std::size_t>(a),
                    static_cast<std::size_t>(b - a + 1)};
  }

  std::size_t Index(const AxisSpan& s, std::size_t k) const {
    std::size_t i = s.first + k;
    if (wrap && i >= count) i -= count;
    return i;
  }

 private:
  template <typename Ok>
  static void FixUp(const Ok& ok, long& a, long& b) {
    while (ok(a - 1)) --a;
    while (a <= b && !ok(a)) ++a;
    while (ok(b + 1)) ++b;
    while (b >= a && !ok(b)) --b;
  }
};

struct GridIndex {
  std::size_t ix = 0;
  std::size_t iy = 0;
  std::size_t iphi = 0;
  std::size_t q = 0;

  friend bool operator==(const GridIndex&, const GridIndex&) = default;
  friend auto operator<=>(const GridIndex&, const GridIndex&) = default;
};

// A product of axis spans at one mode: the set of grid indices within an
// infinity-norm ball.
struct CellBox {
  std::array<AxisSpan, 3> axes{};
  std::size_t q = 0;

  std::size_t Size() const { return axes[0].len * axes[1].len * axes[2].len; }
};

class GridSpec {
 public:
  GridSpec() = default;

  // Explicit construction. The phi axis gets n_phi points over [0, 2 pi),
  // which fixes r = pi / n_phi for all axes.
  static GridSpec FromCounts(double x_lo, double y_lo, std::size_t nx,
                             std::size_t ny, std::size_t n_phi,
                             std::size_t n_modes) {
    GridSpec s;
    if (n_phi == 0) throw std::invalid_argument("grid: n_phi must be > 0");
    const double r = kPi / static_cast<double>(n_phi);
    s.axes_[0] = AxisGrid{x_lo, r, nx, false};
    s.axes_[1] = AxisGrid{y_lo, r, ny, false};
    s.axes_[2] = AxisGrid{0.0, r, n_phi, true};
    s.n_modes_ = n_modes;
    s.Validate();
    return s;
  }

  // Smallest grid with n_phi heading points whose covered box contains
  // [x_lo, x_hi] x [y_lo, y_hi]. The first point sits at (x_lo, y_lo).
  static GridSpec Covering(double x_lo, double x_hi, double y_lo, double y_hi,
                           std::size_t n_phi, std::size_t n_modes) {
    if (!(x_hi > x_lo) || !(y_hi > y_lo)) {
      throw std::invalid_argument("grid: empty bounding box");
    }
    const double h = 2.0 * kPi / static_cast<double>(n_phi);
    const auto nx = static_cast<std::size_t>(std::ceil((x_hi - x_lo) / h)) + 1;
    const auto ny = static_cast<std::size_t>(std::ceil((y_hi - y_lo) / h)) + 1;
    return FromCounts(x_lo, y_lo, nx, ny, n_phi, n_modes);
  }

  void Validate() const {
    for (const auto& a : axes_) {
      if (a.count == 0) throw std::invalid_argument("grid: empty axis");
      if (!(a.r > 0.0) || !std::isfinite(a.r)) {
        throw std::invalid_argument("grid: radius must be positive");
      }
      if (!std::isfinite(a.lo)) throw std::invalid_argument("grid: bad bound");
    }
    if (n_modes_ == 0) throw std::invalid_argument("grid: no modes");
    if (axes_[0].r != axes_[1].r || axes_[1].r != axes_[2].r) {
      throw std::invalid_argument("grid: spacing must be equal on all axes");
    }
    const double period = 2.0 * axes_[2].r * static_cast<double>(axes_[2].count);
    if (std::abs(period - kTwoPi) > 1e-9 || axes_[2].lo != 0.0) {
      throw std::invalid_argument("grid: phi axis must tile [0, 2pi)");
    }
  }

  const AxisGrid& axis(std::size_t j) const { return axes_[j]; }
  double r() const { return axes_[0].r; }
  double spacing() const { return 2.0 * axes_[0].r; }
  std::size_t nx() const { return axes_[0].count; }
  std::size_t ny() const { return axes_[1].count; }
  std::size_t nphi() const { return axes_[2].count; }
  std::size_t n_modes() const { return n_modes_; }

  // Number of (ix, iy, iphi) points, i.e. the size of one mode slice.
  std::size_t slice_size() const { return nx() * ny() * nphi(); }
  std::size_t size() const { return slice_size() * n_modes_; }

  bool Valid(const GridIndex& g) const {
    return g.ix < nx() && g.iy < ny() && g.iphi < nphi() && g.q < n_modes_;
  }

  // Row-major with q slowest and ix fastest.
  std::size_t Flat(const GridIndex& g) const {
    return ((g.q * nphi() + g.iphi) * ny() + g.iy) * nx() + g.ix;
  }
  std::size_t SliceFlat(std::size_t ix, std::size_t iy, std::size_t iphi) const {
    return (iphi * ny() + iy) * nx() + ix;
  }
  GridIndex Unflat(std::size_t f) const {
    GridIndex g;
    g.ix = f % nx();
    f /= nx();
    g.iy = f % ny();
    f /= ny();
    g.iphi = f % nphi();
    g.q = f / nphi();
    return g;
  }

  PPState Center(const GridIndex& g) const {
    if (!Valid(g)) throw std::out_of_range("grid: invalid index");
    return PPState{axes_[0].Center(g.ix), axes_[1].Center(g.iy),
                   axes_[2].Center(g.iphi), g.q};
  }

  // Grid indices within infinity distance `radius` of p at mode p.q;
  // nullopt when (X, Y) is outside the covered box or q is out of range.
  std::optional<CellBox> Ball(const PPState& p, double radius) const {
    if (p.q >= n_modes_) return std::nullopt;
    CellBox box;
    box.q = p.q;
    const double coords[3] = {p.x, p.y, p.phi};
    for (std::size_t j = 0; j < 3; ++j) {
      auto s = axes_[j].Span(coords[j], radius);
      if (!s) return std::nullopt;
      box.axes[j] = *s;
    }
    return box;
  }

  // All grid indices whose cell contains p.
  std::optional<CellBox> Snap(const PPState& p) const { return Ball(p, r()); }

  // Infinity distance between p and the centre of g over (X, Y, phi).
  double Distance(const PPState& p, const GridIndex& g) const {
    return std::max({axes_[0].Distance(p.x, g.ix), axes_[1].Distance(p.y, g.iy),
                     axes_[2].Distance(p.phi, g.iphi)});
  }

  template <typename F>
  void ForEach(const CellBox& box, F&& f) const {
    for (std::size_t c = 0; c < box.axes[2].len; ++c) {
      const std::size_t iphi = axes_[2].Index(box.axes[2], c);
      for (std::size_t b = 0; b < box.axes[1].len; ++b) {
        const std::size_t iy = box.axes[1].first + b;
        for (std::size_t a = 0; a < box.axes[0].len; ++a) {
          f(GridIndex{box.axes[0].first + a, iy, iphi, box.q});
        }
      }
    }
  }

  std::vector<GridIndex> Indices(const CellBox& box) const {
    std::vector<GridIndex> out;
    out.reserve(box.Size());
    ForEach(box, [&](const GridIndex& g) { out.push_back(g); });
    std::sort(out.begin(), out.end());
    return out;
  }

  friend bool operator==(const GridSpec& a, const GridSpec& b) {
    for (std::size_t j = 0; j < 3; ++j) {
      if (a.axes_[j].lo != b.axes_[j].lo || a.axes_[j].r != b.axes_[j].r ||
          a.axes_[j].count != b.axes_[j].count) {
        return false;
      }
    }
    return a.n_modes_ == b.n_modes_;
  }

 private:
  std::array<AxisGrid, 3> axes_{};
  std::size_t n_modes_ = 1;
};

// One membership bit per grid index.
class KernelSet {
 public:
  KernelSet() = default;
  explicit KernelSet(GridSpec spec, bool fill = false)
      : spec_(std::move(spec)),
        bits_((spec_.size() + 63) / 64, fill ? ~std::uint64_t{0} : 0) {
    ClearTail();
  }

  const GridSpec& spec() const { return spec_; }
  std::size_t size() const { return spec_.size(); }

  bool Test(std::size_t f) const { return (bits_[f >> 6] >> (f & 63)) & 1U; }
  bool Test(const GridIndex& g) const { return Test(spec_.Flat(g)); }
  void Set(std::size_t f, bool v = true) {
    const std::uint64_t m = std::uint64_t{1} << (f & 63);
    if (v) {
      bits_[f >> 6] |= m;
    } else {
      bits_[f >> 6] &= ~m;
    }
  }
  void Set(const GridIndex& g, bool v = true) { Set(spec_.Flat(g), v); }

  std::size_t Count() const {
    std::size_t n = 0;
    for (auto w : bits_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }
  bool Empty() const {
    return std::all_of(bits_.begin(), bits_.end(),
                       [](std::uint64_t w) { return w == 0; });
  }

  // True iff every index of the box is a member.
  bool ContainsAll(const CellBox& box) const {
    const AxisGrid& ap = spec_.axis(2);
    const std::size_t nx = spec_.nx();
    const std::size_t ny = spec_.ny();
    const std::size_t base_q = box.q * spec_.nphi();
    for (std::size_t c = 0; c < box.axes[2].len; ++c) {
      const std::size_t iphi = ap.Index(box.axes[2], c);
      for (std::size_t b = 0; b < box.axes[1].len; ++b) {
        const std::size_t row =
            ((base_q + iphi) * ny + box.axes[1].first + b) * nx +
            box.axes[0].first;
        for (std::size_t a = 0; a < box.axes[0].len; ++a) {
          if (!Test(row + a)) return false;
        }
      }
    }
    return true;
  }

  bool AnyOf(const CellBox& box) const {
    bool any = false;
    spec_.ForEach(box, [&](const GridIndex& g) { any = any || Test(g); });
    return any;
  }

  // Number of members of *this that are not members of other.
  std::size_t CountNotIn(const KernelSet& other) const {
    CheckSameSpec(other);
    std::size_t n = 0;
    for (std::size_t i = 0; i < bits_.size(); ++i) {
      n += static_cast<std::size_t>(std::popcount(bits_[i] & ~other.bits_[i]));
    }
    return n;
  }
  bool IsSubsetOf(const KernelSet& other) const { return CountNotIn(other) == 0; }

  std::vector<std::uint64_t>& words() { return bits_; }
  const std::vector<std::uint64_t>& words() const { return bits_; }

  friend bool operator==(const KernelSet& a, const KernelSet& b) {
    return a.spec_ == b.spec_ && a.bits_ == b.bits_;
  }

 private:
  void CheckSameSpec(const KernelSet& other) const {
    if (!(spec_ == other.spec_)) {
      throw std::invalid_argument("kernel sets over different grids");
    }
  }
  void ClearTail() {
    const std::size_t rem = spec_.size() & 63;
    if (rem != 0 && !bits_.empty()) {
      bits_.back() &= (std::uint64_t{1} << rem) - 1;
    }
  }

  GridSpec spec_;
  std::vector<std::uint64_t> bits_;
};

}  // namespace viab

#endif  // VIAB_GRID_HPP_
