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

// Robustness test of a single grid point against a box-shaped additive
// disturbance V = L r B, using finitely many disturbance samples.
//
// For every sample v_h the caller reports, per input u, whether the r-ball
// around f(u) + v_h projects into the current set. If it does, the set of
// disturbances that keep exactly that projection is a box around v_h. Boxes
// of the surviving inputs are merged into one box per sample, and the point
// is robust when those boxes cover all of V.

#ifndef VIAB_COVER_HPP_
#define VIAB_COVER_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace viab {

enum class UnionRule { kMaxVolume, kIntersection };

template <std::size_t D>
struct VBox {
  std::array<double, D> lo{};
  std::array<double, D> hi{};

  double Volume() const {
    double v = 1.0;
    for (std::size_t j = 0; j < D; ++j) v *= std::max(0.0, hi[j] - lo[j]);
    return v;
  }
  bool Contains(const std::array<double, D>& p) const {
    for (std::size_t j = 0; j < D; ++j) {
      if (p[j] < lo[j] || p[j] > hi[j]) return false;
    }
    return true;
  }
};

// Offsets of the projected grid points relative to the probed point f + v_h:
// per axis, the smallest and largest (grid centre - (f + v_h)).
template <std::size_t D>
struct Projection {
  std::array<double, D> rel_lo{};
  std::array<double, D> rel_hi{};
};

// Square sample grid over [-L r, L r]^D with ceil(L) + 1 points per axis,
// corners included. L = 0 degenerates to the single point 0.
template <std::size_t D>
class DisturbanceGrid {
 public:
  DisturbanceGrid() = default;
  DisturbanceGrid(double lipschitz, double r)
      : extent_(std::max(0.0, lipschitz) * r) {
    n_ = extent_ > 0 ? static_cast<std::size_t>(std::ceil(lipschitz)) + 1 : 1;
    spacing_ = n_ > 1 ? 2.0 * extent_ / static_cast<double>(n_ - 1) : 0.0;
    size_ = 1;
    for (std::size_t j = 0; j < D; ++j) size_ *= n_;
  }

  std::size_t per_axis() const { return n_; }
  std::size_t size() const { return size_; }
  double extent() const { return extent_; }
  double spacing() const { return spacing_; }

  double Coord(std::size_t i) const {
    if (n_ == 1) return 0.0;
    if (i + 1 == n_) return extent_;
    return -extent_ + spacing_ * static_cast<double>(i);
  }

  // Axis 0 varies fastest.
  std::array<std::size_t, D> Unflat(std::size_t k) const {
    std::array<std::size_t, D> idx{};
    for (std::size_t j = 0; j < D; ++j) {
      idx[j] = k % n_;
      k /= n_;
    }
    return idx;
  }
  std::array<double, D> Point(std::size_t k) const {
    const auto idx = Unflat(k);
    std::array<double, D> p{};
    for (std::size_t j = 0; j < D; ++j) p[j] = Coord(idx[j]);
    return p;
  }

 private:
  double extent_ = 0.0;
  std::size_t n_ = 1;
  std::size_t size_ = 1;
  double spacing_ = 0.0;
};

// Disturbances around v_h that keep the projection, intersected with V.
template <std::size_t D>
VBox<D> TildeBox(const std::array<double, D>& v_h, const Projection<D>& proj,
                 double r, double extent) {
  VBox<D> b;
  for (std::size_t j = 0; j < D; ++j) {
    b.lo[j] = std::max(v_h[j] + proj.rel_hi[j] - r, -extent);
    b.hi[j] = std::min(v_h[j] + proj.rel_lo[j] + r, extent);
  }
  return b;
}

// Merges the boxes of all surviving inputs at one sample. Max-volume keeps
// the first of equally large boxes.
template <std::size_t D>
VBox<D> Aggregate(const std::vector<VBox<D>>& boxes, UnionRule rule) {
  VBox<D> out = boxes.front();
  if (rule == UnionRule::kMaxVolume) {
    double best = out.Volume();
    for (std::size_t i = 1; i < boxes.size(); ++i) {
      const double v = boxes[i].Volume();
      if (v > best) {
        best = v;
        out = boxes[i];
      }
    }
    return out;
  }
  for (std::size_t i = 1; i < boxes.size(); ++i) {
    for (std::size_t j = 0; j < D; ++j) {
      out.lo[j] = std::max(out.lo[j], boxes[i].lo[j]);
      out.hi[j] = std::min(out.hi[j], boxes[i].hi[j]);
    }
  }
  return out;
}

// True when the per-sample boxes cover V. Each elementary cell of the sample
// grid is checked on its own: along every axis the boxes of the cell's upper
// corners must start no later than the boxes of its lower corners end. Then
// a common split plane per axis exists and every point of the cell lies in
// the box of the corner on its side of all planes.
template <std::size_t D>
bool Covers(const DisturbanceGrid<D>& grid, const std::vector<VBox<D>>& boxes) {
  const std::size_t n = grid.per_axis();
  if (n == 1) return true;
  std::size_t cells = 1;
  for (std::size_t j = 0; j < D; ++j) cells *= n - 1;
  for (std::size_t c = 0; c < cells; ++c) {
    std::array<std::size_t, D> base{};
    std::size_t rest = c;
    for (std::size_t j = 0; j < D; ++j) {
      base[j] = rest % (n - 1);
      rest /= n - 1;
    }
    std::array<double, D> max_lo_high;
    std::array<double, D> min_hi_low;
    max_lo_high.fill(-INFINITY);
    min_hi_low.fill(INFINITY);
    for (std::size_t corner = 0; corner < (std::size_t{1} << D); ++corner) {
      std::size_t flat = 0, stride = 1;
      for (std::size_t j = 0; j < D; ++j) {
        flat += (base[j] + ((corner >> j) & 1U)) * stride;
        stride *= n;
      }
      const VBox<D>& b = boxes[flat];
      for (std::size_t j = 0; j < D; ++j) {
        if ((corner >> j) & 1U) {
          max_lo_high[j] = std::max(max_lo_high[j], b.lo[j]);
        } else {
          min_hi_low[j] = std::min(min_hi_low[j], b.hi[j]);
        }
      }
    }
    for (std::size_t j = 0; j < D; ++j) {
      if (max_lo_high[j] > min_hi_low[j]) return false;
    }
  }
  return true;
}

// Robustness test of one point. probe(k, v_h) returns the projection when
// input k maps the r-ball around f_k + v_h into the current set, nullopt
// otherwise. Returns true iff every sample has a surviving input and the
// merged boxes cover V; a single input surviving all samples short-cuts the
// cover check.
template <std::size_t D, typename Probe>
bool RobustPoint(const DisturbanceGrid<D>& grid, std::size_t n_inputs, double r,
                 UnionRule rule, const Probe& probe) {
  if (n_inputs == 0) return false;
  std::vector<VBox<D>> merged(grid.size());
  std::vector<char> all_ok(n_inputs, 1);
  std::vector<VBox<D>> boxes;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const std::array<double, D> v = grid.Point(k);
    boxes.clear();
    for (std::size_t u = 0; u < n_inputs; ++u) {
      const std::optional<Projection<D>> proj = probe(u, v);
      if (!proj) {
        all_ok[u] = 0;
        continue;
      }
      boxes.push_back(TildeBox<D>(v, *proj, r, grid.extent()));
    }
    if (boxes.empty()) return false;
    merged[k] = Aggregate<D>(boxes, rule);
  }
  if (std::find(all_ok.begin(), all_ok.end(), 1) != all_ok.end()) return true;
  return Covers<D>(grid, merged);
}

}  // namespace viab

#endif  // VIAB_COVER_HPP_
