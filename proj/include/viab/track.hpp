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

// Closed race track: a centreline polyline with constant half width and
// convex obstacles.
//
// Track file (JSON, version 1):
//   {
//     "format": "viab-track", "version": 1,
//     "half_width": <m>,
//     "centerline": [[x, y], ...],      // closed; last vertex joins the first
//     "obstacles": [[[x, y], ...], ...], // optional convex polygons
//     "progress_pieces": 488             // optional
//   }
// An obstacle layout file has the same "obstacles" member and
// "format": "viab-obstacles".

#ifndef VIAB_TRACK_HPP_
#define VIAB_TRACK_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "viab/grid.hpp"
#include "viab/state.hpp"

namespace viab {

struct Polygon {
  std::vector<Vec2> pts;
};

struct BBox {
  double x_lo = 0, x_hi = 0, y_lo = 0, y_hi = 0;
};

namespace geom {

inline double Dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double Cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline Vec2 Sub(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }

// Parameter in [0, 1] of the closest point on segment ab.
inline double ProjectParam(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = Sub(b, a);
  const double l2 = Dot(ab, ab);
  if (l2 <= 0) return 0;
  return std::clamp(Dot(Sub(p, a), ab) / l2, 0.0, 1.0);
}

inline double SegmentDistance(Vec2 p, Vec2 a, Vec2 b) {
  const double t = ProjectParam(p, a, b);
  return std::hypot(p.x - (a.x + t * (b.x - a.x)), p.y - (a.y + t * (b.y - a.y)));
}

// Distance to a convex polygon; zero inside or on the boundary.
inline double PolygonDistance(Vec2 p, const Polygon& poly) {
  const auto& v = poly.pts;
  const std::size_t n = v.size();
  double area2 = 0;
  for (std::size_t i = 0; i < n; ++i) area2 += Cross(v[i], v[(i + 1) % n]);
  const double orient = area2 >= 0 ? 1.0 : -1.0;
  bool inside = true;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = v[i], b = v[(i + 1) % n];
    if (orient * Cross(Sub(b, a), Sub(p, a)) < 0) inside = false;
    best = std::min(best, SegmentDistance(p, a, b));
  }
  return inside ? 0.0 : best;
}

}  // namespace geom

// Piecewise-affine centreline approximation with end points spaced evenly in
// arclength, used to measure progress.
class ProgressIndex {
 public:
  ProgressIndex() = default;
  ProgressIndex(const std::vector<Vec2>& loop, std::size_t pieces) {
    if (pieces < 3) throw std::invalid_argument("progress: need >= 3 pieces");
    std::vector<double> cum{0.0};
    for (std::size_t i = 0; i < loop.size(); ++i) {
      const Vec2 a = loop[i], b = loop[(i + 1) % loop.size()];
      cum.push_back(cum.back() + std::hypot(b.x - a.x, b.y - a.y));
    }
    const double total = cum.back();
    std::size_t seg = 0;
    for (std::size_t k = 0; k < pieces; ++k) {
      const double s = total * static_cast<double>(k) / static_cast<double>(pieces);
      while (seg + 1 < loop.size() && cum[seg + 1] <= s) ++seg;
      const Vec2 a = loop[seg], b = loop[(seg + 1) % loop.size()];
      const double len = cum[seg + 1] - cum[seg];
      const double t = len > 0 ? (s - cum[seg]) / len : 0.0;
      points_.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
    }
    cumulative_.push_back(0.0);
    for (std::size_t k = 0; k < pieces; ++k) {
      const Vec2 a = points_[k], b = points_[(k + 1) % pieces];
      cumulative_.push_back(cumulative_.back() + std::hypot(b.x - a.x, b.y - a.y));
    }
  }

  std::size_t pieces() const { return points_.size(); }
  double total_length() const { return cumulative_.back(); }
  const std::vector<double>& cumulative() const { return cumulative_; }
  const std::vector<Vec2>& points() const { return points_; }

  // Arclength of the orthogonal projection onto the nearest piece, in
  // [0, total_length). Ties go to the lower piece index.
  double Progress(Vec2 p) const {
    const std::size_t n = points_.size();
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    double best_t = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const Vec2 a = points_[k], b = points_[(k + 1) % n];
      const double t = geom::ProjectParam(p, a, b);
      const double d = std::hypot(p.x - (a.x + t * (b.x - a.x)),
                                  p.y - (a.y + t * (b.y - a.y)));
      if (d < best_d) {
        best_d = d;
        best = k;
        best_t = t;
      }
    }
    double s = cumulative_[best] +
               best_t * (cumulative_[best + 1] - cumulative_[best]);
    if (s >= total_length()) s -= total_length();
    return s;
  }

  // Shortest signed arclength from s0 to s1 around the loop.
  double SignedDelta(double s0, double s1) const {
    const double L = total_length();
    double d = std::fmod(s1 - s0, L);
    if (d >= 0.5 * L) d -= L;
    if (d < -0.5 * L) d += L;
    return d;
  }

 private:
  std::vector<Vec2> points_;
  std::vector<double> cumulative_;
};

class Track {
 public:
  Track() = default;
  Track(std::vector<Vec2> centerline, double half_width,
        std::vector<Polygon> obstacles = {}, std::size_t progress_pieces = 488)
      : centerline_(std::move(centerline)),
        half_width_(half_width),
        obstacles_(std::move(obstacles)) {
    if (centerline_.size() >= 2 && centerline_.front() == centerline_.back()) {
      centerline_.pop_back();
    }
    if (centerline_.size() < 3) throw std::invalid_argument("track: < 3 vertices");
    if (!(half_width_ > 0)) throw std::invalid_argument("track: half_width <= 0");
    total_length_ = 0;
    for (std::size_t i = 0; i < centerline_.size(); ++i) {
      const Vec2 a = centerline_[i], b = centerline_[(i + 1) % centerline_.size()];
      const double l = std::hypot(b.x - a.x, b.y - a.y);
      if (!(l > 1e-12)) throw std::invalid_argument("track: degenerate segment");
      total_length_ += l;
    }
    for (const Polygon& poly : obstacles_) {
      if (poly.pts.size() < 3) throw std::invalid_argument("track: bad obstacle");
    }
    progress_ = ProgressIndex(centerline_, progress_pieces);
    BuildBuckets();
  }

  static Track FromJson(const nlohmann::json& j) {
    if (j.value("format", std::string("viab-track")) != "viab-track") {
      throw std::runtime_error("track: not a viab-track document");
    }
    if (j.value("version", 1) != 1) throw std::runtime_error("track: unsupported version");
    std::vector<Vec2> cl;
    for (const auto& p : j.at("centerline")) cl.push_back({p.at(0), p.at(1)});
    return Track(std::move(cl), j.at("half_width").get<double>(),
                 ObstaclesFromJson(j), j.value("progress_pieces", std::size_t{488}));
  }

  static std::vector<Polygon> ObstaclesFromJson(const nlohmann::json& j) {
    std::vector<Polygon> out;
    if (!j.contains("obstacles")) return out;
    for (const auto& poly : j.at("obstacles")) {
      Polygon pg;
      for (const auto& p : poly) pg.pts.push_back({p.at(0), p.at(1)});
      out.push_back(std::move(pg));
    }
    return out;
  }

  static nlohmann::json LoadJsonFile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return nlohmann::json::parse(in);
  }

  static Track Load(const std::string& path) { return FromJson(LoadJsonFile(path)); }

  nlohmann::json ToJson() const {
    nlohmann::json j;
    j["format"] = "viab-track";
    j["version"] = 1;
    j["half_width"] = half_width_;
    j["progress_pieces"] = progress_.pieces();
    j["centerline"] = nlohmann::json::array();
    for (const Vec2& p : centerline_) j["centerline"].push_back({p.x, p.y});
    j["obstacles"] = nlohmann::json::array();
    for (const Polygon& poly : obstacles_) {
      nlohmann::json jp = nlohmann::json::array();
      for (const Vec2& p : poly.pts) jp.push_back({p.x, p.y});
      j["obstacles"].push_back(jp);
    }
    return j;
  }

  Track WithObstacles(const std::vector<Polygon>& extra) const {
    std::vector<Polygon> all = obstacles_;
    all.insert(all.end(), extra.begin(), extra.end());
    return Track(centerline_, half_width_, std::move(all), progress_.pieces());
  }

  const std::vector<Vec2>& centerline() const { return centerline_; }
  const std::vector<Polygon>& obstacles() const { return obstacles_; }
  double half_width() const { return half_width_; }
  double total_length() const { return total_length_; }
  const ProgressIndex& progress_index() const { return progress_; }

  BBox Bounds() const {
    BBox b{centerline_[0].x, centerline_[0].x, centerline_[0].y, centerline_[0].y};
    for (const Vec2& p : centerline_) {
      b.x_lo = std::min(b.x_lo, p.x);
      b.x_hi = std::max(b.x_hi, p.x);
      b.y_lo = std::min(b.y_lo, p.y);
      b.y_hi = std::max(b.y_hi, p.y);
    }
    b.x_lo -= half_width_;
    b.x_hi += half_width_;
    b.y_lo -= half_width_;
    b.y_hi += half_width_;
    return b;
  }

  double CenterlineDistance(Vec2 p) const {
    const double near = NearCenterlineDistance(p);
    if (near <= half_width_) return near;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < centerline_.size(); ++i) {
      best = std::min(best, SegmentDistanceTo(i, p));
    }
    return best;
  }

  double ObstacleDistance(Vec2 p) const {
    double best = std::numeric_limits<double>::infinity();
    for (const Polygon& poly : obstacles_) {
      best = std::min(best, geom::PolygonDistance(p, poly));
    }
    return best;
  }

  // Signed clearance: positive inside the drivable area.
  double BoundaryDistance(Vec2 p) const {
    const double edge = half_width_ - CenterlineDistance(p);
    if (obstacles_.empty()) return edge;
    const double obs = ObstacleDistance(p);
    return std::min(edge, obs > 0 ? obs : -1.0);
  }

  bool Inside(Vec2 p, double margin) const {
    if (!(NearCenterlineDistance(p) <= half_width_ - margin)) return false;
    for (const Polygon& poly : obstacles_) {
      if (geom::PolygonDistance(p, poly) <= margin) return false;
    }
    return true;
  }

  double Progress(Vec2 p) const { return progress_.Progress(p); }

 private:
  double SegmentDistanceTo(std::size_t i, Vec2 p) const {
    return geom::SegmentDistance(p, centerline_[i],
                                 centerline_[(i + 1) % centerline_.size()]);
  }

  // Exact when the true distance is <= half_width, otherwise some value
  // greater than half_width.
  double NearCenterlineDistance(Vec2 p) const {
    const double fx = (p.x - bounds_.x_lo) / cell_;
    const double fy = (p.y - bounds_.y_lo) / cell_;
    if (!(fx >= 0 && fy >= 0 && fx < static_cast<double>(bx_) &&
          fy < static_cast<double>(by_))) {
      return std::numeric_limits<double>::infinity();
    }
    const auto& list = buckets_[static_cast<std::size_t>(fy) * bx_ +
                                static_cast<std::size_t>(fx)];
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i : list) best = std::min(best, SegmentDistanceTo(i, p));
    return best;
  }

  void BuildBuckets() {
    bounds_ = Bounds();
    cell_ = half_width_;
    bx_ = static_cast<std::size_t>(std::ceil((bounds_.x_hi - bounds_.x_lo) / cell_)) + 1;
    by_ = static_cast<std::size_t>(std::ceil((bounds_.y_hi - bounds_.y_lo) / cell_)) + 1;
    buckets_.assign(bx_ * by_, {});
    const double reach = half_width_ + cell_ * std::sqrt(0.5) + 1e-9;
    for (std::size_t by = 0; by < by_; ++by) {
      for (std::size_t bx = 0; bx < bx_; ++bx) {
        const Vec2 c{bounds_.x_lo + (static_cast<double>(bx) + 0.5) * cell_,
                     bounds_.y_lo + (static_cast<double>(by) + 0.5) * cell_};
        for (std::size_t i = 0; i < centerline_.size(); ++i) {
          if (SegmentDistanceTo(i, c) <= reach) buckets_[by * bx_ + bx].push_back(i);
        }
      }
    }
  }

  std::vector<Vec2> centerline_;
  double half_width_ = 0;
  std::vector<Polygon> obstacles_;
  double total_length_ = 0;
  ProgressIndex progress_;

  BBox bounds_;
  double cell_ = 1;
  std::size_t bx_ = 0, by_ = 0;
  std::vector<std::vector<std::size_t>> buckets_;
};

// Constraint set on the grid: (X, Y) centre inside the track with `margin`;
// heading and mode unconstrained.
inline KernelSet BuildConstraintSet(const GridSpec& spec, const Track& track,
                                    double margin) {
  const BBox b = track.Bounds();
  const AxisGrid& ax = spec.axis(0);
  const AxisGrid& ay = spec.axis(1);
  if (b.x_lo < ax.lo - ax.r || b.x_hi > ax.Hi() + ax.r || b.y_lo < ay.lo - ay.r ||
      b.y_hi > ay.Hi() + ay.r) {
    throw std::invalid_argument("grid box does not cover the track");
  }
  KernelSet k(spec);
  for (std::size_t iy = 0; iy < spec.ny(); ++iy) {
    for (std::size_t ix = 0; ix < spec.nx(); ++ix) {
      if (!track.Inside({ax.Center(ix), ay.Center(iy)}, margin)) continue;
      for (std::size_t q = 0; q < spec.n_modes(); ++q) {
        for (std::size_t iphi = 0; iphi < spec.nphi(); ++iphi) {
          k.Set(GridIndex{ix, iy, iphi, q});
        }
      }
    }
  }
  return k;
}

}  // namespace viab

#endif  // VIAB_TRACK_HPP_
