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

// Finite viability and discriminating kernels of the path-planning model on a
// grid.
//
// Both algorithms shrink a constraint set K^0 by synchronous sweeps until a
// sweep removes nothing. A point survives a viability sweep when some
// admissible input maps its centre to a point whose r-ball lies entirely in
// K^n. A point survives a discriminating sweep when that still holds under an
// additive disturbance anywhere in L r B, with L the largest Lipschitz
// constant among the point's admissible inputs (see cover.hpp).

#ifndef VIAB_KERNEL_HPP_
#define VIAB_KERNEL_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "viab/angles.hpp"
#include "viab/cover.hpp"
#include "viab/grid.hpp"
#include "viab/parallel.hpp"
#include "viab/ppmodel.hpp"
#include "viab/track.hpp"
#include "viab/vehicle.hpp"

namespace viab {

// One bit per (grid point, mode) pair.
class SafeInputTable {
 public:
  SafeInputTable() = default;
  SafeInputTable(std::size_t n_points, std::size_t n_modes)
      : n_points_(n_points),
        n_modes_(n_modes),
        words_((n_modes + 63) / 64),
        bits_(n_points * words_, 0) {}

  std::size_t n_points() const { return n_points_; }
  std::size_t n_modes() const { return n_modes_; }
  std::size_t words_per_point() const { return words_; }

  bool Test(std::size_t point, std::size_t u) const {
    return (bits_[point * words_ + (u >> 6)] >> (u & 63)) & 1U;
  }
  void Set(std::size_t point, std::size_t u) {
    bits_[point * words_ + (u >> 6)] |= std::uint64_t{1} << (u & 63);
  }
  bool Empty(std::size_t point) const {
    for (std::size_t w = 0; w < words_; ++w) {
      if (bits_[point * words_ + w] != 0) return false;
    }
    return true;
  }
  std::vector<std::size_t> Inputs(std::size_t point) const {
    std::vector<std::size_t> out;
    for (std::size_t u = 0; u < n_modes_; ++u) {
      if (Test(point, u)) out.push_back(u);
    }
    return out;
  }
  const std::uint64_t* Mask(std::size_t point) const {
    return bits_.data() + point * words_;
  }

  std::vector<std::uint64_t>& words() { return bits_; }
  const std::vector<std::uint64_t>& words() const { return bits_; }

  friend bool operator==(const SafeInputTable&, const SafeInputTable&) = default;

 private:
  std::size_t n_points_ = 0;
  std::size_t n_modes_ = 0;
  std::size_t words_ = 0;
  std::vector<std::uint64_t> bits_;
};

// Per (heading index, input) table of whether the sampled trajectory from the
// grid centre stays inside the track.
class PathTable {
 public:
  PathTable() = default;

  static PathTable Build(const GridSpec& spec, const ModeTable& modes,
                         double t_pp, std::size_t n_samples, const Track& track,
                         double margin, std::size_t workers = 0) {
    PathTable t;
    t.n_modes_ = modes.size();
    t.ok_.assign(spec.slice_size() * modes.size(), 0);
    const std::size_t slice = spec.slice_size();
    ParallelFor(slice, workers, 64, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t s = lo; s < hi; ++s) {
        const GridIndex g = spec.Unflat(s);
        const PPState c = spec.Center(g);
        for (std::size_t u = 0; u < modes.size(); ++u) {
          bool ok = true;
          for (const Vec2& p : SamplePath(c, modes.modes[u], t_pp, n_samples)) {
            if (!track.Inside(p, margin)) {
              ok = false;
              break;
            }
          }
          t.ok_[s * modes.size() + u] = ok ? 1 : 0;
        }
      }
    });
    return t;
  }

  bool empty() const { return ok_.empty(); }
  bool Ok(std::size_t slice_flat, std::size_t u) const {
    return ok_.empty() || ok_[slice_flat * n_modes_ + u] != 0;
  }

 private:
  std::size_t n_modes_ = 0;
  std::vector<unsigned char> ok_;
};

// Everything the sweeps need about the model on one grid.
class KernelProblem {
 public:
  KernelProblem(GridSpec spec, ModeTable modes, TransitionAutomaton aut,
                double t_pp, PathTable path = {})
      : spec_(std::move(spec)),
        modes_(std::move(modes)),
        aut_(std::move(aut)),
        t_pp_(t_pp),
        path_(std::move(path)) {
    if (modes_.size() != spec_.n_modes() || aut_.size() != spec_.n_modes()) {
      throw std::invalid_argument("kernel: mode count differs from grid");
    }
    if (!(t_pp_ > 0)) throw std::invalid_argument("kernel: t_pp must be > 0");
    AssignLipschitz(modes_, t_pp_);
    const std::size_t nm = modes_.size();
    const std::size_t np = spec_.nphi();
    moves_.resize(np * nm);
    for (std::size_t i = 0; i < np; ++i) {
      const double phi = spec_.axis(2).Center(i);
      for (std::size_t u = 0; u < nm; ++u) {
        const Displacement d = BodyDisplacement(modes_.modes[u], t_pp_);
        const PPState to = Advance(PPState{0, 0, phi, u}, d, u);
        moves_[i * nm + u] = to;
      }
    }
    admissible_.resize(nm);
    for (std::size_t q = 0; q < nm; ++q) admissible_[q] = aut_.Successors(q);
    SetLipschitz(LipschitzConstants(modes_));
  }

  // Replaces the per-mode Lipschitz constants that size the disturbance.
  void SetLipschitz(const std::vector<double>& l) {
    if (l.size() != modes_.size()) {
      throw std::invalid_argument("kernel: one Lipschitz constant per mode");
    }
    for (std::size_t u = 0; u < l.size(); ++u) modes_.modes[u].lipschitz = l[u];
    lbar_.assign(modes_.size(), 0.0);
    vgrid_.clear();
    for (std::size_t q = 0; q < modes_.size(); ++q) {
      for (std::size_t u : admissible_[q]) lbar_[q] = std::max(lbar_[q], l[u]);
      vgrid_.emplace_back(lbar_[q], spec_.r());
    }
  }

  const GridSpec& spec() const { return spec_; }
  const ModeTable& modes() const { return modes_; }
  const TransitionAutomaton& automaton() const { return aut_; }
  double t_pp() const { return t_pp_; }
  const PathTable& paths() const { return path_; }

  const std::vector<std::size_t>& Admissible(std::size_t q) const {
    return admissible_[q];
  }
  // Disturbance radius factor at mode q.
  double Lbar(std::size_t q) const { return lbar_[q]; }
  const DisturbanceGrid<3>& Disturbances(std::size_t q) const { return vgrid_[q]; }

  PPState Successor(const GridIndex& g, std::size_t u) const {
    const PPState& m = moves_[g.iphi * modes_.size() + u];
    return PPState{spec_.axis(0).Center(g.ix) + m.x,
                   spec_.axis(1).Center(g.iy) + m.y, m.phi, u};
  }

  bool PathOk(const GridIndex& g, std::size_t u) const {
    return path_.Ok(spec_.SliceFlat(g.ix, g.iy, g.iphi), u);
  }

  // Admissible inputs at g whose sampled path stays on the track.
  void Candidates(const GridIndex& g, std::vector<std::size_t>& out) const {
    out.clear();
    for (std::size_t u : admissible_[g.q]) {
      if (PathOk(g, u)) out.push_back(u);
    }
  }

 private:
  GridSpec spec_;
  ModeTable modes_;
  TransitionAutomaton aut_;
  double t_pp_;
  PathTable path_;
  std::vector<PPState> moves_;
  std::vector<std::vector<std::size_t>> admissible_;
  std::vector<double> lbar_;
  std::vector<DisturbanceGrid<3>> vgrid_;
};

// True iff every grid point within infinity distance `radius` of p (at mode
// p.q) is a member of k. Points outside the grid box never qualify; for a
// radius above r, no point within radius - r of p may leave it either.
inline bool BallInside(const KernelSet& k, const PPState& p, double radius) {
  const GridSpec& spec = k.spec();
  const double slack = radius - spec.r();
  if (slack > 0) {
    const double coords[2] = {p.x, p.y};
    for (std::size_t j = 0; j < 2; ++j) {
      const AxisGrid& a = spec.axis(j);
      if (!(coords[j] - slack >= a.lo - a.r && coords[j] + slack <= a.Hi() + a.r)) {
        return false;
      }
    }
  }
  const std::optional<CellBox> box = spec.Ball(p, radius);
  return box && k.ContainsAll(*box);
}

// Projection of the r-ball around p when it lies in k.
inline std::optional<Projection<3>> ProjectInside(const KernelSet& k,
                                                  const PPState& p) {
  const GridSpec& spec = k.spec();
  const std::optional<CellBox> box = spec.Ball(p, spec.r());
  if (!box || !k.ContainsAll(*box)) return std::nullopt;
  Projection<3> proj;
  const double coords[3] = {p.x, p.y, p.phi};
  for (std::size_t j = 0; j < 3; ++j) {
    const AxisGrid& a = spec.axis(j);
    double lo = a.Center(box->axes[j].first) - coords[j];
    if (a.wrap) lo = WrapPi(lo);
    proj.rel_lo[j] = lo;
    proj.rel_hi[j] = lo + 2.0 * a.r * static_cast<double>(box->axes[j].len - 1);
  }
  return proj;
}

inline PPState Shifted(const PPState& p, const std::array<double, 3>& v) {
  return PPState{p.x + v[0], p.y + v[1], WrapTwoPi(p.phi + v[2]), p.q};
}

struct KernelOptions {
  UnionRule rule = UnionRule::kMaxVolume;
  std::size_t workers = 0;
};

struct KernelResult {
  KernelSet kernel;
  SafeInputTable safe;
  // Number of sweeps performed; trace[n] = |K^n| for n = 0..iterations.
  std::size_t iterations = 0;
  std::vector<std::size_t> trace;
};

namespace detail {

inline constexpr std::uint16_t kNoWitness = 0xFFFF;

// Runs synchronous sweeps of `keep` until nothing changes. keep(g, current,
// witness) decides survival of member g; witness is a per-point scratch slot
// the test may use to remember the input that last sufficed.
template <typename Keep>
std::pair<KernelSet, std::pair<std::size_t, std::vector<std::size_t>>> Sweep(
    const KernelSet& k0, std::size_t workers, const Keep& keep) {
  KernelSet cur = k0;
  std::vector<std::size_t> trace{cur.Count()};
  std::size_t iterations = 0;
  if (cur.Empty()) return {cur, {0, trace}};
  const GridSpec& spec = cur.spec();
  std::vector<std::uint16_t> witness(spec.size(), kNoWitness);
  while (true) {
    KernelSet next(spec);
    ParallelFor(spec.size(), workers, 64, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t f = lo; f < hi; ++f) {
        if (!cur.Test(f)) continue;
        if (keep(spec.Unflat(f), cur, witness[f])) next.Set(f);
      }
    });
    ++iterations;
    trace.push_back(next.Count());
    const bool same = next == cur;
    cur = std::move(next);
    if (same) break;
  }
  return {cur, {iterations, trace}};
}

}  // namespace detail

inline SafeInputTable ViabilitySafeInputs(const KernelSet& kernel,
                                          const KernelProblem& prob,
                                          std::size_t workers = 0) {
  const GridSpec& spec = kernel.spec();
  SafeInputTable t(spec.size(), spec.n_modes());
  ParallelFor(spec.size(), workers, 64, [&](std::size_t lo, std::size_t hi) {
    std::vector<std::size_t> cand;
    for (std::size_t f = lo; f < hi; ++f) {
      if (!kernel.Test(f)) continue;
      const GridIndex g = spec.Unflat(f);
      prob.Candidates(g, cand);
      for (std::size_t u : cand) {
        if (BallInside(kernel, prob.Successor(g, u), spec.r())) t.Set(f, u);
      }
    }
  });
  return t;
}

inline SafeInputTable DiscriminatingSafeInputs(const KernelSet& kernel,
                                               const KernelProblem& prob,
                                               std::size_t workers = 0) {
  const GridSpec& spec = kernel.spec();
  SafeInputTable t(spec.size(), spec.n_modes());
  ParallelFor(spec.size(), workers, 64, [&](std::size_t lo, std::size_t hi) {
    std::vector<std::size_t> cand;
    for (std::size_t f = lo; f < hi; ++f) {
      if (!kernel.Test(f)) continue;
      const GridIndex g = spec.Unflat(f);
      const DisturbanceGrid<3>& vg = prob.Disturbances(g.q);
      prob.Candidates(g, cand);
      for (std::size_t u : cand) {
        const PPState s = prob.Successor(g, u);
        for (std::size_t k = 0; k < vg.size(); ++k) {
          if (BallInside(kernel, Shifted(s, vg.Point(k)), spec.r())) {
            t.Set(f, u);
            break;
          }
        }
      }
    }
  });
  return t;
}

inline KernelResult ViabilityKernel(const KernelSet& k0, const KernelProblem& prob,
                                    const KernelOptions& opt = {}) {
  if (!(k0.spec() == prob.spec())) {
    throw std::invalid_argument("kernel: constraint set on a different grid");
  }
  const double r = prob.spec().r();
  auto keep = [&](const GridIndex& g, const KernelSet& cur, std::uint16_t& w) {
    if (w != detail::kNoWitness &&
        BallInside(cur, prob.Successor(g, w), r)) {
      return true;
    }
    for (std::size_t u : prob.Admissible(g.q)) {
      if (!prob.PathOk(g, u)) continue;
      if (BallInside(cur, prob.Successor(g, u), r)) {
        w = static_cast<std::uint16_t>(u);
        return true;
      }
    }
    return false;
  };
  auto [kernel, stats] = detail::Sweep(k0, opt.workers, keep);
  KernelResult res;
  res.safe = ViabilitySafeInputs(kernel, prob, opt.workers);
  res.kernel = std::move(kernel);
  res.iterations = stats.first;
  res.trace = std::move(stats.second);
  return res;
}

// Survival test of one member g against the current set.
inline bool DiscriminatingKeep(const GridIndex& g, const KernelSet& cur,
                               const KernelProblem& prob, UnionRule rule,
                               std::uint16_t& witness) {
  const double r = prob.spec().r();
  const double robust = prob.Lbar(g.q) * r + r;
  if (witness != detail::kNoWitness &&
      BallInside(cur, prob.Successor(g, witness), robust)) {
    return true;
  }
  std::vector<std::size_t> cand;
  prob.Candidates(g, cand);
  for (std::size_t u : cand) {
    if (BallInside(cur, prob.Successor(g, u), robust)) {
      witness = static_cast<std::uint16_t>(u);
      return true;
    }
  }
  witness = detail::kNoWitness;
  std::vector<PPState> succ;
  succ.reserve(cand.size());
  for (std::size_t u : cand) succ.push_back(prob.Successor(g, u));
  return RobustPoint<3>(prob.Disturbances(g.q), cand.size(), r, rule,
                        [&](std::size_t k, const std::array<double, 3>& v) {
                          return ProjectInside(cur, Shifted(succ[k], v));
                        });
}

inline KernelResult DiscriminatingKernel(const KernelSet& k0,
                                         const KernelProblem& prob,
                                         const KernelOptions& opt = {}) {
  if (!(k0.spec() == prob.spec())) {
    throw std::invalid_argument("kernel: constraint set on a different grid");
  }
  auto keep = [&](const GridIndex& g, const KernelSet& cur, std::uint16_t& w) {
    return DiscriminatingKeep(g, cur, prob, opt.rule, w);
  };
  auto [kernel, stats] = detail::Sweep(k0, opt.workers, keep);
  KernelResult res;
  res.safe = DiscriminatingSafeInputs(kernel, prob, opt.workers);
  res.kernel = std::move(kernel);
  res.iterations = stats.first;
  res.trace = std::move(stats.second);
  return res;
}

inline std::vector<std::size_t> SafeInputs(const GridIndex& g,
                                           const KernelSet& kernel,
                                           const SafeInputTable& table) {
  const std::size_t f = kernel.spec().Flat(g);
  if (!kernel.Test(f)) return {};
  return table.Inputs(f);
}

// Members of `kernel` with no admissible, path-feasible input whose r-ball
// successor lies in `kernel`. Zero for any viability domain.
inline std::size_t CountUnsupported(const KernelSet& kernel,
                                    const KernelProblem& prob) {
  const GridSpec& spec = kernel.spec();
  std::size_t bad = 0;
  std::vector<std::size_t> cand;
  for (std::size_t f = 0; f < spec.size(); ++f) {
    if (!kernel.Test(f)) continue;
    const GridIndex g = spec.Unflat(f);
    prob.Candidates(g, cand);
    bool ok = false;
    for (std::size_t u : cand) {
      if (BallInside(kernel, prob.Successor(g, u), spec.r())) {
        ok = true;
        break;
      }
    }
    if (!ok) ++bad;
  }
  return bad;
}

inline double Fraction(const KernelSet& kernel, const KernelSet& k0) {
  const std::size_t total = k0.Count();
  if (total == 0) return 0.0;
  return static_cast<double>(kernel.Count()) / static_cast<double>(total);
}

// X-Y membership at the heading plane nearest to phi and mode q; row iy,
// column ix.
struct Raster {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t iphi = 0;
  std::vector<unsigned char> cells;

  bool At(std::size_t ix, std::size_t iy) const { return cells[iy * nx + ix] != 0; }
};

inline std::size_t NearestHeading(const GridSpec& spec, double phi) {
  const double h = spec.spacing();
  const auto i = static_cast<std::size_t>(std::llround(WrapTwoPi(phi) / h));
  return i % spec.nphi();
}

inline Raster Slice(const KernelSet& kernel, double phi, std::size_t q) {
  const GridSpec& spec = kernel.spec();
  if (q >= spec.n_modes()) throw std::out_of_range("slice: invalid mode");
  Raster out{spec.nx(), spec.ny(), NearestHeading(spec, phi), {}};
  out.cells.resize(spec.nx() * spec.ny());
  for (std::size_t iy = 0; iy < spec.ny(); ++iy) {
    for (std::size_t ix = 0; ix < spec.nx(); ++ix) {
      out.cells[iy * spec.nx() + ix] =
          kernel.Test(GridIndex{ix, iy, out.iphi, q}) ? 1 : 0;
    }
  }
  return out;
}

}  // namespace viab

#endif  // VIAB_KERNEL_HPP_
