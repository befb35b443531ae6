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

// Dynamic bicycle model with Pacejka lateral tyre forces and an RC-car
// drivetrain, plus the stationary-velocity (trim) manifold built on it.

#ifndef VIAB_VEHICLE_HPP_
#define VIAB_VEHICLE_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "viab/config.hpp"

namespace viab {

// Defaults are for a 1:43 scale car.
struct CarParams {
  double m = 0.041;
  double iz = 27.8e-6;
  double lf = 0.029;
  double lr = 0.033;
  // Pacejka D sin(C atan(B alpha)) per axle.
  double bf = 2.579, cf = 1.2, df = 0.192;
  double br = 3.3852, cr = 1.2691, dr = 0.1737;
  // Drivetrain F_rx = (cm1 - cm2 vx) d - cr0 - cr2 vx^2.
  double cm1 = 0.287, cm2 = 0.0545, cr0 = 0.0518, cr2 = 0.00035;
  double delta_min = -0.35, delta_max = 0.35;
  double d_min = 0.0, d_max = 1.0;

  void Validate() const {
    if (!(m > 0 && iz > 0 && lf > 0 && lr > 0)) {
      throw std::invalid_argument("car: m, iz, lf, lr must be positive");
    }
    if (df < 0 || dr < 0) throw std::invalid_argument("car: D must be >= 0");
    if (!(delta_min < delta_max) || !(d_min < d_max)) {
      throw std::invalid_argument("car: empty input bounds");
    }
  }

  static CarParams FromKeyValues(const KeyValues& kv) {
    CarParams p;
    p.m = GetDouble(kv, "m", p.m);
    p.iz = GetDouble(kv, "iz", p.iz);
    p.lf = GetDouble(kv, "lf", p.lf);
    p.lr = GetDouble(kv, "lr", p.lr);
    p.bf = GetDouble(kv, "bf", p.bf);
    p.cf = GetDouble(kv, "cf", p.cf);
    p.df = GetDouble(kv, "df", p.df);
    p.br = GetDouble(kv, "br", p.br);
    p.cr = GetDouble(kv, "cr", p.cr);
    p.dr = GetDouble(kv, "dr", p.dr);
    p.cm1 = GetDouble(kv, "cm1", p.cm1);
    p.cm2 = GetDouble(kv, "cm2", p.cm2);
    p.cr0 = GetDouble(kv, "cr0", p.cr0);
    p.cr2 = GetDouble(kv, "cr2", p.cr2);
    p.delta_min = GetDouble(kv, "delta_min", p.delta_min);
    p.delta_max = GetDouble(kv, "delta_max", p.delta_max);
    p.d_min = GetDouble(kv, "d_min", p.d_min);
    p.d_max = GetDouble(kv, "d_max", p.d_max);
    p.Validate();
    return p;
  }

  static CarParams Load(const std::string& path) {
    return FromKeyValues(LoadKeyValues(path));
  }
};

struct FullState {
  double x = 0, y = 0, phi = 0;
  double vx = 0, vy = 0, omega = 0;

  std::array<double, 6> ToArray() const { return {x, y, phi, vx, vy, omega}; }
  static FullState FromArray(const std::array<double, 6>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5]};
  }
};

struct Inputs {
  double delta = 0;
  double d = 0;
};

namespace detail {

inline double Pacejka(double b, double c, double d, double alpha) {
  return d * std::sin(c * std::atan(b * alpha));
}
inline double PacejkaSlope(double b, double c, double d, double alpha) {
  return d * std::cos(c * std::atan(b * alpha)) * c * b /
         (1.0 + b * b * alpha * alpha);
}

}  // namespace detail

inline double DriveForce(const CarParams& p, double vx, double d) {
  return (p.cm1 - p.cm2 * vx) * d - p.cr0 - p.cr2 * vx * vx;
}

struct TireState {
  double alpha_f = 0, alpha_r = 0;
  double ffy = 0, fry = 0, frx = 0;
};

inline TireState Tires(const CarParams& p, double vx, double vy, double omega,
                       const Inputs& u) {
  TireState t;
  t.alpha_f = u.delta - std::atan2(omega * p.lf + vy, vx);
  t.alpha_r = std::atan2(omega * p.lr - vy, vx);
  t.ffy = detail::Pacejka(p.bf, p.cf, p.df, t.alpha_f);
  t.fry = detail::Pacejka(p.br, p.cr, p.dr, t.alpha_r);
  t.frx = DriveForce(p, vx, u.d);
  return t;
}

// Accelerations (dvx, dvy, domega) of the body-frame velocity dynamics.
inline std::array<double, 3> VelocityDerivative(const CarParams& p, double vx,
                                                double vy, double omega,
                                                const Inputs& u) {
  const TireState t = Tires(p, vx, vy, omega, u);
  const double sd = std::sin(u.delta);
  const double cd = std::cos(u.delta);
  return {(t.frx - t.ffy * sd + p.m * vy * omega) / p.m,
          (t.fry + t.ffy * cd - p.m * vx * omega) / p.m,
          (t.ffy * p.lf * cd - t.fry * p.lr) / p.iz};
}

inline FullState Derivative(const CarParams& p, const FullState& s,
                            const Inputs& u) {
  const auto acc = VelocityDerivative(p, s.vx, s.vy, s.omega, u);
  const double c = std::cos(s.phi);
  const double sn = std::sin(s.phi);
  return {s.vx * c - s.vy * sn,
          s.vx * sn + s.vy * c,
          s.omega,
          acc[0],
          acc[1],
          acc[2]};
}

// Analytic Jacobians of Derivative: a[i][j] = d f_i / d s_j over
// (x, y, phi, vx, vy, omega) and b[i][k] over (delta, d).
struct ModelJacobian {
  std::array<std::array<double, 6>, 6> a{};
  std::array<std::array<double, 2>, 6> b{};
};

inline ModelJacobian Linearize(const CarParams& p, const FullState& s,
                               const Inputs& u) {
  ModelJacobian j;
  const double vx = s.vx, vy = s.vy, w = s.omega;
  const double c = std::cos(s.phi), sn = std::sin(s.phi);
  j.a[0][2] = -vx * sn - vy * c;
  j.a[0][3] = c;
  j.a[0][4] = -sn;
  j.a[1][2] = vx * c - vy * sn;
  j.a[1][3] = sn;
  j.a[1][4] = c;
  j.a[2][5] = 1.0;

  const TireState t = Tires(p, vx, vy, w, u);
  const double kf = detail::PacejkaSlope(p.bf, p.cf, p.df, t.alpha_f);
  const double kr = detail::PacejkaSlope(p.br, p.cr, p.dr, t.alpha_r);

  const double af = w * p.lf + vy;
  const double den_f = vx * vx + af * af;
  const double ar = w * p.lr - vy;
  const double den_r = vx * vx + ar * ar;
  // Partials of the slip angles w.r.t. (vx, vy, omega).
  std::array<double, 3> daf{}, dar{};
  if (den_f > 1e-300) daf = {af / den_f, -vx / den_f, -p.lf * vx / den_f};
  if (den_r > 1e-300) dar = {-ar / den_r, -vx / den_r, p.lr * vx / den_r};

  std::array<double, 3> dffy{}, dfry{};
  for (int k = 0; k < 3; ++k) {
    dffy[k] = kf * daf[k];
    dfry[k] = kr * dar[k];
  }
  const double dfrx_dvx = -p.cm2 * u.d - 2.0 * p.cr2 * vx;
  const double dfrx_dd = p.cm1 - p.cm2 * vx;
  const double sd = std::sin(u.delta), cd = std::cos(u.delta);

  // Rows 3..5 over columns vx, vy, omega (state indices 3, 4, 5).
  const double extra_vx[3] = {dfrx_dvx, 0.0, 0.0};
  const double coriolis_vx[3] = {0.0, p.m * w, p.m * vy};
  const double coriolis_vy[3] = {-p.m * w, 0.0, -p.m * vx};
  for (int k = 0; k < 3; ++k) {
    j.a[3][3 + k] = (extra_vx[k] - dffy[k] * sd + coriolis_vx[k]) / p.m;
    j.a[4][3 + k] = (dfry[k] + dffy[k] * cd + coriolis_vy[k]) / p.m;
    j.a[5][3 + k] = (dffy[k] * p.lf * cd - dfry[k] * p.lr) / p.iz;
  }
  // Inputs: d alpha_f / d delta = 1.
  j.b[3][0] = (-kf * sd - t.ffy * cd) / p.m;
  j.b[3][1] = dfrx_dd / p.m;
  j.b[4][0] = (kf * cd - t.ffy * sd) / p.m;
  j.b[5][0] = (kf * p.lf * cd - t.ffy * p.lf * sd) / p.iz;
  return j;
}

// One classical Runge-Kutta step with inputs held constant.
inline FullState Integrate(const CarParams& p, const FullState& s,
                           const Inputs& u, double dt) {
  auto add = [](const FullState& a, const FullState& k, double h) {
    return FullState{a.x + h * k.x,   a.y + h * k.y,   a.phi + h * k.phi,
                     a.vx + h * k.vx, a.vy + h * k.vy, a.omega + h * k.omega};
  };
  const FullState k1 = Derivative(p, s, u);
  const FullState k2 = Derivative(p, add(s, k1, dt / 2), u);
  const FullState k3 = Derivative(p, add(s, k2, dt / 2), u);
  const FullState k4 = Derivative(p, add(s, k3, dt), u);
  FullState out = s;
  out.x += dt / 6 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x);
  out.y += dt / 6 * (k1.y + 2 * k2.y + 2 * k3.y + k4.y);
  out.phi += dt / 6 * (k1.phi + 2 * k2.phi + 2 * k3.phi + k4.phi);
  out.vx += dt / 6 * (k1.vx + 2 * k2.vx + 2 * k3.vx + k4.vx);
  out.vy += dt / 6 * (k1.vy + 2 * k2.vy + 2 * k3.vy + k4.vy);
  out.omega += dt / 6 * (k1.omega + 2 * k2.omega + 2 * k3.omega + k4.omega);
  return out;
}

// ---------------------------------------------------------------------------
// Stationary velocities.

struct Stationary {
  double vy = 0, omega = 0, d = 0;
};

struct NewtonOptions {
  double eps_eq = 1e-8;
  int max_iter = 50;
};

// Solves for (vy, omega, d) with zero accelerations at fixed (vx, delta) by
// damped Newton from `seed`. Returns nullopt if it does not converge or the
// duty cycle leaves its bounds.
inline std::optional<Stationary> SolveStationary(const CarParams& p, double vx,
                                                 double delta, Stationary seed,
                                                 const NewtonOptions& opt = {}) {
  if (!(vx > 0)) return std::nullopt;
  auto residual = [&](const Stationary& z) {
    return VelocityDerivative(p, vx, z.vy, z.omega, Inputs{delta, z.d});
  };
  auto norm = [](const std::array<double, 3>& r) {
    return std::max({std::abs(r[0]), std::abs(r[1]), std::abs(r[2])});
  };
  Stationary z = seed;
  auto g = residual(z);
  double gn = norm(g);
  for (int it = 0; it < opt.max_iter && gn >= opt.eps_eq; ++it) {
    const ModelJacobian jac =
        Linearize(p, FullState{0, 0, 0, vx, z.vy, z.omega}, Inputs{delta, z.d});
    // Columns: vy (state 4), omega (state 5), d (input 1).
    double m[3][3];
    for (int r = 0; r < 3; ++r) {
      m[r][0] = jac.a[3 + r][4];
      m[r][1] = jac.a[3 + r][5];
      m[r][2] = jac.b[3 + r][1];
    }
    const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                       m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                       m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if (!std::isfinite(det) || std::abs(det) < 1e-300) return std::nullopt;
    // Cramer's rule for m * step = -g.
    double step[3];
    for (int c = 0; c < 3; ++c) {
      double mc[3][3];
      for (int r = 0; r < 3; ++r) {
        for (int k = 0; k < 3; ++k) mc[r][k] = (k == c) ? -g[r] : m[r][k];
      }
      const double dc = mc[0][0] * (mc[1][1] * mc[2][2] - mc[1][2] * mc[2][1]) -
                        mc[0][1] * (mc[1][0] * mc[2][2] - mc[1][2] * mc[2][0]) +
                        mc[0][2] * (mc[1][0] * mc[2][1] - mc[1][1] * mc[2][0]);
      step[c] = dc / det;
    }
    double lambda = 1.0;
    Stationary trial;
    double tn = 0;
    for (int halvings = 0; halvings < 30; ++halvings) {
      trial = {z.vy + lambda * step[0], z.omega + lambda * step[1],
               z.d + lambda * step[2]};
      tn = norm(residual(trial));
      if (std::isfinite(tn) && tn < gn) break;
      lambda *= 0.5;
    }
    if (!std::isfinite(tn) || tn >= gn) return std::nullopt;
    z = trial;
    g = residual(z);
    gn = tn;
  }
  if (!(gn < opt.eps_eq)) return std::nullopt;
  if (z.d < p.d_min || z.d > p.d_max) return std::nullopt;
  return z;
}

inline double StraightDuty(const CarParams& p, double vx) {
  return (p.cr0 + p.cr2 * vx * vx) / (p.cm1 - p.cm2 * vx);
}

inline std::optional<Stationary> StationaryPoint(const CarParams& p, double vx,
                                                 double delta,
                                                 const NewtonOptions& opt = {}) {
  if (!(vx > 0)) return std::nullopt;
  const Stationary seed{0.0, vx * delta / (p.lf + p.lr), StraightDuty(p, vx)};
  return SolveStationary(p, vx, delta, seed, opt);
}

// Slip angle at which a Pacejka curve peaks.
inline double PeakSlip(double b, double c) {
  return std::tan(std::numbers::pi / (2.0 * c)) / b;
}

struct Mode {
  std::size_t id = 0;  // dense, from 1
  double vx = 0, vy = 0, omega = 0;
  double delta = 0, d = 0;
  double lipschitz = 1.0;
  bool drift = false;
};

// One row of a stationary-velocity gridding.
struct ModeGridSpec {
  double vx_lo = 0.5, vx_hi = 3.5, vx_step = 0.25;
  std::size_t n_delta = 5;
  // Largest |delta| used at each vx. Non-positive means "the edge of the
  // normal driving region", found per vx.
  double delta_limit = 0.0;
  bool drift = false;
};

struct ModeTable {
  std::vector<Mode> modes;
  // (vx, delta) combinations that did not yield a stationary point.
  std::vector<std::array<double, 2>> failures;

  std::size_t size() const { return modes.size(); }
};

// Largest |delta| <= delta_max at which the trim from the default seed exists
// and the rear tyre stays below its peak slip (no oversteer).
inline double NormalDeltaLimit(const CarParams& p, double vx) {
  const double rear_peak = PeakSlip(p.br, p.cr);
  auto ok = [&](double delta) {
    auto s = StationaryPoint(p, vx, delta);
    if (!s) return false;
    const TireState t = Tires(p, vx, s->vy, s->omega, Inputs{delta, s->d});
    return std::abs(t.alpha_r) < rear_peak;
  };
  const double hi_bound = std::min(-p.delta_min, p.delta_max);
  if (ok(hi_bound)) return hi_bound;
  double lo = 0.0, hi = hi_bound;
  for (int i = 0; i < 40; ++i) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? lo : hi) = mid;
  }
  return lo;
}

inline std::vector<double> Linspace(double a, double b, std::size_t n) {
  std::vector<double> out;
  if (n == 0) return out;
  if (n == 1) return {0.5 * (a + b)};
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  return out;
}

// Drift trims: (vx, delta) pairs with counter-steer, solved by multi-start
// Newton from large rear-slip seeds. Each solution is mirrored.
struct DriftSeed {
  double vx;
  double delta;
};

inline std::vector<DriftSeed> DefaultDriftSeeds() {
  return {{1.0, -0.05}, {1.0, -0.10}, {1.25, -0.05},
          {1.25, -0.10}, {1.5, -0.05}, {1.5, -0.10}};
}

inline std::optional<Stationary> DriftPoint(const CarParams& p, double vx,
                                            double delta) {
  const double rear_peak = PeakSlip(p.br, p.cr);
  // Counter-steer to the right (delta < 0) holds a left-hand drift.
  const double sgn = delta < 0 ? 1.0 : -1.0;
  std::optional<Stationary> best;
  for (double slip : {0.3, 0.5, 0.7, 0.9, 1.1}) {
    for (double wr : {1.0, 2.0, 4.0, 6.0}) {
      const Stationary seed{-sgn * slip * vx, sgn * wr * vx,
                            StraightDuty(p, vx) + 0.2};
      auto s = SolveStationary(p, vx, delta, seed);
      if (!s) continue;
      const TireState t = Tires(p, vx, s->vy, s->omega, Inputs{delta, s->d});
      if (std::abs(t.alpha_r) <= rear_peak) continue;
      if (!best || std::abs(s->vy) > std::abs(best->vy)) best = s;
    }
  }
  return best;
}

inline ModeTable BuildModeTable(const CarParams& p, const ModeGridSpec& g,
                                const std::vector<DriftSeed>& drift_seeds =
                                    DefaultDriftSeeds()) {
  if (!(g.vx_step > 0) || g.vx_hi < g.vx_lo || g.vx_lo <= 0 || g.n_delta == 0) {
    throw std::invalid_argument("mode grid: invalid ranges");
  }
  ModeTable table;
  const auto n_vx =
      static_cast<std::size_t>(std::floor((g.vx_hi - g.vx_lo) / g.vx_step + 1e-9)) + 1;
  for (std::size_t i = 0; i < n_vx; ++i) {
    const double vx = g.vx_lo + g.vx_step * static_cast<double>(i);
    const double lim = g.delta_limit > 0 ? g.delta_limit : NormalDeltaLimit(p, vx);
    for (double delta : Linspace(-lim, lim, g.n_delta)) {
      auto s = StationaryPoint(p, vx, delta);
      if (!s) {
        table.failures.push_back({vx, delta});
        continue;
      }
      table.modes.push_back(Mode{0, vx, s->vy, s->omega, delta, s->d, 1.0, false});
    }
  }
  if (g.drift) {
    for (const DriftSeed& ds : drift_seeds) {
      auto s = DriftPoint(p, ds.vx, ds.delta);
      if (!s) {
        table.failures.push_back({ds.vx, ds.delta});
        table.failures.push_back({ds.vx, -ds.delta});
        continue;
      }
      table.modes.push_back(Mode{0, ds.vx, s->vy, s->omega, ds.delta, s->d, 1.0, true});
      table.modes.push_back(
          Mode{0, ds.vx, -s->vy, -s->omega, -ds.delta, s->d, 1.0, true});
    }
  }
  for (std::size_t k = 0; k < table.modes.size(); ++k) table.modes[k].id = k + 1;
  return table;
}

// Mode from an explicit list of (vx, delta) trims; used for hand-picked sets.
inline ModeTable BuildModeTable(const CarParams& p,
                                const std::vector<std::array<double, 2>>& trims) {
  ModeTable table;
  for (const auto& [vx, delta] : trims) {
    auto s = StationaryPoint(p, vx, delta);
    if (!s) {
      table.failures.push_back({vx, delta});
      continue;
    }
    table.modes.push_back(
        Mode{table.modes.size() + 1, vx, s->vy, s->omega, delta, s->d, 1.0, false});
  }
  return table;
}

// ---------------------------------------------------------------------------
// Transition automaton.

struct TransitionOptions {
  std::size_t n_delta = 15;
  std::size_t n_d = 15;
  double tol_v = 0.05;      // m/s on vx and vy
  double tol_omega = 0.1;   // rad/s
  std::size_t substeps = 40;
};

class TransitionAutomaton {
 public:
  TransitionAutomaton() = default;
  TransitionAutomaton(std::size_t n, double t_t)
      : n_(n), t_t_(t_t), allowed_(n * n, 0) {}

  static TransitionAutomaton Identity(std::size_t n) {
    TransitionAutomaton a(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) a.Set(i, i, true);
    return a;
  }
  static TransitionAutomaton Full(std::size_t n) {
    TransitionAutomaton a(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) a.Set(i, j, true);
    }
    return a;
  }

  std::size_t size() const { return n_; }
  double horizon() const { return t_t_; }
  bool Allowed(std::size_t from, std::size_t to) const {
    return allowed_[from * n_ + to] != 0;
  }
  void Set(std::size_t from, std::size_t to, bool v) {
    allowed_[from * n_ + to] = v ? 1 : 0;
  }
  std::vector<std::size_t> Successors(std::size_t from) const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < n_; ++j) {
      if (Allowed(from, j)) out.push_back(j);
    }
    return out;
  }

  void WriteCsv(std::ostream& os) const {
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        os << (j ? "," : "") << (Allowed(i, j) ? 1 : 0);
      }
      os << '\n';
    }
  }

 private:
  std::size_t n_ = 0;
  double t_t_ = 0.0;
  std::vector<unsigned char> allowed_;
};

// True iff some constant input from the search grid (or b's own trim input)
// drives the velocity dynamics from a's trim to b's within tolerance after
// t_t seconds.
inline bool TransitionFeasible(const CarParams& p, const Mode& a, const Mode& b,
                               double t_t, const TransitionOptions& opt = {}) {
  auto reaches = [&](const Inputs& u) {
    FullState s{0, 0, 0, a.vx, a.vy, a.omega};
    const double h = t_t / static_cast<double>(opt.substeps);
    for (std::size_t k = 0; k < opt.substeps; ++k) s = Integrate(p, s, u, h);
    return std::abs(s.vx - b.vx) <= opt.tol_v &&
           std::abs(s.vy - b.vy) <= opt.tol_v &&
           std::abs(s.omega - b.omega) <= opt.tol_omega;
  };
  if (reaches(Inputs{b.delta, b.d})) return true;
  for (double delta : Linspace(p.delta_min, p.delta_max, opt.n_delta)) {
    for (double d : Linspace(p.d_min, p.d_max, opt.n_d)) {
      if (reaches(Inputs{delta, d})) return true;
    }
  }
  return false;
}

inline TransitionAutomaton BuildAutomaton(const CarParams& p,
                                          const ModeTable& table, double t_t,
                                          const TransitionOptions& opt = {}) {
  TransitionAutomaton aut(table.size(), t_t);
  for (std::size_t i = 0; i < table.size(); ++i) {
    for (std::size_t j = 0; j < table.size(); ++j) {
      aut.Set(i, j, TransitionFeasible(p, table.modes[i], table.modes[j], t_t, opt));
    }
  }
  return aut;
}

inline void WriteModeCsv(std::ostream& os, const ModeTable& table) {
  os << "id,vx,vy,omega,delta,d,L_q\n";
  os.precision(17);
  for (const Mode& m : table.modes) {
    os << m.id << ',' << m.vx << ',' << m.vy << ',' << m.omega << ','
       << m.delta << ',' << m.d << ',' << m.lipschitz << '\n';
  }
}

}  // namespace viab

#endif  // VIAB_VEHICLE_HPP_
