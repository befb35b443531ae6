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

// Discrete-time path-planning model: constant body velocities held for one
// segment, integrated in closed form.

#ifndef VIAB_PPMODEL_HPP_
#define VIAB_PPMODEL_HPP_

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "viab/angles.hpp"
#include "viab/state.hpp"
#include "viab/vehicle.hpp"

namespace viab {

struct PPConfig {
  double t_pp = 0.16;
  std::size_t n_samples = 5;

  void Validate() const {
    if (!(t_pp > 0)) throw std::invalid_argument("ppmodel: t_pp must be > 0");
    if (n_samples < 2) throw std::invalid_argument("ppmodel: n_samples < 2");
  }
};

// Body-frame displacement and heading change after holding a mode for t.
struct Displacement {
  double dx = 0;
  double dy = 0;
  double dphi = 0;
};

inline Displacement BodyDisplacement(double vx, double vy, double omega,
                                     double t) {
  const double th = omega * t;
  double s_over = 0, c_over = 0;  // sin(th)/omega, (1 - cos(th))/omega
  if (std::abs(th) < 1e-6) {
    const double th2 = th * th;
    s_over = t * (1.0 - th2 / 6.0 + th2 * th2 / 120.0);
    c_over = t * th * (0.5 - th2 / 24.0 + th2 * th2 / 720.0);
  } else {
    s_over = std::sin(th) / omega;
    const double hs = std::sin(0.5 * th);
    c_over = 2.0 * hs * hs / omega;
  }
  return {vx * s_over - vy * c_over, vx * c_over + vy * s_over, th};
}

inline Displacement BodyDisplacement(const Mode& m, double t) {
  return BodyDisplacement(m.vx, m.vy, m.omega, t);
}

// Applies a body displacement at heading phi.
inline PPState Advance(const PPState& x, const Displacement& d, std::size_t q) {
  const double c = std::cos(x.phi), s = std::sin(x.phi);
  return PPState{x.x + c * d.dx - s * d.dy, x.y + s * d.dx + c * d.dy,
                 WrapTwoPi(x.phi + d.dphi), q};
}

inline PPState Step(const PPState& x, const ModeTable& table, std::size_t u,
                    double t) {
  if (u >= table.size()) throw std::out_of_range("ppmodel: invalid mode");
  return Advance(x, BodyDisplacement(table.modes[u], t), u);
}

// Infinity-norm Lipschitz bound of Step(., u, t) over (X, Y, phi). The
// Jacobian is identity plus a phi-column of magnitude at most the chord
// length, so the worst row sum is 1 + chord.
inline double Lipschitz(const Mode& m, double t) {
  const Displacement d = BodyDisplacement(m, t);
  return 1.0 + std::hypot(d.dx, d.dy);
}

inline void AssignLipschitz(ModeTable& table, double t) {
  for (Mode& m : table.modes) m.lipschitz = Lipschitz(m, t);
}

inline std::vector<double> LipschitzConstants(const ModeTable& table) {
  std::vector<double> out;
  out.reserve(table.size());
  for (const Mode& m : table.modes) out.push_back(m.lipschitz);
  return out;
}

// n equally time-spaced positions along the segment, both ends included.
inline std::vector<Vec2> SamplePath(const PPState& x, const Mode& m, double t,
                                    std::size_t n) {
  if (n < 2) throw std::invalid_argument("ppmodel: need at least 2 samples");
  std::vector<Vec2> out;
  out.reserve(n);
  const double c = std::cos(x.phi), s = std::sin(x.phi);
  for (std::size_t k = 0; k < n; ++k) {
    const double tk = t * static_cast<double>(k) / static_cast<double>(n - 1);
    const Displacement d = BodyDisplacement(m, tk);
    out.push_back({x.x + c * d.dx - s * d.dy, x.y + s * d.dx + c * d.dy});
  }
  return out;
}

inline std::vector<std::size_t> Admissible(const PPState& x,
                                           const TransitionAutomaton& aut) {
  if (x.q >= aut.size()) throw std::out_of_range("ppmodel: invalid mode");
  return aut.Successors(x.q);
}

}  // namespace viab

#endif  // VIAB_PPMODEL_HPP_
