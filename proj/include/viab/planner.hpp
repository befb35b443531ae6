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

// Receding-horizon path planner over sequences of constant-velocity segments.
//
// Candidate sequences are enumerated depth first in increasing mode order
// and the one with the largest progress wins; equal progress keeps the
// lexicographically smallest sequence. The kernel planner restricts inputs to
// the safe inputs of the cells containing the current state and keeps a
// child only when the r-ball around it lies in the kernel. The naive planner
// enumerates everything and rejects sequences whose sampled path leaves the
// track.

#ifndef VIAB_PLANNER_HPP_
#define VIAB_PLANNER_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

#include "viab/grid.hpp"
#include "viab/kernel.hpp"
#include "viab/ppmodel.hpp"
#include "viab/track.hpp"
#include "viab/vehicle.hpp"

namespace viab {

struct Plan {
  std::vector<std::size_t> modes;  // u_0 .. u_{N-1}
  std::vector<PPState> states;     // x_0 .. x_N
  double progress = 0.0;           // progress of the final position
  double gain = 0.0;               // signed progress from x_0 to x_N
  std::size_t node_count = 0;      // successor states evaluated
};

struct PlannerConfig {
  std::size_t horizon = 3;  // N_S
  double t_pp = 0.16;
  std::size_t n_samples = 9;
  // Track margin applied by the naive planner's sampled-path check.
  double naive_margin = 0.0;
  // Optional terminal cost added to the gain of a complete sequence.
  std::function<double(const PPState&)> terminal;
};

namespace detail {

struct Search {
  Search(const Track& t, const ModeTable& m, const PlannerConfig& c)
      : track(t), modes(m), cfg(c) {}

  const Track& track;
  const ModeTable& modes;
  const PlannerConfig& cfg;
  double s0 = 0;
  std::vector<std::size_t> seq;
  std::vector<PPState> path;
  std::optional<Plan> best;
  double best_value = -std::numeric_limits<double>::infinity();
  std::size_t nodes = 0;

  void Leaf() {
    const PPState& x = path.back();
    const double s = track.Progress({x.x, x.y});
    const double gain = track.progress_index().SignedDelta(s0, s);
    double value = gain;
    if (cfg.terminal) value += cfg.terminal(x);
    if (value > best_value) {
      best_value = value;
      best = Plan{seq, path, s, gain, 0};
    }
  }
};

}  // namespace detail

class KernelPlanner {
 public:
  KernelPlanner(const KernelSet& kernel, const SafeInputTable& safe,
                const ModeTable& modes, const Track& track, PlannerConfig cfg)
      : kernel_(kernel), safe_(safe), modes_(modes), track_(track), cfg_(std::move(cfg)) {
    if (safe_.n_points() != kernel_.spec().size() ||
        modes_.size() != kernel_.spec().n_modes()) {
      throw std::invalid_argument("planner: tables do not match the grid");
    }
  }

  const PlannerConfig& config() const { return cfg_; }

  // Union of the safe inputs of all cells containing x.
  std::vector<std::size_t> Candidates(const PPState& x) const {
    std::vector<std::size_t> out;
    const std::optional<CellBox> box = kernel_.spec().Snap(x);
    if (!box) return out;
    const std::size_t words = safe_.words_per_point();
    std::vector<std::uint64_t> mask(words, 0);
    kernel_.spec().ForEach(*box, [&](const GridIndex& g) {
      const std::uint64_t* m = safe_.Mask(kernel_.spec().Flat(g));
      for (std::size_t w = 0; w < words; ++w) mask[w] |= m[w];
    });
    for (std::size_t u = 0; u < modes_.size(); ++u) {
      if ((mask[u >> 6] >> (u & 63)) & 1U) out.push_back(u);
    }
    return out;
  }

  std::optional<Plan> Solve(const PPState& x) const {
    detail::Search s{track_, modes_, cfg_};
    s.s0 = track_.Progress({x.x, x.y});
    s.path.push_back(x);
    if (cfg_.horizon == 0) {
      s.Leaf();
      return s.best;
    }
    Expand(s);
    if (s.best) s.best->node_count = s.nodes;
    return s.best;
  }

 private:
  void Expand(detail::Search& s) const {
    const PPState x = s.path.back();
    const double r = kernel_.spec().r();
    for (std::size_t u : Candidates(x)) {
      const PPState child = Step(x, modes_, u, cfg_.t_pp);
      ++s.nodes;
      if (!BallInside(kernel_, child, r)) continue;
      s.seq.push_back(u);
      s.path.push_back(child);
      if (s.seq.size() == cfg_.horizon) {
        s.Leaf();
      } else {
        Expand(s);
      }
      s.seq.pop_back();
      s.path.pop_back();
    }
  }

  const KernelSet& kernel_;
  const SafeInputTable& safe_;
  const ModeTable& modes_;
  const Track& track_;
  PlannerConfig cfg_;
};

class NaivePlanner {
 public:
  NaivePlanner(const ModeTable& modes, const TransitionAutomaton& aut,
               const Track& track, PlannerConfig cfg)
      : modes_(modes), aut_(aut), track_(track), cfg_(std::move(cfg)) {}

  // nodes receives the number of successor states evaluated.
  std::optional<Plan> Solve(const PPState& x, std::size_t* nodes = nullptr) const {
    detail::Search s{track_, modes_, cfg_};
    s.s0 = track_.Progress({x.x, x.y});
    s.path.push_back(x);
    if (x.q >= modes_.size()) throw std::out_of_range("planner: invalid mode");
    const bool start_ok = track_.Inside({x.x, x.y}, cfg_.naive_margin);
    if (cfg_.horizon == 0) {
      if (start_ok) s.Leaf();
    } else {
      Expand(s, start_ok);
    }
    if (s.best) s.best->node_count = s.nodes;
    if (nodes) *nodes = s.nodes;
    return s.best;
  }

 private:
  void Expand(detail::Search& s, bool feasible) const {
    const PPState x = s.path.back();
    for (std::size_t u : aut_.Successors(x.q)) {
      const PPState child = Step(x, modes_, u, cfg_.t_pp);
      ++s.nodes;
      bool ok = feasible;
      if (ok) {
        for (const Vec2& p : SamplePath(x, modes_.modes[u], cfg_.t_pp, cfg_.n_samples)) {
          if (!track_.Inside(p, cfg_.naive_margin)) {
            ok = false;
            break;
          }
        }
      }
      s.seq.push_back(u);
      s.path.push_back(child);
      if (s.seq.size() == cfg_.horizon) {
        if (ok) s.Leaf();
      } else {
        Expand(s, ok);
      }
      s.seq.pop_back();
      s.path.pop_back();
    }
  }

  const ModeTable& modes_;
  const TransitionAutomaton& aut_;
  const Track& track_;
  PlannerConfig cfg_;
};

struct Recovery {
  bool emergency_stop = false;
  bool moved = false;  // false when x was already in a viable cell
  PPState state;
  GridIndex cell;
};

// Surrogate planning state for a state whose cells have no safe input: the
// centre of the nearest grid point with a nonempty safe mask among the ring
// of neighbours of the containing cells (infinity distance <= 3 r, same
// mode); ties go to the smaller flat index.
inline Recovery Recover(const PPState& x, const KernelSet& kernel,
                        const SafeInputTable& safe) {
  const GridSpec& spec = kernel.spec();
  Recovery out;
  out.state = x;
  if (const auto box = spec.Snap(x)) {
    bool viable = false;
    spec.ForEach(*box, [&](const GridIndex& g) {
      if (!viable && kernel.Test(g) && !safe.Empty(spec.Flat(g))) {
        viable = true;
        out.cell = g;
      }
    });
    if (viable) return out;
  }
  const std::optional<CellBox> ring = spec.Ball(x, 3.0 * spec.r());
  double best_d = std::numeric_limits<double>::infinity();
  std::size_t best_f = std::numeric_limits<std::size_t>::max();
  if (ring) {
    spec.ForEach(*ring, [&](const GridIndex& g) {
      const std::size_t f = spec.Flat(g);
      if (!kernel.Test(f) || safe.Empty(f)) return;
      const double d = spec.Distance(x, g);
      if (d < best_d || (d == best_d && f < best_f)) {
        best_d = d;
        best_f = f;
      }
    });
  }
  if (best_f == std::numeric_limits<std::size_t>::max()) {
    out.emergency_stop = true;
    return out;
  }
  out.moved = true;
  out.cell = spec.Unflat(best_f);
  out.state = spec.Center(out.cell);
  return out;
}

inline void WritePlanCsv(std::ostream& os, const Plan& p, const Track& track) {
  os << "segment,mode,X,Y,phi,progress\n";
  os.precision(12);
  for (std::size_t k = 0; k < p.states.size(); ++k) {
    const PPState& x = p.states[k];
    os << k << ',' << (k < p.modes.size() ? static_cast<long long>(p.modes[k] + 1) : -1)
       << ',' << x.x << ',' << x.y << ',' << x.phi << ','
       << track.Progress({x.x, x.y}) << '\n';
  }
}

}  // namespace viab

#endif  // VIAB_PLANNER_HPP_
