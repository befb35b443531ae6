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

#include "viab/planner.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include "reference_fixture.hpp"

namespace viab {
namespace {

using testing::GetReference;

// Grid indices within radius of p on each axis; false when p leaves the box.
bool NearIndices(const GridSpec& s, const PPState& p, std::vector<std::size_t> idx[3],
                 double radius) {
  const double r = s.r();
  const double coords[3] = {p.x, p.y, p.phi};
  for (std::size_t j = 0; j < 3; ++j) {
    idx[j].clear();
    const AxisGrid& a = s.axis(j);
    if (!a.wrap && (coords[j] < a.lo - r || coords[j] > a.Hi() + r)) return false;
    for (std::size_t i = 0; i < a.count; ++i) {
      double d = coords[j] - a.Center(i);
      if (a.wrap) d = std::remainder(d, kTwoPi);
      if (std::abs(d) <= radius) idx[j].push_back(i);
    }
  }
  return true;
}

template <typename F>
void ForNear(const GridSpec& s, const PPState& p, F f, double factor = 1.0) {
  std::vector<std::size_t> idx[3];
  if (!NearIndices(s, p, idx, factor * s.r())) return;
  for (std::size_t ix : idx[0]) {
    for (std::size_t iy : idx[1]) {
      for (std::size_t ip : idx[2]) f(GridIndex{ix, iy, ip, p.q});
    }
  }
}

bool OracleBallInside(const KernelSet& k, const PPState& p) {
  std::vector<std::size_t> idx[3];
  if (!NearIndices(k.spec(), p, idx, k.spec().r())) return false;
  bool ok = true;
  ForNear(k.spec(), p, [&](const GridIndex& g) { ok = ok && k.Test(g); });
  return ok;
}

std::vector<bool> OracleCandidates(const KernelSet& k, const SafeInputTable& safe,
                                   const PPState& p) {
  std::vector<bool> out(safe.n_modes(), false);
  ForNear(k.spec(), p, [&](const GridIndex& g) {
    for (std::size_t u = 0; u < safe.n_modes(); ++u) {
      if (safe.Test(k.spec().Flat(g), u)) out[u] = true;
    }
  });
  return out;
}

struct OraclePlan {
  bool found = false;
  std::vector<std::size_t> modes;
  double gain = -std::numeric_limits<double>::infinity();
};

// Every sequence in lexicographic order; the first of the best wins.
OraclePlan ExhaustiveKernelPlan(const KernelSet& k, const SafeInputTable& safe,
                                const ModeTable& modes, const Track& track, const PPState& x0,
                                std::size_t horizon, double t_pp) {
  OraclePlan best;
  const std::size_t m = modes.size();
  std::size_t total = 1;
  for (std::size_t i = 0; i < horizon; ++i) total *= m;
  const double s0 = track.Progress({x0.x, x0.y});
  std::vector<std::size_t> seq(horizon);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t i = horizon; i-- > 0;) {
      seq[i] = c % m;
      c /= m;
    }
    PPState x = x0;
    bool ok = true;
    for (std::size_t u : seq) {
      if (!OracleCandidates(k, safe, x)[u]) {
        ok = false;
        break;
      }
      x = Step(x, modes, u, t_pp);
      if (!OracleBallInside(k, x)) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    const double gain = track.progress_index().SignedDelta(s0, track.Progress({x.x, x.y}));
    if (gain > best.gain) best = {true, seq, gain};
  }
  return best;
}

ModeTable LoopModes() {
  ModeTable t;
  t.modes = {Mode{1, 1.0, 0.0, 0.0}, Mode{2, 1.5, 0.0, 0.0}, Mode{3, 1.2, 0.0, 3.0},
             Mode{4, 1.2, 0.0, -3.0}};
  return t;
}

Track WideLoop() { return Track({{0, 0}, {10, 0}, {10, 5}, {0, 5}}, 1.0); }

struct FullKernel {
  GridSpec spec;
  KernelSet kernel;
  SafeInputTable safe;
};

FullKernel MakeFullKernel(const Track& t, std::size_t n_modes) {
  const BBox b = t.Bounds();
  GridSpec s = GridSpec::Covering(b.x_lo - 0.5, b.x_hi + 0.5, b.y_lo - 0.5, b.y_hi + 0.5, 24,
                                  n_modes);
  SafeInputTable safe(s.size(), n_modes);
  for (std::size_t f = 0; f < s.size(); ++f) {
    for (std::size_t u = 0; u < n_modes; ++u) safe.Set(f, u);
  }
  KernelSet k(s, true);
  return {s, k, safe};
}

TEST(KernelPlannerTest, ZeroHorizonReturnsStart) {
  const Track t = WideLoop();
  const ModeTable m = LoopModes();
  const FullKernel fk = MakeFullKernel(t, m.size());
  PlannerConfig cfg;
  cfg.horizon = 0;
  const KernelPlanner p(fk.kernel, fk.safe, m, t, cfg);
  const PPState x{2.0, 0.0, 0.0, 1};
  const auto plan = p.Solve(x);
  ASSERT_TRUE(plan);
  EXPECT_TRUE(plan->modes.empty());
  ASSERT_EQ(plan->states.size(), 1u);
  EXPECT_EQ(plan->states[0], x);
  EXPECT_EQ(plan->gain, 0.0);
  EXPECT_EQ(plan->node_count, 0u);
}

TEST(KernelPlannerTest, StraightPicksFastestMode) {
  const Track t = WideLoop();
  const ModeTable m = LoopModes();
  const FullKernel fk = MakeFullKernel(t, m.size());
  const KernelPlanner p(fk.kernel, fk.safe, m, t, PlannerConfig{});
  const auto plan = p.Solve({2.0, 0.0, 0.0, 0});
  ASSERT_TRUE(plan);
  EXPECT_EQ(plan->modes, (std::vector<std::size_t>{1, 1, 1}));
  EXPECT_NEAR(plan->gain, 3 * 1.5 * 0.16, 1e-9);
  ASSERT_EQ(plan->states.size(), 4u);
  EXPECT_NEAR(plan->states.back().x, 2.0 + 3 * 1.5 * 0.16, 1e-12);
  EXPECT_EQ(plan->node_count, 4u + 16u + 64u);
}

TEST(KernelPlannerTest, RejectsMismatchedTables) {
  const Track t = WideLoop();
  const ModeTable m = LoopModes();
  const FullKernel fk = MakeFullKernel(t, m.size());
  const SafeInputTable small(3, m.size());
  EXPECT_THROW(KernelPlanner(fk.kernel, small, m, t, PlannerConfig{}), std::invalid_argument);
}

TEST(KernelPlannerTest, MatchesExhaustiveSearchOnReference) {
  const auto& ref = GetReference();
  const KernelSet& k = ref.disc.kernel;
  const GridSpec& s = k.spec();
  const KernelPlanner p(k, ref.disc.safe, ref.scenario.modes, ref.scenario.track, PlannerConfig{});
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  const std::size_t m = ref.scenario.modes.size();
  const std::size_t full_tree = m + m * m + m * m * m;
  int checked = 0, found = 0;
  while (checked < 40) {
    const std::size_t f = rng() % s.size();
    if (!k.Test(f)) continue;
    const PPState c = s.Center(s.Unflat(f));
    const PPState x{c.x + s.r() * jitter(rng), c.y + s.r() * jitter(rng),
                    WrapTwoPi(c.phi + s.r() * jitter(rng)), c.q};
    const auto got = p.Solve(x);
    const OraclePlan want =
        ExhaustiveKernelPlan(k, ref.disc.safe, ref.scenario.modes, ref.scenario.track, x, 3, 0.16);
    ASSERT_EQ(got.has_value(), want.found);
    if (got) {
      ++found;
      EXPECT_EQ(got->modes, want.modes);
      EXPECT_NEAR(got->gain, want.gain, 1e-12);
      EXPECT_LE(got->node_count, full_tree);
    }
    ++checked;
  }
  EXPECT_GT(found, 30);
}

TEST(KernelPlannerTest, CandidatesAreUnionOfCellMasks) {
  const auto& ref = GetReference();
  const KernelSet& k = ref.disc.kernel;
  const KernelPlanner p(k, ref.disc.safe, ref.scenario.modes, ref.scenario.track, PlannerConfig{});
  std::mt19937_64 rng(52);
  const BBox b = ref.scenario.track.Bounds();
  std::uniform_real_distribution<double> ux(b.x_lo, b.x_hi), uy(b.y_lo, b.y_hi), up(0, kTwoPi);
  for (int i = 0; i < 2000; ++i) {
    const PPState x{ux(rng), uy(rng), up(rng), rng() % ref.scenario.modes.size()};
    const std::vector<bool> want = OracleCandidates(k, ref.disc.safe, x);
    std::vector<std::size_t> ids;
    for (std::size_t u = 0; u < want.size(); ++u) {
      if (want[u]) ids.push_back(u);
    }
    EXPECT_EQ(p.Candidates(x), ids);
  }
}

TEST(KernelPlannerTest, Deterministic) {
  const auto& ref = GetReference();
  const KernelPlanner p(ref.disc.kernel, ref.disc.safe, ref.scenario.modes, ref.scenario.track,
                        PlannerConfig{});
  const GridSpec& s = ref.disc.kernel.spec();
  for (std::size_t f = 0, n = 0; f < s.size() && n < 50; f += 997) {
    if (!ref.disc.kernel.Test(f)) continue;
    ++n;
    const PPState x = s.Center(s.Unflat(f));
    const auto a = p.Solve(x), b = p.Solve(x);
    ASSERT_EQ(a.has_value(), b.has_value());
    if (a) {
      EXPECT_EQ(a->modes, b->modes);
      EXPECT_EQ(a->node_count, b->node_count);
    }
  }
}

// Executing the first segment of each plan keeps a plan available.
TEST(KernelPlannerTest, RecursiveFeasibilityOverTenThousandSteps) {
  const auto& ref = GetReference();
  const Track& track = ref.scenario.track;
  const KernelPlanner p(ref.disc.kernel, ref.disc.safe, ref.scenario.modes, track,
                        PlannerConfig{});
  const GridSpec& s = ref.disc.kernel.spec();
  std::size_t start = 0;
  for (std::size_t f = 0; f < s.size(); ++f) {
    const GridIndex g = s.Unflat(f);
    if (ref.disc.kernel.Test(f) && g.q == 7 && p.Solve(s.Center(g))) {
      start = f;
      break;
    }
  }
  PPState x = s.Center(s.Unflat(start));
  double travelled = 0;
  for (int step = 0; step < 10000; ++step) {
    const auto plan = p.Solve(x);
    ASSERT_TRUE(plan) << "step " << step;
    const PPState next = plan->states[1];
    for (const Vec2& q : SamplePath(x, ref.scenario.modes.modes[plan->modes[0]], 0.16, 9)) {
      ASSERT_TRUE(track.Inside(q, 0.0)) << "step " << step;
    }
    travelled += track.progress_index().SignedDelta(track.Progress({x.x, x.y}),
                                                    track.Progress({next.x, next.y}));
    x = next;
  }
  EXPECT_GT(travelled, 5 * track.total_length());
}

TEST(NaivePlannerTest, WideTrackAgreesWithFullKernel) {
  const Track t = WideLoop();
  const ModeTable m = LoopModes();
  const FullKernel fk = MakeFullKernel(t, m.size());
  const TransitionAutomaton aut = TransitionAutomaton::Full(m.size());
  const KernelPlanner kp(fk.kernel, fk.safe, m, t, PlannerConfig{});
  const NaivePlanner np(m, aut, t, PlannerConfig{});
  for (const PPState& x : {PPState{3.0, 0.0, 0.0, 0}, PPState{10.0, 2.0, kPi / 2, 2},
                           PPState{6.0, 5.2, kPi + 0.1, 1}}) {
    std::size_t nodes = 0;
    const auto a = kp.Solve(x);
    const auto b = np.Solve(x, &nodes);
    ASSERT_TRUE(a && b);
    EXPECT_EQ(a->modes, b->modes);
    EXPECT_EQ(nodes, 4u + 16u + 64u);
    EXPECT_EQ(b->node_count, nodes);
  }
}

TEST(NaivePlannerTest, RespectsAutomaton) {
  const Track t = WideLoop();
  const ModeTable m = LoopModes();
  const TransitionAutomaton aut = TransitionAutomaton::Identity(m.size());
  const NaivePlanner np(m, aut, t, PlannerConfig{});
  std::size_t nodes = 0;
  const auto plan = np.Solve({3.0, 0.0, 0.0, 0}, &nodes);
  ASSERT_TRUE(plan);
  EXPECT_EQ(plan->modes, (std::vector<std::size_t>{0, 0, 0}));
  EXPECT_EQ(nodes, 3u);
  EXPECT_THROW(np.Solve({3.0, 0.0, 0.0, 4}), std::out_of_range);
}

TEST(NaivePlannerTest, StartOffTrackIsInfeasible) {
  const Track t = WideLoop();
  const ModeTable m = LoopModes();
  const TransitionAutomaton aut = TransitionAutomaton::Full(m.size());
  PlannerConfig cfg;
  const NaivePlanner np(m, aut, t, cfg);
  std::size_t nodes = 0;
  EXPECT_FALSE(np.Solve({5.0, 2.5, 0.0, 0}, &nodes));
  EXPECT_EQ(nodes, 4u + 16u + 64u);
  cfg.horizon = 0;
  EXPECT_FALSE(NaivePlanner(m, aut, t, cfg).Solve({5.0, 2.5, 0.0, 0}));
  EXPECT_TRUE(NaivePlanner(m, aut, t, cfg).Solve({5.0, 0.0, 0.0, 0}));
}

TEST(NaivePlannerTest, HeadingIntoWallLosesSequences) {
  const Track t = WideLoop();
  const ModeTable m = LoopModes();
  const TransitionAutomaton aut = TransitionAutomaton::Full(m.size());
  const NaivePlanner np(m, aut, t, PlannerConfig{});
  // Facing the outer wall 0.3 from the edge; straight sequences leave the track.
  const auto plan = np.Solve({5.0, -0.7, -kPi / 2, 0});
  if (plan) {
    for (std::size_t k = 0; k + 1 < plan->states.size(); ++k) {
      for (const Vec2& q : SamplePath(plan->states[k], m.modes[plan->modes[k]], 0.16, 9)) {
        EXPECT_TRUE(t.Inside(q, 0.0));
      }
    }
    EXPECT_NE(plan->modes, (std::vector<std::size_t>{1, 1, 1}));
  }
}

TEST(RecoverTest, ViableCellIsUnchanged) {
  const auto& ref = GetReference();
  const KernelSet& k = ref.disc.kernel;
  const GridSpec& s = k.spec();
  for (std::size_t f = 0; f < s.size(); f += 101) {
    if (!k.Test(f)) continue;
    const PPState x = s.Center(s.Unflat(f));
    const Recovery r = Recover(x, k, ref.disc.safe);
    EXPECT_FALSE(r.emergency_stop);
    EXPECT_FALSE(r.moved);
    EXPECT_EQ(r.state, x);
  }
}

TEST(RecoverTest, EmptyKernelStops) {
  const GridSpec s = GridSpec::FromCounts(0, 0, 6, 6, 8, 1);
  const KernelSet k(s);
  const SafeInputTable safe(s.size(), 1);
  const Recovery r = Recover(s.Center({2, 2, 2, 0}), k, safe);
  EXPECT_TRUE(r.emergency_stop);
}

TEST(RecoverTest, SingleNeighbourWithinRing) {
  const GridSpec s = GridSpec::FromCounts(0, 0, 9, 9, 8, 2);
  KernelSet k(s);
  SafeInputTable safe(s.size(), 2);
  const GridIndex g{5, 4, 3, 1};
  k.Set(g);
  safe.Set(s.Flat(g), 0);
  const PPState near = s.Center({4, 4, 3, 1});
  const Recovery r = Recover(near, k, safe);
  ASSERT_FALSE(r.emergency_stop);
  EXPECT_TRUE(r.moved);
  EXPECT_EQ(r.cell, g);
  EXPECT_EQ(r.state, s.Center(g));
  // Two cells away on x is 4r: outside the ring.
  EXPECT_TRUE(Recover(s.Center({3, 4, 3, 1}), k, safe).emergency_stop);
  // Other modes never help.
  EXPECT_TRUE(Recover(s.Center({4, 4, 3, 0}), k, safe).emergency_stop);
  // A member with an empty mask does not count.
  KernelSet k2(s);
  k2.Set(g);
  EXPECT_TRUE(Recover(near, k2, SafeInputTable(s.size(), 2)).emergency_stop);
}

TEST(RecoverTest, MatchesRingScan) {
  const auto& ref = GetReference();
  const KernelSet& k = ref.disc.kernel;
  const SafeInputTable& safe = ref.disc.safe;
  const GridSpec& s = k.spec();
  std::mt19937_64 rng(53);
  std::uniform_real_distribution<double> ux(s.axis(0).lo, s.axis(0).Hi()),
      uy(s.axis(1).lo, s.axis(1).Hi()), up(0, kTwoPi);
  int moved = 0;
  for (int i = 0; i < 3000; ++i) {
    const PPState x{ux(rng), uy(rng), up(rng), rng() % s.n_modes()};
    bool viable = false;
    ForNear(s, x, [&](const GridIndex& g) {
      viable = viable || (k.Test(g) && !safe.Empty(s.Flat(g)));
    });
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_f = s.size();
    if (!viable) {
      ForNear(
          s, x,
          [&](const GridIndex& g) {
            const std::size_t f = s.Flat(g);
            if (!k.Test(f) || safe.Empty(f)) return;
            const PPState c = s.Center(g);
            const double d = std::max({std::abs(c.x - x.x), std::abs(c.y - x.y),
                                       std::abs(std::remainder(c.phi - x.phi, kTwoPi))});
            if (d < best || (d == best && f < best_f)) {
              best = d;
              best_f = f;
            }
          },
          3.0);
    }
    const Recovery r = Recover(x, k, safe);
    if (viable) {
      EXPECT_FALSE(r.moved);
      EXPECT_FALSE(r.emergency_stop);
    } else if (best_f == s.size()) {
      EXPECT_TRUE(r.emergency_stop);
    } else {
      ++moved;
      ASSERT_TRUE(r.moved);
      EXPECT_EQ(s.Flat(r.cell), best_f);
      EXPECT_NEAR(s.Distance(x, r.cell), best, 1e-12);
    }
  }
  EXPECT_GT(moved, 10);
}

TEST(PlanCsvTest, OneRowPerState) {
  const Track t = WideLoop();
  const ModeTable m = LoopModes();
  const FullKernel fk = MakeFullKernel(t, m.size());
  const auto plan = KernelPlanner(fk.kernel, fk.safe, m, t, PlannerConfig{}).Solve({2, 0, 0, 0});
  ASSERT_TRUE(plan);
  std::ostringstream os;
  WritePlanCsv(os, *plan, t);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "segment,mode,X,Y,phi,progress");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 4);
}

}  // namespace
}  // namespace viab
