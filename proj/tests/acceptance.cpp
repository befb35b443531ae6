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

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "viab/cover.hpp"
#include "viab/kernel.hpp"
#include "viab/parallel.hpp"
#include "viab/planner.hpp"
#include "viab/ppmodel.hpp"
#include "viab/scenario.hpp"
#include "viab/sim.hpp"

namespace viab {
namespace {

const std::string kData = VIAB_DATA_DIR;

double Since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// Oracles.

// Grid indices on one axis within r of c; false if c leaves a bounded axis.
bool AxisNear(const AxisGrid& a, double c, double r, std::vector<std::size_t>& out) {
  out.clear();
  if (!a.wrap && (c < a.lo - r || c > a.Hi() + r)) return false;
  const double h = 2.0 * a.r;
  const long guess = std::lround((c - a.lo) / h);
  for (long i = guess - 2; i <= guess + 2; ++i) {
    long j = i;
    if (a.wrap) {
      const long n = static_cast<long>(a.count);
      j = ((i % n) + n) % n;
    } else if (i < 0 || i >= static_cast<long>(a.count)) {
      continue;
    }
    double d = c - a.Center(static_cast<std::size_t>(j));
    if (a.wrap) d = std::remainder(d, kTwoPi);
    if (std::abs(d) <= r &&
        std::find(out.begin(), out.end(), static_cast<std::size_t>(j)) == out.end()) {
      out.push_back(static_cast<std::size_t>(j));
    }
  }
  return true;
}

// Every grid point within r of p (same mode) is a member.
bool OracleBallInside(const KernelSet& k, const PPState& p) {
  const GridSpec& s = k.spec();
  const double c[3] = {p.x, p.y, p.phi};
  std::vector<std::size_t> idx[3];
  for (std::size_t j = 0; j < 3; ++j) {
    if (!AxisNear(s.axis(j), c[j], s.r(), idx[j])) return false;
  }
  for (std::size_t ix : idx[0]) {
    for (std::size_t iy : idx[1]) {
      for (std::size_t ip : idx[2]) {
        if (!k.Test(GridIndex{ix, iy, ip, p.q})) return false;
      }
    }
  }
  return true;
}

bool PathInside(const PPState& c, const Mode& m, const ScenarioConfig& cfg, const Track& track,
                double margin) {
  for (const Vec2& p : SamplePath(c, m, cfg.t_pp, cfg.n_samples)) {
    if (!track.Inside(p, margin)) return false;
  }
  return true;
}

double StateDistance(const PPState& a, const PPState& b) {
  return std::max({std::abs(a.x - b.x), std::abs(a.y - b.y), std::abs(WrapPi(a.phi - b.phi))});
}

PPState Rk4(const PPState& x, const Mode& m, double t, int n) {
  std::array<double, 3> s{x.x, x.y, x.phi};
  auto f = [&](const std::array<double, 3>& z) {
    return std::array<double, 3>{m.vx * std::cos(z[2]) - m.vy * std::sin(z[2]),
                                 m.vx * std::sin(z[2]) + m.vy * std::cos(z[2]), m.omega};
  };
  auto add = [](const std::array<double, 3>& a, const std::array<double, 3>& k, double c) {
    return std::array<double, 3>{a[0] + c * k[0], a[1] + c * k[1], a[2] + c * k[2]};
  };
  const double h = t / n;
  for (int i = 0; i < n; ++i) {
    const auto k1 = f(s);
    const auto k2 = f(add(s, k1, h / 2));
    const auto k3 = f(add(s, k2, h / 2));
    const auto k4 = f(add(s, k3, h));
    for (int j = 0; j < 3; ++j) s[j] += h / 6 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
  }
  return {s[0], s[1], WrapTwoPi(s[2]), x.q};
}

// ---------------------------------------------------------------------------
// Reference scenario.

struct Reference {
  ScenarioConfig cfg;
  Scenario scenario;
  GridProblem grid;
  KernelResult viab;
  KernelResult disc;
  double viab_seconds = 0;
  double disc_seconds = 0;
};

Reference BuildReference() {
  const ScenarioConfig cfg = ScenarioConfig::Load(kData + "/reference.cfg");
  Scenario s = LoadScenario(cfg);
  GridProblem g = BuildGridProblem(s, cfg.n_phi);
  auto t0 = std::chrono::steady_clock::now();
  KernelResult v = ViabilityKernel(g.constraint, g.problem);
  const double tv = Since(t0);
  t0 = std::chrono::steady_clock::now();
  KernelResult d = DiscriminatingKernel(g.constraint, g.problem);
  const double td = Since(t0);
  return Reference{cfg, std::move(s), std::move(g), std::move(v), std::move(d), tv, td};
}

// ---------------------------------------------------------------------------
// Criteria.

Outcome ViabilityFixedPoint(const Reference& ref) {
  const KernelSet& k = ref.viab.kernel;
  const GridSpec& spec = k.spec();
  const ModeTable& modes = ref.scenario.modes;
  std::atomic<std::size_t> failures{0}, checked{0};
  ParallelFor(spec.size(), 0, 256, [&](std::size_t lo, std::size_t hi) {
    std::size_t bad = 0, n = 0;
    for (std::size_t f = lo; f < hi; ++f) {
      if (!k.Test(f)) continue;
      ++n;
      const GridIndex g = spec.Unflat(f);
      const PPState c = spec.Center(g);
      bool ok = false;
      for (std::size_t u = 0; u < modes.size() && !ok; ++u) {
        if (!ref.scenario.automaton.Allowed(g.q, u)) continue;
        ok = OracleBallInside(k, Step(c, modes, u, ref.cfg.t_pp)) &&
             PathInside(c, modes.modes[u], ref.cfg, ref.scenario.track, ref.grid.margin);
      }
      bad += !ok;
    }
    failures += bad;
    checked += n;
  });
  std::ostringstream os;
  os << "grid " << spec.nx() << "x" << spec.ny() << "x" << spec.nphi() << "x" << spec.n_modes()
     << " (" << spec.size() << " points), members " << checked << ", unsupported " << failures
     << ", kernel time " << ref.viab_seconds << " s";
  return {failures == 0 && checked > 0 && ref.viab_seconds <= 600.0, os.str()};
}

std::size_t Violating(const KernelSet& disc, const KernelSet& viab) {
  std::size_t n = 0;
  for (std::size_t f = 0; f < disc.spec().size(); ++f) n += disc.Test(f) && !viab.Test(f);
  return n;
}

Outcome InclusionAndTrend(const Reference& ref) {
  std::ostringstream os;
  const std::size_t violating = Violating(ref.disc.kernel, ref.viab.kernel);
  os << "violating bits " << violating << "; Disc/Viab fraction ratio at n_phi";
  bool ok = violating == 0;
  ScenarioConfig cfg = ref.cfg;
  cfg.kernel_margin = ref.grid.margin;
  Scenario s = LoadScenario(cfg);
  std::vector<double> ratios;
  for (std::size_t n_phi : {std::size_t{48}, std::size_t{68}, std::size_t{96}}) {
    double fv = 0, fd = 0;
    std::size_t bad = 0;
    if (n_phi == ref.cfg.n_phi) {
      fv = Fraction(ref.viab.kernel, ref.grid.constraint);
      fd = Fraction(ref.disc.kernel, ref.grid.constraint);
    } else {
      const GridProblem g = BuildGridProblem(s, n_phi);
      const KernelResult v = ViabilityKernel(g.constraint, g.problem);
      const KernelResult d = DiscriminatingKernel(g.constraint, g.problem);
      fv = Fraction(v.kernel, g.constraint);
      fd = Fraction(d.kernel, g.constraint);
      bad = Violating(d.kernel, v.kernel);
    }
    ok = ok && bad == 0 && fv > 0;
    const double ratio = fv > 0 ? fd / fv : 0.0;
    if (!ratios.empty() && ratio < ratios.back()) ok = false;
    ratios.push_back(ratio);
    os << " " << n_phi << ": " << fd << "/" << fv << " = " << ratio;
    if (bad) os << " (" << bad << " violating)";
  }
  os << " (margin " << cfg.kernel_margin << ")";
  return {ok, os.str()};
}

Outcome CellRobustness(const Reference& ref) {
  const KernelSet& k = ref.disc.kernel;
  const GridSpec& spec = k.spec();
  std::vector<std::size_t> members;
  for (std::size_t f = 0; f < spec.size(); ++f) {
    if (k.Test(f)) members.push_back(f);
  }
  if (members.empty()) return {false, "discriminating kernel is empty"};
  std::mt19937_64 rng(20260101);
  std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
  std::uniform_real_distribution<double> off(-spec.r(), spec.r());
  const std::size_t samples = 5000;
  std::size_t fails = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    const GridIndex g = spec.Unflat(members[pick(rng)]);
    const PPState c = spec.Center(g);
    const PPState x{c.x + off(rng), c.y + off(rng), WrapTwoPi(c.phi + off(rng)), g.q};
    bool ok = false;
    for (std::size_t u = 0; u < ref.scenario.modes.size() && !ok; ++u) {
      if (!ref.scenario.automaton.Allowed(g.q, u)) continue;
      ok = OracleBallInside(k, Step(x, ref.scenario.modes, u, ref.cfg.t_pp));
    }
    fails += !ok;
  }
  std::ostringstream os;
  os << samples << " in-cell samples over " << members.size() << " members, " << fails
     << " without a safe input";
  return {fails == 0, os.str()};
}

// 1-D lattice of spacing 2r: the projection of the r-ball around p when
// every lattice point in it is a member of k.
std::optional<Projection<1>> LatticeBall(const std::set<long>& k, double p, double r) {
  const double h = 2 * r;
  const long lo = static_cast<long>(std::ceil((p - r) / h));
  const long hi = static_cast<long>(std::floor((p + r) / h));
  if (lo > hi) return std::nullopt;
  for (long i = lo; i <= hi; ++i) {
    if (!k.count(i)) return std::nullopt;
  }
  Projection<1> proj;
  proj.rel_lo[0] = static_cast<double>(lo) * h - p;
  proj.rel_hi[0] = static_cast<double>(hi) * h - p;
  return proj;
}

Outcome OracleInnerApproximation() {
  std::ostringstream os;
  bool ok = true;
  // Toy: two circling modes on a 6x6x6 grid, 432 points.
  ModeTable modes;
  modes.modes = {Mode{1, 0.8, 0.0, kPi / 4}, Mode{2, 0.8, 0.0, -kPi / 4}};
  const double t = 1.0, l = 0.25;
  const GridSpec spec = GridSpec::FromCounts(0.0, 0.0, 6, 6, 6, 2);
  KernelProblem prob(spec, modes, TransitionAutomaton::Full(2), t);
  prob.SetLipschitz({l, l});
  const KernelSet k0(spec, true);
  const double ext = l * spec.r();
  const int m = 10;
  std::vector<std::array<double, 3>> dense;
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) {
      for (int c = 0; c < m; ++c) {
        dense.push_back({-ext + 2 * ext * a / (m - 1), -ext + 2 * ext * b / (m - 1),
                         -ext + 2 * ext * c / (m - 1)});
      }
    }
  }
  // Semi-finite kernel: survive every dense sample with some input.
  KernelSet semi = k0;
  while (true) {
    KernelSet next(spec);
    for (std::size_t f = 0; f < spec.size(); ++f) {
      if (!semi.Test(f)) continue;
      const GridIndex g = spec.Unflat(f);
      const PPState c = spec.Center(g);
      bool keep = true;
      for (const auto& v : dense) {
        bool any = false;
        for (std::size_t u = 0; u < 2 && !any; ++u) {
          const PPState s = Step(c, modes, u, t);
          any = OracleBallInside(semi, PPState{s.x + v[0], s.y + v[1], WrapTwoPi(s.phi + v[2]), u});
        }
        if (!any) {
          keep = false;
          break;
        }
      }
      if (keep) next.Set(f);
    }
    if (next == semi) break;
    semi = std::move(next);
  }
  os << "toy " << spec.size() << " points, semi-finite " << semi.Count();
  for (UnionRule rule : {UnionRule::kMaxVolume, UnionRule::kIntersection}) {
    const KernelSet disc = DiscriminatingKernel(k0, prob, {rule, 0}).kernel;
    std::size_t outside = 0;
    for (std::size_t f = 0; f < spec.size(); ++f) outside += disc.Test(f) && !semi.Test(f);
    os << ", " << (rule == UnionRule::kMaxVolume ? "max-volume" : "intersection") << " "
       << disc.Count() << " (" << outside << " outside)";
    ok = ok && outside == 0 && disc.Count() > 0;
  }
  // Counterexample: K = {0, 2}, successors 0.6 and 1.4, r = 0.5, L = 1.
  const double r = 0.5;
  const std::set<long> lattice{0, 2};
  const std::array<double, 2> succ{0.6, 1.4};
  const DisturbanceGrid<1> grid(1.0, r);
  bool samples_pass = true;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = grid.Point(i)[0];
    samples_pass = samples_pass && (LatticeBall(lattice, succ[0] + v, r).has_value() ||
                                    LatticeBall(lattice, succ[1] + v, r).has_value());
  }
  const bool center_fails =
      !LatticeBall(lattice, succ[0], r) && !LatticeBall(lattice, succ[1], r);
  auto probe = [&](std::size_t u, const std::array<double, 1>& v) {
    return LatticeBall(lattice, succ[u] + v[0], r);
  };
  const bool accepted_mv = RobustPoint<1>(grid, 2, r, UnionRule::kMaxVolume, probe);
  const bool accepted_is = RobustPoint<1>(grid, 2, r, UnionRule::kIntersection, probe);
  os << "; counterexample: samples pass " << samples_pass << ", v=0 defeats both "
     << center_fails << ", accepted " << accepted_mv << "/" << accepted_is;
  ok = ok && samples_pass && center_fails && !accepted_mv && !accepted_is;
  return {ok, os.str()};
}

// Number of nodes in the unpruned automaton tree of depth n from q.
std::size_t FullTree(const TransitionAutomaton& aut, std::size_t q, std::size_t n) {
  if (n == 0) return 0;
  std::size_t total = 0;
  for (std::size_t u = 0; u < aut.size(); ++u) {
    if (aut.Allowed(q, u)) total += 1 + FullTree(aut, u, n - 1);
  }
  return total;
}

Outcome RecursiveFeasibility(const Reference& ref) {
  SimConfig c;
  c.plant = PlantKind::kPathModel;
  c.planner = PlannerKind::kKernel;
  c.steps = 10000;
  c.t_pp = ref.cfg.t_pp;
  c.n_samples = ref.cfg.n_samples;
  c.compare_naive = true;
  c.log_trajectory = true;
  const SimContext ctx{ref.scenario.car, ref.scenario.modes, ref.scenario.automaton,
                       ref.scenario.track, &ref.disc.kernel, &ref.disc.safe};
  const RunReport r = Run(c, ctx);
  std::size_t pruned = 0, naive_more = 0;
  std::size_t kernel_total = 0, naive_total = 0;
  for (std::size_t i = 0; i < r.nodes.size(); ++i) {
    const std::size_t q = i == 0 ? c.start_mode : r.log[i - 1].mode;
    kernel_total += r.nodes[i];
    naive_total += r.naive_nodes[i];
    if (r.nodes[i] < FullTree(ref.scenario.automaton, q, c.horizon)) {
      ++pruned;
      naive_more += r.naive_nodes[i] > r.nodes[i];
    }
  }
  std::ostringstream os;
  os << r.steps << " steps, " << r.laps() << " laps, infeasible " << r.infeasible_replans
     << ", violations " << r.violations << ", emergency stops " << r.emergency_stops
     << "; nodes kernel " << kernel_total << " naive " << naive_total << ", replans with pruning "
     << pruned << ", naive expanded more in " << naive_more;
  const bool ok = r.steps == c.steps && r.infeasible_replans == 0 && r.violations == 0 &&
                  r.emergency_stops == 0 && naive_more == pruned;
  return {ok, os.str()};
}

Outcome StepAndLipschitz(const Reference& ref) {
  const ModeTable& modes = ref.scenario.modes;
  const double t = ref.cfg.t_pp;
  const BBox b = ref.scenario.track.Bounds();
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> px(b.x_lo, b.x_hi), py(b.y_lo, b.y_hi),
      ang(0, kTwoPi), eps(-1, 1);
  double worst_err = 0;
  std::size_t exceptions = 0;
  double worst_ratio = 0;
  for (std::size_t u = 0; u < modes.size(); ++u) {
    for (int i = 0; i < 1000; ++i) {
      const PPState x{px(rng), py(rng), ang(rng), 0};
      worst_err = std::max(worst_err, StateDistance(Step(x, modes, u, t), Rk4(x, modes.modes[u], t, 2000)));
    }
    const double bound = Lipschitz(modes.modes[u], t);
    for (int i = 0; i < 10000; ++i) {
      const PPState x{px(rng), py(rng), ang(rng), 0};
      const double scale = 0.3 * std::pow(10.0, -static_cast<double>(rng() % 6));
      const PPState y{x.x + scale * eps(rng), x.y + scale * eps(rng),
                      WrapTwoPi(x.phi + scale * eps(rng)), 0};
      const double din = StateDistance(x, y);
      if (din == 0) continue;
      const double ratio = StateDistance(Step(x, modes, u, t), Step(y, modes, u, t)) / din;
      worst_ratio = std::max(worst_ratio, ratio / bound);
      if (ratio > bound * (1 + 1e-9)) ++exceptions;
    }
  }
  std::ostringstream os;
  os << modes.size() << " modes: max step error " << worst_err
     << ", Lipschitz exceptions " << exceptions << " (max sampled/bound " << worst_ratio << ")";
  return {worst_err < 1e-8 && exceptions == 0, os.str()};
}

bool Subset(const KernelSet& a, const KernelSet& b) { return Violating(a, b) == 0; }

Outcome ObstacleMonotonicity(const Reference& ref) {
  std::ostringstream os;
  bool ok = true;
  for (const char* name : {"easy", "hard", "wall", "block"}) {
    ScenarioConfig cfg = ref.cfg;
    cfg.obstacles = kData + "/obstacles_" + name + ".json";
    const Scenario s = LoadScenario(cfg);
    const GridProblem g = BuildGridProblem(s, cfg.n_phi);
    if (!(g.spec == ref.grid.spec)) return {false, std::string(name) + ": grid changed"};
    const KernelResult v = ViabilityKernel(g.constraint, g.problem);
    const KernelResult d = DiscriminatingKernel(g.constraint, g.problem);
    const bool removes = Subset(g.constraint, ref.grid.constraint) &&
                         Subset(v.kernel, ref.viab.kernel) && Subset(d.kernel, ref.disc.kernel);
    ok = ok && removes && Subset(d.kernel, v.kernel);
    os << name << ": K " << g.constraint.Count() << " Viab " << v.kernel.Count() << " Disc "
       << d.kernel.Count() << (removes ? "" : " (adds bits)") << "; ";
    if (std::string(name) == "hard") {
      ok = ok && d.kernel.Count() < v.kernel.Count();
    }
    if (std::string(name) == "block") {
      ok = ok && g.constraint.Count() > 0 && v.kernel.Count() == 0 && d.kernel.Count() == 0;
    }
  }
  os << "reference Viab " << ref.viab.kernel.Count() << " Disc " << ref.disc.kernel.Count();
  return {ok, os.str()};
}

Outcome FullPlantDemo(const Reference& ref) {
  SimConfig c;
  c.plant = PlantKind::kFull;
  c.planner = PlannerKind::kKernel;
  c.steps = 15000;
  c.t_pp = ref.cfg.t_pp;
  c.n_samples = ref.cfg.n_samples;
  const SimContext ctx{ref.scenario.car, ref.scenario.modes, ref.scenario.automaton,
                       ref.scenario.track, &ref.disc.kernel, &ref.disc.safe};
  const RunReport r = Run(c, ctx);
  std::ostringstream os;
  os << r.steps << " control periods, " << r.laps() << " laps (mean " << r.mean_lap
     << " s), emergency stops " << r.emergency_stops << ", violations " << r.violations
     << ", planner median " << r.plan_ms_median << " ms, max " << r.plan_ms_max << " ms";
  return {r.laps() >= 5 && r.emergency_stops == 0 && r.plan_ms_median < c.dt * 1000.0, os.str()};
}

// Runs the criteria given by number on the command line, or all of them.
int Main(int argc, char** argv) {
  const auto t0 = std::chrono::steady_clock::now();
  const Reference ref = BuildReference();
  std::printf("reference: %zu points, K %zu, Viab %zu (%.1f s), Disc %zu (%.1f s)\n",
              ref.grid.spec.size(), ref.grid.constraint.Count(), ref.viab.kernel.Count(),
              ref.viab_seconds, ref.disc.kernel.Count(), ref.disc_seconds);
  std::fflush(stdout);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"viability fixed point", [&] { return ViabilityFixedPoint(ref); }},
      {"inclusion and refinement trend", [&] { return InclusionAndTrend(ref); }},
      {"cell robustness", [&] { return CellRobustness(ref); }},
      {"oracle inner approximation", [] { return OracleInnerApproximation(); }},
      {"recursive feasibility", [&] { return RecursiveFeasibility(ref); }},
      {"step and Lipschitz bound", [&] { return StepAndLipschitz(ref); }},
      {"obstacle monotonicity", [&] { return ObstacleMonotonicity(ref); }},
      {"full-plant demo", [&] { return FullPlantDemo(ref); }},
  };
  int failed = 0;
  std::set<std::size_t> only;
  for (int a = 1; a < argc; ++a) only.insert(std::stoul(argv[a]));
  int ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.count(i + 1)) continue;
    ++ran;
    const auto t1 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), o.detail.c_str(), Since(t1));
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %d criteria passed in %.1f s\n", ran - failed, ran, Since(t0));
  return failed == 0 ? 0 : 1;
}

}  // namespace
}  // namespace viab

int main(int argc, char** argv) { return viab::Main(argc, argv); }
