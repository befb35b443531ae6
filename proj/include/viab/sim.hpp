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

// Closed-loop simulation: planner every T_pp, a tracking regulator every
// control period, quantized inputs, and the bicycle model as plant.

#ifndef VIAB_SIM_HPP_
#define VIAB_SIM_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "viab/angles.hpp"
#include "viab/grid.hpp"
#include "viab/kernel.hpp"
#include "viab/parallel.hpp"
#include "viab/planner.hpp"
#include "viab/ppmodel.hpp"
#include "viab/track.hpp"
#include "viab/vehicle.hpp"

namespace viab {

// Nearest of `levels` evenly spaced values over [lo, hi].
inline double Quantize(double v, double lo, double hi, int levels = 256) {
  const double step = (hi - lo) / static_cast<double>(levels - 1);
  const double k = std::clamp(std::round((v - lo) / step), 0.0,
                              static_cast<double>(levels - 1));
  return lo + k * step;
}

// ---------------------------------------------------------------------------
// Tracking regulator.

struct RefPoint {
  FullState x;
  Inputs u;
};

struct TrackingWeights {
  std::array<double, 6> state{40.0, 40.0, 4.0, 0.5, 0.1, 0.05};
  std::array<double, 2> input{0.01, 0.01};
  std::array<double, 2> rate{0.5, 0.5};
};

using JacobianFn = std::function<ModelJacobian(const FullState&, const Inputs&)>;

struct TrackingOutput {
  Inputs u;
  // Feedback on [state error (6); previous input - reference input (2)].
  Eigen::Matrix<double, 2, 8> gain;
};

// Second-order zero-order-hold discretization of the linearized model.
inline void Discretize(const ModelJacobian& j, double dt,
                       Eigen::Matrix<double, 6, 6>& a,
                       Eigen::Matrix<double, 6, 2>& b) {
  Eigen::Matrix<double, 6, 6> ja;
  Eigen::Matrix<double, 6, 2> jb;
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 6; ++c) ja(r, c) = j.a[r][c];
    for (int c = 0; c < 2; ++c) jb(r, c) = j.b[r][c];
  }
  a = Eigen::Matrix<double, 6, 6>::Identity() + dt * ja + 0.5 * dt * dt * ja * ja;
  b = dt * jb + 0.5 * dt * dt * ja * jb;
}

// Finite-horizon regulator on the error dynamics linearized along ref, with
// state ([x - x_ref; u_prev - u_ref]) and input (u - u_prev). ref[0] is the
// reference at the current time; the horizon is ref.size() - 1 steps.
inline TrackingOutput TrackFollow(const CarParams& p, const FullState& s,
                                  const Inputs& u_prev,
                                  const std::vector<RefPoint>& ref, double dt,
                                  const TrackingWeights& w = {},
                                  const JacobianFn& jac = {}) {
  if (ref.size() < 2) throw std::invalid_argument("tracking: horizon too short");
  using Mat8 = Eigen::Matrix<double, 8, 8>;
  using Mat82 = Eigen::Matrix<double, 8, 2>;
  Mat8 qa = Mat8::Zero();
  for (int i = 0; i < 6; ++i) qa(i, i) = w.state[i];
  qa(6, 6) = w.input[0];
  qa(7, 7) = w.input[1];
  Eigen::Matrix2d rd = Eigen::Matrix2d::Zero();
  rd(0, 0) = w.rate[0];
  rd(1, 1) = w.rate[1];

  const std::size_t h = ref.size() - 1;
  Mat8 pm = qa;
  Eigen::Matrix<double, 2, 8> k0;
  for (std::size_t step = h; step-- > 0;) {
    const ModelJacobian j = jac ? jac(ref[step].x, ref[step].u)
                                : Linearize(p, ref[step].x, ref[step].u);
    Eigen::Matrix<double, 6, 6> a;
    Eigen::Matrix<double, 6, 2> b;
    Discretize(j, dt, a, b);
    Mat8 f = Mat8::Zero();
    f.topLeftCorner<6, 6>() = a;
    f.topRightCorner<6, 2>() = b;
    f.bottomRightCorner<2, 2>() = Eigen::Matrix2d::Identity();
    Mat82 g;
    g.topRows<6>() = b;
    g.bottomRows<2>() = Eigen::Matrix2d::Identity();
    const Eigen::Matrix2d s_mat = rd + g.transpose() * pm * g;
    const Eigen::Matrix<double, 2, 8> k = s_mat.ldlt().solve(g.transpose() * pm * f);
    pm = qa + f.transpose() * pm * (f - g * k);
    pm = 0.5 * (pm + pm.transpose()).eval();
    if (step == 0) k0 = k;
  }

  Eigen::Matrix<double, 8, 1> z;
  const auto xs = s.ToArray();
  const auto xr = ref[0].x.ToArray();
  for (int i = 0; i < 6; ++i) z(i) = xs[i] - xr[i];
  z(2) = WrapPi(z(2));
  z(6) = u_prev.delta - ref[0].u.delta;
  z(7) = u_prev.d - ref[0].u.d;
  const Eigen::Vector2d du = -k0 * z;
  TrackingOutput out;
  out.gain = k0;
  out.u.delta = std::clamp(u_prev.delta + du(0), p.delta_min, p.delta_max);
  out.u.d = std::clamp(u_prev.d + du(1), p.d_min, p.d_max);
  return out;
}

// Reference along a mode sequence from start, one point per control period,
// N * T_pp / dt + 1 points.
inline std::vector<RefPoint> BuildReference(const PPState& start,
                                            const std::vector<std::size_t>& seq,
                                            const ModeTable& modes, double t_pp,
                                            double dt) {
  const auto per = static_cast<std::size_t>(std::llround(t_pp / dt));
  std::vector<RefPoint> ref;
  PPState x = start;
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const Mode& m = modes.modes[seq[k]];
    for (std::size_t j = 0; j < per; ++j) {
      const PPState p = Advance(x, BodyDisplacement(m, dt * static_cast<double>(j)), seq[k]);
      ref.push_back({FullState{p.x, p.y, p.phi, m.vx, m.vy, m.omega}, Inputs{m.delta, m.d}});
    }
    x = Advance(x, BodyDisplacement(m, t_pp), seq[k]);
  }
  if (!seq.empty()) {
    const Mode& m = modes.modes[seq.back()];
    ref.push_back({FullState{x.x, x.y, x.phi, m.vx, m.vy, m.omega}, Inputs{m.delta, m.d}});
  }
  return ref;
}

// ---------------------------------------------------------------------------
// Lap counting.

// Counts forward crossings of the start line from raw progress values. A wrap
// is a jump from the last tenth of the lap to the first tenth; a backward
// wrap must be undone by a forward one before a lap counts.
class LapCounter {
 public:
  explicit LapCounter(double total_length, double hysteresis = 0.1)
      : total_(total_length), band_(hysteresis * total_length) {}

  // Returns true when this update completes a lap.
  bool Update(double progress) {
    bool lap = false;
    if (has_prev_) {
      if (prev_ > total_ - band_ && progress < band_) {
        if (debt_ > 0) {
          --debt_;
        } else {
          lap = true;
          ++laps_;
        }
      } else if (prev_ < band_ && progress > total_ - band_) {
        ++debt_;
      }
    }
    prev_ = progress;
    has_prev_ = true;
    return lap;
  }
  std::size_t laps() const { return laps_; }

 private:
  double total_;
  double band_;
  double prev_ = 0;
  bool has_prev_ = false;
  std::size_t laps_ = 0;
  std::size_t debt_ = 0;
};

// ---------------------------------------------------------------------------
// Closed loop.

enum class PlannerKind { kKernel, kNaive };
enum class PlantKind { kFull, kPathModel };

struct SimConfig {
  double dt = 0.02;
  // Control periods for the full plant; planner steps for the path model.
  std::size_t steps = 10000;
  bool quantize = true;
  PlannerKind planner = PlannerKind::kKernel;
  PlantKind plant = PlantKind::kFull;
  double t_pp = 0.16;
  std::size_t horizon = 3;
  std::size_t n_samples = 9;
  double violation_margin = 0.005;
  double naive_margin = 0.005;
  std::size_t substeps = 4;
  // Scales the plant's motor gain; 1 = no mismatch.
  double mismatch = 1.0;
  std::size_t start_mode = 0;
  bool log_trajectory = false;
  // Also run the naive planner at every replan and record its node count.
  bool compare_naive = false;
  TrackingWeights weights;

  void Validate() const {
    if (!(dt > 0)) throw std::invalid_argument("sim: dt must be > 0");
    if (!(t_pp > 0)) throw std::invalid_argument("sim: t_pp must be > 0");
    const double ratio = t_pp / dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 || std::round(ratio) < 1) {
      throw std::invalid_argument("sim: t_pp must be an integer multiple of dt");
    }
    if (substeps == 0) throw std::invalid_argument("sim: substeps must be > 0");
  }
};

struct SimContext {
  const CarParams& car;
  const ModeTable& modes;
  const TransitionAutomaton& automaton;
  const Track& track;
  const KernelSet* kernel = nullptr;
  const SafeInputTable* safe = nullptr;
};

struct LogRow {
  double t;
  FullState s;
  Inputs u;
  double progress;
  std::size_t mode;
};

struct RunReport {
  std::size_t steps = 0;
  std::size_t replans = 0;
  std::vector<double> lap_times;
  double mean_lap = 0;
  double median_lap = 0;
  std::size_t violations = 0;
  std::size_t emergency_stops = 0;
  std::size_t infeasible_replans = 0;
  std::size_t recoveries = 0;
  double plan_ms_median = 0;
  double plan_ms_max = 0;
  std::vector<double> plan_ms;
  std::vector<std::size_t> nodes;        // per replan, active planner
  std::vector<std::size_t> naive_nodes;  // per replan when compare_naive
  double min_boundary_distance = std::numeric_limits<double>::infinity();
  std::vector<LogRow> log;

  std::size_t laps() const { return lap_times.size(); }
  double MeanNodes() const {
    if (nodes.empty()) return 0;
    double s = 0;
    for (auto n : nodes) s += static_cast<double>(n);
    return s / static_cast<double>(nodes.size());
  }
};

inline double Median(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace detail {

inline void Finish(RunReport& rep) {
  if (!rep.lap_times.empty()) {
    double s = 0;
    for (double t : rep.lap_times) s += t;
    rep.mean_lap = s / static_cast<double>(rep.lap_times.size());
    rep.median_lap = Median(rep.lap_times);
  }
  rep.plan_ms_median = Median(rep.plan_ms);
  rep.plan_ms_max = rep.plan_ms.empty()
                        ? 0
                        : *std::max_element(rep.plan_ms.begin(), rep.plan_ms.end());
}

// Start on the start line, heading along the first centreline segment.
inline PPState StartState(const Track& track, std::size_t q) {
  const auto& c = track.centerline();
  return PPState{c[0].x, c[0].y, WrapTwoPi(std::atan2(c[1].y - c[0].y, c[1].x - c[0].x)), q};
}

struct Planned {
  std::optional<Plan> plan;
  bool infeasible = false;
  bool recovered = false;
  bool emergency = false;
};

class PlannerHost {
 public:
  PlannerHost(const SimConfig& cfg, const SimContext& ctx) : cfg_(cfg), ctx_(ctx) {
    PlannerConfig pc;
    pc.horizon = cfg.horizon;
    pc.t_pp = cfg.t_pp;
    pc.n_samples = cfg.n_samples;
    pc.naive_margin = cfg.naive_margin;
    if (cfg.planner == PlannerKind::kKernel || cfg.compare_naive) {
      naive_.emplace(ctx.modes, ctx.automaton, ctx.track, pc);
    }
    if (cfg.planner == PlannerKind::kKernel) {
      if (!ctx.kernel || !ctx.safe) {
        throw std::invalid_argument("sim: kernel planner needs a kernel");
      }
      if (ctx.kernel->spec().n_modes() != ctx.modes.size()) {
        throw std::invalid_argument("sim: kernel grid does not match the mode table");
      }
      kernel_.emplace(*ctx.kernel, *ctx.safe, ctx.modes, ctx.track, pc);
    } else if (!naive_) {
      naive_.emplace(ctx.modes, ctx.automaton, ctx.track, pc);
    }
  }

  Planned Replan(const PPState& x, RunReport& rep) const {
    Planned out;
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg_.planner == PlannerKind::kNaive) {
      out.plan = naive_->Solve(x);
      out.infeasible = !out.plan;
    } else {
      out.plan = kernel_->Solve(x);
      if (!out.plan) {
        out.infeasible = true;
        const Recovery rec = Recover(x, *ctx_.kernel, *ctx_.safe);
        if (rec.emergency_stop) {
          out.emergency = true;
        } else {
          out.recovered = true;
          out.plan = kernel_->Solve(rec.state);
          if (!out.plan) out.emergency = true;
        }
      }
    }
    const auto t1 = std::chrono::steady_clock::now();
    rep.plan_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    rep.nodes.push_back(out.plan ? out.plan->node_count : 0);
    if (cfg_.compare_naive) {
      std::size_t n = 0;
      naive_->Solve(x, &n);
      rep.naive_nodes.push_back(n);
    }
    ++rep.replans;
    if (out.infeasible) ++rep.infeasible_replans;
    if (out.recovered) ++rep.recoveries;
    return out;
  }

 private:
  const SimConfig& cfg_;
  const SimContext& ctx_;
  std::optional<KernelPlanner> kernel_;
  std::optional<NaivePlanner> naive_;
};

}  // namespace detail

// Path-planning model as plant: x <- step(x, u_0). Each step is one planner
// step; track clearance is checked at every control period along the segment.
inline RunReport RunPathModel(const SimConfig& cfg, const SimContext& ctx) {
  cfg.Validate();
  RunReport rep;
  if (cfg.steps == 0) return rep;
  detail::PlannerHost host(cfg, ctx);
  const auto per = static_cast<std::size_t>(std::llround(cfg.t_pp / cfg.dt));
  PPState x = detail::StartState(ctx.track, cfg.start_mode);
  LapCounter laps(ctx.track.progress_index().total_length());
  laps.Update(ctx.track.Progress({x.x, x.y}));
  double t = 0, last_lap = 0;
  bool stopped = false;
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    const detail::Planned pl = host.Replan(x, rep);
    if (!pl.plan) {
      if (!stopped) ++rep.emergency_stops;
      stopped = true;
      break;
    }
    stopped = false;
    const std::size_t u = pl.plan->modes.empty() ? x.q : pl.plan->modes.front();
    const Mode& m = ctx.modes.modes[u];
    const std::vector<Vec2> pts = SamplePath(x, m, cfg.t_pp, per + 1);
    for (std::size_t j = 1; j < pts.size(); ++j) {
      const double bd = ctx.track.BoundaryDistance(pts[j]);
      rep.min_boundary_distance = std::min(rep.min_boundary_distance, bd);
      if (bd < cfg.violation_margin) ++rep.violations;
      const double tj = t + cfg.dt * static_cast<double>(j);
      if (laps.Update(ctx.track.Progress(pts[j]))) {
        rep.lap_times.push_back(tj - last_lap);
        last_lap = tj;
      }
    }
    x = Step(x, ctx.modes, u, cfg.t_pp);
    t += cfg.t_pp;
    if (cfg.log_trajectory) {
      rep.log.push_back({t, FullState{x.x, x.y, x.phi, m.vx, m.vy, m.omega},
                         Inputs{m.delta, m.d}, ctx.track.Progress({x.x, x.y}), u});
    }
    ++rep.steps;
  }
  detail::Finish(rep);
  return rep;
}

// Full bicycle model as plant with the tracking regulator.
inline RunReport RunFullPlant(const SimConfig& cfg, const SimContext& ctx) {
  cfg.Validate();
  RunReport rep;
  if (cfg.steps == 0) return rep;
  detail::PlannerHost host(cfg, ctx);
  const auto per = static_cast<std::size_t>(std::llround(cfg.t_pp / cfg.dt));
  CarParams plant = ctx.car;
  plant.cm1 *= cfg.mismatch;

  const PPState x0 = detail::StartState(ctx.track, cfg.start_mode);
  const Mode& m0 = ctx.modes.modes[cfg.start_mode];
  FullState s{x0.x, x0.y, x0.phi, m0.vx, m0.vy, m0.omega};
  Inputs u_prev{m0.delta, m0.d};
  std::size_t q = cfg.start_mode;
  std::vector<RefPoint> ref;
  std::size_t ref_pos = 0;
  bool stopped = false;
  LapCounter laps(ctx.track.progress_index().total_length());
  laps.Update(ctx.track.Progress({s.x, s.y}));
  double last_lap = 0;

  for (std::size_t k = 0; k < cfg.steps; ++k) {
    const double t = cfg.dt * static_cast<double>(k);
    if (k % per == 0) {
      const PPState x{s.x, s.y, WrapTwoPi(s.phi), q};
      const detail::Planned pl = host.Replan(x, rep);
      if (pl.plan && !pl.plan->modes.empty()) {
        stopped = false;
        q = pl.plan->modes.front();
        ref = BuildReference(x, pl.plan->modes, ctx.modes, cfg.t_pp, cfg.dt);
        ref_pos = 0;
      } else if (pl.emergency || !pl.plan) {
        if (!stopped) ++rep.emergency_stops;
        stopped = true;
      }
    }
    Inputs u;
    if (stopped || ref.size() < ref_pos + 2) {
      u = Inputs{0.0, 0.0};
    } else {
      const std::vector<RefPoint> window(ref.begin() + static_cast<std::ptrdiff_t>(ref_pos),
                                         ref.end());
      u = TrackFollow(ctx.car, s, u_prev, window, cfg.dt, cfg.weights).u;
    }
    if (cfg.quantize) {
      u.delta = Quantize(u.delta, ctx.car.delta_min, ctx.car.delta_max);
      u.d = Quantize(u.d, ctx.car.d_min, ctx.car.d_max);
    }
    const double h = cfg.dt / static_cast<double>(cfg.substeps);
    for (std::size_t j = 0; j < cfg.substeps; ++j) s = Integrate(plant, s, u, h);
    u_prev = u;
    ++ref_pos;

    const double bd = ctx.track.BoundaryDistance({s.x, s.y});
    rep.min_boundary_distance = std::min(rep.min_boundary_distance, bd);
    if (bd < cfg.violation_margin) ++rep.violations;
    const double prog = ctx.track.Progress({s.x, s.y});
    if (laps.Update(prog)) {
      rep.lap_times.push_back(t + cfg.dt - last_lap);
      last_lap = t + cfg.dt;
    }
    if (cfg.log_trajectory) rep.log.push_back({t + cfg.dt, s, u, prog, q});
    ++rep.steps;
  }
  detail::Finish(rep);
  return rep;
}

inline RunReport Run(const SimConfig& cfg, const SimContext& ctx) {
  return cfg.plant == PlantKind::kPathModel ? RunPathModel(cfg, ctx)
                                            : RunFullPlant(cfg, ctx);
}

inline void WriteTrajectoryCsv(std::ostream& os, const RunReport& rep) {
  os << "t,X,Y,phi,vx,vy,omega,delta,d,progress,mode\n";
  os.precision(10);
  for (const LogRow& r : rep.log) {
    os << r.t << ',' << r.s.x << ',' << r.s.y << ',' << r.s.phi << ',' << r.s.vx << ','
       << r.s.vy << ',' << r.s.omega << ',' << r.u.delta << ',' << r.u.d << ','
       << r.progress << ',' << (r.mode + 1) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Sweeps.

struct SweepCase {
  std::string kernel = "discriminating";  // "viability", "discriminating", "none"
  double t_pp = 0.16;
  std::size_t horizon = 3;
};

struct KernelTables {
  const KernelSet* kernel = nullptr;
  const SafeInputTable* safe = nullptr;
  // Automaton for this T_pp; the context's automaton when null.
  const TransitionAutomaton* automaton = nullptr;
};

// Supplies tables for a (kernel kind, T_pp) pair; kind "none" needs no
// kernel. Throws on failure.
using KernelProvider = std::function<KernelTables(const std::string&, double)>;

inline const char* kSweepHeader =
    "kernel,grid_points,n_modes,t_pp,n_s,steps,laps,mean_lap_s,median_lap_s,"
    "violations,emergency_stops,infeasible_replans,recoveries,plan_ms_median,"
    "plan_ms_max,mean_nodes,error\n";

inline void WriteSweepRow(std::ostream& os, const SweepCase& c, std::size_t grid_points,
                          std::size_t n_modes, const RunReport* rep,
                          const std::string& error) {
  os << c.kernel << ',' << grid_points << ',' << n_modes << ',' << c.t_pp << ','
     << c.horizon << ',';
  if (rep) {
    os << rep->steps << ',' << rep->laps() << ',' << rep->mean_lap << ','
       << rep->median_lap << ',' << rep->violations << ',' << rep->emergency_stops << ','
       << rep->infeasible_replans << ',' << rep->recoveries << ',' << rep->plan_ms_median
       << ',' << rep->plan_ms_max << ',' << rep->MeanNodes() << ',';
  } else {
    os << ",,,,,,,,,,,";
  }
  os << error << '\n';
}

// One row per case. Failures are recorded in the row's error column.
// Timing columns are wall-clock measurements; everything else is
// deterministic.
inline void RunSweep(const std::vector<SweepCase>& cases, const SimConfig& base,
                     const SimContext& ctx, const KernelProvider& provider,
                     std::ostream& os, std::size_t workers = 1) {
  os << kSweepHeader;
  std::vector<std::optional<RunReport>> reports(cases.size());
  std::vector<std::string> errors(cases.size());
  std::vector<std::size_t> points(cases.size(), 0);
  ParallelFor(cases.size(), workers, 1, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      try {
        SimConfig cfg = base;
        cfg.t_pp = cases[i].t_pp;
        cfg.horizon = cases[i].horizon;
        const KernelTables kt = provider(cases[i].kernel, cases[i].t_pp);
        SimContext c{ctx.car, ctx.modes, kt.automaton ? *kt.automaton : ctx.automaton,
                     ctx.track};
        if (cases[i].kernel == "none") {
          cfg.planner = PlannerKind::kNaive;
        } else {
          c.kernel = kt.kernel;
          c.safe = kt.safe;
          cfg.planner = PlannerKind::kKernel;
          points[i] = kt.kernel ? kt.kernel->spec().size() : 0;
        }
        reports[i] = Run(cfg, c);
      } catch (const std::exception& e) {
        errors[i] = e.what();
        std::replace(errors[i].begin(), errors[i].end(), ',', ';');
      }
    }
  });
  for (std::size_t i = 0; i < cases.size(); ++i) {
    WriteSweepRow(os, cases[i], points[i], ctx.modes.size(),
                  reports[i] ? &*reports[i] : nullptr, errors[i]);
  }
}

}  // namespace viab

#endif  // VIAB_SIM_HPP_
