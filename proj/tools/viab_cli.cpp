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

// viab_cli: kernels, slices, plans and closed-loop runs from the command line.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "viab/config.hpp"
#include "viab/kernel.hpp"
#include "viab/kernel_io.hpp"
#include "viab/planner.hpp"
#include "viab/scenario.hpp"
#include "viab/sim.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace viab {
namespace {

class Clock {
 public:
  double Seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

// Scenario keys that may be given as flags.
const std::vector<std::pair<std::string, std::string>> kScenarioFlags = {
    {"--track", "track"},       {"--car", "car"},
    {"--obstacles", "obstacles"}, {"--vx", "vx"},
    {"--delta", "delta"},       {"--t-pp", "t_pp"},
    {"--n-samples", "n_samples"}, {"--n-phi", "n_phi"},
    {"--pad", "pad"},           {"--kernel-margin", "kernel_margin"},
    {"--automaton", "automaton"},
};

bool IsPathKey(const std::string& k) {
  return k == "track" || k == "car" || k == "obstacles";
}

struct Globals {
  std::string config;
  std::size_t workers = 0;
  std::string out_dir = ".";
  std::map<std::string, std::string> flags;  // key -> value
};

// Flags first, then the config file; the file wins on conflict.
ScenarioConfig ResolveScenario(const Globals& g) {
  KeyValues kv;
  for (const auto& [k, v] : g.flags) {
    kv[k] = IsPathKey(k) && !v.empty() ? fs::absolute(v).string() : v;
  }
  if (!g.config.empty()) {
    const fs::path base = fs::absolute(g.config).parent_path();
    for (const auto& [k, v0] : LoadKeyValues(g.config)) {
      std::string v = v0;
      if (IsPathKey(k) && !v.empty() && !fs::path(v).is_absolute()) v = (base / v).string();
      auto it = kv.find(k);
      if (it != kv.end() && it->second != v) {
        std::cerr << "warning: " << k << " from " << g.config << " overrides the flag value\n";
      }
      kv[k] = v;
    }
  }
  return ScenarioConfig::FromKeyValues(kv);
}

fs::path OutPath(const Globals& g, const std::string& given, const std::string& fallback) {
  const fs::path p = given.empty() ? fs::path(g.out_dir) / fallback : fs::path(given);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  return p;
}

std::ofstream OpenOut(const fs::path& p, bool binary = false) {
  std::ofstream os(p, binary ? std::ios::binary : std::ios::out);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

void WriteJson(const fs::path& p, const json& j) {
  std::ofstream os = OpenOut(p);
  os << j.dump(2) << '\n';
  if (!os) throw std::runtime_error("cannot write " + p.string());
}

json GridJson(const GridSpec& s) {
  return json{{"nx", s.nx()},        {"ny", s.ny()},         {"nphi", s.nphi()},
              {"n_modes", s.n_modes()}, {"points", s.size()}, {"r", s.r()}};
}

// Analytic footprint of a kernel bitset plus its safe-input table.
double MemoryMb(const GridSpec& s) {
  const double points = static_cast<double>(s.size());
  const double words = static_cast<double>((s.n_modes() + 63) / 64);
  const double bits = points + points * words * 64.0;
  return bits / 8.0 / (1024.0 * 1024.0);
}

UnionRule ParseRule(const std::string& r) {
  if (r == "max-volume") return UnionRule::kMaxVolume;
  if (r == "intersection") return UnionRule::kIntersection;
  throw std::invalid_argument("unknown rule " + r);
}

// Index of a 1-based mode id.
std::size_t ModeIndex(long long id, std::size_t n) {
  if (id < 1 || static_cast<std::size_t>(id) > n) {
    throw std::out_of_range("mode must be in 1.." + std::to_string(n));
  }
  return static_cast<std::size_t>(id - 1);
}

KernelFile LoadMatching(const std::string& path, const GridSpec& spec) {
  KernelFile f = LoadKernel(path);
  if (!(f.kernel.spec() == spec)) {
    throw std::runtime_error(path + ": kernel grid does not match the scenario");
  }
  return f;
}

KernelResult ComputeKernel(const GridProblem& g, KernelKind kind, const KernelOptions& opt) {
  if (kind == KernelKind::kDiscriminating) return DiscriminatingKernel(g.constraint, g.problem, opt);
  return ViabilityKernel(g.constraint, g.problem, opt);
}

// ---------------------------------------------------------------------------

int CmdModes(const Globals& g) {
  const Scenario s = LoadScenario(ResolveScenario(g));
  const fs::path mp = OutPath(g, "", "modes.csv");
  const fs::path ap = OutPath(g, "", "automaton.csv");
  {
    std::ofstream os = OpenOut(mp);
    WriteModeCsv(os, s.modes);
  }
  {
    std::ofstream os = OpenOut(ap);
    os << "from,to\n";
    for (std::size_t i = 0; i < s.modes.size(); ++i) {
      for (std::size_t j = 0; j < s.modes.size(); ++j) {
        if (s.automaton.Allowed(i, j)) os << i + 1 << ',' << j + 1 << '\n';
      }
    }
  }
  std::size_t edges = 0, drift = 0;
  for (std::size_t i = 0; i < s.modes.size(); ++i) {
    for (std::size_t j = 0; j < s.modes.size(); ++j) edges += s.automaton.Allowed(i, j);
    drift += s.modes.modes[i].drift;
  }
  const json out{{"command", "modes"},     {"n_modes", s.modes.size()},
                 {"drift_modes", drift},    {"transitions", edges},
                 {"modes_csv", mp.string()}, {"automaton_csv", ap.string()}};
  std::cout << out.dump() << '\n';
  return 0;
}

struct KernelArgs {
  std::string kind = "discriminating";
  std::string rule = "max-volume";
  std::string output;
};

int CmdKernel(const Globals& g, const KernelArgs& a) {
  const Clock clock;
  const ScenarioConfig cfg = ResolveScenario(g);
  const Scenario s = LoadScenario(cfg);
  const GridProblem gp = BuildGridProblem(s, cfg.n_phi, g.workers);
  KernelFile f;
  std::size_t iterations = 0;
  if (a.kind == "constraint") {
    f.kind = KernelKind::kConstraint;
    f.kernel = gp.constraint;
  } else if (a.kind == "viability" || a.kind == "discriminating") {
    f.kind = a.kind == "viability" ? KernelKind::kViability : KernelKind::kDiscriminating;
    KernelResult c = ComputeKernel(gp, f.kind, KernelOptions{ParseRule(a.rule), g.workers});
    iterations = c.iterations;
    f.kernel = std::move(c.kernel);
    f.safe = std::move(c.safe);
  } else {
    throw std::invalid_argument("unknown kernel kind " + a.kind);
  }
  const fs::path out = OutPath(g, a.output, a.kind + ".vk");
  SaveKernel(out.string(), f);
  const GridSpec& spec = f.kernel.spec();
  json lbar = json::array();
  for (std::size_t q = 0; q < spec.n_modes(); ++q) lbar.push_back(gp.problem.Lbar(q));
  json j{{"command", "kernel"},
         {"kind", KindName(f.kind)},
         {"grid", GridJson(spec)},
         {"margin", gp.margin},
         {"lbar", lbar},
         {"constraint_points", gp.constraint.Count()},
         {"kernel_points", f.kernel.Count()},
         {"fraction", Fraction(f.kernel, gp.constraint)},
         {"iterations", iterations},
         {"memory_mb", MemoryMb(spec)}};
  WriteJson(OutPath(g, "", a.kind + ".json"), j);
  j["file"] = out.string();
  j["wall_time_s"] = clock.Seconds();
  std::cout << j.dump() << '\n';
  return 0;
}

struct CompareArgs {
  std::string viab;
  std::string disc;
};

int CmdCompare(const Globals& g, const CompareArgs& a) {
  const ScenarioConfig cfg = ResolveScenario(g);
  const Scenario s = LoadScenario(cfg);
  const GridSpec spec = ScenarioGrid(s, cfg.n_phi);
  const KernelSet k0 = BuildConstraintSet(spec, s.track, cfg.MarginFor(cfg.n_phi));
  const KernelFile v = LoadMatching(a.viab, spec);
  const KernelFile d = LoadMatching(a.disc, spec);
  std::size_t violating = 0;
  for (std::size_t i = 0; i < spec.size(); ++i) violating += d.kernel.Test(i) && !v.kernel.Test(i);
  const json j{{"command", "compare"},
               {"grid", GridJson(spec)},
               {"constraint_points", k0.Count()},
               {"viability_points", v.kernel.Count()},
               {"discriminating_points", d.kernel.Count()},
               {"viability_fraction", Fraction(v.kernel, k0)},
               {"discriminating_fraction", Fraction(d.kernel, k0)},
               {"violating_bits", violating},
               {"disc_subset_of_viab", violating == 0}};
  WriteJson(OutPath(g, "", "compare.json"), j);
  std::cout << j.dump() << '\n';
  return 0;
}

struct SliceArgs {
  std::string kernel;
  double phi = 0;
  long long mode = 1;
  std::string format = "pgm";
  std::string output;
};

int CmdSlice(const Globals& g, const SliceArgs& a) {
  const KernelFile f = LoadKernel(a.kernel);
  const GridSpec& spec = f.kernel.spec();
  const Raster r = Slice(f.kernel, a.phi, ModeIndex(a.mode, spec.n_modes()));
  if (a.format != "pgm" && a.format != "csv") {
    throw std::invalid_argument("unknown format " + a.format);
  }
  const fs::path out = OutPath(g, a.output, "slice." + a.format);
  std::size_t set = 0;
  for (auto v : r.cells) set += v != 0;
  {
    std::ofstream os = OpenOut(out, a.format == "pgm");
    if (a.format == "pgm") {
      WritePgm(os, r);
    } else {
      WriteRasterCsv(os, r);
    }
  }
  const json j{{"command", "slice"}, {"file", out.string()},  {"nx", r.nx},
               {"ny", r.ny},         {"iphi", r.iphi},        {"mode", a.mode},
               {"set_cells", set}};
  std::cout << j.dump() << '\n';
  return 0;
}

struct PlanArgs {
  std::string kernel;
  double x = 0, y = 0, phi = 0;
  long long mode = 1;
  std::size_t horizon = 3;
  std::string output;
};

int CmdPlan(const Globals& g, const PlanArgs& a) {
  const Clock clock;
  const ScenarioConfig cfg = ResolveScenario(g);
  const Scenario s = LoadScenario(cfg);
  const KernelFile f = LoadMatching(a.kernel, ScenarioGrid(s, cfg.n_phi));
  if (!f.safe) throw std::runtime_error(a.kernel + ": no safe-input table");
  PlannerConfig pc;
  pc.horizon = a.horizon;
  pc.t_pp = cfg.t_pp;
  pc.n_samples = cfg.n_samples;
  const KernelPlanner planner(f.kernel, *f.safe, s.modes, s.track, pc);
  const PPState x{a.x, a.y, a.phi, ModeIndex(a.mode, s.modes.size())};
  const std::optional<Plan> p = planner.Solve(x);
  json j{{"command", "plan"}, {"feasible", p.has_value()}};
  if (p) {
    const fs::path out = OutPath(g, a.output, "plan.csv");
    std::ofstream os = OpenOut(out);
    WritePlanCsv(os, *p, s.track);
    json modes = json::array();
    for (auto u : p->modes) modes.push_back(u + 1);
    j["file"] = out.string();
    j["modes"] = modes;
    j["gain"] = p->gain;
    j["progress"] = p->progress;
    j["nodes"] = p->node_count;
  }
  j["wall_time_s"] = clock.Seconds();
  std::cout << j.dump() << '\n';
  return p ? 0 : 3;
}

struct SimArgs {
  std::string kernel;
  std::string planner = "kernel";
  std::string plant = "full";
  std::size_t steps = 2000;
  std::size_t horizon = 3;
  long long start_mode = 1;
  double mismatch = 1.0;
  bool no_quantize = false;
  bool compare_naive = false;
  std::string trajectory;
  std::string output;
};

SimConfig MakeSimConfig(const ScenarioConfig& cfg, const SimArgs& a, std::size_t n_modes) {
  SimConfig c;
  c.t_pp = cfg.t_pp;
  c.n_samples = cfg.n_samples;
  c.horizon = a.horizon;
  c.steps = a.steps;
  c.quantize = !a.no_quantize;
  c.mismatch = a.mismatch;
  c.compare_naive = a.compare_naive;
  c.start_mode = ModeIndex(a.start_mode, n_modes);
  if (a.plant == "full") {
    c.plant = PlantKind::kFull;
  } else if (a.plant == "path") {
    c.plant = PlantKind::kPathModel;
  } else {
    throw std::invalid_argument("unknown plant " + a.plant);
  }
  if (a.planner == "kernel") {
    c.planner = PlannerKind::kKernel;
  } else if (a.planner == "naive") {
    c.planner = PlannerKind::kNaive;
  } else {
    throw std::invalid_argument("unknown planner " + a.planner);
  }
  return c;
}

json ReportJson(const RunReport& r) {
  json laps = json::array();
  for (double t : r.lap_times) laps.push_back(t);
  std::size_t nodes = 0, naive = 0;
  for (auto n : r.nodes) nodes += n;
  for (auto n : r.naive_nodes) naive += n;
  return json{{"steps", r.steps},
              {"replans", r.replans},
              {"laps", r.laps()},
              {"lap_times_s", laps},
              {"mean_lap_s", r.mean_lap},
              {"violations", r.violations},
              {"emergency_stops", r.emergency_stops},
              {"infeasible_replans", r.infeasible_replans},
              {"recoveries", r.recoveries},
              {"min_boundary_distance", r.min_boundary_distance},
              {"mean_nodes", r.MeanNodes()},
              {"total_nodes", nodes},
              {"total_naive_nodes", naive}};
}

int CmdSimulate(const Globals& g, const SimArgs& a) {
  const Clock clock;
  const ScenarioConfig cfg = ResolveScenario(g);
  const Scenario s = LoadScenario(cfg);
  SimConfig c = MakeSimConfig(cfg, a, s.modes.size());
  c.log_trajectory = !a.trajectory.empty();
  std::optional<KernelFile> f;
  if (!a.kernel.empty()) {
    f = LoadMatching(a.kernel, ScenarioGrid(s, cfg.n_phi));
    if (!f->safe) throw std::runtime_error(a.kernel + ": no safe-input table");
  }
  const SimContext ctx{s.car, s.modes, s.automaton, s.track, f ? &f->kernel : nullptr,
                       f ? &*f->safe : nullptr};
  const RunReport r = Run(c, ctx);
  json j{{"command", "simulate"}, {"planner", a.planner}, {"plant", a.plant}};
  j.update(ReportJson(r));
  const fs::path out = OutPath(g, a.output, "report.json");
  WriteJson(out, j);
  if (!a.trajectory.empty()) {
    std::ofstream os = OpenOut(OutPath(g, a.trajectory, ""));
    WriteTrajectoryCsv(os, r);
  }
  j["report"] = out.string();
  j["plan_ms_median"] = r.plan_ms_median;
  j["plan_ms_max"] = r.plan_ms_max;
  j["wall_time_s"] = clock.Seconds();
  std::cout << j.dump() << '\n';
  return 0;
}

struct SweepArgs {
  std::string kernels = "discriminating";
  std::string t_pp;
  std::string horizons = "3";
  SimArgs sim;
};

std::vector<std::string> SplitNames(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = Trim(item);
    if (item.empty()) continue;
    if (item != "viability" && item != "discriminating" && item != "none") {
      throw std::invalid_argument("unknown sweep kernel " + item);
    }
    out.push_back(item);
  }
  return out;
}

// Kernels and automata per (kind, t_pp), built on first use.
class SweepCache {
 public:
  SweepCache(const ScenarioConfig& base, std::size_t workers)
      : base_(base), workers_(workers) {}

  KernelTables Get(const std::string& kind, double t_pp) {
    std::lock_guard<std::mutex> lock(mu_);
    Entry& e = entries_[t_pp];
    if (!e.scenario) {
      ScenarioConfig c = base_;
      c.t_pp = t_pp;
      e.scenario = std::make_unique<Scenario>(LoadScenario(c));
    }
    KernelTables out;
    out.automaton = &e.scenario->automaton;
    if (kind == "none") return out;
    if (!e.grid) {
      e.grid = std::make_unique<GridProblem>(
          BuildGridProblem(*e.scenario, base_.n_phi, workers_));
    }
    auto& slot = e.kernels[kind];
    if (!slot) {
      const KernelKind k = kind == "viability" ? KernelKind::kViability : KernelKind::kDiscriminating;
      slot = std::make_unique<KernelResult>(
          ComputeKernel(*e.grid, k, KernelOptions{UnionRule::kMaxVolume, workers_}));
    }
    out.kernel = &slot->kernel;
    out.safe = &slot->safe;
    return out;
  }

 private:
  struct Entry {
    std::unique_ptr<Scenario> scenario;
    std::unique_ptr<GridProblem> grid;
    std::map<std::string, std::unique_ptr<KernelResult>> kernels;
  };
  ScenarioConfig base_;
  std::size_t workers_;
  std::mutex mu_;
  std::map<double, Entry> entries_;
};

int CmdSweep(const Globals& g, const SweepArgs& a) {
  const Clock clock;
  const ScenarioConfig cfg = ResolveScenario(g);
  const Scenario s = LoadScenario(cfg);
  const SimConfig base = MakeSimConfig(cfg, a.sim, s.modes.size());
  std::vector<double> t_pps = a.t_pp.empty() ? std::vector<double>{cfg.t_pp} : ParseList(a.t_pp);
  std::vector<SweepCase> cases;
  for (const std::string& k : SplitNames(a.kernels)) {
    for (double t : t_pps) {
      for (double n : ParseList(a.horizons)) {
        if (n < 0 || n != std::floor(n)) throw std::invalid_argument("horizons must be integers");
        cases.push_back({k, t, static_cast<std::size_t>(n)});
      }
    }
  }
  SweepCache cache(cfg, g.workers);
  const SimContext ctx{s.car, s.modes, s.automaton, s.track};
  const fs::path out = OutPath(g, a.sim.output, "sweep.csv");
  std::ofstream os = OpenOut(out);
  RunSweep(
      cases, base, ctx,
      [&cache](const std::string& kind, double t_pp) { return cache.Get(kind, t_pp); }, os,
      g.workers == 0 ? ResolveWorkers(0) : g.workers);
  const json j{{"command", "sweep"}, {"file", out.string()}, {"rows", cases.size()},
               {"wall_time_s", clock.Seconds()}};
  std::cout << j.dump() << '\n';
  return 0;
}

int Main(int argc, char** argv) {
  CLI::App app{"Viability and discriminating kernels for racing path planning", "viab_cli"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Scenario file (key = value); its values win over flags");
  app.add_option("--workers", g.workers, "Worker threads (0: hardware concurrency)");
  app.add_option("--out-dir", g.out_dir, "Directory for default artifact paths");
  std::map<std::string, std::string> raw;
  std::vector<std::pair<std::string, CLI::Option*>> flag_opts;
  for (const auto& [flag, key] : kScenarioFlags) {
    flag_opts.emplace_back(key, app.add_option(flag, raw[key], "Scenario " + key));
  }

  auto* modes = app.add_subcommand("modes", "Write the mode table and transition automaton");

  KernelArgs ka;
  auto* kernel = app.add_subcommand("kernel", "Compute a kernel and save it");
  kernel->add_option("--kind", ka.kind, "constraint | viability | discriminating")
      ->check(CLI::IsMember({"constraint", "viability", "discriminating"}));
  kernel->add_option("--rule", ka.rule, "max-volume | intersection")
      ->check(CLI::IsMember({"max-volume", "intersection"}));
  kernel->add_option("-o,--output", ka.output, "Kernel file");

  CompareArgs ca;
  auto* compare = app.add_subcommand("compare", "Compare a viability and a discriminating kernel");
  compare->add_option("--viab", ca.viab)->required();
  compare->add_option("--disc", ca.disc)->required();

  SliceArgs sa;
  auto* slice = app.add_subcommand("slice", "Export one (phi, mode) slice of a kernel");
  slice->add_option("--kernel", sa.kernel)->required();
  slice->add_option("--phi", sa.phi, "Heading in radians");
  slice->add_option("--mode", sa.mode, "Mode id, from 1");
  slice->add_option("--format", sa.format)->check(CLI::IsMember({"pgm", "csv"}));
  slice->add_option("-o,--output", sa.output);

  PlanArgs pa;
  auto* plan = app.add_subcommand("plan", "Plan from one state with a kernel");
  plan->add_option("--kernel", pa.kernel)->required();
  plan->add_option("--x", pa.x)->required();
  plan->add_option("--y", pa.y)->required();
  plan->add_option("--phi", pa.phi)->required();
  plan->add_option("--mode", pa.mode, "Mode id, from 1");
  plan->add_option("--horizon", pa.horizon);
  plan->add_option("-o,--output", pa.output);

  auto add_sim = [](CLI::App* c, SimArgs& s) {
    c->add_option("--planner", s.planner)->check(CLI::IsMember({"kernel", "naive"}));
    c->add_option("--plant", s.plant)->check(CLI::IsMember({"full", "path"}));
    c->add_option("--steps", s.steps);
    c->add_option("--start-mode", s.start_mode, "Mode id, from 1");
    c->add_option("--mismatch", s.mismatch, "Plant motor gain scale");
    c->add_flag("--no-quantize", s.no_quantize);
    c->add_option("-o,--output", s.output);
  };
  SimArgs ma;
  auto* simulate = app.add_subcommand("simulate", "Closed-loop run");
  add_sim(simulate, ma);
  simulate->add_option("--kernel", ma.kernel, "Kernel file with safe-input table");
  simulate->add_option("--horizon", ma.horizon);
  simulate->add_flag("--compare-naive", ma.compare_naive);
  simulate->add_option("--trajectory", ma.trajectory, "Trajectory CSV");

  SweepArgs wa;
  auto* sweep = app.add_subcommand("sweep", "Closed-loop runs over kernels, T_pp and horizons");
  add_sim(sweep, wa.sim);
  sweep->add_option("--kernels", wa.kernels, "Comma list of viability, discriminating, none");
  sweep->add_option("--t-pp-list", wa.t_pp, "Comma list of T_pp values");
  sweep->add_option("--horizons", wa.horizons, "Comma list of horizons");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  for (const auto& [key, opt] : flag_opts) {
    if (opt->count() > 0) g.flags[key] = raw[key];
  }

  try {
    if (*modes) return CmdModes(g);
    if (*kernel) return CmdKernel(g, ka);
    if (*compare) return CmdCompare(g, ca);
    if (*slice) return CmdSlice(g, sa);
    if (*plan) return CmdPlan(g, pa);
    if (*simulate) return CmdSimulate(g, ma);
    if (*sweep) return CmdSweep(g, wa);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error: " << msg << '\n';
    return 1;
  }
  return 1;
}

}  // namespace
}  // namespace viab

int main(int argc, char** argv) { return viab::Main(argc, argv); }
