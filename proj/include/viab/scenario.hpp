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

// A scenario bundles track, car, modes, automaton and grid.
//
// Keys (all optional):
//   track = path            car = path (key-value car parameters)
//   obstacles = path        vx = 1.0, 1.25, 1.5
//   delta = -0.25, -0.1, 0, 0.1, 0.25
//   t_pp = 0.16             n_samples = 9
//   n_phi = 48              pad = 0.1 (grid box beyond the track bounds)
//   kernel_margin = auto    (auto: sqrt(2) r + r vx_max t_pp + 0.005)
//   automaton = feasible | full | identity
// Relative paths are resolved against the scenario file's directory.

#ifndef VIAB_SCENARIO_HPP_
#define VIAB_SCENARIO_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "viab/config.hpp"
#include "viab/grid.hpp"
#include "viab/kernel.hpp"
#include "viab/track.hpp"
#include "viab/vehicle.hpp"

namespace viab {

inline std::vector<double> ParseList(const std::string& s) {
  std::vector<double> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = Trim(item);
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw std::runtime_error("not a number: " + item);
    out.push_back(v);
  }
  return out;
}

struct ScenarioConfig {
  std::string track;
  std::string car;
  std::string obstacles;
  std::vector<double> vx{1.0, 1.25, 1.5};
  std::vector<double> delta{-0.25, -0.1, 0.0, 0.1, 0.25};
  double t_pp = 0.16;
  std::size_t n_samples = 9;
  std::size_t n_phi = 48;
  double pad = 0.1;
  double kernel_margin = -1.0;  // negative: automatic
  std::string automaton = "feasible";

  static ScenarioConfig FromKeyValues(const KeyValues& kv,
                                      const std::filesystem::path& base = {}) {
    ScenarioConfig c;
    auto path = [&](const std::string& key, std::string& out) {
      auto it = kv.find(key);
      if (it == kv.end() || it->second.empty()) return;
      std::filesystem::path p(it->second);
      out = p.is_absolute() || base.empty() ? p.string() : (base / p).string();
    };
    path("track", c.track);
    path("car", c.car);
    path("obstacles", c.obstacles);
    if (auto it = kv.find("vx"); it != kv.end()) c.vx = ParseList(it->second);
    if (auto it = kv.find("delta"); it != kv.end()) c.delta = ParseList(it->second);
    c.t_pp = GetDouble(kv, "t_pp", c.t_pp);
    c.n_samples = static_cast<std::size_t>(GetDouble(kv, "n_samples", 9));
    c.n_phi = static_cast<std::size_t>(GetDouble(kv, "n_phi", 48));
    c.pad = GetDouble(kv, "pad", c.pad);
    if (auto it = kv.find("kernel_margin"); it != kv.end() && it->second != "auto") {
      c.kernel_margin = GetDouble(kv, "kernel_margin", -1.0);
    }
    if (auto it = kv.find("automaton"); it != kv.end()) c.automaton = it->second;
    c.Validate();
    return c;
  }

  static ScenarioConfig Load(const std::string& file) {
    return FromKeyValues(LoadKeyValues(file),
                         std::filesystem::path(file).parent_path());
  }

  void Validate() const {
    if (vx.empty() || delta.empty()) {
      throw std::invalid_argument("scenario: vx and delta lists must be nonempty");
    }
    if (!(t_pp > 0)) throw std::invalid_argument("scenario: t_pp must be > 0");
    if (n_samples < 2) throw std::invalid_argument("scenario: n_samples must be >= 2");
    if (n_phi < 2) throw std::invalid_argument("scenario: n_phi must be >= 2");
    if (automaton != "feasible" && automaton != "full" && automaton != "identity") {
      throw std::invalid_argument("scenario: unknown automaton " + automaton);
    }
  }

  double MaxSpeed() const { return *std::max_element(vx.begin(), vx.end()); }

  // Margin for a grid with n_phi heading points.
  double MarginFor(std::size_t phi_points) const {
    if (kernel_margin >= 0) return kernel_margin;
    const double r = kPi / static_cast<double>(phi_points);
    return std::sqrt(2.0) * r + r * MaxSpeed() * t_pp + 0.005;
  }
};

struct Scenario {
  ScenarioConfig config;
  CarParams car;
  Track track;
  ModeTable modes;
  TransitionAutomaton automaton;
};

inline ModeTable ScenarioModes(const CarParams& car, const ScenarioConfig& c) {
  std::vector<std::array<double, 2>> trims;
  for (double v : c.vx) {
    for (double d : c.delta) trims.push_back({v, d});
  }
  ModeTable t = BuildModeTable(car, trims);
  if (!t.failures.empty()) {
    throw std::runtime_error("scenario: " + std::to_string(t.failures.size()) +
                             " (vx, delta) pairs have no stationary point");
  }
  AssignLipschitz(t, c.t_pp);
  return t;
}

inline TransitionAutomaton ScenarioAutomaton(const CarParams& car, const ModeTable& t,
                                             const ScenarioConfig& c) {
  if (c.automaton == "full") return TransitionAutomaton::Full(t.size());
  if (c.automaton == "identity") return TransitionAutomaton::Identity(t.size());
  return BuildAutomaton(car, t, c.t_pp / 2.0);
}

inline Scenario LoadScenario(const ScenarioConfig& c) {
  Scenario s{c, {}, Track(), {}, {}};
  if (!c.car.empty()) s.car = CarParams::Load(c.car);
  if (c.track.empty()) throw std::invalid_argument("scenario: no track given");
  s.track = Track::Load(c.track);
  if (!c.obstacles.empty()) {
    s.track = s.track.WithObstacles(Track::ObstaclesFromJson(Track::LoadJsonFile(c.obstacles)));
  }
  s.modes = ScenarioModes(s.car, c);
  s.automaton = ScenarioAutomaton(s.car, s.modes, c);
  return s;
}

// Grid over the track bounds plus pad with the given heading resolution.
inline GridSpec ScenarioGrid(const Scenario& s, std::size_t n_phi) {
  const BBox b = s.track.Bounds();
  const double pad = s.config.pad;
  return GridSpec::Covering(b.x_lo - pad, b.x_hi + pad, b.y_lo - pad, b.y_hi + pad, n_phi,
                            s.modes.size());
}

// Constraint set and kernel problem for one grid.
struct GridProblem {
  GridSpec spec;
  double margin = 0;
  KernelSet constraint;
  KernelProblem problem;
};

inline GridProblem BuildGridProblem(const Scenario& s, std::size_t n_phi,
                                    std::size_t workers = 0) {
  const GridSpec spec = ScenarioGrid(s, n_phi);
  const double margin = s.config.MarginFor(n_phi);
  KernelSet k = BuildConstraintSet(spec, s.track, margin);
  PathTable paths = PathTable::Build(spec, s.modes, s.config.t_pp, s.config.n_samples,
                                     s.track, margin, workers);
  KernelProblem prob(spec, s.modes, s.automaton, s.config.t_pp, std::move(paths));
  return GridProblem{spec, margin, std::move(k), std::move(prob)};
}

}  // namespace viab

#endif  // VIAB_SCENARIO_HPP_
