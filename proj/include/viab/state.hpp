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

#ifndef VIAB_STATE_HPP_
#define VIAB_STATE_HPP_

#include <cstddef>

namespace viab {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

// Path-planner state: planar pose plus the index of the active stationary
// velocity mode. Mode indices are zero-based; exported files use id = q + 1.
struct PPState {
  double x = 0.0;
  double y = 0.0;
  double phi = 0.0;
  std::size_t q = 0;

  friend bool operator==(const PPState&, const PPState&) = default;
};

}  // namespace viab

#endif  // VIAB_STATE_HPP_
