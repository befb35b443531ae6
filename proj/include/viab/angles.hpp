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

#ifndef VIAB_ANGLES_HPP_
#define VIAB_ANGLES_HPP_

#include <cmath>
#include <numbers>

namespace viab {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Wraps an angle into [0, 2*pi).
inline double WrapTwoPi(double a) {
  double w = std::fmod(a, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;
  return w;
}

// Wraps an angle into [-pi, pi).
inline double WrapPi(double a) {
  double w = WrapTwoPi(a + kPi) - kPi;
  return w;
}

}  // namespace viab

#endif  // VIAB_ANGLES_HPP_
