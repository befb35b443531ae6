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

#ifndef VIAB_PARALLEL_HPP_
#define VIAB_PARALLEL_HPP_

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace viab {

// Worker count to use for a request of `workers` (0 = hardware concurrency).
inline std::size_t ResolveWorkers(std::size_t workers) {
  if (workers != 0) return workers;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

// Calls body(begin, end) on disjoint sub-ranges of [0, n). Range boundaries
// are multiples of `align`, so callers writing packed bit words never share a
// word between workers. The first exception thrown by a worker is rethrown.
template <typename Body>
void ParallelFor(std::size_t n, std::size_t workers, std::size_t align,
                 const Body& body) {
  if (n == 0) return;
  align = std::max<std::size_t>(1, align);
  const std::size_t blocks = (n + align - 1) / align;
  const std::size_t w = std::min(ResolveWorkers(workers), blocks);
  if (w <= 1) {
    body(std::size_t{0}, n);
    return;
  }
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> threads;
  threads.reserve(w);
  for (std::size_t t = 0; t < w; ++t) {
    const std::size_t b0 = blocks * t / w;
    const std::size_t b1 = blocks * (t + 1) / w;
    const std::size_t lo = b0 * align;
    const std::size_t hi = std::min(n, b1 * align);
    threads.emplace_back([&, lo, hi] {
      try {
        if (lo < hi) body(lo, hi);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace viab

#endif  // VIAB_PARALLEL_HPP_
