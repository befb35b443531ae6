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

// Kernel file, all integers and floats little-endian:
//
//   char[4]  "VIAK"
//   u32      format version (1)
//   u32      kind (0 constraint set, 1 viability, 2 discriminating)
//   f64[3]   lo (X, Y, phi)
//   f64[3]   hi (X, Y, phi)
//   f64      r
//   u64[4]   nx, ny, n_phi, n_modes
//   per mode q: ceil(nx * ny * n_phi / 8) bytes of membership bits, bit i of
//            the slice at byte i / 8, position i % 8; i = (iphi * ny + iy) * nx + ix
//   u8       1 if a safe-input table follows, else 0
//   per grid point (flat order, q slowest): ceil(n_modes / 8) bytes of
//            safe-input bits, mode u at byte u / 8, position u % 8

#ifndef VIAB_KERNEL_IO_HPP_
#define VIAB_KERNEL_IO_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "viab/grid.hpp"
#include "viab/kernel.hpp"

namespace viab {

inline constexpr std::uint32_t kKernelFormatVersion = 1;

enum class KernelKind : std::uint32_t {
  kConstraint = 0,
  kViability = 1,
  kDiscriminating = 2,
};

inline const char* KindName(KernelKind k) {
  switch (k) {
    case KernelKind::kConstraint:
      return "constraint";
    case KernelKind::kViability:
      return "viability";
    case KernelKind::kDiscriminating:
      return "discriminating";
  }
  return "unknown";
}

struct KernelFile {
  KernelKind kind = KernelKind::kConstraint;
  KernelSet kernel;
  std::optional<SafeInputTable> safe;
};

namespace io {

inline void PutU32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}
inline void PutU64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}
inline void PutF64(std::ostream& os, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  PutU64(os, u);
}

inline void Need(std::istream& is) {
  if (!is) throw std::runtime_error("kernel file: truncated");
}
inline std::uint32_t GetU32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  Need(is);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}
inline std::uint64_t GetU64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  Need(is);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}
inline double GetF64(std::istream& is) {
  const std::uint64_t u = GetU64(is);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

}  // namespace io

inline void WriteKernel(std::ostream& os, const KernelFile& f) {
  const KernelSet& k = f.kernel;
  const GridSpec& s = k.spec();
  os.write("VIAK", 4);
  io::PutU32(os, kKernelFormatVersion);
  io::PutU32(os, static_cast<std::uint32_t>(f.kind));
  for (std::size_t j = 0; j < 3; ++j) io::PutF64(os, s.axis(j).lo);
  for (std::size_t j = 0; j < 3; ++j) io::PutF64(os, s.axis(j).Hi());
  io::PutF64(os, s.r());
  io::PutU64(os, s.nx());
  io::PutU64(os, s.ny());
  io::PutU64(os, s.nphi());
  io::PutU64(os, s.n_modes());
  const std::size_t slice = s.slice_size();
  std::vector<unsigned char> buf((slice + 7) / 8);
  for (std::size_t q = 0; q < s.n_modes(); ++q) {
    std::fill(buf.begin(), buf.end(), 0);
    for (std::size_t i = 0; i < slice; ++i) {
      if (k.Test(q * slice + i)) buf[i >> 3] |= static_cast<unsigned char>(1U << (i & 7));
    }
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size()));
  }
  const unsigned char has_safe = f.safe ? 1 : 0;
  os.put(static_cast<char>(has_safe));
  if (f.safe) {
    const SafeInputTable& t = *f.safe;
    if (t.n_points() != s.size() || t.n_modes() != s.n_modes()) {
      throw std::invalid_argument("kernel file: safe table does not match grid");
    }
    std::vector<unsigned char> m((s.n_modes() + 7) / 8);
    for (std::size_t p = 0; p < s.size(); ++p) {
      std::fill(m.begin(), m.end(), 0);
      for (std::size_t u = 0; u < s.n_modes(); ++u) {
        if (t.Test(p, u)) m[u >> 3] |= static_cast<unsigned char>(1U << (u & 7));
      }
      os.write(reinterpret_cast<const char*>(m.data()),
               static_cast<std::streamsize>(m.size()));
    }
  }
  if (!os) throw std::runtime_error("kernel file: write failed");
}

inline KernelFile ReadKernel(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  io::Need(is);
  if (std::memcmp(magic, "VIAK", 4) != 0) {
    throw std::runtime_error("kernel file: bad magic");
  }
  const std::uint32_t version = io::GetU32(is);
  if (version != kKernelFormatVersion) {
    throw std::runtime_error("kernel file: unsupported version " +
                             std::to_string(version));
  }
  KernelFile f;
  const std::uint32_t kind = io::GetU32(is);
  if (kind > 2) throw std::runtime_error("kernel file: bad kind");
  f.kind = static_cast<KernelKind>(kind);
  std::array<double, 3> lo{}, hi{};
  for (auto& v : lo) v = io::GetF64(is);
  for (auto& v : hi) v = io::GetF64(is);
  const double r = io::GetF64(is);
  const std::uint64_t nx = io::GetU64(is), ny = io::GetU64(is),
                      nphi = io::GetU64(is), nm = io::GetU64(is);
  constexpr std::uint64_t kMaxPoints = std::uint64_t{1} << 36;
  if (nx == 0 || ny == 0 || nphi == 0 || nm == 0 ||
      nx > kMaxPoints / ny || nx * ny > kMaxPoints / nphi ||
      nx * ny * nphi > kMaxPoints / nm) {
    throw std::runtime_error("kernel file: bad grid dimensions");
  }
  const GridSpec s = GridSpec::FromCounts(lo[0], lo[1], nx, ny, nphi, nm);
  for (std::size_t j = 0; j < 3; ++j) {
    if (std::abs(s.axis(j).Hi() - hi[j]) > 1e-9 * (1.0 + std::abs(hi[j]))) {
      throw std::runtime_error("kernel file: bounds inconsistent with counts");
    }
  }
  if (std::abs(s.r() - r) > 1e-12) {
    throw std::runtime_error("kernel file: radius inconsistent with n_phi");
  }
  f.kernel = KernelSet(s);
  const std::size_t slice = s.slice_size();
  std::vector<unsigned char> buf((slice + 7) / 8);
  for (std::size_t q = 0; q < nm; ++q) {
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    io::Need(is);
    for (std::size_t i = 0; i < slice; ++i) {
      if ((buf[i >> 3] >> (i & 7)) & 1U) f.kernel.Set(q * slice + i);
    }
  }
  const int has_safe = is.get();
  if (has_safe == std::char_traits<char>::eof()) {
    throw std::runtime_error("kernel file: truncated");
  }
  if (has_safe == 1) {
    SafeInputTable t(s.size(), nm);
    std::vector<unsigned char> m((nm + 7) / 8);
    for (std::size_t p = 0; p < s.size(); ++p) {
      is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size()));
      io::Need(is);
      for (std::size_t u = 0; u < nm; ++u) {
        if ((m[u >> 3] >> (u & 7)) & 1U) t.Set(p, u);
      }
    }
    f.safe = std::move(t);
  } else if (has_safe != 0) {
    throw std::runtime_error("kernel file: bad safe-table flag");
  }
  return f;
}

inline void SaveKernel(const std::string& path, const KernelFile& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  WriteKernel(os, f);
}

inline KernelFile LoadKernel(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return ReadKernel(is);
}

// Binary graymap: members white, row 0 at the top holds the largest iy.
inline void WritePgm(std::ostream& os, const Raster& r) {
  os << "P5\n" << r.nx << ' ' << r.ny << "\n255\n";
  for (std::size_t row = 0; row < r.ny; ++row) {
    const std::size_t iy = r.ny - 1 - row;
    for (std::size_t ix = 0; ix < r.nx; ++ix) {
      os.put(static_cast<char>(r.At(ix, iy) ? 255 : 0));
    }
  }
}

// One line per iy (ascending), comma-separated 0/1 per ix.
inline void WriteRasterCsv(std::ostream& os, const Raster& r) {
  for (std::size_t iy = 0; iy < r.ny; ++iy) {
    for (std::size_t ix = 0; ix < r.nx; ++ix) {
      os << (ix ? "," : "") << (r.At(ix, iy) ? 1 : 0);
    }
    os << '\n';
  }
}

}  // namespace viab

#endif  // VIAB_KERNEL_IO_HPP_
