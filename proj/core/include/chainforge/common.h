// chainforge/common.h

// Copyright 2024-2026  Chainforge Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef CHAINFORGE_COMMON_H_
#define CHAINFORGE_COMMON_H_

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace chainforge {

using int32 = std::int32_t;
using int64 = std::int64_t;
using uint64 = std::uint64_t;

// -inf stands for "log of zero probability" throughout.
constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline double LogAdd(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  double hi = std::max(a, b), lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

// Thrown when a supervision or decoding graph admits no path for the
// requested number of frames (total path weight is exactly zero).
class EmptyCompositionError : public std::runtime_error {
 public:
  explicit EmptyCompositionError(const std::string &msg)
      : std::runtime_error(msg) {}
};

// Deterministic RNG.  std::mt19937_64 has a sequence pinned by the standard;
// the derived draws below avoid std::*_distribution, whose output is
// implementation-defined, so streams are reproducible across toolchains.
class Rng {
 public:
  explicit Rng(uint64 seed) : x_(seed ^ 0x9e3779b97f4a7c15ULL) {
    // Avoid the all-zero state and decorrelate small seeds.
    for (int i = 0; i < 8; i++) Next();
  }

  uint64 Next() {
    // xorshift64* (Vigna).  Small, fast, and fully portable.
    x_ ^= x_ >> 12;
    x_ ^= x_ << 25;
    x_ ^= x_ >> 27;
    return x_ * 0x2545f4914f6cdd1dULL;
  }

  // Uniform on {0, ..., n-1}; n > 0.
  uint64 UniformInt(uint64 n) { return Next() % n; }

  // Uniform on [0, 1), 53-bit resolution.
  double UniformReal() { return double(Next() >> 11) * 0x1.0p-53; }

  double UniformRange(double a, double b) {
    return a + (b - a) * UniformReal();
  }

  // Standard normal via Box-Muller (the cached second value is discarded).
  double Gaussian() {
    double u1 = UniformReal(), u2 = UniformReal();
    while (u1 <= 0.0) u1 = UniformReal();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * M_PI * u2);
  }

 private:
  uint64 x_;
};

}  // namespace chainforge

#endif  // CHAINFORGE_COMMON_H_
