// Copyright 2026 The userdp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef USERDP_FFT_HPP
#define USERDP_FFT_HPP

#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

namespace userdp::internal {

// Iterative radix-2 Cooley-Tukey transform; a.size() must be a power of two.
inline void fft(std::vector<std::complex<double>>& a, bool invert) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double angle = 2.0 * M_PI / static_cast<double>(len) * (invert ? -1 : 1);
    std::complex<double> wlen(std::cos(angle), std::sin(angle));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (invert) {
    for (auto& x : a) x /= static_cast<double>(n);
  }
}

// Linear convolution of two non-negative mass vectors via FFT. Rounding can
// produce tiny negative coefficients; they are clamped to zero.
inline std::vector<double> convolve_fft(const std::vector<double>& a,
                                        const std::vector<double>& b) {
  const std::size_t out_size = a.size() + b.size() - 1;
  const std::size_t n = std::bit_ceil(out_size);
  std::vector<std::complex<double>> fa(n), fb(n);
  for (std::size_t i = 0; i < a.size(); ++i) fa[i] = a[i];
  const bool same = (&a == &b);
  fft(fa, false);
  if (same) {
    fb = fa;
  } else {
    for (std::size_t i = 0; i < b.size(); ++i) fb[i] = b[i];
    fft(fb, false);
  }
  for (std::size_t i = 0; i < n; ++i) fa[i] *= fb[i];
  fft(fa, true);
  std::vector<double> out(out_size);
  for (std::size_t i = 0; i < out_size; ++i) {
    out[i] = fa[i].real() > 0.0 ? fa[i].real() : 0.0;
  }
  return out;
}

// Direct quadratic convolution; exact up to the usual double rounding.
inline std::vector<double> convolve_direct(const std::vector<double>& a,
                                           const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ai = a[i];
    if (ai == 0.0) continue;
    for (std::size_t j = 0; j < b.size(); ++j) {
      out[i + j] += ai * b[j];
    }
  }
  return out;
}

}  // namespace userdp::internal

#endif  // USERDP_FFT_HPP
