/*
 *  Copyright 2026 The trexsuper Authors. All Rights Reserved.
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */
#include <doctest.h>

#include <cmath>
#include <vector>

#include "trex/common.hpp"
#include "trex/simd/kernels.hpp"

using namespace trex;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

// Naive triple loops used as the oracle for every GEMM layout.
void naive_gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const std::vector<double>& a,
                const std::vector<double>& b, std::vector<double>& c) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      long double s = 0.0L;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = ta ? a[p * m + i] : a[i * k + p];
        const double bv = tb ? b[j * k + p] : b[p * n + j];
        s += static_cast<long double>(av) * bv;
      }
      c[i * n + j] += static_cast<double>(s);
    }
}

void check_close(const std::vector<double>& got, const std::vector<double>& want, double tol) {
  REQUIRE(got.size() == want.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
  CHECK(worst <= tol);
}

std::vector<const simd::Kernels*> all_tables() {
  std::vector<const simd::Kernels*> t{&simd::scalar_kernels()};
  if (const auto* a = simd::avx2_kernels()) t.push_back(a);
  return t;
}

}  // namespace

TEST_CASE("simd: vector kernels match the naive loops for awkward lengths") {
  Rng rng(3);
  for (const auto* K : all_tables()) {
    CAPTURE(K->name);
    for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 15u, 16u, 17u, 1000u, 1023u}) {
      CAPTURE(n);
      auto a = random_vec(rng, n), b = random_vec(rng, n), y = random_vec(rng, n);
      long double d = 0.0L;
      for (std::size_t i = 0; i < n; ++i) d += static_cast<long double>(a[i]) * b[i];
      CHECK(std::abs(K->dot(a.data(), b.data(), n) - static_cast<double>(d)) <= 1e-12 * (1.0 + n));

      auto want = y;
      for (std::size_t i = 0; i < n; ++i) want[i] += 0.37 * a[i];
      auto got = y;
      K->axpy(0.37, a.data(), got.data(), n);
      check_close(got, want, 1e-15);

      want = y;
      for (double& v : want) v *= -1.5;
      got = y;
      K->scale(-1.5, got.data(), n);
      check_close(got, want, 0.0);

      want = y;
      for (std::size_t i = 0; i < n; ++i) want[i] += a[i] * b[i];
      got = y;
      K->fma_accumulate(a.data(), b.data(), got.data(), n);
      check_close(got, want, 1e-15);
    }
  }
}

TEST_CASE("simd: all three GEMM layouts match the naive oracle") {
  Rng rng(5);
  const std::size_t dims[][3] = {{1, 1, 1}, {3, 5, 7}, {4, 8, 4}, {9, 13, 6}, {17, 33, 19}, {32, 600, 11}, {2, 1030, 40}};
  for (const auto* K : all_tables()) {
    CAPTURE(K->name);
    for (const auto& d : dims) {
      const std::size_t m = d[0], n = d[1], k = d[2];
      CAPTURE(m);
      CAPTURE(n);
      CAPTURE(k);
      const auto a = random_vec(rng, m * k), b = random_vec(rng, k * n), c0 = random_vec(rng, m * n);
      const double tol = 1e-13 * static_cast<double>(k);

      auto want = c0, got = c0;
      naive_gemm(false, false, m, n, k, a, b, want);
      K->gemm_nn(m, n, k, a.data(), b.data(), got.data());
      check_close(got, want, tol);

      want = c0, got = c0;
      naive_gemm(false, true, m, n, k, a, b, want);
      K->gemm_nt(m, n, k, a.data(), b.data(), got.data());
      check_close(got, want, tol);

      want = c0, got = c0;
      naive_gemm(true, false, m, n, k, a, b, want);
      K->gemm_tn(m, n, k, a.data(), b.data(), got.data());
      check_close(got, want, tol);
    }
  }
}

TEST_CASE("simd: AVX2 and scalar agree to rounding on a large product") {
  const auto* avx = simd::avx2_kernels();
  if (avx == nullptr) {
    MESSAGE("AVX2 unavailable; equivalence is vacuous on this host");
    return;
  }
  Rng rng(9);
  const std::size_t m = 24, n = 2048, k = 96;
  const auto a = random_vec(rng, m * k), b = random_vec(rng, k * n);
  std::vector<double> cs(m * n, 0.0), cv(m * n, 0.0);
  simd::scalar_kernels().gemm_nn(m, n, k, a.data(), b.data(), cs.data());
  avx->gemm_nn(m, n, k, a.data(), b.data(), cv.data());
  check_close(cv, cs, 1e-12);
}

TEST_CASE("simd: the active table honours the override and names itself") {
  const auto& K = simd::active();
  CHECK(K.name != nullptr);
  CHECK(K.dot != nullptr);
  CHECK(K.gemm_tn != nullptr);
}
