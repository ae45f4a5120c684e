// Copyright 2026 The RareScale Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rarescale/wilcoxon.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "rarescale/error.h"

namespace rarescale {
namespace {

// Enumerates all 2^n sign assignments over average ranks of |a - b|.
double BruteForceP(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) d.push_back(a[i] - b[i]);
  }
  const std::size_t n = d.size();
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double below = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      below += std::fabs(d[j]) < std::fabs(d[i]);
      equal += std::fabs(d[j]) == std::fabs(d[i]);
    }
    rank[i] = below + (equal + 1) / 2;
  }
  double observed = 0;
  for (std::size_t i = 0; i < n; ++i) observed += d[i] > 0 ? rank[i] : 0;
  double lower = 0, upper = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    double w = 0;
    for (std::size_t i = 0; i < n; ++i) w += (mask >> i & 1) ? rank[i] : 0;
    lower += w <= observed + 1e-9;
    upper += w >= observed - 1e-9;
  }
  return std::min(1.0, 2 * std::min(lower, upper) / std::ldexp(1.0, static_cast<int>(n)));
}

TEST(Wilcoxon, AllPositiveSmallSamples) {
  WilcoxonResult five = WilcoxonSignedRank({2, 3, 4, 5, 6}, {1, 1, 1, 1, 1});
  EXPECT_TRUE(five.exact);
  EXPECT_EQ(five.n, 5);
  EXPECT_DOUBLE_EQ(five.w_plus, 15);
  EXPECT_DOUBLE_EQ(five.w_minus, 0);
  EXPECT_DOUBLE_EQ(five.p_value, 2.0 / 32);
  WilcoxonResult six = WilcoxonSignedRank({1, 2, 3, 4, 5, 6}, {0, 0, 0, 0, 0, 0});
  EXPECT_DOUBLE_EQ(six.p_value, 2.0 / 64);
}

TEST(Wilcoxon, ExactMatchesEnumerationWithTiesAndZeros) {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 100; ++trial) {
    int n = 5 + static_cast<int>(gen() % 8);
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      // Small integer support forces ties and zero differences.
      a[i] = static_cast<double>(gen() % 5);
      b[i] = static_cast<double>(gen() % 5);
    }
    int nonzero = 0;
    for (int i = 0; i < n; ++i) nonzero += a[i] != b[i];
    if (nonzero < kWilcoxonMinN) continue;
    WilcoxonResult r = WilcoxonSignedRank(a, b, WilcoxonMethod::kExact);
    EXPECT_NEAR(r.p_value, BruteForceP(a, b), 1e-12) << "trial " << trial;
    EXPECT_DOUBLE_EQ(r.w_plus + r.w_minus, nonzero * (nonzero + 1) / 2.0);
  }
}

TEST(Wilcoxon, NormalApproximationTracksExact) {
  std::vector<double> a = {1.8, -0.4, 2.5, 0.9, 3.1, -1.2, 1.4, 2.2, 0.3, -0.7, 1.9, 2.8};
  std::vector<double> b(a.size(), 0.0);
  WilcoxonResult exact = WilcoxonSignedRank(a, b, WilcoxonMethod::kExact);
  WilcoxonResult normal = WilcoxonSignedRank(a, b, WilcoxonMethod::kNormal);
  EXPECT_FALSE(normal.exact);
  EXPECT_NEAR(exact.p_value, normal.p_value, 0.02);
  EXPECT_LT(exact.p_value, 0.05);
}

TEST(Wilcoxon, AutoSwitchesAboveFifteen) {
  std::vector<double> a(16), b(16, 0);
  for (int i = 0; i < 16; ++i) a[i] = i % 3 == 0 ? -(i + 1) : i + 1;
  EXPECT_FALSE(WilcoxonSignedRank(a, b).exact);
  a.resize(15);
  b.resize(15);
  EXPECT_TRUE(WilcoxonSignedRank(a, b).exact);
}

TEST(Wilcoxon, Errors) {
  try {
    WilcoxonSignedRank({1, 2, 3, 4, 5, 6}, {1, 2, 0, 0, 0, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTooFew);
  }
  EXPECT_THROW(WilcoxonSignedRank({1, 2}, {1}), Error);
}

}  // namespace
}  // namespace rarescale
