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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "rarescale/error.h"

namespace rarescale {
namespace {

struct Ranked {
  std::vector<double> abs_diff;
  std::vector<bool> positive;
  std::vector<long> doubled_rank;  // 2 x average rank, always an integer
  double tie_term = 0;             // sum over tie groups of t^3 - t
};

Ranked RankDifferences(const std::vector<double>& a, const std::vector<double>& b) {
  Ranked r;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    if (d == 0.0) continue;
    r.abs_diff.push_back(std::fabs(d));
    r.positive.push_back(d > 0);
  }
  const std::size_t n = r.abs_diff.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return r.abs_diff[x] < r.abs_diff[y]; });
  r.doubled_rank.assign(n, 0);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && r.abs_diff[order[j + 1]] == r.abs_diff[order[i]]) ++j;
    // Ranks i+1 .. j+1 averaged, doubled: (i+1)+(j+1).
    long doubled = static_cast<long>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) r.doubled_rank[order[k]] = doubled;
    double t = static_cast<double>(j - i + 1);
    r.tie_term += t * t * t - t;
    i = j + 1;
  }
  return r;
}

// P-value from the exact null distribution of the doubled W+, built by
// dynamic programming over sign assignments.
double ExactPValue(const Ranked& r, long observed_doubled) {
  long total = 0;
  for (long v : r.doubled_rank) total += v;
  std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
  counts[0] = 1.0;
  long reach = 0;
  for (long v : r.doubled_rank) {
    for (long s = reach; s >= 0; --s) {
      if (counts[s] != 0.0) counts[s + v] += counts[s];
    }
    reach += v;
  }
  double all = std::ldexp(1.0, static_cast<int>(r.doubled_rank.size()));
  double lower = 0, upper = 0;
  for (long s = 0; s <= total; ++s) {
    if (s <= observed_doubled) lower += counts[s];
    if (s >= observed_doubled) upper += counts[s];
  }
  return std::min(1.0, 2.0 * std::min(lower, upper) / all);
}

double NormalPValue(const Ranked& r, double w_plus) {
  const double n = static_cast<double>(r.doubled_rank.size());
  const double mean = n * (n + 1) / 4.0;
  const double var = n * (n + 1) * (2 * n + 1) / 24.0 - r.tie_term / 48.0;
  if (var <= 0) return 1.0;
  double z = (std::fabs(w_plus - mean) - 0.5) / std::sqrt(var);
  if (z <= 0) return 1.0;
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

}  // namespace

WilcoxonResult WilcoxonSignedRank(const std::vector<double>& a, const std::vector<double>& b,
                                  WilcoxonMethod method) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kInvalidArgument, "paired samples differ in length");
  }
  Ranked r = RankDifferences(a, b);
  WilcoxonResult out;
  out.n = static_cast<int>(r.doubled_rank.size());
  if (out.n < kWilcoxonMinN) {
    throw Error(ErrorCode::kTooFew, "too few nonzero differences (" + std::to_string(out.n) +
                                        " < " + std::to_string(kWilcoxonMinN) + ")");
  }
  long doubled_plus = 0, doubled_minus = 0;
  for (std::size_t i = 0; i < r.doubled_rank.size(); ++i) {
    (r.positive[i] ? doubled_plus : doubled_minus) += r.doubled_rank[i];
  }
  out.w_plus = doubled_plus / 2.0;
  out.w_minus = doubled_minus / 2.0;
  out.exact = method == WilcoxonMethod::kExact ||
              (method == WilcoxonMethod::kAuto && out.n <= kWilcoxonExactMaxN);
  out.p_value = out.exact ? ExactPValue(r, doubled_plus) : NormalPValue(r, out.w_plus);
  return out;
}

}  // namespace rarescale
