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

#ifndef RARESCALE_WILCOXON_H_
#define RARESCALE_WILCOXON_H_

#include <vector>

namespace rarescale {

enum class WilcoxonMethod {
  kAuto,    // exact for n <= 15 nonzero differences, normal otherwise
  kExact,
  kNormal,  // tie- and continuity-corrected normal approximation
};

struct WilcoxonResult {
  int n = 0;             // nonzero differences used
  double w_plus = 0;     // sum of ranks of positive differences
  double w_minus = 0;
  double p_value = 1;    // two-sided
  bool exact = false;
};

inline constexpr int kWilcoxonExactMaxN = 15;
inline constexpr int kWilcoxonMinN = 5;

// Paired two-sided signed-rank test on a - b. Zero differences are dropped
// and tied |differences| share their average rank. Throws kInvalidArgument
// on a length mismatch and kTooFew when fewer than five nonzero differences
// remain.
WilcoxonResult WilcoxonSignedRank(const std::vector<double>& a, const std::vector<double>& b,
                                  WilcoxonMethod method = WilcoxonMethod::kAuto);

}  // namespace rarescale

#endif  // RARESCALE_WILCOXON_H_
