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
// Rectangular assignment by the shortest augmenting path method with row
// and column potentials, O(n^2 m) for n rows and m >= n columns.

#include <cmath>
#include <limits>
#include <stdexcept>

#include "trex/trainer.hpp"

namespace trex::train {

std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  if (n == 0) return {};
  const int m = static_cast<int>(cost[0].size());
  if (n > m) throw std::invalid_argument("solve_assignment: more rows than columns");
  for (const auto& row : cost) {
    if (static_cast<int>(row.size()) != m) throw std::invalid_argument("solve_assignment: ragged cost matrix");
    for (double c : row)
      if (!std::isfinite(c)) throw std::invalid_argument("solve_assignment: non-finite cost");
  }
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based; column 0 is the virtual source of each augmentation
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> col_of_row(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] > 0) col_of_row[p[j] - 1] = j - 1;
  return col_of_row;
}

std::vector<StepPrediction> to_predictions(const model::HeadOutput& out, int begin, int end) {
  std::vector<StepPrediction> preds;
  for (int q = begin; q < end; ++q) {
    StepPrediction p;
    for (int c = 0; c < 4; ++c) p.logits[c] = out.logits.value().at(q, c);
    for (int k = 0; k < 3; ++k) p.offset[k] = out.offset.value().at(q, k);
    p.radius = out.radius.value().at(q, 0);
    preds.push_back(p);
  }
  return preds;
}

double match_cost(const StepPrediction& p, const sample::StepTarget& t, const LossWeights& w) {
  double mx = p.logits[0];
  for (double l : p.logits) mx = std::max(mx, l);
  double s = 0.0;
  for (double l : p.logits) s += std::exp(l - mx);
  const double nll = mx + std::log(s) - p.logits[t.cls];
  double l1 = 0.0;
  for (int k = 0; k < 3; ++k) l1 += std::abs(p.offset[k] - t.offset[k]);
  return w.w_class * nll + w.w_offset * l1 + w.w_radius * std::abs(p.radius - t.radius);
}

Assignment hungarian_match(const std::vector<StepPrediction>& preds, const std::vector<sample::StepTarget>& targets,
                           const LossWeights& w) {
  if (targets.size() > preds.size())
    throw std::invalid_argument("hungarian_match: " + std::to_string(targets.size()) + " targets for " +
                                std::to_string(preds.size()) + " predictions");
  std::vector<std::vector<double>> cost(targets.size(), std::vector<double>(preds.size()));
  for (std::size_t t = 0; t < targets.size(); ++t)
    for (std::size_t p = 0; p < preds.size(); ++p) cost[t][p] = match_cost(preds[p], targets[t], w);
  Assignment a;
  a.pred_of_target = solve_assignment(cost);
  a.target_of_pred.assign(preds.size(), -1);
  for (std::size_t t = 0; t < targets.size(); ++t) {
    a.target_of_pred[a.pred_of_target[t]] = static_cast<int>(t);
    a.total_cost += cost[t][a.pred_of_target[t]];
  }
  return a;
}

}  // namespace trex::train
