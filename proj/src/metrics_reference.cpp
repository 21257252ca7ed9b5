// Copyright 2026 The modegate Authors.
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

#include <algorithm>
#include <cmath>

#include "modegate/errors.h"
#include "modegate/metrics.h"

namespace modegate::reference {

namespace {

SweepPoint point(double lambda, std::int64_t counted, std::int64_t exits, std::int64_t correct,
                 std::int64_t tokens, std::int64_t excluded) {
  SweepPoint p;
  p.lambda = lambda;
  p.n = counted;
  p.exits = exits;
  p.excluded = excluded;
  p.accuracy = static_cast<double>(correct) / static_cast<double>(counted);
  p.mean_tokens = static_cast<double>(tokens) / static_cast<double>(counted);
  p.nothinking_ratio = static_cast<double>(exits) / static_cast<double>(counted);
  return p;
}

}  // namespace

SweepPoint compose_at_threshold(std::span<const PairedInstance> instances, ScorerKind scorer,
                                double lambda, double alpha) {
  if (instances.empty()) throw InvalidArgument("empty instance list");
  std::int64_t counted = 0, exits = 0, correct = 0, tokens = 0;
  for (const PairedInstance& inst : instances) {
    auto it = inst.scores.find(scorer);
    if (it == inst.scores.end()) continue;
    const bool exit = decide(it->second, lambda, alpha).exit;
    const BranchOutcome& b = exit ? inst.nothinking : inst.thinking;
    ++counted;
    exits += exit;
    correct += b.correct;
    tokens += b.tokens;
  }
  if (counted == 0) throw InvalidArgument("no instance carries a score for this scorer");
  return point(lambda, counted, exits, correct, tokens,
               static_cast<std::int64_t>(instances.size()) - counted);
}

std::vector<SweepPoint> sweep_thresholds(std::span<const PairedInstance> instances,
                                         ScorerKind scorer, std::span<const double> grid) {
  std::vector<SweepPoint> out;
  for (double g : grid) out.push_back(reference::compose_at_threshold(instances, scorer, g, g));
  return out;
}

double roc_auc(std::span<const double> scores, std::span<const bool> labels) {
  if (scores.size() != labels.size() || scores.empty()) throw InvalidArgument("bad input");
  const std::size_t n = scores.size();
  std::vector<std::pair<double, bool>> rows;
  for (std::size_t i = 0; i < n; ++i) rows.emplace_back(scores[i], labels[i]);
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double rank_sum = 0.0;
  std::int64_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && rows[j + 1].first == rows[i].first) ++j;
    const double mid = 0.5 * static_cast<double>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) {
      if (rows[k].second) {
        rank_sum += mid;
        ++positives;
      }
    }
    i = j + 1;
  }
  const std::int64_t negatives = static_cast<std::int64_t>(n) - positives;
  if (positives == 0 || negatives == 0) throw UndefinedMetric("single-class labels");
  const double p = static_cast<double>(positives), q = static_cast<double>(negatives);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

double ece(std::span<const double> confidences, std::span<const bool> labels, int n_bins) {
  if (confidences.size() != labels.size() || confidences.empty() || n_bins < 1) {
    throw InvalidArgument("bad input");
  }
  std::vector<double> conf(static_cast<std::size_t>(n_bins), 0.0);
  std::vector<double> hits(static_cast<std::size_t>(n_bins), 0.0);
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    std::size_t b = 0;
    while (b + 1 < conf.size() && confidences[i] > static_cast<double>(b + 1) / n_bins) ++b;
    conf[b] += confidences[i];
    hits[b] += labels[i] ? 1.0 : 0.0;
  }
  double total = 0.0;
  for (std::size_t b = 0; b < conf.size(); ++b) total += std::fabs(conf[b] - hits[b]);
  return total / static_cast<double>(confidences.size());
}

double brier(std::span<const double> confidences, std::span<const bool> labels) {
  if (confidences.size() != labels.size() || confidences.empty()) throw InvalidArgument("bad input");
  double total = 0.0;
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    const double d = confidences[i] - (labels[i] ? 1.0 : 0.0);
    total += d * d;
  }
  return total / static_cast<double>(confidences.size());
}

std::vector<SweepPoint> random_baseline_curve(std::span<const PairedInstance> instances,
                                              std::span<const double> p_grid, std::int64_t seed) {
  if (instances.empty()) throw InvalidArgument("empty instance list");
  std::vector<SweepPoint> out;
  for (double p : p_grid) {
    std::int64_t exits = 0, correct = 0, tokens = 0;
    for (const PairedInstance& inst : instances) {
      const bool exit = random_draw(inst.question_id, seed) < p;
      const BranchOutcome& b = exit ? inst.nothinking : inst.thinking;
      exits += exit;
      correct += b.correct;
      tokens += b.tokens;
    }
    out.push_back(point(p, static_cast<std::int64_t>(instances.size()), exits, correct, tokens, 0));
  }
  return out;
}

}  // namespace modegate::reference
