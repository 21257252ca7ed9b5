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

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "modegate/scorers.h"

namespace modegate {

struct BranchOutcome {
  bool correct = false;
  std::int64_t tokens = 0;
};

// One question's cached Thinking and NoThinking outcomes plus every monitor score.
struct PairedInstance {
  std::string question_id;
  BranchOutcome thinking;
  BranchOutcome nothinking;
  std::map<ScorerKind, ScoreValue> scores;
};

struct SweepPoint {
  double lambda = 0.0;
  double accuracy = 0.0;
  double mean_tokens = 0.0;
  double nothinking_ratio = 0.0;
  std::int64_t n = 0;
  std::int64_t exits = 0;
  std::int64_t excluded = 0;  // instances without a score for the scorer

  friend bool operator==(const SweepPoint&, const SweepPoint&) = default;
};

struct CalibrationReport {
  std::optional<double> ece;    // absent for scorers outside [0, 1] confidence semantics
  std::optional<double> brier;
  double roc_auc = 0.0;
  int n_bins = 10;
  std::int64_t positives = 0;
  std::int64_t negatives = 0;
};

// Default threshold grid 0.1, 0.2, ..., 1.0.
std::vector<double> default_lambda_grid();

// Parallel kernels (OpenMP). Floating-point reductions run over fixed-size blocks combined in
// block order, so results do not depend on the thread count.

// Routes each instance by decide(score, lambda, alpha): exit takes the NoThinking branch.
// Instances without a score for `scorer` are excluded and counted. Throws InvalidArgument when
// nothing is left to evaluate or a threshold is outside [0, 1].
SweepPoint compose_at_threshold(std::span<const PairedInstance> instances, ScorerKind scorer,
                                double lambda, double alpha);

// One point per grid value, in input order. Each grid value is used as lambda for
// higher-exits scores and as alpha for lower-exits scores.
std::vector<SweepPoint> sweep_thresholds(std::span<const PairedInstance> instances,
                                         ScorerKind scorer, std::span<const double> grid);

// All-Thinking (nothinking = false) or all-NoThinking aggregate.
SweepPoint baseline_point(std::span<const PairedInstance> instances, bool nothinking);

// Rank-statistic AUC with ties counted one half. Throws UndefinedMetric for single-class labels.
double roc_auc(std::span<const double> scores, std::span<const bool> labels);

// Equal-width bins (k/B, (k+1)/B], with 0.0 placed in the first bin.
double ece(std::span<const double> confidences, std::span<const bool> labels, int n_bins = 10);
double brier(std::span<const double> confidences, std::span<const bool> labels);

std::vector<SweepPoint> random_baseline_curve(std::span<const PairedInstance> instances,
                                              std::span<const double> p_grid, std::int64_t seed);

// Labels are NoThinking correctness. Lower-exits scores are negated before ranking; ECE and Brier
// are only reported for higher-exits scores.
CalibrationReport calibration_report(std::span<const PairedInstance> instances, ScorerKind scorer,
                                     int n_bins = 10);

// Highest accuracy; ties go to fewer mean tokens, then to the earlier grid value.
const SweepPoint& select_best(std::span<const SweepPoint> points);

std::string curve_csv(std::span<const SweepPoint> points);
std::string format_number(double value);

// Serial reference implementations of the kernels above, kept for cross-checking and benchmarks.
namespace reference {

SweepPoint compose_at_threshold(std::span<const PairedInstance> instances, ScorerKind scorer,
                                double lambda, double alpha);
std::vector<SweepPoint> sweep_thresholds(std::span<const PairedInstance> instances,
                                         ScorerKind scorer, std::span<const double> grid);
double roc_auc(std::span<const double> scores, std::span<const bool> labels);
double ece(std::span<const double> confidences, std::span<const bool> labels, int n_bins = 10);
double brier(std::span<const double> confidences, std::span<const bool> labels);
std::vector<SweepPoint> random_baseline_curve(std::span<const PairedInstance> instances,
                                              std::span<const double> p_grid, std::int64_t seed);

}  // namespace reference

}  // namespace modegate
