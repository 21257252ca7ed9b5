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

#include "modegate/metrics.h"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <memory>
#include <cmath>
#include <numeric>
#include <sstream>

#include "modegate/errors.h"

namespace modegate {

namespace {

constexpr std::size_t kBlock = 4096;

void check_unit(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw InvalidArgument(std::string(what) + " must lie in [0, 1], got " + format_number(v));
  }
}

void check_pair(std::size_t a, std::size_t b) {
  if (a != b) {
    throw InvalidArgument("length mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  }
  if (a == 0) throw InvalidArgument("empty input");
}

SweepPoint make_point(double lambda, std::int64_t counted, std::int64_t exits,
                      std::int64_t correct, std::int64_t tokens, std::int64_t excluded) {
  SweepPoint p;
  p.lambda = lambda;
  p.n = counted;
  p.exits = exits;
  p.excluded = excluded;
  const double n = static_cast<double>(counted);
  p.accuracy = static_cast<double>(correct) / n;
  p.mean_tokens = static_cast<double>(tokens) / n;
  p.nothinking_ratio = static_cast<double>(exits) / n;
  return p;
}

// Bins are (k/B, (k+1)/B], with 0.0 in the first one.
std::size_t bin_of(double confidence, int n_bins) {
  const double b = n_bins;
  auto k = static_cast<long>(std::ceil(confidence * b)) - 1;
  if (k > 0 && confidence <= static_cast<double>(k) / b) --k;
  if (confidence > static_cast<double>(k + 1) / b) ++k;
  return static_cast<std::size_t>(std::clamp(k, 0L, static_cast<long>(n_bins - 1)));
}

// Routes every instance once per grid value using array-section reductions.
std::vector<SweepPoint> grid_compose(std::span<const PairedInstance> instances,
                                     std::span<const double> grid,
                                     const std::vector<std::optional<ScoreValue>>& scores) {
  const std::size_t g_count = grid.size();
  std::vector<std::int64_t> exits(g_count, 0), correct(g_count, 0), tokens(g_count, 0);
  std::int64_t* e = exits.data();
  std::int64_t* c = correct.data();
  std::int64_t* t = tokens.data();
  std::int64_t counted = 0;
  const auto n = static_cast<std::ptrdiff_t>(instances.size());
  const double* g = grid.data();

#pragma omp parallel for schedule(static) reduction(+ : counted) \
    reduction(+ : e[:g_count], c[:g_count], t[:g_count])
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& s = scores[static_cast<std::size_t>(i)];
    if (!s) continue;
    const PairedInstance& inst = instances[static_cast<std::size_t>(i)];
    ++counted;
    for (std::size_t k = 0; k < g_count; ++k) {
      const bool exit = decide(*s, g[k], g[k]).exit;
      const BranchOutcome& b = exit ? inst.nothinking : inst.thinking;
      e[k] += exit ? 1 : 0;
      c[k] += b.correct ? 1 : 0;
      t[k] += b.tokens;
    }
  }
  if (counted == 0) throw InvalidArgument("no instance carries a score for this scorer");
  std::vector<SweepPoint> out;
  out.reserve(g_count);
  for (std::size_t k = 0; k < g_count; ++k) {
    out.push_back(make_point(grid[k], counted, exits[k], correct[k], tokens[k],
                             static_cast<std::int64_t>(instances.size()) - counted));
  }
  return out;
}

std::vector<std::optional<ScoreValue>> lookup_scores(std::span<const PairedInstance> instances,
                                                     ScorerKind scorer) {
  std::vector<std::optional<ScoreValue>> out(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    auto it = instances[i].scores.find(scorer);
    if (it != instances[i].scores.end()) out[i] = it->second;
  }
  return out;
}

}  // namespace

std::string format_number(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int k = 1; k <= 10; ++k) grid.push_back(k / 10.0);
  return grid;
}

SweepPoint compose_at_threshold(std::span<const PairedInstance> instances, ScorerKind scorer,
                                double lambda, double alpha) {
  if (instances.empty()) throw InvalidArgument("empty instance list");
  check_unit(lambda, "lambda");
  check_unit(alpha, "alpha");
  std::int64_t counted = 0, exits = 0, correct = 0, tokens = 0;
  const auto n = static_cast<std::ptrdiff_t>(instances.size());

#pragma omp parallel for schedule(static) reduction(+ : counted, exits, correct, tokens)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const PairedInstance& inst = instances[static_cast<std::size_t>(i)];
    auto it = inst.scores.find(scorer);
    if (it == inst.scores.end()) continue;
    const bool exit = decide(it->second, lambda, alpha).exit;
    const BranchOutcome& b = exit ? inst.nothinking : inst.thinking;
    ++counted;
    exits += exit ? 1 : 0;
    correct += b.correct ? 1 : 0;
    tokens += b.tokens;
  }
  if (counted == 0) throw InvalidArgument("no instance carries a score for this scorer");
  return make_point(lambda, counted, exits, correct, tokens,
                    static_cast<std::int64_t>(instances.size()) - counted);
}

std::vector<SweepPoint> sweep_thresholds(std::span<const PairedInstance> instances,
                                         ScorerKind scorer, std::span<const double> grid) {
  if (instances.empty()) throw InvalidArgument("empty instance list");
  if (grid.empty()) throw InvalidArgument("empty threshold grid");
  for (double g : grid) check_unit(g, "threshold");
  return grid_compose(instances, grid, lookup_scores(instances, scorer));
}

SweepPoint baseline_point(std::span<const PairedInstance> instances, bool nothinking) {
  if (instances.empty()) throw InvalidArgument("empty instance list");
  std::int64_t correct = 0, tokens = 0;
  const auto n = static_cast<std::ptrdiff_t>(instances.size());
#pragma omp parallel for schedule(static) reduction(+ : correct, tokens)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const PairedInstance& inst = instances[static_cast<std::size_t>(i)];
    const BranchOutcome& b = nothinking ? inst.nothinking : inst.thinking;
    correct += b.correct ? 1 : 0;
    tokens += b.tokens;
  }
  return make_point(nothinking ? 1.0 : 0.0, n, nothinking ? n : 0, correct, tokens, 0);
}

double roc_auc(std::span<const double> scores, std::span<const bool> labels) {
  check_pair(scores.size(), labels.size());
  const std::size_t n = scores.size();
  std::int64_t positives = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(scores[i])) throw InvalidArgument("score is NaN");
    positives += labels[i] ? 1 : 0;
  }
  const std::int64_t negatives = static_cast<std::int64_t>(n) - positives;
  if (positives == 0 || negatives == 0) {
    throw UndefinedMetric("ROC-AUC needs both positive and negative labels");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b] || (scores[a] == scores[b] && a < b);
  });
  // Mid-ranks for tied runs.
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }
  // Half-integer ranks sum exactly in double, so the reduction order is irrelevant.
  double rank_sum = 0.0;
  const auto sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) reduction(+ : rank_sum)
  for (std::ptrdiff_t i = 0; i < sn; ++i) {
    if (labels[static_cast<std::size_t>(i)]) rank_sum += rank[static_cast<std::size_t>(i)];
  }
  const double p = static_cast<double>(positives);
  const double q = static_cast<double>(negatives);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

double ece(std::span<const double> confidences, std::span<const bool> labels, int n_bins) {
  check_pair(confidences.size(), labels.size());
  if (n_bins < 1) throw InvalidArgument("n_bins must be >= 1");
  const std::size_t n = confidences.size();
  for (double c : confidences) check_unit(c, "confidence");

  const std::size_t bins = static_cast<std::size_t>(n_bins);
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  std::vector<double> conf_sum(blocks * bins, 0.0);
  std::vector<std::int64_t> hits(blocks * bins, 0);
  std::vector<std::int64_t> count(blocks * bins, 0);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(blocks); ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kBlock;
    const std::size_t hi = std::min(n, lo + kBlock);
    const std::size_t base = static_cast<std::size_t>(b) * bins;
    for (std::size_t i = lo; i < hi; ++i) {
      const std::size_t k = base + bin_of(confidences[i], n_bins);
      conf_sum[k] += confidences[i];
      hits[k] += labels[i] ? 1 : 0;
      count[k] += 1;
    }
  }

  double total = 0.0;
  for (std::size_t k = 0; k < bins; ++k) {
    double conf = 0.0;
    std::int64_t h = 0, m = 0;
    for (std::size_t b = 0; b < blocks; ++b) {
      conf += conf_sum[b * bins + k];
      h += hits[b * bins + k];
      m += count[b * bins + k];
    }
    if (m == 0) continue;
    // (|b|/n) * |mean_conf - acc| = |sum_conf - hits| / n
    total += std::fabs(conf - static_cast<double>(h));
  }
  return total / static_cast<double>(n);
}

double brier(std::span<const double> confidences, std::span<const bool> labels) {
  check_pair(confidences.size(), labels.size());
  const std::size_t n = confidences.size();
  for (double c : confidences) check_unit(c, "confidence");
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  std::vector<double> partial(blocks, 0.0);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(blocks); ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kBlock;
    const std::size_t hi = std::min(n, lo + kBlock);
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double d = confidences[i] - (labels[i] ? 1.0 : 0.0);
      acc += d * d;
    }
    partial[static_cast<std::size_t>(b)] = acc;
  }
  double total = 0.0;
  for (double v : partial) total += v;
  return total / static_cast<double>(n);
}

std::vector<SweepPoint> random_baseline_curve(std::span<const PairedInstance> instances,
                                              std::span<const double> p_grid, std::int64_t seed) {
  if (instances.empty()) throw InvalidArgument("empty instance list");
  for (double p : p_grid) check_unit(p, "p_exit");
  const std::size_t g_count = p_grid.size();
  std::vector<std::int64_t> exits(g_count, 0), correct(g_count, 0), tokens(g_count, 0);
  std::int64_t* e = exits.data();
  std::int64_t* c = correct.data();
  std::int64_t* t = tokens.data();
  const double* g = p_grid.data();
  const auto n = static_cast<std::ptrdiff_t>(instances.size());

#pragma omp parallel for schedule(static) reduction(+ : e[:g_count], c[:g_count], t[:g_count])
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const PairedInstance& inst = instances[static_cast<std::size_t>(i)];
    const double u = random_draw(inst.question_id, seed);
    for (std::size_t k = 0; k < g_count; ++k) {
      const bool exit = u < g[k];
      const BranchOutcome& b = exit ? inst.nothinking : inst.thinking;
      e[k] += exit ? 1 : 0;
      c[k] += b.correct ? 1 : 0;
      t[k] += b.tokens;
    }
  }
  std::vector<SweepPoint> out;
  out.reserve(g_count);
  for (std::size_t k = 0; k < g_count; ++k) {
    out.push_back(make_point(p_grid[k], n, exits[k], correct[k], tokens[k], 0));
  }
  return out;
}

CalibrationReport calibration_report(std::span<const PairedInstance> instances, ScorerKind scorer,
                                     int n_bins) {
  std::vector<double> oriented, confidences;
  std::vector<char> label_bytes;
  bool higher = true;
  for (const PairedInstance& inst : instances) {
    auto it = inst.scores.find(scorer);
    if (it == inst.scores.end()) continue;
    higher = it->second.orientation == Orientation::kHigherExits;
    oriented.push_back(higher ? it->second.value : -it->second.value);
    confidences.push_back(it->second.value);
    label_bytes.push_back(inst.nothinking.correct ? 1 : 0);
  }
  if (oriented.empty()) throw InvalidArgument("no instance carries a score for this scorer");
  const std::unique_ptr<bool[]> labels(new bool[label_bytes.size()]);
  for (std::size_t i = 0; i < label_bytes.size(); ++i) labels[i] = label_bytes[i] != 0;
  const std::span<const bool> label_span(labels.get(), label_bytes.size());

  CalibrationReport r;
  r.n_bins = n_bins;
  r.positives = std::count(label_bytes.begin(), label_bytes.end(), 1);
  r.negatives = static_cast<std::int64_t>(label_bytes.size()) - r.positives;
  r.roc_auc = roc_auc(oriented, label_span);
  if (higher) {
    r.ece = ece(confidences, label_span, n_bins);
    r.brier = brier(confidences, label_span);
  }
  return r;
}

const SweepPoint& select_best(std::span<const SweepPoint> points) {
  if (points.empty()) throw InvalidArgument("no sweep points");
  const SweepPoint* best = &points.front();
  for (const SweepPoint& p : points.subspan(1)) {
    if (p.accuracy > best->accuracy ||
        (p.accuracy == best->accuracy && p.mean_tokens < best->mean_tokens)) {
      best = &p;
    }
  }
  return *best;
}

std::string curve_csv(std::span<const SweepPoint> points) {
  std::ostringstream out;
  out << "lambda,accuracy,mean_tokens,nothinking_ratio,n\n";
  for (const SweepPoint& p : points) {
    out << format_number(p.lambda) << ',' << format_number(p.accuracy) << ','
        << format_number(p.mean_tokens) << ',' << format_number(p.nothinking_ratio) << ','
        << p.n << '\n';
  }
  return out.str();
}

}  // namespace modegate
