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
#include <atomic>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "modegate/cache.h"
#include "modegate/config.h"
#include "modegate/earlyexit.h"
#include "modegate/errors.h"
#include "modegate/gateway.h"
#include "modegate/harness.h"
#include "modegate/metrics.h"
#include "modegate/synthetic.h"
#include "modegate/util.h"

namespace {

using namespace modegate;
using nlohmann::json;

struct Globals {
  std::string config_path;
  std::string dataset;
  std::string cache_dir;
  std::string scorers;
  std::optional<std::int64_t> seed;
  std::string mock_fixture;
  std::vector<std::string> overrides;
  std::string log_level = "info";
};

RunConfig resolve(const Globals& g) {
  RunConfig c = g.config_path.empty() ? RunConfig{} : RunConfig::from_file(g.config_path);
  if (!g.dataset.empty()) c.dataset_path = g.dataset;
  if (!g.cache_dir.empty()) c.cache_dir = g.cache_dir;
  if (!g.mock_fixture.empty()) c.backend.mock_fixture = g.mock_fixture;
  if (g.seed) c.seed = *g.seed;
  if (!g.scorers.empty()) {
    c.scorers.clear();
    for (const std::string& name : split_csv(g.scorers)) c.scorers.push_back(parse_scorer_kind(name));
  }
  for (const std::string& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InvalidArgument("--set expects key=value, got '" + kv + "'");
    apply_override(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  c.validate();
  return c;
}

std::vector<QuestionRecord> questions_of(const RunConfig& c) {
  if (c.dataset_path.empty()) throw InvalidArgument("no dataset: pass --dataset or set dataset_path");
  return load_dataset(c.dataset_path);
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  for (const std::string& item : split_csv(text)) out.push_back(std::stod(item));
  return out;
}

int exit_code(std::size_t failures) { return static_cast<int>(std::min<std::size_t>(failures, 100)); }

int cmd_generate(const Globals& g, std::optional<std::size_t> limit) {
  const RunConfig c = resolve(g);
  const auto questions = questions_of(c);
  auto backend = make_backend(c);
  GenerationCache cache(c.cache_dir);
  GenerateOptions options;
  options.max_new_records = limit;
  const GenerateSummary s = phase_generate(c, questions, *backend, cache, options);
  std::printf("planned %zu, cached %zu, generated %zu, errors %zu%s\n", s.planned, s.cached,
              s.generated, s.errors, s.interrupted ? " (stopped early)" : "");
  return exit_code(s.errors);
}

int cmd_score(const Globals& g) {
  const RunConfig c = resolve(g);
  const auto questions = questions_of(c);
  auto backend = make_backend(c);
  GenerationCache cache(c.cache_dir);
  const ScoreSummary s = phase_score(c, questions, *backend, cache);
  std::printf("%zu score rows, %zu missing-feature markers, %zu errors -> %s\n", s.rows.size(),
              s.missing, s.errors, scores_path(c).string().c_str());
  return exit_code(s.errors);
}

int cmd_evaluate(const Globals& g) {
  const RunConfig c = resolve(g);
  const auto questions = questions_of(c);
  GenerationCache cache(c.cache_dir);
  const json report = phase_evaluate(c, questions, cache, load_scores(scores_path(c)));
  std::cout << render_report_table(report);
  return 0;
}

int cmd_sweep(const Globals& g, const std::string& scorer, const std::string& grid) {
  const RunConfig c = resolve(g);
  const auto questions = questions_of(c);
  GenerationCache cache(c.cache_dir);
  const auto scores = load_scores(scores_path(c));
  const std::vector<double> lambdas = grid.empty() ? c.lambda_grid : parse_grid(grid);
  const ScorerKind kind = parse_scorer_kind(scorer);
  std::map<std::string, std::vector<QuestionRecord>> datasets;
  for (const QuestionRecord& q : questions) datasets[q.dataset].push_back(q);
  for (const auto& [name, qs] : datasets) {
    const auto instances = paired_instances(c, qs, cache, scores);
    std::cout << "# " << name << '\n';
    if (kind == ScorerKind::kRandom) {
      std::cout << curve_csv(random_baseline_curve(instances, lambdas, c.seed));
    } else {
      std::cout << curve_csv(sweep_thresholds(instances, kind, lambdas));
    }
  }
  return 0;
}

int cmd_report(const Globals& g, bool as_json) {
  const RunConfig c = resolve(g);
  const auto path = reports_dir(c) / "report.json";
  const json report = json::parse(read_file(path));
  if (as_json) {
    std::cout << report.dump(2) << '\n';
  } else {
    std::cout << render_report_table(report);
  }
  return 0;
}

int cmd_serve(const Globals& g, const std::string& scorer, double lambda, std::optional<double> alpha,
              const std::string& host, int port) {
  const RunConfig c = resolve(g);
  auto backend = make_backend(c);
  Gateway gateway(c, *backend, parse_scorer_kind(scorer), lambda, alpha.value_or(c.alpha));
  gateway.listen(host, port);
  return 0;
}

int cmd_early_exit(const Globals& g, const std::string& scorer, double lambda,
                   std::optional<double> alpha, int budget) {
  const RunConfig c = resolve(g);
  const auto questions = questions_of(c);
  auto backend = make_backend(c);
  const ProbeInputs inputs = load_probe_inputs(c);
  const ScorerContext ctx = make_scorer_context(c, backend.get(), inputs);
  EarlyExitOptions options;
  options.scorer = parse_scorer_kind(scorer);
  options.lambda = lambda;
  options.alpha = alpha.value_or(c.alpha);
  options.boundary = c.chunking;
  options.budget = budget;
  std::vector<std::string> lines(questions.size());
  std::atomic<std::size_t> failures{0};
  parallel_for(questions.size(), c.backend.parallelism, [&](std::size_t i) {
    try {
      lines[i] = exit_trace_to_json(questions[i].id, run_early_exit(questions[i], options, ctx)).dump();
    } catch (const EarlyExitFailure& e) {
      json j = exit_trace_to_json(questions[i].id, e.partial());
      j["error"] = e.what();
      lines[i] = j.dump();
      ++failures;
    }
  });
  std::string out;
  for (const std::string& l : lines) out += l + "\n";
  write_file_atomic(early_exit_path(c), out);
  std::printf("%zu traces, %zu failed -> %s\n", lines.size(), failures.load(),
              early_exit_path(c).string().c_str());
  return exit_code(failures);
}

// Builds a complete offline fixture by running every phase against the synthetic model.
int cmd_fixture_synth(const Globals& g, std::size_t n, const std::string& out,
                      const std::string& write_dataset, const std::string& hidden_out,
                      const std::string& probe_out) {
  RunConfig c = resolve(g);
  std::vector<QuestionRecord> questions;
  if (!write_dataset.empty()) {
    questions = synthetic_questions(n, "synth", c.seed);
    write_file_atomic(write_dataset, dataset_jsonl(questions));
    c.dataset_path = write_dataset;
  } else {
    questions = questions_of(c);
  }
  SyntheticBackend model(questions, c.markers, c.seed);
  if (!hidden_out.empty() || !probe_out.empty()) {
    auto [hidden, probe] = synthetic_probe_inputs(questions, model);
    if (!hidden_out.empty()) {
      hidden.write(hidden_out);
      c.hidden_states_path = hidden_out;
    }
    if (!probe_out.empty()) {
      write_file_atomic(probe_out, probe.to_json().dump(2) + "\n");
      c.probe_weights_path = probe_out;
    }
  }
  RecordingBackend recorder(model);
  GenerationCache cache(c.cache_dir);
  const GenerateSummary gs = phase_generate(c, questions, recorder, cache);
  const ScoreSummary ss = phase_score(c, questions, recorder, cache);
  recorder.write_fixture(out);
  std::printf("%zu fixture entries -> %s (generation errors %zu, score errors %zu)\n",
              recorder.size(), out.c_str(), gs.errors, ss.errors);
  return exit_code(gs.errors + ss.errors);
}

int cmd_fixture_key(const Globals& g, const std::string& prompt_file, std::uint64_t sample) {
  const RunConfig c = resolve(g);
  std::cout << request_key(read_file(prompt_file), c.sampling, sample) << '\n';
  return 0;
}

int cmd_fixture_check(const Globals& g, const std::string& fixture) {
  const RunConfig c = resolve(g);
  const auto questions = questions_of(c);
  const auto mock = MockBackend::from_file(fixture);
  std::size_t misses = 0;
  for (const PlannedRequest& p : plan_generation(c, questions)) {
    const std::string key = request_key(p.request.prompt, p.request.params, p.request.sample_index);
    if (!mock->contains(key)) {
      std::printf("miss %s %s sample %llu %s\n", p.request.question_id.c_str(), p.mode.c_str(),
                  static_cast<unsigned long long>(p.request.sample_index), key.c_str());
      ++misses;
    }
  }
  std::printf("%zu entries, %zu planned-request misses\n", mock->size(), misses);
  return exit_code(misses);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thinking / NoThinking mode selection and early-exit harness"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "run configuration (JSON)");
  app.add_option("--dataset", g.dataset, "dataset (JSON Lines)");
  app.add_option("--cache-dir", g.cache_dir, "cache and output directory");
  app.add_option("--scorers", g.scorers, "comma-separated scorer names");
  app.add_option("--seed", g.seed, "run seed");
  app.add_option("--mock-fixture", g.mock_fixture, "answer requests from this fixture only");
  app.add_option("--set", g.overrides, "override any config field: key.path=value")->allow_extra_args(false);
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error, off");

  std::optional<std::size_t> limit;
  auto* generate = app.add_subcommand("generate", "phase 1: Thinking and NoThinking generations");
  generate->add_option("--max-new-records", limit, "stop after this many new cache records");
  auto* score = app.add_subcommand("score", "phase 2: monitor scores on the fake thought");
  auto* evaluate = app.add_subcommand("evaluate", "phase 3: sweeps, baselines, calibration, report");

  std::string sweep_scorer = "deer", sweep_grid;
  auto* sweep = app.add_subcommand("sweep", "print one scorer's threshold sweep as CSV");
  sweep->add_option("--scorer", sweep_scorer, "scorer (or random)");
  sweep->add_option("--lambdas", sweep_grid, "comma-separated thresholds");

  bool as_json = false;
  auto* report = app.add_subcommand("report", "print the evaluated report");
  report->add_flag("--json", as_json, "raw JSON");

  std::string serve_scorer = "deer", host = "127.0.0.1";
  double lambda = 0.5;
  std::optional<double> alpha;
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "POST /v1/route gateway");
  serve->add_option("--scorer", serve_scorer, "routing scorer");
  serve->add_option("--lambda", lambda, "exit threshold");
  serve->add_option("--alpha", alpha, "entropy multiplier (default: config alpha)");
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "port");

  std::string ee_scorer = "deer";
  double ee_lambda = 0.5;
  std::optional<double> ee_alpha;
  int budget = 16;
  auto* early = app.add_subcommand("early-exit", "chunked early-exit runs, traces to early_exit.jsonl");
  early->add_option("--scorer", ee_scorer, "monitor scorer");
  early->add_option("--lambda", ee_lambda, "exit threshold");
  early->add_option("--alpha", ee_alpha, "entropy multiplier (default: config alpha)");
  early->add_option("--budget", budget, "maximum monitored chunks (0: zero-step mode selection)");

  auto* fixture = app.add_subcommand("fixture", "mock fixture tooling");
  fixture->require_subcommand(1);
  std::size_t n = 20;
  std::string out = "fixture.jsonl", write_dataset, hidden_out, probe_out;
  auto* synth = fixture->add_subcommand("synth", "record a fixture from the synthetic model");
  synth->add_option("--out", out, "fixture path");
  synth->add_option("--questions", n, "number of synthetic questions (with --write-dataset)");
  synth->add_option("--write-dataset", write_dataset, "generate a synthetic dataset here");
  synth->add_option("--hidden-out", hidden_out, "write synthetic hidden states");
  synth->add_option("--probe-out", probe_out, "write synthetic probe weights");
  std::string prompt_file;
  std::uint64_t sample = 0;
  auto* key = fixture->add_subcommand("key", "request key of a prompt under the configured sampling");
  key->add_option("--prompt-file", prompt_file, "file holding the exact prompt")->required();
  key->add_option("--sample-index", sample, "sample index");
  std::string check_path;
  auto* check = fixture->add_subcommand("check", "report planned requests missing from a fixture");
  check->add_option("--fixture", check_path, "fixture path")->required();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(g.log_level));

  try {
    if (*generate) return cmd_generate(g, limit);
    if (*score) return cmd_score(g);
    if (*evaluate) return cmd_evaluate(g);
    if (*sweep) return cmd_sweep(g, sweep_scorer, sweep_grid);
    if (*report) return cmd_report(g, as_json);
    if (*serve) return cmd_serve(g, serve_scorer, lambda, alpha, host, port);
    if (*early) return cmd_early_exit(g, ee_scorer, ee_lambda, ee_alpha, budget);
    if (*synth) return cmd_fixture_synth(g, n, out, write_dataset, hidden_out, probe_out);
    if (*key) return cmd_fixture_key(g, prompt_file, sample);
    if (*check) return cmd_fixture_check(g, check_path);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 101;
  }
  return 0;
}
