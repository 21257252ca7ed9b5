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

#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>

#include <sys/wait.h>

#include "modegate/cache.h"
#include "modegate/config.h"
#include "modegate/errors.h"
#include "modegate/harness.h"
#include "modegate/synthetic.h"
#include "modegate/util.h"
#include "test_support.h"

using namespace modegate;
using nlohmann::json;
using testing::data_path;
using testing::TempDir;

namespace {

class CountingBackend final : public CompletionBackend {
 public:
  explicit CountingBackend(CompletionBackend& inner) : inner_(inner) {}
  Completion complete(const CompletionRequest& r) override {
    ++calls;
    return inner_.complete(r);
  }
  std::atomic<int> calls{0};

 private:
  CompletionBackend& inner_;
};

RunConfig fixture_config(const TempDir& dir, bool probe_files = true) {
  RunConfig c;
  c.dataset_path = data_path("questions20.jsonl").string();
  c.backend.mock_fixture = data_path("mock20.jsonl").string();
  c.cache_dir = dir.path().string();
  c.backend.parallelism = 4;
  if (probe_files) {
    c.hidden_states_path = data_path("hidden20.jsonl").string();
    c.probe_weights_path = data_path("probe20.json").string();
  }
  return c;
}

struct RunOutput {
  std::string scores;
  std::string report;
  std::string curves;
};

RunOutput full_run(const RunConfig& c, std::optional<std::size_t> interrupt_after = std::nullopt) {
  const auto questions = load_dataset(c.dataset_path);
  const auto backend = make_backend(c);
  {
    GenerationCache cache(c.cache_dir);
    if (interrupt_after) {
      const auto s = phase_generate(c, questions, *backend, cache, {interrupt_after});
      CHECK(s.interrupted);
    }
  }
  GenerationCache cache(c.cache_dir);
  phase_generate(c, questions, *backend, cache);
  const auto scored = phase_score(c, questions, *backend, cache);
  phase_evaluate(c, questions, cache, load_scores(scores_path(c)));
  RunOutput out;
  out.scores = read_file(scores_path(c));
  out.report = read_file(reports_dir(c) / "report.json");
  for (const auto& e : std::filesystem::directory_iterator(reports_dir(c) / "curves")) {
    out.curves += e.path().filename().string() + "\n" + read_file(e.path());
  }
  return out;
}

}  // namespace

TEST_CASE("generation plan covers both modes and the dynasor probes") {
  TempDir dir("plan");
  const RunConfig c = fixture_config(dir);
  const auto questions = load_dataset(c.dataset_path);
  const auto plan = plan_generation(c, questions);
  CHECK(plan.size() == 20 * 2 + 20 * 3);
  CHECK(std::count_if(plan.begin(), plan.end(), [](const auto& p) { return p.mode == "thinking"; }) == 20);
  CHECK(std::count_if(plan.begin(), plan.end(), [](const auto& p) { return p.mode == "dynasor_probe"; }) == 60);
  RunConfig two = c;
  two.samples_per_question = 2;
  two.scorers = {ScorerKind::kDeer};
  CHECK(plan_generation(two, questions).size() == 80);
}

TEST_CASE("generate writes one record per planned request and a warm rerun makes no calls") {
  TempDir dir("gen");
  const RunConfig c = fixture_config(dir);
  const auto questions = load_dataset(c.dataset_path);
  const auto mock = make_backend(c);
  CountingBackend counting(*mock);
  {
    GenerationCache cache(c.cache_dir);
    const auto s = phase_generate(c, questions, counting, cache);
    CHECK(s.planned == 100);
    CHECK(s.generated == 100);
    CHECK(s.errors == 0);
    CHECK(cache.size() == 100);
    const auto records = cache.records();
    CHECK(std::count_if(records.begin(), records.end(), [](const CacheRecord& r) {
            return r.mode == "thinking" || r.mode == "nothinking";
          }) == 40);
    for (const auto& r : records) CHECK(r.graded.has_value() == (r.mode != "dynasor_probe"));
  }
  CHECK(counting.calls == 100);
  GenerationCache warm(c.cache_dir);
  const auto s = phase_generate(c, questions, counting, warm);
  CHECK(s.cached == 100);
  CHECK(s.generated == 0);
  CHECK(counting.calls == 100);
}

TEST_CASE("a missing fixture key becomes an error record and is retried later") {
  TempDir dir("miss");
  RunConfig c = fixture_config(dir);
  const auto questions = load_dataset(c.dataset_path);
  const CompletionRequest target = primary_request(c, questions[0], false, 0);
  const std::string key = request_key(target.prompt, target.params, target.sample_index);

  std::string kept;
  std::size_t dropped = 0;
  for_each_line(data_path("mock20.jsonl"), [&](const std::string& line, std::size_t) {
    if (json::parse(line)["key"] == key) {
      ++dropped;
      return;
    }
    kept += line + "\n";
  });
  REQUIRE(dropped == 1);
  write_file_atomic(dir / "partial.jsonl", kept);
  c.backend.mock_fixture = (dir / "partial.jsonl").string();
  c.cache_dir = (dir / "run").string();
  {
    const auto partial = make_backend(c);
    GenerationCache cache(c.cache_dir);
    const auto s = phase_generate(c, questions, *partial, cache);
    CHECK(s.generated == 99);
    CHECK(s.errors == 1);
    CHECK(cache.size() == 99);
    CHECK_FALSE(cache.contains(key));
  }
  GenerationCache reopened(c.cache_dir);
  CHECK(reopened.error_count() == 1);
  std::size_t unpaired = 0;
  const auto pairs = paired_instances(c, questions, reopened, {}, &unpaired);
  CHECK(pairs.size() == 19);
  CHECK(unpaired == 1);

  c.backend.mock_fixture = data_path("mock20.jsonl").string();
  const auto full = make_backend(c);
  const auto s = phase_generate(c, questions, *full, reopened);
  CHECK(s.cached == 99);
  CHECK(s.generated == 1);
  CHECK(reopened.contains(key));
}

TEST_CASE("score writes one row per question and scorer") {
  TempDir dir("score");
  const RunConfig c = fixture_config(dir);
  const auto questions = load_dataset(c.dataset_path);
  const auto mock = make_backend(c);
  GenerationCache cache(c.cache_dir);
  phase_generate(c, questions, *mock, cache);
  const auto summary = phase_score(c, questions, *mock, cache);
  CHECK(summary.rows.size() == 140);
  CHECK(summary.missing == 0);
  CHECK(summary.errors == 0);
  const auto rows = load_scores(scores_path(c));
  REQUIRE(rows.size() == 140);
  for (const ScoreRow& r : rows) {
    REQUIRE(r.score);
    CHECK(r.score->value >= 0.0);
    CHECK(r.score->value <= 1.0);
  }
  CHECK(std::is_sorted(rows.begin(), rows.end(), [](const ScoreRow& a, const ScoreRow& b) {
    return std::tuple(a.dataset, a.question_id, to_string(a.scorer)) <
           std::tuple(b.dataset, b.question_id, to_string(b.scorer));
  }));
  // Monitor calls were cached alongside the generations.
  CHECK(cache.size() == 200);
}

TEST_CASE("probeconf without hidden states yields missing markers, not failures") {
  TempDir dir("noprobe");
  const RunConfig c = fixture_config(dir, false);
  const auto questions = load_dataset(c.dataset_path);
  const auto mock = make_backend(c);
  GenerationCache cache(c.cache_dir);
  phase_generate(c, questions, *mock, cache);
  const auto summary = phase_score(c, questions, *mock, cache);
  CHECK(summary.rows.size() == 140);
  CHECK(summary.missing == 20);
  for (const ScoreRow& r : summary.rows) {
    CHECK((r.scorer == ScorerKind::kProbeConf) == !r.missing.empty());
  }
  const json line = json::parse(read_file(scores_path(c)).substr(0, read_file(scores_path(c)).find('\n')));
  CHECK(line.contains("dataset"));
  const json report = phase_evaluate(c, questions, cache, summary.rows);
  CHECK(report["datasets"]["arith"]["scorers"]["probeconf"]["status"] == "no scores");
  CHECK(report["datasets"]["arith"]["scorers"]["deer"]["status"] == "ok");
}

TEST_CASE("pipeline output is byte-identical across runs and after an interrupted run") {
  TempDir a("det-a"), b("det-b"), c("det-c");
  const RunOutput first = full_run(fixture_config(a));
  const RunOutput second = full_run(fixture_config(b));
  const RunOutput resumed = full_run(fixture_config(c), 37);
  CHECK(first.scores == second.scores);
  CHECK(first.report == second.report);
  CHECK(first.curves == second.curves);
  CHECK(first.scores == resumed.scores);
  CHECK(first.report == resumed.report);
  CHECK(first.curves == resumed.curves);
  CHECK(first.report.find(a.path().string()) == std::string::npos);
}

TEST_CASE("torn cache tails are dropped and redone") {
  TempDir dir("torn");
  const RunConfig c = fixture_config(dir);
  const auto questions = load_dataset(c.dataset_path);
  const auto mock = make_backend(c);
  {
    GenerationCache cache(c.cache_dir);
    phase_generate(c, questions, *mock, cache, {std::size_t{10}});
  }
  {
    std::ofstream out(dir / "generations.jsonl", std::ios::app);
    out << R"({"kind":"generation","key":"abc","text":"half)";
  }
  GenerationCache cache(c.cache_dir);
  CHECK(cache.size() == 10);
  const auto s = phase_generate(c, questions, *mock, cache);
  CHECK(s.cached == 10);
  CHECK(s.generated == 90);
  GenerationCache again(c.cache_dir);
  CHECK(again.size() == 100);
}

TEST_CASE("report shape against independently graded branches") {
  TempDir dir("eval");
  const RunConfig c = fixture_config(dir);
  full_run(c);
  const json report = json::parse(read_file(reports_dir(c) / "report.json"));
  const auto questions = load_dataset(c.dataset_path);
  GenerationCache cache(c.cache_dir);
  for (const std::string ds : {"arith", "mixed"}) {
    const json& d = report["datasets"][ds];
    int n = 0, correct = 0;
    double tokens = 0;
    for (const auto& q : questions) {
      if (q.dataset != ds) continue;
      const CompletionRequest r = primary_request(c, q, false, 0);
      const auto rec = cache.find(request_key(r.prompt, r.params, 0));
      REQUIRE(rec);
      ++n;
      correct += grade_generation(rec->completion, q).correct ? 1 : 0;
      tokens += rec->completion.n_tokens;
    }
    CHECK(d["paired"] == n);
    CHECK(d["baselines"]["thinking"]["acc"].get<double>() == doctest::Approx(100.0 * correct / n));
    CHECK(d["baselines"]["thinking"]["tok"].get<double>() == doctest::Approx(tokens / n));
    CHECK(d["baselines"]["nothinking"]["nr"] == 100.0);
    CHECK(d["random_baseline"]["points"].size() == c.random_p_grid.size());
    for (ScorerKind k : c.scorers) {
      const json& e = d["scorers"][std::string(to_string(k))];
      CHECK(e["status"] == "ok");
      CHECK(std::filesystem::exists(reports_dir(c) / e["curve"].get<std::string>()));
      const bool binary = k == ScorerKind::kFlashThink || k == ScorerKind::kPreJudge;
      CHECK((e["calibration"]["status"] == "skipped") == binary);
    }
  }
  CHECK(report["metadata"]["tok_counts"] == "generated_only");
  const std::string table = render_report_table(report);
  CHECK(table.find("arith") != std::string::npos);
  CHECK(table.find("promptconf") != std::string::npos);
}

TEST_CASE("committed fixture matches the synthetic model") {
  TempDir dir("synth");
  RunConfig c = fixture_config(dir);
  const auto questions = load_dataset(c.dataset_path);
  SyntheticBackend model(questions, c.markers, c.seed);
  const auto [hidden, probe] = synthetic_probe_inputs(questions, model);
  hidden.write(dir / "hidden.jsonl");
  CHECK(read_file(dir / "hidden.jsonl") == read_file(data_path("hidden20.jsonl")));
  CHECK(probe.to_json().dump(2) + "\n" == read_file(data_path("probe20.json")));
  RecordingBackend recorder(model);
  GenerationCache cache(c.cache_dir);
  phase_generate(c, questions, recorder, cache);
  phase_score(c, questions, recorder, cache);
  recorder.write_fixture(dir / "fixture.jsonl");
  CHECK(read_file(dir / "fixture.jsonl") == read_file(data_path("mock20.jsonl")));
}

TEST_CASE("config parsing, validation and overrides") {
  RunConfig c;
  CHECK_NOTHROW(c.validate());
  const RunConfig back = RunConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());

  CHECK_THROWS_AS(RunConfig::from_json(json{{"no_such_key", 1}}), InvalidArgument);
  const RunConfig partial = RunConfig::from_json(json{{"seed", 9}, {"sampling", {{"temperature", 0.2}}}});
  CHECK(partial.seed == 9);
  CHECK(partial.sampling.temperature == 0.2);
  CHECK(partial.sampling.max_new_tokens == c.sampling.max_new_tokens);

  apply_override(c, "sampling.temperature", "0.3");
  apply_override(c, "backend.model", "some-model");
  apply_override(c, "scorers", R"(["deer","entropy"])");
  apply_override(c, "lambda_grid", "[0.25, 0.75]");
  CHECK(c.sampling.temperature == 0.3);
  CHECK(c.backend.model == "some-model");
  CHECK(c.scorers == std::vector<ScorerKind>{ScorerKind::kDeer, ScorerKind::kEntropy});
  CHECK(c.lambda_grid == std::vector<double>{0.25, 0.75});
  CHECK_THROWS(apply_override(c, "sampling.nope", "1"));

  RunConfig bad;
  bad.scorers = {ScorerKind::kRandom};
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = RunConfig{};
  bad.lambda_grid = {1.5};
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = RunConfig{};
  bad.alpha = 1.5;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);

  TempDir dir("cfg");
  write_file_atomic(dir / "c.json", R"({"seed": 4, "alpha": 0.5})");
  const RunConfig f = RunConfig::from_file(dir / "c.json");
  CHECK(f.seed == 4);
  CHECK(f.alpha == 0.5);
}

TEST_CASE("parallel_for visits every index and propagates failures") {
  std::vector<std::atomic<int>> hits(257);
  parallel_for(hits.size(), 5, [&](std::size_t i) { ++hits[i]; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](const auto& h) { return h == 1; }));
  CHECK_THROWS_AS(parallel_for(50, 3,
                               [](std::size_t i) {
                                 if (i == 17) throw InvalidArgument("boom");
                               }),
                  InvalidArgument);
}

TEST_CASE("command line smoke run") {
  TempDir dir("cli");
  const std::string cli = MODEGATE_CLI;
  const std::string common = " --dataset " + data_path("questions20.jsonl").string() +
                             " --mock-fixture " + data_path("mock20.jsonl").string() +
                             " --cache-dir " + dir.path().string() +
                             " --set hidden_states_path=" + data_path("hidden20.jsonl").string() +
                             " --set probe_weights_path=" + data_path("probe20.json").string() +
                             " --log-level off";
  const auto run = [&](const std::string& args) {
    const int rc = std::system((cli + common + " " + args + " > " + (dir / "out.txt").string()).c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  };
  CHECK(run("generate") == 0);
  CHECK(run("score") == 0);
  CHECK(run("evaluate") == 0);
  CHECK(std::filesystem::exists(dir / "reports" / "report.json"));
  CHECK(run("report --json") == 0);
  CHECK(json::parse(read_file(dir / "out.txt")).contains("datasets"));
  CHECK(run("sweep --scorer deer --lambdas 0.2,0.9") == 0);
  CHECK(read_file(dir / "out.txt").find("lambda,accuracy") != std::string::npos);
  CHECK(run("fixture check --fixture " + data_path("mock20.jsonl").string()) == 0);
  CHECK(run("--set no_such=1 generate") == 101);
  CHECK(run("--scorers random score") == 101);
}
