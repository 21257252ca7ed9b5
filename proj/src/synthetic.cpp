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

#include "modegate/synthetic.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "modegate/errors.h"
#include "modegate/util.h"

namespace modegate {

namespace {

bool ends_with(std::string_view s, std::string_view tail) {
  return s.size() >= tail.size() && s.substr(s.size() - tail.size()) == tail;
}

constexpr std::string_view kFiller[] = {
    "we", "check", "the", "terms", "again", "and", "simplify", "each", "part", "so",
    "nothing", "is", "lost", "then", "compare", "with", "the", "question",
};

}  // namespace

std::vector<std::string> pseudo_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (ch == '\n') {
      flush();
      std::size_t j = i;
      while (j < text.size() && text[j] == '\n') ++j;
      out.emplace_back(text.substr(i, j - i));
      i = j - 1;
    } else if (ch == '{' || ch == '}' || ch == '$') {
      flush();
      out.emplace_back(1, ch);
    } else if (ch == ' ') {
      flush();
      cur.push_back(ch);
    } else {
      cur.push_back(ch);
    }
  }
  flush();
  return out;
}

SyntheticBackend::SyntheticBackend(std::vector<QuestionRecord> questions, ChatMarkers markers,
                                   std::int64_t seed)
    : questions_(std::move(questions)), markers_(std::move(markers)), seed_(seed) {}

double SyntheticBackend::ease(const QuestionRecord& q) const {
  return unit_interval(stable_hash64({"ease", std::to_string(seed_), q.dataset, q.id}));
}

std::size_t SyntheticBackend::paragraph_count(const QuestionRecord& q) const {
  return 3 + stable_hash64({"paragraphs", std::to_string(seed_), q.id}) % 4;
}

std::string SyntheticBackend::answer_for(const QuestionRecord& q, bool correct,
                                         std::uint64_t variant) const {
  if (correct) return q.gold;
  switch (q.answer_type) {
    case AnswerType::kOption: {
      const char letter = static_cast<char>('A' + (q.gold[0] - 'A' + 1 + variant % 4) % 5);
      return std::string(1, letter);
    }
    case AnswerType::kString:
      return "none" + std::to_string(variant % 3);
    case AnswerType::kNumeric:
      break;
  }
  std::string wrong = std::to_string(10 + (stable_hash64({"wrong", q.id}) + variant % 3) % 90);
  if (wrong == q.gold) wrong += "1";
  return wrong;
}

std::string SyntheticBackend::full_thinking(const QuestionRecord& q) const {
  const std::size_t k = paragraph_count(q);
  std::string out = "\n";
  for (std::size_t i = 1; i <= k; ++i) {
    if (i > 1) out += "\n\n";
    out += "Step " + std::to_string(i) + ":";
    const std::size_t words = 6 + stable_hash64({"words", q.id, std::to_string(i)}) % 8;
    for (std::size_t w = 0; w < words; ++w) {
      out += ' ';
      out += kFiller[(w + i) % std::size(kFiller)];
    }
    out += '.';
  }
  const bool correct = ease(q) > 0.1;
  out += "\n" + markers_.think_close + "\n\nSo the final answer is $\\boxed{" +
         answer_for(q, correct, 0) + "}$.";
  return out;
}

double SyntheticBackend::progress(const QuestionRecord& q, std::string_view text) const {
  std::size_t seen = 0;
  for (std::size_t pos = text.find("Step "); pos != std::string_view::npos;
       pos = text.find("Step ", pos + 1)) {
    ++seen;
  }
  return std::min(1.0, static_cast<double>(seen) / static_cast<double>(paragraph_count(q)));
}

const QuestionRecord* SyntheticBackend::find_question(std::string_view prompt) const {
  const QuestionRecord* best = nullptr;
  for (const QuestionRecord& q : questions_) {
    if (prompt.find(q.text) != std::string_view::npos &&
        (!best || q.text.size() > best->text.size())) {
      best = &q;
    }
  }
  return best;
}

Completion SyntheticBackend::respond(const QuestionRecord& q, std::string_view text,
                                     std::string_view stream, const CompletionRequest& request,
                                     double answer_confidence) const {
  // Tokens between the last "{" and the following "}" carry the answer confidence.
  const std::size_t open = text.rfind('{');
  const std::size_t close = open == std::string_view::npos ? open : text.find('}', open);
  Completion c;
  std::size_t offset = 0;
  const std::size_t alternatives =
      static_cast<std::size_t>(std::clamp(request.params.top_logprobs, 0, 3));
  for (std::string& piece : pseudo_tokens(text)) {
    const bool answer = open != std::string_view::npos && offset > open &&
                        (close == std::string_view::npos || offset < close);
    const double jitter = unit_interval(stable_hash64(
        {"lp", std::to_string(seed_), q.id, stream, std::to_string(offset)}));
    const double p = answer ? std::clamp(answer_confidence + 0.04 * (jitter - 0.5), 0.01, 0.999)
                            : 0.55 + 0.44 * jitter;
    TokenInfo t;
    t.text = std::move(piece);
    t.logprob = std::log(p);
    if (alternatives > 0) t.top.emplace_back(t.text, t.logprob);
    if (alternatives > 1) t.top.emplace_back("<alt1>", std::log(std::min(p * 0.99, (1.0 - p) * 0.6)));
    if (alternatives > 2) t.top.emplace_back("<alt2>", std::log(std::min(p * 0.98, (1.0 - p) * 0.3)));
    offset += t.text.size();
    c.tokens.push_back(std::move(t));
  }

  // Stop sequences end the text before their first occurrence; max_new_tokens cuts the rest.
  std::string out;
  std::size_t kept = 0;
  bool stopped = false;
  for (; kept < c.tokens.size(); ++kept) {
    const std::string next = out + c.tokens[kept].text;
    std::size_t cut = std::string::npos;
    for (const std::string& s : request.params.stop_sequences) {
      if (!s.empty()) cut = std::min(cut, next.find(s));
    }
    if (cut != std::string::npos) {
      out = next.substr(0, cut);
      stopped = true;
      break;
    }
    if (static_cast<int>(kept) >= request.params.max_new_tokens) break;
    out = next;
  }
  const bool truncated = !stopped && kept < c.tokens.size();
  c.tokens.resize(kept);
  c.text = std::move(out);
  c.n_tokens = static_cast<int>(c.tokens.size());
  c.finish_reason = truncated ? FinishReason::kLength : FinishReason::kStop;
  return c;
}

Completion SyntheticBackend::complete(const CompletionRequest& request) {
  const std::string& prompt = request.prompt;
  const QuestionRecord* found = find_question(prompt);
  if (!found) throw BackendError("synthetic backend: no known question in prompt", false);
  const QuestionRecord& q = *found;
  const double e = ease(q);
  const double prog = progress(q, std::string_view(prompt).substr(prompt.find(q.text) + q.text.size()));
  const bool correct_now = e > 0.45 - 0.35 * prog;
  const double conf = std::clamp(0.25 + 0.6 * e + 0.3 * prog, 0.02, 0.995);
  Completion c;

  if (ends_with(prompt, kDeerAnswerStem)) {
    c = respond(q, answer_for(q, correct_now, 1) + "}", "deer", request, conf);
  } else if (ends_with(prompt, kDynasorAnswerStem)) {
    const std::uint64_t variant = request.params.seed ? static_cast<std::uint64_t>(*request.params.seed)
                                                      : request.sample_index;
    const double u = unit_interval(
        stable_hash64({"dynasor", std::to_string(seed_), q.id, std::to_string(variant)}));
    c = respond(q, answer_for(q, u < conf, variant) + "}", "dynasor", request, conf);
  } else if (ends_with(prompt, kPromptConfStem)) {
    const double jitter = unit_interval(stable_hash64({"pc", std::to_string(seed_), q.id}));
    const int digit = std::clamp(static_cast<int>((e + 0.2 * (jitter - 0.5)) * 10.0), 0, 9);
    c = respond(q, std::to_string(digit) + "\n", "promptconf", request, conf);
  } else if (ends_with(prompt, kPreJudgeStem)) {
    c = respond(q, e > 0.5 ? " false}" : " true}", "prejudge", request, conf);
  } else if (prompt.find("\n### Thought\n") != std::string::npos) {
    c = respond(q, e > 0.5 ? "Yes" : "No", "flashthink", request, conf);
  } else {
    const std::string preamble = render_prompt(PromptKind::kThinking, q, markers_);
    if (prompt.compare(0, preamble.size(), preamble) != 0) {
      throw BackendError("synthetic backend: unrecognized prompt shape", false);
    }
    const std::string_view rest = std::string_view(prompt).substr(preamble.size());
    const std::string full = full_thinking(q);
    if (full.compare(0, rest.size(), rest) == 0) {
      c = respond(q, std::string_view(full).substr(rest.size()), "thinking", request,
                  std::clamp(0.5 + 0.5 * e, 0.0, 0.995));
    } else if (ends_with(rest, markers_.think_close)) {
      c = respond(q, "\n\nThe answer is $\\boxed{" + answer_for(q, correct_now, 0) + "}$.",
                  "conclusion", request, conf);
    } else if (ends_with(rest, markers_.think_close + "\n")) {
      c = respond(q, "\nThe answer is $\\boxed{" + answer_for(q, correct_now, 0) + "}$.",
                  "conclusion", request, conf);
    } else {
      c = respond(q, "The final answer is \\boxed{" + answer_for(q, correct_now, 2) + "}.",
                  "entropy", request, conf);
    }
  }
  record_usage(c);
  return c;
}

Completion RecordingBackend::complete(const CompletionRequest& request) {
  Completion c = inner_.complete(request);
  record_usage(c);
  std::lock_guard lock(mu_);
  entries_.insert_or_assign(request_key(request.prompt, request.params, request.sample_index), c);
  return c;
}

std::size_t RecordingBackend::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

void RecordingBackend::write_fixture(const std::filesystem::path& path) const {
  std::string out;
  {
    std::lock_guard lock(mu_);
    for (const auto& [key, c] : entries_) {
      out += fixture_line(key, c).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
      out += '\n';
    }
  }
  write_file_atomic(path, out);
}

std::vector<QuestionRecord> synthetic_questions(std::size_t n, const std::string& dataset,
                                                std::int64_t seed) {
  std::vector<QuestionRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t h = stable_hash64({"question", std::to_string(seed), dataset, std::to_string(i)});
    const int a = static_cast<int>(h % 90) + 5;
    const int b = static_cast<int>((h >> 16) % 90) + 5;
    QuestionRecord q;
    char id[32];
    std::snprintf(id, sizeof id, "q%03zu", i + 1);
    q.id = id;
    q.dataset = dataset;
    if (i % 5 == 4) {
      const int g = std::gcd(a, b);
      q.text = "Write " + std::to_string(a) + "/" + std::to_string(b) + " as a fraction in lowest terms.";
      q.gold = b / g == 1 ? std::to_string(a / g)
                          : "\\frac{" + std::to_string(a / g) + "}{" + std::to_string(b / g) + "}";
    } else {
      q.text = "What is " + std::to_string(a) + " + " + std::to_string(b) + "? (item " +
               std::to_string(i + 1) + ")";
      q.gold = std::to_string(a + b);
    }
    out.push_back(std::move(q));
  }
  return out;
}

std::string dataset_jsonl(const std::vector<QuestionRecord>& questions) {
  std::string out;
  for (const QuestionRecord& q : questions) {
    nlohmann::json j{{"id", q.id},
                     {"question", q.text},
                     {"answer", q.gold},
                     {"answer_type", std::string(to_string(q.answer_type))},
                     {"dataset", q.dataset}};
    out += j.dump() + "\n";
  }
  return out;
}

std::pair<HiddenStateStore, MlpWeights> synthetic_probe_inputs(
    const std::vector<QuestionRecord>& questions, const SyntheticBackend& backend, int dim) {
  if (dim < 1) throw InvalidArgument("dim must be positive");
  HiddenStateStore store(dim);
  for (const QuestionRecord& q : questions) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    for (int k = 0; k < dim; ++k) {
      const double noise = unit_interval(stable_hash64({"hidden", q.id, std::to_string(k)})) - 0.5;
      v[static_cast<std::size_t>(k)] = k == 0 ? 2.0 * backend.ease(q) - 1.0 + 0.1 * noise : noise;
    }
    // Round-trip through float so the stored file and the in-memory store agree exactly.
    for (double& x : v) x = static_cast<double>(static_cast<float>(x));
    store.add(q.id, std::move(v));
  }
  MlpWeights w;
  MlpLayer hidden;
  hidden.in_dim = dim;
  hidden.out_dim = 2;
  hidden.weight.assign(static_cast<std::size_t>(2 * dim), 0.0);
  hidden.weight[0] = 3.0;                                  // positive part of the ease signal
  hidden.weight[static_cast<std::size_t>(dim)] = -3.0;     // negative part
  hidden.bias = {0.0, 0.0};
  hidden.activation = Activation::kRelu;
  MlpLayer head;
  head.in_dim = 2;
  head.out_dim = 1;
  head.weight = {1.5, -1.5};
  head.bias = {0.2};
  head.activation = Activation::kSigmoid;
  w.layers = {hidden, head};
  w.validate();
  return {std::move(store), std::move(w)};
}

}  // namespace modegate
