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

#include <set>

#include "modegate/errors.h"
#include "modegate/prompting.h"
#include "modegate/util.h"

using namespace modegate;

namespace {

std::string golden(PromptKind kind) {
  return read_file(std::filesystem::path(MODEGATE_GOLDEN_DIR) / (std::string(to_string(kind)) + ".txt"));
}

}  // namespace

TEST_CASE("every template matches its golden file") {
  const ChatMarkers markers;
  for (PromptKind kind : kAllPromptKinds) {
    CAPTURE(to_string(kind));
    CHECK(render_prompt(kind, "What is 1+1?", markers) == golden(kind));
  }
}

TEST_CASE("kind names round trip and are distinct") {
  std::set<std::string_view> names;
  for (PromptKind kind : kAllPromptKinds) {
    CHECK(parse_prompt_kind(to_string(kind)) == kind);
    names.insert(to_string(kind));
  }
  CHECK(names.size() == kAllPromptKinds.size());
  CHECK_THROWS_AS(parse_prompt_kind("nope"), InvalidArgument);
}

TEST_CASE("NoThinking ends with the closed fake thought") {
  const ChatMarkers m;
  const std::string p = render_prompt(PromptKind::kNoThinking, "Q", m);
  CHECK(p.ends_with("<think>\n\nOkay, I think I have finished thinking.\n\n</think>"));
  CHECK(p.starts_with(render_prompt(PromptKind::kThinking, "Q", m)));
}

TEST_CASE("empty fake thought renders an empty think block") {
  const std::string p = render_prompt(PromptKind::kNoThinking, "Q", ChatMarkers{}, FakeThought{""});
  CHECK(p.ends_with("<think></think>"));
}

TEST_CASE("induced prompts end with their answer stems") {
  const ChatMarkers m;
  CHECK(render_prompt(PromptKind::kDeerInduce, "Q", m).ends_with("</think>\n\n**Final Answer**\n\nThe final answer is \\boxed{"));
  CHECK(render_prompt(PromptKind::kDynasorProbe, "Q", m).ends_with(kDynasorAnswerStem));
  CHECK(render_prompt(PromptKind::kPromptConf, "Q", m).ends_with("</think>\nConfidence: 0."));
  CHECK(render_prompt(PromptKind::kPreJudge, "Q", m).ends_with("{'require_slow_thinking':"));
}

TEST_CASE("custom markers are honored") {
  ChatMarkers m;
  m.bos = "";
  m.user_open = "<user>";
  m.assistant_open = "<assistant>";
  m.think_open = "<reason>";
  m.think_close = "</reason>";
  const std::string p = render_prompt(PromptKind::kNoThinking, "Q", m);
  CHECK(p.starts_with("<user>Q\n\n"));
  CHECK(p.ends_with("</reason>"));
  CHECK(p.find("<think>") == std::string::npos);
  CHECK(render_early_exit_suffix(m) == "</reason>\n");
}

TEST_CASE("question text is inserted verbatim") {
  const std::string q = "Let $f(x) = \\frac{1}{x}$.\n  Find {f(2)}.";
  for (PromptKind kind : kAllPromptKinds) {
    CHECK(render_prompt(kind, q, ChatMarkers{}).find(q) != std::string::npos);
  }
}

TEST_CASE("invalid inputs") {
  CHECK_THROWS_AS(render_prompt(PromptKind::kThinking, "", ChatMarkers{}), InvalidArgument);
  ChatMarkers same;
  same.think_close = same.think_open;
  CHECK_THROWS_AS(same.validate(), InvalidArgument);
  ChatMarkers empty;
  empty.think_open.clear();
  CHECK_THROWS_AS(empty.validate(), InvalidArgument);
  // A question containing the close marker still renders.
  CHECK_NOTHROW(render_prompt(PromptKind::kNoThinking, "what does </think> mean?", ChatMarkers{}));
}

TEST_CASE("early exit suffix") {
  CHECK(render_early_exit_suffix(ChatMarkers{}) == "</think>\n");
}
