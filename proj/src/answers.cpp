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

#include "modegate/answers.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <set>

#include <json.hpp>

#include "modegate/errors.h"
#include "modegate/util.h"

namespace modegate {

std::string_view to_string(AnswerType type) {
  switch (type) {
    case AnswerType::kNumeric: return "numeric";
    case AnswerType::kOption: return "option";
    case AnswerType::kString: return "string";
  }
  return "string";
}

AnswerType parse_answer_type(std::string_view name) {
  if (name == "numeric") return AnswerType::kNumeric;
  if (name == "option") return AnswerType::kOption;
  if (name == "string") return AnswerType::kString;
  throw InvalidArgument("unknown answer_type '" + std::string(name) + "'");
}

namespace {

constexpr std::string_view kBoxedOpen = "\\boxed{";

// Index one past the brace closing the group that starts at `pos` (depth already 1), or npos.
std::size_t match_close(std::string_view text, std::size_t pos) {
  int depth = 1;
  for (std::size_t i = pos; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\\' && i + 1 < text.size() && (text[i + 1] == '{' || text[i + 1] == '}')) {
      ++i;
      continue;
    }
    if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i;
    }
  }
  return std::string_view::npos;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  if (from.empty()) return;
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

// Replaces `\macro{X}` with `X` for each wrapper macro.
void unwrap_macros(std::string& s) {
  static constexpr std::string_view kWrappers[] = {"\\text{", "\\textbf{", "\\mathrm{",
                                                   "\\mbox{", "\\mathbf{"};
  for (std::string_view w : kWrappers) {
    std::size_t pos;
    while ((pos = s.find(w)) != std::string::npos) {
      const std::size_t inner = pos + w.size();
      const std::size_t close = match_close(s, inner);
      if (close == std::string::npos) {
        s.erase(pos, w.size());
        break;
      }
      s = s.substr(0, pos) + s.substr(inner, close - inner) + s.substr(close + 1);
    }
  }
}

std::optional<Rational> make_rational(__int128 num, __int128 den) {
  if (den == 0) return std::nullopt;
  if (den < 0) {
    num = -num;
    den = -den;
  }
  __int128 a = num < 0 ? -num : num, b = den;
  while (b != 0) {
    __int128 t = a % b;
    a = b;
    b = t;
  }
  const __int128 g = a == 0 ? 1 : a;
  num /= g;
  den /= g;
  constexpr __int128 kMax = static_cast<__int128>(INT64_MAX);
  if (num > kMax || -num > kMax || den > kMax) return std::nullopt;
  return Rational{static_cast<std::int64_t>(num), static_cast<std::int64_t>(den)};
}

// Unsigned-or-signed decimal literal: [+-]?digits[.digits] or [+-]?.digits
std::optional<Rational> parse_decimal(std::string_view s) {
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  if (s.empty()) return std::nullopt;
  __int128 num = 0, den = 1;
  bool seen_dot = false, seen_digit = false;
  int digits = 0;
  for (char c : s) {
    if (c == '.') {
      if (seen_dot) return std::nullopt;
      seen_dot = true;
      continue;
    }
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    seen_digit = true;
    if (num == 0 && c == '0' && !seen_dot) {
      // leading zeros carry no digits
    } else if (++digits > 30) {
      return std::nullopt;
    }
    num = num * 10 + (c - '0');
    if (seen_dot) den *= 10;
  }
  if (!seen_digit) return std::nullopt;
  return make_rational(negative ? -num : num, den);
}

std::optional<Rational> divide(const Rational& a, const Rational& b) {
  return make_rational(static_cast<__int128>(a.num) * b.den, static_cast<__int128>(a.den) * b.num);
}

// Reads one \frac argument at `pos`: either a braced group or a single character.
std::optional<std::string_view> frac_argument(std::string_view s, std::size_t& pos) {
  if (pos >= s.size()) return std::nullopt;
  if (s[pos] == '{') {
    const std::size_t close = match_close(s, pos + 1);
    if (close == std::string_view::npos) return std::nullopt;
    std::string_view arg = s.substr(pos + 1, close - pos - 1);
    pos = close + 1;
    return arg;
  }
  std::string_view arg = s.substr(pos, 1);
  pos += 1;
  return arg;
}

std::string normalize_option(std::string_view text) {
  std::string s(text);
  unwrap_macros(s);
  s = trim(s);
  std::size_t b = 0;
  while (b < s.size() && !std::isalnum(static_cast<unsigned char>(s[b]))) ++b;
  if (b >= s.size()) return {};
  const char letter = static_cast<char>(std::toupper(static_cast<unsigned char>(s[b])));
  if (letter < 'A' || letter > 'E') return {};
  if (b + 1 < s.size() && std::isalnum(static_cast<unsigned char>(s[b + 1]))) return {};
  return std::string(1, letter);
}

std::string normalize_string(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : trim(text)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

struct Verdict {
  bool equal = false;
  std::string path;
};

Verdict compare(std::string_view a, std::string_view b, AnswerType type) {
  switch (type) {
    case AnswerType::kOption: {
      const std::string na = normalize_option(a), nb = normalize_option(b);
      return {!na.empty() && na == nb, "option '" + na + "' vs '" + nb + "'"};
    }
    case AnswerType::kString: {
      const std::string na = normalize_string(a), nb = normalize_string(b);
      return {!na.empty() && na == nb, "string '" + na + "' vs '" + nb + "'"};
    }
    case AnswerType::kNumeric: break;
  }
  const std::string na = normalize_numeric(a), nb = normalize_numeric(b);
  const auto ra = parse_rational(na), rb = parse_rational(nb);
  if (ra && rb) {
    return {*ra == *rb, "exact " + std::to_string(ra->num) + "/" + std::to_string(ra->den) +
                            " vs " + std::to_string(rb->num) + "/" + std::to_string(rb->den)};
  }
  const auto da = parse_real(na), db = parse_real(nb);
  if (da && db) {
    const double scale = std::max(std::fabs(*da), std::fabs(*db));
    const bool eq = *da == *db || std::fabs(*da - *db) <= 1e-6 * scale;
    return {eq, "real '" + na + "' vs '" + nb + "'"};
  }
  return {false, "unparseable numeric '" + na + "' vs '" + nb + "'"};
}

}  // namespace

BoxedExtraction extract_boxed_traced(std::string_view text) {
  const std::size_t open = text.rfind(kBoxedOpen);
  if (open == std::string_view::npos) return {};
  const std::size_t start = open + kBoxedOpen.size();
  const std::size_t close = match_close(text, start);
  if (close == std::string_view::npos) {
    return {std::nullopt,
            "unbalanced braces after last \\boxed{ at offset " + std::to_string(open)};
  }
  return {std::string(text.substr(start, close - start)), {}};
}

std::optional<std::string> extract_boxed(std::string_view text) {
  return extract_boxed_traced(text).answer;
}

std::optional<std::string> read_open_boxed(std::string_view continuation) {
  const std::size_t close = match_close(continuation, 0);
  if (close == std::string_view::npos) return std::nullopt;
  return std::string(continuation.substr(0, close));
}

std::string normalize_numeric(std::string_view text) {
  std::string s(text);
  unwrap_macros(s);
  replace_all(s, "\\dfrac", "\\frac");
  replace_all(s, "\\tfrac", "\\frac");
  static constexpr std::string_view kDrop[] = {"\\left", "\\right", "^{\\circ}", "^\\circ",
                                               "\\!",    "\\,",     "\\;",      "\\:",
                                               "\\ ",    "\\%",     "\\$",       "$",
                                               "%",      ","};
  for (std::string_view d : kDrop) replace_all(s, d, "");
  s.erase(std::remove_if(s.begin(), s.end(),
                         [](unsigned char c) { return std::isspace(c) != 0; }),
          s.end());
  // Leading "x=" style assignment.
  if (s.size() > 2 && std::isalpha(static_cast<unsigned char>(s[0])) && s[1] == '=') s.erase(0, 2);
  while (s.size() >= 2 && s.front() == '{' && match_close(s, 1) == s.size() - 1) {
    s = s.substr(1, s.size() - 2);
  }
  if (s.size() > 1 && s.back() == '.') s.pop_back();
  return s;
}

std::optional<Rational> parse_rational(std::string_view s) {
  if (s.empty()) return std::nullopt;
  bool negative = false;
  std::string_view body = s;
  if (body.front() == '-' && body.size() > 1 && body[1] == '\\') {
    negative = true;
    body.remove_prefix(1);
  }
  if (body.substr(0, 5) == "\\frac") {
    std::size_t pos = 5;
    const auto num_arg = frac_argument(body, pos);
    const auto den_arg = frac_argument(body, pos);
    if (!num_arg || !den_arg || pos != body.size()) return std::nullopt;
    const auto num = parse_decimal(*num_arg);
    const auto den = parse_decimal(*den_arg);
    if (!num || !den) return std::nullopt;
    auto q = divide(*num, *den);
    if (q && negative) q->num = -q->num;
    return q;
  }
  if (negative) return std::nullopt;
  if (const auto slash = s.find('/'); slash != std::string_view::npos) {
    const auto num = parse_decimal(s.substr(0, slash));
    const auto den = parse_decimal(s.substr(slash + 1));
    if (!num || !den) return std::nullopt;
    return divide(*num, *den);
  }
  return parse_decimal(s);
}

std::optional<double> parse_real(std::string_view s) {
  if (auto q = parse_rational(s)) return static_cast<double>(q->num) / static_cast<double>(q->den);
  if (s.empty()) return std::nullopt;
  const std::string buf(s);
  char* end = nullptr;
  const double v = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size() || !std::isfinite(v)) return std::nullopt;
  // strtod also accepts hex floats, "inf" and "nan"; only plain decimal notation is an answer.
  if (buf.find_first_of("xXnN") != std::string::npos) return std::nullopt;
  return v;
}

bool answers_equivalent(std::string_view a, std::string_view b, AnswerType type) {
  return compare(a, b, type).equal;
}

GradedAnswer grade_generation(const Completion& completion, const QuestionRecord& question) {
  GradedAnswer graded;
  const BoxedExtraction ex = extract_boxed_traced(completion.text);
  graded.extracted = ex.answer;
  if (!ex.answer) {
    graded.normalization_trace = ex.warning.empty() ? "no boxed answer" : ex.warning;
    return graded;
  }
  const Verdict v = compare(*ex.answer, question.gold, question.answer_type);
  graded.correct = v.equal;
  graded.normalization_trace = v.path;
  return graded;
}

std::vector<QuestionRecord> load_dataset(const std::filesystem::path& path) {
  std::vector<QuestionRecord> out;
  std::set<std::string> seen;
  for_each_line(path, [&](const std::string& line, std::size_t number) {
    const auto where = path.string() + ":" + std::to_string(number);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
    QuestionRecord q;
    try {
      q.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
      q.text = j.at("question").get<std::string>();
      q.gold = j.at("answer").is_string() ? j.at("answer").get<std::string>()
                                          : j.at("answer").dump();
      q.answer_type = parse_answer_type(j.value("answer_type", std::string("numeric")));
      q.dataset = j.value("dataset", std::string("default"));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
    if (q.text.empty()) throw FormatError(where + ": empty question");
    if (q.gold.empty()) throw FormatError(where + ": empty gold answer");
    if (q.answer_type == AnswerType::kOption && normalize_option(q.gold).empty()) {
      throw FormatError(where + ": option gold must be a single letter A-E");
    }
    if (!seen.insert(q.dataset + "\x1f" + q.id).second) {
      throw FormatError(where + ": duplicate id '" + q.id + "'");
    }
    out.push_back(std::move(q));
  });
  return out;
}

}  // namespace modegate
