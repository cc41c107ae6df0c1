#include "cotplan/response_parser.h"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <optional>

namespace cotplan {

namespace {

constexpr std::string_view kWhitespace = " \t\r\n\f\v";

char Lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

bool IsAlpha(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

bool IsDigit(char c) { return c >= '0' && c <= '9'; }

std::string_view TrimView(std::string_view s) {
  const auto b = s.find_first_not_of(kWhitespace);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(kWhitespace);
  return s.substr(b, e - b + 1);
}

std::string Trim(std::string_view s) { return std::string(TrimView(s)); }

std::string_view StripLeading(std::string_view s, std::string_view chars) {
  const auto b = s.find_first_not_of(chars);
  return b == std::string_view::npos ? std::string_view{} : s.substr(b);
}

bool StartsWithNoCase(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (Lower(s[i]) != Lower(prefix[i])) return false;
  }
  return true;
}

std::size_t FindNoCase(std::string_view hay, std::string_view needle,
                       std::size_t from = 0) {
  if (needle.empty() || hay.size() < needle.size()) return std::string_view::npos;
  for (std::size_t i = from; i + needle.size() <= hay.size(); ++i) {
    if (StartsWithNoCase(hay.substr(i), needle)) return i;
  }
  return std::string_view::npos;
}

std::vector<std::string_view> SplitLines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = nl + 1;
  }
  return lines;
}

std::string RemoveEmphasis(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '*') continue;
    if (s[i] == '_' && i + 1 < s.size() && s[i + 1] == '_') {
      ++i;
      continue;
    }
    out.push_back(s[i]);
  }
  return out;
}

// Drops a leading list/heading marker: "#", "-", "*", ">", bullets and
// enumerations such as "1." or "2)".
std::string_view StripMarker(std::string_view s) {
  s = StripLeading(s, " \t#>*_-+");
  if (s.starts_with("\xE2\x80\xA2")) s = StripLeading(s.substr(3), " \t*_");
  std::size_t i = 0;
  while (i < s.size() && IsDigit(s[i])) ++i;
  if (i > 0 && i < s.size() && (s[i] == '.' || s[i] == ')')) {
    s = StripLeading(s.substr(i + 1), " \t*_");
  }
  return s;
}

constexpr std::array<const char*, 3> kHeadings = {
    kIntentHeading, kSceneHeading, kObjectsHeading};

struct HeaderMatch {
  std::size_t section = 0;
  std::string inline_text;
};

std::optional<HeaderMatch> MatchHeader(std::string_view line) {
  const std::string_view body = StripMarker(line);
  for (std::size_t h = 0; h < kHeadings.size(); ++h) {
    const std::string_view heading = kHeadings[h];
    if (!StartsWithNoCase(body, heading)) continue;
    std::string_view rest = StripLeading(body.substr(heading.size()), " \t*_");
    if (rest.starts_with('(')) {
      const auto close = rest.find(')');
      if (close == std::string_view::npos) continue;
      rest = StripLeading(rest.substr(close + 1), " \t*_");
    }
    if (rest.empty()) return HeaderMatch{h, {}};
    if (rest.front() == ':' || rest.front() == '-') {
      rest = StripLeading(rest.substr(1), " \t*_");
      return HeaderMatch{h, Trim(rest)};
    }
  }
  return std::nullopt;
}

struct KeywordRule {
  std::string_view stem;
  int value;
};

// Returns the value of the rule whose stem starts the earliest word.
template <std::size_t N>
std::optional<int> EarliestKeyword(std::string_view text,
                                   const std::array<KeywordRule, N>& rules) {
  std::size_t i = 0;
  while (i < text.size()) {
    if (!IsAlpha(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && IsAlpha(text[j])) ++j;
    const std::string_view word = text.substr(i, j - i);
    for (const auto& rule : rules) {
      if (StartsWithNoCase(word, rule.stem)) return rule.value;
    }
    i = j;
  }
  return std::nullopt;
}

Maneuver ScanManeuver(std::string_view intent) {
  static constexpr std::array<KeywordRule, 3> kRules = {{
      {"left", static_cast<int>(Maneuver::kLeftTurn)},
      {"right", static_cast<int>(Maneuver::kRightTurn)},
      {"straight", static_cast<int>(Maneuver::kStraight)},
  }};
  auto v = EarliestKeyword(intent, kRules);
  return v ? static_cast<Maneuver>(*v) : Maneuver::kUnknown;
}

SpeedIntent ScanSpeedIntent(std::string_view intent) {
  static constexpr std::array<KeywordRule, 5> kRules = {{
      {"accelerat", static_cast<int>(SpeedIntent::kAccelerate)},
      {"decelerat", static_cast<int>(SpeedIntent::kDecelerate)},
      {"slow", static_cast<int>(SpeedIntent::kDecelerate)},
      {"stop", static_cast<int>(SpeedIntent::kStop)},
      {"maintain", static_cast<int>(SpeedIntent::kMaintain)},
  }};
  auto v = EarliestKeyword(intent, kRules);
  return v ? static_cast<SpeedIntent>(*v) : SpeedIntent::kUnknown;
}

bool IsListItem(std::string_view line) {
  const std::string_view s = StripLeading(line, " \t");
  if (s.empty()) return false;
  if (s.front() == '-' || s.front() == '*' || s.front() == '+') {
    return s.size() > 1 && (s[1] == ' ' || s[1] == '\t' || s[1] == '*');
  }
  if (s.starts_with("\xE2\x80\xA2")) return true;
  std::size_t i = 0;
  while (i < s.size() && IsDigit(s[i])) ++i;
  return i > 0 && i < s.size() && (s[i] == '.' || s[i] == ')');
}

std::size_t Indent(std::string_view line) {
  std::size_t n = 0;
  for (char c : line) {
    if (c == ' ') {
      n += 1;
    } else if (c == '\t') {
      n += 4;
    } else {
      break;
    }
  }
  return n;
}

void AppendSentence(std::string& dst, std::string_view text) {
  const auto t = TrimView(text);
  if (t.empty()) return;
  if (!dst.empty()) dst += ' ';
  dst += t;
}

CriticalObject ParseObjectItem(std::string_view item) {
  const std::string clean = RemoveEmphasis(StripMarker(item));
  std::string_view s = clean;
  CriticalObject obj;
  std::string_view head = s;
  auto colon = s.find(':');
  std::size_t sep_len = 1;
  if (colon == std::string_view::npos) {
    colon = s.find(" - ");
    sep_len = 3;
  }
  if (colon != std::string_view::npos) {
    head = s.substr(0, colon);
    obj.rationale = Trim(s.substr(colon + sep_len));
  }
  const auto comma = head.find(',');
  if (comma != std::string_view::npos) {
    obj.label = Trim(head.substr(0, comma));
    obj.location_text = Trim(head.substr(comma + 1));
  } else {
    obj.label = Trim(head);
  }
  return obj;
}

std::vector<CriticalObject> ParseObjects(std::string_view section) {
  std::vector<CriticalObject> objects;
  std::size_t item_indent = 0;
  for (std::string_view line : SplitLines(section)) {
    if (TrimView(line).empty()) continue;
    const bool item = IsListItem(line);
    if (item && (objects.empty() || Indent(line) <= item_indent)) {
      item_indent = Indent(line);
      objects.push_back(ParseObjectItem(line));
      continue;
    }
    if (objects.empty()) continue;
    // Sub-bullet or wrapped continuation of the current item.
    CriticalObject& cur = objects.back();
    const std::string detail = RemoveEmphasis(StripMarker(line));
    const auto colon = detail.find(':');
    if (item && colon != std::string::npos &&
        FindNoCase(std::string_view(detail).substr(0, colon), "locat") !=
            std::string_view::npos) {
      AppendSentence(cur.location_text, std::string_view(detail).substr(colon + 1));
    } else {
      AppendSentence(cur.rationale, detail);
    }
  }
  return objects;
}

// --- prediction lists -----------------------------------------------------

std::string StripCodeFences(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::string_view line : SplitLines(text)) {
    const auto t = StripLeading(line, " \t");
    if (t.starts_with("```") || t.starts_with("~~~")) continue;
    out.append(line);
    out.push_back('\n');
  }
  return out;
}

constexpr std::size_t kMaxLabelGap = 48;

struct ListSpan {
  std::size_t open = 0;   // index of '['
  std::size_t close = 0;  // index of ']'
};

// First bracketed list introduced by `label` (not by "<label> history").
std::optional<ListSpan> FindLabelledList(std::string_view text,
                                         std::string_view label,
                                         std::string_view other_label) {
  std::size_t from = 0;
  while (true) {
    const auto at = FindNoCase(text, label, from);
    if (at == std::string_view::npos) return std::nullopt;
    from = at + label.size();
    if (at > 0 && IsAlpha(text[at - 1])) continue;  // e.g. "airspeed"
    std::string_view after = text.substr(from);
    after = StripLeading(after, " \t*_");
    if (StartsWithNoCase(after, "history")) continue;
    const auto open = text.find('[', from);
    if (open == std::string_view::npos) return std::nullopt;
    const std::string_view gap = text.substr(from, open - from);
    if (gap.size() > kMaxLabelGap ||
        std::count(gap.begin(), gap.end(), '\n') > 1 ||
        gap.find(']') != std::string_view::npos ||
        FindNoCase(gap, other_label) != std::string_view::npos) {
      continue;
    }
    const auto close = text.find(']', open + 1);
    if (close == std::string_view::npos) continue;
    return ListSpan{open, close};
  }
}

std::vector<double> ParseNumberList(std::string_view body) {
  std::vector<double> values;
  std::size_t i = 0;
  constexpr std::string_view kSeparators = ", ;\t\r\n";
  while (i < body.size()) {
    const auto start = body.find_first_not_of(kSeparators, i);
    if (start == std::string_view::npos) break;
    auto end = body.find_first_of(kSeparators, start);
    if (end == std::string_view::npos) end = body.size();
    std::string_view token = body.substr(start, end - start);
    i = end;

    std::string_view digits = token;
    if (digits.starts_with('+')) digits.remove_prefix(1);
    double v = 0.0;
    const auto* first = digits.data();
    const auto* last = digits.data() + digits.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (digits.empty() || ec != std::errc() || ptr != last ||
        !std::isfinite(v) || IsAlpha(digits.front())) {
      throw ParseError(ParseError::Kind::kNonNumericToken, std::string(token),
                       "non-numeric token '" + std::string(token) + "'");
    }
    values.push_back(v);
  }
  return values;
}

std::vector<double> ExtractList(std::string_view text, const char* which,
                                std::string_view label,
                                std::string_view other_label,
                                std::size_t needed, bool& truncated) {
  const auto span = FindLabelledList(text, label, other_label);
  if (!span) {
    throw ParseError(ParseError::Kind::kMissingList, which,
                     std::string("no bracketed list labelled ") + which);
  }
  auto values =
      ParseNumberList(text.substr(span->open + 1, span->close - span->open - 1));
  if (values.size() < needed) {
    throw ParseError::TooFewPoints(which, values.size(), needed);
  }
  if (values.size() > needed) {
    values.resize(needed);
    truncated = true;
  }
  return values;
}

std::string FormatShortest(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

}  // namespace

ParseError ParseError::TooFewPoints(const std::string& which,
                                    std::size_t found, std::size_t needed) {
  ParseError e(Kind::kTooFewPoints, which,
               which + " list has " + std::to_string(found) +
                   " values, need " + std::to_string(needed));
  e.found_ = found;
  e.needed_ = needed;
  return e;
}

const char* ToString(ParseError::Kind kind) {
  switch (kind) {
    case ParseError::Kind::kMissingSection: return "MissingSection";
    case ParseError::Kind::kMissingList: return "MissingList";
    case ParseError::Kind::kTooFewPoints: return "TooFewPoints";
    case ParseError::Kind::kNonNumericToken: return "NonNumericToken";
  }
  return "Unknown";
}

ReasoningOutput ParseReasoning(std::string_view text) {
  const auto lines = SplitLines(text);
  std::array<std::optional<std::string>, 3> sections;
  std::optional<std::size_t> current;

  for (std::string_view line : lines) {
    if (auto header = MatchHeader(line)) {
      // Repeated headings end the previous section but only the first
      // occurrence of each heading is kept.
      if (sections[header->section]) {
        current.reset();
        continue;
      }
      current = header->section;
      sections[header->section] = header->inline_text;
      continue;
    }
    if (!current) continue;
    std::string& dst = *sections[*current];
    if (!dst.empty()) dst.push_back('\n');
    dst.append(line);
  }

  // Object items keep their original indentation for nesting decisions.
  const std::string raw_objects = sections[2].value_or("");
  for (std::size_t h = 0; h < kHeadings.size(); ++h) {
    if (!sections[h]) {
      throw ParseError(ParseError::Kind::kMissingSection, kHeadings[h],
                       std::string("missing section '") + kHeadings[h] + "'");
    }
    *sections[h] = Trim(*sections[h]);
    if (sections[h]->empty()) {
      throw ParseError(ParseError::Kind::kMissingSection, kHeadings[h],
                       std::string("section '") + kHeadings[h] + "' is empty");
    }
  }

  ReasoningOutput out;
  out.intent = std::move(*sections[0]);
  out.scene_description = std::move(*sections[1]);
  out.major_objects_text = std::move(*sections[2]);
  out.intent_maneuver = ScanManeuver(out.intent);
  out.intent_speed = ScanSpeedIntent(out.intent);
  out.critical_objects = ParseObjects(raw_objects);
  return out;
}

ParsedPrediction ParsePrediction(std::string_view text,
                                 std::size_t horizon_points) {
  if (horizon_points == 0) {
    throw std::invalid_argument("horizon_points must be positive");
  }
  const std::string body = StripCodeFences(text);
  ParsedPrediction out;
  out.raw_text = std::string(text);
  out.speed = ExtractList(body, "speed", "speed", "curvature", horizon_points,
                          out.truncated);
  out.curvature = ExtractList(body, "curvature", "curvature", "speed",
                              horizon_points, out.truncated);
  for (double& v : out.speed) v = std::clamp(v, 0.0, kMaxPredictedSpeed);
  for (double& v : out.curvature) {
    v = std::clamp(v, -kMaxPredictedCurvature, kMaxPredictedCurvature);
  }
  return out;
}

std::string FormatPrediction(const ParsedPrediction& p) {
  auto list = [](const std::vector<double>& values) {
    std::string s = "[";
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) s += ", ";
      s += FormatShortest(values[i]);
    }
    return s + "]";
  };
  return "Speed: " + list(p.speed) + "\nCurvature: " + list(p.curvature) + "\n";
}

}  // namespace cotplan
