#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cotplan/prompting.h"

namespace cotplan {

inline constexpr double kMaxPredictedSpeed = 40.0;      // m/s
inline constexpr double kMaxPredictedCurvature = 0.5;   // 1/m

/// Future speed/curvature parsed from a stage-2 reply, already clamped.
struct ParsedPrediction {
  std::vector<double> speed;
  std::vector<double> curvature;
  std::string raw_text;
  /// Set when a list was longer than requested and got cut.
  bool truncated = false;
};

class ParseError : public std::runtime_error {
 public:
  enum class Kind { kMissingSection, kMissingList, kTooFewPoints,
                    kNonNumericToken };

  ParseError(Kind kind, std::string subject, const std::string& what)
      : std::runtime_error(what), kind_(kind), subject_(std::move(subject)) {}

  Kind kind() const { return kind_; }
  /// Section name, list name ("speed"/"curvature") or offending token.
  const std::string& subject() const { return subject_; }
  std::size_t found() const { return found_; }
  std::size_t needed() const { return needed_; }

  static ParseError TooFewPoints(const std::string& which, std::size_t found,
                                 std::size_t needed);

 private:
  Kind kind_;
  std::string subject_;
  std::size_t found_ = 0;
  std::size_t needed_ = 0;
};

const char* ToString(ParseError::Kind kind);

/// Splits a stage-1 reply on the three section headings. Headings match
/// case-insensitively and may carry markdown decoration ("### Intent
/// Command", "**Major Objects:**", "1. Scene Description -").
ReasoningOutput ParseReasoning(std::string_view text);

/// Extracts the bracketed lists labelled speed and curvature. Code fences
/// are ignored. Lists longer than `horizon_points` are truncated, shorter
/// ones rejected.
ParsedPrediction ParsePrediction(std::string_view text,
                                 std::size_t horizon_points = 10);

/// Canonical two-line rendering; ParsePrediction reads it back exactly.
std::string FormatPrediction(const ParsedPrediction& prediction);

}  // namespace cotplan
