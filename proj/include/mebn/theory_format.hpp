#pragma once

// Text formats: `.mtheory` theory files, `.mev` evidence files and query
// target expressions. The grammar is summarized in README.md.

#include <optional>
#include <string>
#include <vector>

#include "mebn/core_model.hpp"

namespace mebn {

struct SourceText {
  std::string content;
  std::string origin;

  /// Reads a UTF-8 file, normalizing CRLF to LF. Throws Error(Io).
  static SourceText from_file(const std::string& path);
};

struct SourceSpan {
  std::size_t line = 1;    // 1-based
  std::size_t column = 1;  // 1-based
  std::size_t length = 0;
};

struct ParseDiagnostic {
  enum class Severity { Error, Warning };
  Severity severity = Severity::Error;
  std::string message;
  SourceSpan span;

  std::string render(const std::string& origin) const;
};

template <class T>
struct ParseResult {
  std::optional<T> value;
  std::vector<ParseDiagnostic> diagnostics;

  bool ok() const { return value.has_value(); }
  std::string render(const std::string& origin) const {
    std::string s;
    for (const auto& d : diagnostics) s += d.render(origin) + "\n";
    return s;
  }
};

ParseResult<MTheory> parse_mtheory(const SourceText& src);

/// Evidence names are resolved against `theory`; identifiers against the
/// evidence file's own entities block when present, else the theory's.
ParseResult<Evidence> parse_evidence(const SourceText& src, const MTheory& theory);

/// A query target: an RV instance or any closed formula.
ParseResult<Formula> parse_formula(const SourceText& src);

ParseResult<LocalExpression> parse_local_expression(const SourceText& src);

std::string serialize_mtheory(const MTheory& theory);
std::string serialize_local(const LocalExpression& expr);
std::string serialize_evidence(const Evidence& evidence);

/// Shortest text that parses back to exactly `v`.
std::string format_number(double v);

}  // namespace mebn
