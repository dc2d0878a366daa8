#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace schemeflow {

struct SourcePos {
  std::uint32_t line = 1;
  std::uint32_t column = 1;
};

std::string to_string(SourcePos p);

/// Raised for malformed input text and for programs outside the subset.
class SourceError : public std::runtime_error {
 public:
  SourceError(SourcePos pos, const std::string& what)
      : std::runtime_error(to_string(pos) + ": " + what), pos_(pos) {}
  SourcePos pos() const { return pos_; }

 private:
  SourcePos pos_;
};

struct SExpr {
  enum class Kind { Identifier, Integer, Boolean, List };

  Kind kind = Kind::List;
  std::string text;        // identifier spelling
  std::int64_t number = 0;
  bool boolean = false;
  std::vector<SExpr> items;
  SourcePos pos;

  bool is_identifier(std::string_view s) const { return kind == Kind::Identifier && text == s; }
};

/// Reads every top-level datum. `;` starts a comment, `[`/`]` pair like
/// parentheses, and `'d` abbreviates `(quote d)`.
std::vector<SExpr> read_sexprs(std::string_view text);

}  // namespace schemeflow
