#include "schemeflow/sexpr.hpp"

#include <cctype>
#include <charconv>

namespace schemeflow {

std::string to_string(SourcePos p) {
  return std::to_string(p.line) + ":" + std::to_string(p.column);
}

namespace {

bool is_delimiter(char c) {
  return std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == ')' || c == '[' ||
         c == ']' || c == ';' || c == '"' || c == '\'';
}

bool valid_identifier_char(char c) {
  if (std::isalnum(static_cast<unsigned char>(c))) return true;
  switch (c) {
    case '!': case '$': case '%': case '&': case '*': case '/': case ':': case '<':
    case '=': case '>': case '?': case '^': case '_': case '~': case '+': case '-':
    case '.': case '@':
      return true;
    default:
      return false;
  }
}

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  std::vector<SExpr> read_all() {
    std::vector<SExpr> out;
    for (;;) {
      skip_atmosphere();
      if (at_end()) return out;
      out.push_back(read());
    }
  }

 private:
  bool at_end() const { return i_ >= text_.size(); }
  char peek() const { return text_[i_]; }

  void advance() {
    if (text_[i_] == '\n') {
      ++pos_.line;
      pos_.column = 1;
    } else {
      ++pos_.column;
    }
    ++i_;
  }

  void skip_atmosphere() {
    while (!at_end()) {
      char c = peek();
      if (c == ';') {
        while (!at_end() && peek() != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        return;
      }
    }
  }

  SExpr read() {
    skip_atmosphere();
    if (at_end()) throw SourceError(pos_, "unexpected end of input");
    const SourcePos start = pos_;
    char c = peek();
    if (c == '(' || c == '[') {
      const char close = c == '(' ? ')' : ']';
      advance();
      SExpr list;
      list.kind = SExpr::Kind::List;
      list.pos = start;
      for (;;) {
        skip_atmosphere();
        if (at_end()) throw SourceError(start, "unbalanced parenthesis");
        char d = peek();
        if (d == ')' || d == ']') {
          if (d != close) throw SourceError(pos_, "mismatched closing bracket");
          advance();
          return list;
        }
        list.items.push_back(read());
      }
    }
    if (c == ')' || c == ']') throw SourceError(start, "unexpected closing parenthesis");
    if (c == '\'') {
      advance();
      SExpr quoted = read();
      SExpr list;
      list.pos = start;
      SExpr head;
      head.kind = SExpr::Kind::Identifier;
      head.text = "quote";
      head.pos = start;
      list.items.push_back(std::move(head));
      list.items.push_back(std::move(quoted));
      return list;
    }
    if (c == '"') throw SourceError(start, "string literals are not supported");

    std::size_t begin = i_;
    while (!at_end() && !is_delimiter(peek())) advance();
    std::string_view tok = text_.substr(begin, i_ - begin);
    return atom(tok, start);
  }

  static SExpr atom(std::string_view tok, SourcePos pos) {
    SExpr a;
    a.pos = pos;
    if (tok == "#t" || tok == "#true") {
      a.kind = SExpr::Kind::Boolean;
      a.boolean = true;
      return a;
    }
    if (tok == "#f" || tok == "#false") {
      a.kind = SExpr::Kind::Boolean;
      a.boolean = false;
      return a;
    }
    std::size_t digits_from = (tok[0] == '-' || tok[0] == '+') ? 1 : 0;
    bool numeric = digits_from < tok.size();
    for (std::size_t k = digits_from; k < tok.size() && numeric; ++k) {
      numeric = std::isdigit(static_cast<unsigned char>(tok[k])) != 0;
    }
    if (numeric) {
      std::int64_t v = 0;
      const char* first = tok.data() + (tok[0] == '+' ? 1 : 0);
      auto [p, ec] = std::from_chars(first, tok.data() + tok.size(), v);
      if (ec != std::errc{} || p != tok.data() + tok.size()) {
        throw SourceError(pos, "integer literal out of range: " + std::string(tok));
      }
      a.kind = SExpr::Kind::Integer;
      a.number = v;
      return a;
    }
    for (char ch : tok) {
      if (!valid_identifier_char(ch)) {
        throw SourceError(pos, "illegal token: " + std::string(tok));
      }
    }
    a.kind = SExpr::Kind::Identifier;
    a.text = std::string(tok);
    return a;
  }

  std::string_view text_;
  std::size_t i_ = 0;
  SourcePos pos_;
};

}  // namespace

std::vector<SExpr> read_sexprs(std::string_view text) { return Lexer(text).read_all(); }

}  // namespace schemeflow
