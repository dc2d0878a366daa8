#include "schemeflow/terms.hpp"

#include <cctype>
#include <charconv>

namespace schemeflow {
namespace {

bool looks_like_integer(std::string_view s) {
  std::size_t i = (!s.empty() && (s[0] == '-' || s[0] == '+')) ? 1 : 0;
  if (i == s.size()) return false;
  for (; i < s.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  }
  return true;
}

bool needs_quotes(std::string_view s) {
  if (s.empty() || looks_like_integer(s)) return true;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == ')' || c == '"' ||
        c == '\\') {
      return true;
    }
  }
  return false;
}

class Reader {
 public:
  Reader(TermTable& table, std::string_view text) : table_(table), text_(text) {}

  TermId read_all() {
    TermId t = read();
    skip_ws();
    if (pos_ != text_.size()) fail("trailing characters");
    return t;
  }

 private:
  [[noreturn]] void fail(const char* what) const {
    throw TermParseError(std::string("term parse error at offset ") + std::to_string(pos_) +
                         ": " + what);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  TermId read() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      skip_ws();
      std::string_view head = token();
      if (head.empty()) fail("expected constructor name");
      std::vector<TermId> args;
      for (;;) {
        skip_ws();
        if (pos_ >= text_.size()) fail("unbalanced parenthesis");
        if (text_[pos_] == ')') {
          ++pos_;
          break;
        }
        args.push_back(read());
      }
      return table_.ctor(table_.symbol(head), args);
    }
    if (c == ')') fail("unexpected ')'");
    if (c == '"') return table_.symbol(quoted());
    std::string_view tok = token();
    if (looks_like_integer(tok)) {
      std::int64_t v = 0;
      const char* first = tok.data() + (tok[0] == '+' ? 1 : 0);
      auto [p, ec] = std::from_chars(first, tok.data() + tok.size(), v);
      if (ec != std::errc{} || p != tok.data() + tok.size()) fail("integer out of range");
      return table_.integer(v);
    }
    return table_.symbol(tok);
  }

  std::string_view token() {
    std::size_t start = pos_;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == ')' || c == '"') break;
      ++pos_;
    }
    return text_.substr(start, pos_ - start);
  }

  std::string quoted() {
    ++pos_;
    std::string out;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\\') {
        if (++pos_ >= text_.size()) fail("dangling escape");
      }
      out.push_back(text_[pos_++]);
    }
    if (pos_ >= text_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  TermTable& table_;
  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

void render_symbol(std::string& out, std::string_view text) {
  if (!needs_quotes(text)) {
    out.append(text);
    return;
  }
  out.push_back('"');
  for (char c : text) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
}

TermTable::TermTable() = default;

TermId TermTable::symbol(std::string_view text) {
  auto it = symbols_.find(std::string(text));
  if (it != symbols_.end()) return it->second;
  TermId id = static_cast<TermId>(entries_.size());
  entries_.push_back(Entry{TermKind::Symbol, 0, static_cast<std::uint32_t>(strings_.size()), 0});
  strings_.emplace_back(text);
  symbols_.emplace(strings_.back(), id);
  return id;
}

TermId TermTable::find_symbol(std::string_view text) const {
  auto it = symbols_.find(std::string(text));
  return it == symbols_.end() ? kNoTerm : it->second;
}

TermId TermTable::integer(std::int64_t value) {
  auto it = ints_.find(value);
  if (it != ints_.end()) return it->second;
  TermId id = static_cast<TermId>(entries_.size());
  entries_.push_back(Entry{TermKind::Integer, 0, static_cast<std::uint32_t>(integers_.size()), 0});
  integers_.push_back(value);
  ints_.emplace(value, id);
  return id;
}

std::uint64_t TermTable::ctor_hash(TermId functor, std::span<const TermId> args) const {
  std::uint64_t h = mix_hash(0x51ed27u, functor);
  for (TermId a : args) h = mix_hash(h, a);
  return mix_hash(h, args.size());
}

bool TermTable::ctor_equal(TermId t, TermId functor, std::span<const TermId> args) const {
  const Entry& e = entries_[t];
  if (e.a != functor || e.arity != args.size()) return false;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args_[e.b + i] != args[i]) return false;
  }
  return true;
}

TermId TermTable::find_ctor(TermId functor, std::span<const TermId> args) const {
  if (functor == kNoTerm) return kNoTerm;
  for (TermId a : args) {
    if (a == kNoTerm) return kNoTerm;
  }
  return ctors_.find(ctor_hash(functor, args),
                     [&](std::uint32_t id) { return ctor_equal(id, functor, args); });
}

TermId TermTable::ctor(TermId functor, std::span<const TermId> args) {
  const std::uint64_t h = ctor_hash(functor, args);
  TermId found = ctors_.find(h, [&](std::uint32_t id) { return ctor_equal(id, functor, args); });
  if (found != kNoTerm) return found;
  TermId id = static_cast<TermId>(entries_.size());
  entries_.push_back(Entry{TermKind::Ctor, static_cast<std::uint32_t>(args.size()), functor,
                           static_cast<std::uint32_t>(args_.size())});
  args_.insert(args_.end(), args.begin(), args.end());
  ctors_.insert(h, id);
  return id;
}

std::string_view TermTable::symbol_text(TermId t) const {
  const Entry& e = entries_[t];
  if (e.kind != TermKind::Symbol) throw std::logic_error("term is not a symbol");
  return strings_[e.a];
}

std::int64_t TermTable::integer_value(TermId t) const {
  const Entry& e = entries_[t];
  if (e.kind != TermKind::Integer) throw std::logic_error("term is not an integer");
  return integers_[e.a];
}

TermId TermTable::functor(TermId t) const {
  const Entry& e = entries_[t];
  return e.kind == TermKind::Ctor ? e.a : kNoTerm;
}

std::span<const TermId> TermTable::args(TermId t) const {
  const Entry& e = entries_[t];
  if (e.kind != TermKind::Ctor) return {};
  return std::span<const TermId>(args_.data() + e.b, e.arity);
}

void TermTable::render_to(std::string& out, TermId t) const {
  const Entry& e = entries_[t];
  switch (e.kind) {
    case TermKind::Symbol:
      render_symbol(out, strings_[e.a]);
      return;
    case TermKind::Integer:
      out.append(std::to_string(integers_[e.a]));
      return;
    case TermKind::Ctor:
      out.push_back('(');
      out.append(strings_[entries_[e.a].a]);
      for (std::uint32_t i = 0; i < e.arity; ++i) {
        out.push_back(' ');
        render_to(out, args_[e.b + i]);
      }
      out.push_back(')');
      return;
  }
}

std::string TermTable::render(TermId t) const {
  std::string out;
  render_to(out, t);
  return out;
}

TermId TermTable::parse(std::string_view text) { return Reader(*this, text).read_all(); }

}  // namespace schemeflow
