#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace schemeflow {

/// Identity of an interned term. Structurally equal terms share one id.
using TermId = std::uint32_t;
inline constexpr TermId kNoTerm = 0xffffffffu;

enum class TermKind : std::uint8_t { Symbol, Integer, Ctor };

inline std::uint64_t mix_hash(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  h ^= h >> 31;
  h *= 0xbf58476d1ce4e5b9ULL;
  return h ^ (h >> 29);
}

/// Open-addressing table of 32-bit ids. Callers supply the hash of the
/// probed key and an equality predicate over stored ids, so the payload
/// lives elsewhere (term pool, relation rows).
class IdHashTable {
 public:
  template <class Eq>
  std::uint32_t find(std::uint64_t hash, Eq&& eq) const {
    if (slots_.empty()) return kNoTerm;
    const std::size_t mask = slots_.size() - 1;
    const auto h32 = static_cast<std::uint32_t>(hash);
    for (std::size_t i = hash & mask;; i = (i + 1) & mask) {
      const Slot& s = slots_[i];
      if (s.id == kNoTerm) return kNoTerm;
      if (s.hash == h32 && eq(s.id)) return s.id;
    }
  }

  /// Inserts an id known to be absent.
  void insert(std::uint64_t hash, std::uint32_t id) {
    if ((count_ + 1) * 4 >= slots_.size() * 3) grow();
    place(static_cast<std::uint32_t>(hash), hash, id);
    ++count_;
  }

  std::size_t size() const { return count_; }

 private:
  struct Slot {
    std::uint32_t id = kNoTerm;
    std::uint32_t hash = 0;
  };

  void place(std::uint32_t h32, std::uint64_t hash, std::uint32_t id) {
    const std::size_t mask = slots_.size() - 1;
    for (std::size_t i = hash & mask;; i = (i + 1) & mask) {
      if (slots_[i].id == kNoTerm) {
        slots_[i] = Slot{id, h32};
        return;
      }
    }
  }

  void grow() {
    std::vector<Slot> old = std::move(slots_);
    slots_.assign(old.empty() ? 64 : old.size() * 2, Slot{});
    // Re-probe with the stored low hash bits; fine while tables stay < 2^32.
    for (const Slot& s : old) {
      if (s.id != kNoTerm) place(s.hash, s.hash, s.id);
    }
  }

  std::vector<Slot> slots_;
  std::size_t count_ = 0;
};

class TermParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Hash-consed store of symbols, integers and constructor applications.
///
/// Terms are immutable once interned; concurrent readers are safe as long as
/// nobody interns at the same time.
class TermTable {
 public:
  TermTable();

  TermId symbol(std::string_view text);
  TermId integer(std::int64_t value);
  TermId ctor(TermId functor, std::span<const TermId> args);
  TermId ctor(std::string_view functor, std::span<const TermId> args) {
    return ctor(symbol(functor), args);
  }
  TermId ctor(std::string_view functor, std::initializer_list<TermId> args) {
    return ctor(symbol(functor), std::span<const TermId>(args.begin(), args.size()));
  }

  /// Lookups that never intern; kNoTerm when absent.
  TermId find_symbol(std::string_view text) const;
  TermId find_ctor(TermId functor, std::span<const TermId> args) const;

  TermKind kind(TermId t) const { return entries_[t].kind; }
  bool is_ctor(TermId t, TermId functor) const {
    return entries_[t].kind == TermKind::Ctor && entries_[t].a == functor;
  }
  std::string_view symbol_text(TermId t) const;
  std::int64_t integer_value(TermId t) const;
  TermId functor(TermId t) const;
  std::span<const TermId> args(TermId t) const;

  std::size_t size() const { return entries_.size(); }

  /// Canonical S-expression text: `sym`, `"quoted sym"`, `42`, `(F a b)`.
  std::string render(TermId t) const;
  void render_to(std::string& out, TermId t) const;

  /// Inverse of render(); throws TermParseError on malformed text.
  TermId parse(std::string_view text);

 private:
  struct Entry {
    TermKind kind;
    std::uint32_t arity;
    std::uint32_t a;  // symbol: string index; integer: value index; ctor: functor id
    std::uint32_t b;  // ctor: offset into args_
  };

  std::uint64_t ctor_hash(TermId functor, std::span<const TermId> args) const;
  bool ctor_equal(TermId t, TermId functor, std::span<const TermId> args) const;

  std::vector<Entry> entries_;
  std::vector<std::string> strings_;
  std::vector<std::int64_t> integers_;
  std::vector<TermId> args_;
  std::unordered_map<std::string, TermId> symbols_;
  std::unordered_map<std::int64_t, TermId> ints_;
  IdHashTable ctors_;
};

/// Renders a symbol the way the canonical form needs it: bare when it is a
/// plain token, otherwise double-quoted with `\"` and `\\` escapes.
void render_symbol(std::string& out, std::string_view text);

}  // namespace schemeflow
