#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "schemeflow/terms.hpp"

namespace schemeflow {

/// One source expression occurrence. Rendered as `e<N>`, N in pre-order.
struct Label {
  std::uint32_t index = 0;
  auto operator<=>(const Label&) const = default;
};

std::string label_name(Label l);

enum class ValueKind { Number, Bool, Closure, KontRef, PrimVal, NumTop };
enum class KontKind { MT, If, Set, Callcc, Let, Arg, Fn, Prim1, Prim2 };

/// Widening depth for PrimVal terms; nullopt means unbounded.
using WidenDepth = std::optional<unsigned>;

/// Interned domain terms of the analysis: contexts, addresses, abstract
/// values and continuation frames, plus the allocators both evaluators use.
///
/// Canonical forms:
///   (Context e7 e3)          most recent frame first; empty is (Context "")
///   (VAddress x ctx)         (KAddress e ctx)
///   (Number n) (Bool #t) (Closure lam ctx) (Kont ka) (PrimVal op v1 v2) (NumTop)
///   (MT) (If et ef ctx ak) (Set va ak) (Callcc ectx ak) (Let va body ctx ak)
///   (Arg args ctx ectx ak) (Fn v pos ctx ak) (Prim1 op e2 ctx ak) (Prim2 op v1 ak)
class Model {
 public:
  explicit Model(TermTable& terms);

  TermTable& terms() { return *terms_; }
  const TermTable& terms() const { return *terms_; }

  TermId label(Label l) { return terms_->symbol(label_name(l)); }
  TermId name(std::string_view n) { return terms_->symbol(n); }

  // Contexts.
  TermId empty_context() const { return empty_context_; }
  TermId context(std::span<const TermId> frames);
  std::vector<TermId> context_frames(TermId ctx) const;
  std::size_t context_length(TermId ctx) const;
  /// First m elements of (call_label : ctx).
  TermId make_context(TermId call_label, TermId ctx, unsigned m);

  // Addresses.
  TermId alloc_v(TermId var, TermId ctx) { return ctor2(f_.vaddress, var, ctx); }
  TermId alloc_k(TermId expr, TermId ctx) { return ctor2(f_.kaddress, expr, ctx); }

  // Values.
  TermId number(std::int64_t n);
  TermId boolean(bool b) { return ctor1(f_.bool_, b ? true_ : false_); }
  TermId bool_symbol(bool b) const { return b ? true_ : false_; }
  TermId closure(TermId lam, TermId ctx) { return ctor2(f_.closure, lam, ctx); }
  TermId kont_ref(TermId kaddr) { return ctor1(f_.kont, kaddr); }
  TermId prim_val(TermId op, TermId v1, TermId v2);
  TermId num_top() const { return num_top_; }

  // Continuation frames.
  TermId mt() const { return mt_; }
  TermId if_k(TermId et, TermId ef, TermId ctx, TermId next);
  TermId set_k(TermId loc, TermId next) { return ctor2(f_.set, loc, next); }
  TermId callcc_k(TermId ectx, TermId next) { return ctor2(f_.callcc, ectx, next); }
  TermId let_k(TermId av, TermId body, TermId ctx, TermId next);
  TermId arg_k(TermId args, TermId ctx, TermId ectx, TermId next);
  TermId fn_k(TermId fn, std::int64_t pos, TermId ctx, TermId next);
  TermId prim1_k(TermId op, TermId e2, TermId ctx, TermId next);
  TermId prim2_k(TermId op, TermId v1, TermId next);

  std::optional<ValueKind> value_kind(TermId v) const;
  std::optional<KontKind> kont_kind(TermId k) const;

  /// Nesting depth of PrimVal constructors (0 for every other value).
  unsigned primval_depth(TermId v) const;

  /// Cuts PrimVal nesting at `depth`: children of a PrimVal sitting at the
  /// limit are replaced by NumTop. Identity when depth is unbounded or the
  /// value is already shallow enough; idempotent.
  TermId widen_value(TermId v, WidenDepth depth);

  struct Functors {
    TermId context, vaddress, kaddress;
    TermId number, bool_, closure, kont, prim_val, num_top;
    TermId mt, if_, set, callcc, let, arg, fn, prim1, prim2;
  };
  const Functors& functors() const { return f_; }

 private:
  TermId ctor1(TermId f, TermId a) {
    TermId args[] = {a};
    return terms_->ctor(f, args);
  }
  TermId ctor2(TermId f, TermId a, TermId b) {
    TermId args[] = {a, b};
    return terms_->ctor(f, args);
  }

  TermTable* terms_;
  Functors f_{};
  TermId empty_token_;
  TermId empty_context_;
  TermId true_, false_;
  TermId num_top_, mt_;
};

}  // namespace schemeflow
