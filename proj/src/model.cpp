#include "schemeflow/model.hpp"

#include <algorithm>

namespace schemeflow {

std::string label_name(Label l) { return "e" + std::to_string(l.index); }

Model::Model(TermTable& terms) : terms_(&terms) {
  auto& t = *terms_;
  f_.context = t.symbol("Context");
  f_.vaddress = t.symbol("VAddress");
  f_.kaddress = t.symbol("KAddress");
  f_.number = t.symbol("Number");
  f_.bool_ = t.symbol("Bool");
  f_.closure = t.symbol("Closure");
  f_.kont = t.symbol("Kont");
  f_.prim_val = t.symbol("PrimVal");
  f_.num_top = t.symbol("NumTop");
  f_.mt = t.symbol("MT");
  f_.if_ = t.symbol("If");
  f_.set = t.symbol("Set");
  f_.callcc = t.symbol("Callcc");
  f_.let = t.symbol("Let");
  f_.arg = t.symbol("Arg");
  f_.fn = t.symbol("Fn");
  f_.prim1 = t.symbol("Prim1");
  f_.prim2 = t.symbol("Prim2");

  empty_token_ = t.symbol("");
  empty_context_ = ctor1(f_.context, empty_token_);
  true_ = t.symbol("#t");
  false_ = t.symbol("#f");
  num_top_ = t.ctor(f_.num_top, std::span<const TermId>{});
  mt_ = t.ctor(f_.mt, std::span<const TermId>{});
}

TermId Model::context(std::span<const TermId> frames) {
  if (frames.empty()) return empty_context_;
  return terms_->ctor(f_.context, frames);
}

std::vector<TermId> Model::context_frames(TermId ctx) const {
  auto args = terms_->args(ctx);
  if (args.size() == 1 && args[0] == empty_token_) return {};
  return {args.begin(), args.end()};
}

std::size_t Model::context_length(TermId ctx) const {
  auto args = terms_->args(ctx);
  return (args.size() == 1 && args[0] == empty_token_) ? 0 : args.size();
}

TermId Model::make_context(TermId call_label, TermId ctx, unsigned m) {
  if (m == 0) return empty_context_;
  std::vector<TermId> frames;
  frames.reserve(m);
  frames.push_back(call_label);
  auto old = terms_->args(ctx);
  if (!(old.size() == 1 && old[0] == empty_token_)) {
    for (std::size_t i = 0; i < old.size() && frames.size() < m; ++i) frames.push_back(old[i]);
  }
  return terms_->ctor(f_.context, frames);
}

TermId Model::number(std::int64_t n) { return ctor1(f_.number, terms_->integer(n)); }

TermId Model::prim_val(TermId op, TermId v1, TermId v2) {
  TermId args[] = {op, v1, v2};
  return terms_->ctor(f_.prim_val, args);
}

TermId Model::if_k(TermId et, TermId ef, TermId ctx, TermId next) {
  TermId args[] = {et, ef, ctx, next};
  return terms_->ctor(f_.if_, args);
}

TermId Model::let_k(TermId av, TermId body, TermId ctx, TermId next) {
  TermId args[] = {av, body, ctx, next};
  return terms_->ctor(f_.let, args);
}

TermId Model::arg_k(TermId args_label, TermId ctx, TermId ectx, TermId next) {
  TermId args[] = {args_label, ctx, ectx, next};
  return terms_->ctor(f_.arg, args);
}

TermId Model::fn_k(TermId fn, std::int64_t pos, TermId ctx, TermId next) {
  TermId args[] = {fn, terms_->integer(pos), ctx, next};
  return terms_->ctor(f_.fn, args);
}

TermId Model::prim1_k(TermId op, TermId e2, TermId ctx, TermId next) {
  TermId args[] = {op, e2, ctx, next};
  return terms_->ctor(f_.prim1, args);
}

TermId Model::prim2_k(TermId op, TermId v1, TermId next) {
  TermId args[] = {op, v1, next};
  return terms_->ctor(f_.prim2, args);
}

std::optional<ValueKind> Model::value_kind(TermId v) const {
  TermId f = terms_->functor(v);
  if (f == f_.number) return ValueKind::Number;
  if (f == f_.bool_) return ValueKind::Bool;
  if (f == f_.closure) return ValueKind::Closure;
  if (f == f_.kont) return ValueKind::KontRef;
  if (f == f_.prim_val) return ValueKind::PrimVal;
  if (f == f_.num_top) return ValueKind::NumTop;
  return std::nullopt;
}

std::optional<KontKind> Model::kont_kind(TermId k) const {
  TermId f = terms_->functor(k);
  if (f == f_.mt) return KontKind::MT;
  if (f == f_.if_) return KontKind::If;
  if (f == f_.set) return KontKind::Set;
  if (f == f_.callcc) return KontKind::Callcc;
  if (f == f_.let) return KontKind::Let;
  if (f == f_.arg) return KontKind::Arg;
  if (f == f_.fn) return KontKind::Fn;
  if (f == f_.prim1) return KontKind::Prim1;
  if (f == f_.prim2) return KontKind::Prim2;
  return std::nullopt;
}

unsigned Model::primval_depth(TermId v) const {
  if (terms_->functor(v) != f_.prim_val) return 0;
  auto a = terms_->args(v);
  return 1 + std::max(primval_depth(a[1]), primval_depth(a[2]));
}

TermId Model::widen_value(TermId v, WidenDepth depth) {
  if (!depth || primval_depth(v) <= *depth) return v;
  auto a = terms_->args(v);
  const TermId op = a[0], v1 = a[1], v2 = a[2];
  if (*depth <= 1) return prim_val(op, num_top_, num_top_);
  const WidenDepth inner = *depth - 1;
  TermId w1 = widen_value(v1, inner);
  TermId w2 = widen_value(v2, inner);
  return prim_val(op, w1, w2);
}

}  // namespace schemeflow
