#include "schemeflow/frontend.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace schemeflow {

std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Var: return "var";
    case NodeKind::Num: return "num";
    case NodeKind::Bool: return "bool";
    case NodeKind::Lambda: return "lambda";
    case NodeKind::If: return "if";
    case NodeKind::SetBang: return "set!";
    case NodeKind::Callcc: return "call/cc";
    case NodeKind::Let: return "let";
    case NodeKind::PrimCall: return "prim_call";
    case NodeKind::Call: return "call";
    case NodeKind::ParamList: return "param_list";
    case NodeKind::ArgList: return "arg_list";
    case NodeKind::BindList: return "bind_list";
    case NodeKind::PrimOp: return "prim";
    case NodeKind::Quote: return "quote";
    case NodeKind::Datum: return "datum";
  }
  return "?";
}

std::vector<Label> LabeledProgram::call_args(Label call) const {
  return node(node(call).children.at(1)).children;
}

class ProgramBuilder {
 public:
  explicit ProgramBuilder(const FrontendOptions& opts) : opts_(opts) {}

  LabeledProgram build(const SExpr& top) {
    convert(top);
    collect_free(Label{0});
    std::unordered_map<std::string, std::vector<std::string>> scope;
    rename(Label{0}, scope);
    return std::move(prog_);
  }

 private:
  Label fresh(NodeKind kind, SourcePos pos) {
    Label l{static_cast<std::uint32_t>(prog_.nodes_.size())};
    Node n;
    n.kind = kind;
    n.pos = pos;
    prog_.nodes_.push_back(std::move(n));
    return l;
  }
  Node& at(Label l) { return prog_.nodes_[l.index]; }

  [[noreturn]] static void fail(const SExpr& at, const std::string& what) {
    throw SourceError(at.pos, what);
  }

  static bool is_keyword(std::string_view s) {
    return s == "lambda" || s == "if" || s == "set!" || s == "call/cc" || s == "let" ||
           s == "quote";
  }

  Label convert(const SExpr& e) {
    switch (e.kind) {
      case SExpr::Kind::Integer: {
        Label l = fresh(NodeKind::Num, e.pos);
        at(l).number = e.number;
        return l;
      }
      case SExpr::Kind::Boolean: {
        Label l = fresh(NodeKind::Bool, e.pos);
        at(l).boolean = e.boolean;
        return l;
      }
      case SExpr::Kind::Identifier: {
        if (is_keyword(e.text)) fail(e, "keyword '" + e.text + "' used as a variable");
        Label l = fresh(NodeKind::Var, e.pos);
        at(l).source_name = e.text;
        return l;
      }
      case SExpr::Kind::List:
        break;
    }
    if (e.items.empty()) fail(e, "empty application ()");
    const SExpr& head = e.items[0];
    if (head.kind == SExpr::Kind::Identifier) {
      const std::string& h = head.text;
      if (h == "lambda") return convert_lambda(e);
      if (h == "if") return convert_if(e);
      if (h == "set!") return convert_set(e);
      if (h == "call/cc") return convert_callcc(e);
      if (h == "let") return convert_let(e);
      if (h == "quote") return convert_quote(e);
      if (opts_.primitives.contains(h)) return convert_prim(e);
    }
    return convert_call(e);
  }

  Label convert_lambda(const SExpr& e) {
    if (e.items.size() != 3) fail(e, "lambda: expected (lambda (params...) body)");
    const SExpr& params = e.items[1];
    if (params.kind != SExpr::Kind::List) fail(params, "lambda: parameter list must be a list");
    Label l = fresh(NodeKind::Lambda, e.pos);
    Label pl = fresh(NodeKind::ParamList, params.pos);
    std::unordered_set<std::string> seen;
    for (const SExpr& p : params.items) {
      if (p.kind != SExpr::Kind::Identifier || is_keyword(p.text)) {
        fail(p, "lambda: parameters must be identifiers");
      }
      if (!seen.insert(p.text).second) fail(p, "lambda: duplicate parameter '" + p.text + "'");
      at(pl).names.push_back(p.text);
    }
    Label body = convert(e.items[2]);
    at(l).children = {pl, body};
    return l;
  }

  Label convert_if(const SExpr& e) {
    if (e.items.size() != 4) fail(e, "if: expected (if guard then else)");
    Label l = fresh(NodeKind::If, e.pos);
    Label g = convert(e.items[1]);
    Label t = convert(e.items[2]);
    Label f = convert(e.items[3]);
    at(l).children = {g, t, f};
    return l;
  }

  Label convert_set(const SExpr& e) {
    if (e.items.size() != 3) fail(e, "set!: expected (set! x expr)");
    const SExpr& target = e.items[1];
    if (target.kind != SExpr::Kind::Identifier || is_keyword(target.text)) {
      fail(target, "set!: target must be an identifier");
    }
    Label l = fresh(NodeKind::SetBang, e.pos);
    at(l).source_name = target.text;
    Label v = convert(e.items[2]);
    at(l).children = {v};
    return l;
  }

  Label convert_callcc(const SExpr& e) {
    if (e.items.size() != 2) fail(e, "call/cc: expected exactly one argument");
    Label l = fresh(NodeKind::Callcc, e.pos);
    Label v = convert(e.items[1]);
    at(l).children = {v};
    return l;
  }

  Label convert_let(const SExpr& e) {
    if (e.items.size() != 3) fail(e, "let: expected (let ((x e) ...) body)");
    const SExpr& binds = e.items[1];
    if (binds.kind != SExpr::Kind::List) fail(binds, "let: bindings must be a list");
    if (binds.items.empty()) fail(binds, "let: at least one binding is required");
    Label l = fresh(NodeKind::Let, e.pos);
    Label bl = fresh(NodeKind::BindList, binds.pos);
    std::unordered_set<std::string> seen;
    std::vector<Label> exprs;
    for (const SExpr& b : binds.items) {
      if (b.kind != SExpr::Kind::List || b.items.size() != 2 ||
          b.items[0].kind != SExpr::Kind::Identifier || is_keyword(b.items[0].text)) {
        fail(b, "let: each binding must be (identifier expr)");
      }
      if (!seen.insert(b.items[0].text).second) {
        fail(b, "let: duplicate binding '" + b.items[0].text + "'");
      }
      at(bl).names.push_back(b.items[0].text);
      exprs.push_back(convert(b.items[1]));
    }
    at(bl).children = exprs;
    Label body = convert(e.items[2]);
    at(l).children = {bl, body};
    return l;
  }

  Label convert_quote(const SExpr& e) {
    if (!opts_.allow_quote) fail(e, "quote: quoted data are rejected (use --allow-quote)");
    if (e.items.size() != 2) fail(e, "quote: expected exactly one datum");
    Label l = fresh(NodeKind::Quote, e.pos);
    Label d = fresh(NodeKind::Datum, e.items[1].pos);
    at(l).children = {d};
    return l;
  }

  Label convert_prim(const SExpr& e) {
    if (e.items.size() != 3) {
      fail(e, "primitive '" + e.items[0].text + "': binary primitives take exactly 2 arguments, got " +
                  std::to_string(e.items.size() - 1));
    }
    Label l = fresh(NodeKind::PrimCall, e.pos);
    Label op = fresh(NodeKind::PrimOp, e.items[0].pos);
    at(op).name = e.items[0].text;
    Label args = fresh(NodeKind::ArgList, e.items[1].pos);
    Label a0 = convert(e.items[1]);
    Label a1 = convert(e.items[2]);
    at(args).children = {a0, a1};
    at(l).children = {op, args};
    return l;
  }

  Label convert_call(const SExpr& e) {
    if (e.items.size() < 2) fail(e, "call: nullary calls are not supported");
    Label l = fresh(NodeKind::Call, e.pos);
    Label fn = convert(e.items[0]);
    Label args = fresh(NodeKind::ArgList, e.items[1].pos);
    std::vector<Label> xs;
    for (std::size_t i = 1; i < e.items.size(); ++i) xs.push_back(convert(e.items[i]));
    at(args).children = xs;
    at(l).children = {fn, args};
    return l;
  }

  // Names occurring free at top level under ordinary lexical scoping. They
  // are never reused for binders.
  void collect_free(Label root) {
    std::unordered_map<std::string, int> bound;
    walk_free(root, bound);
  }

  void walk_free(Label l, std::unordered_map<std::string, int>& bound) {
    const Node n = at(l);
    auto bind = [&](const std::vector<std::string>& xs, int delta) {
      for (const auto& x : xs) bound[x] += delta;
    };
    switch (n.kind) {
      case NodeKind::Var:
        if (bound[n.source_name] == 0) used_.insert(n.source_name);
        return;
      case NodeKind::SetBang:
        if (bound[n.source_name] == 0) used_.insert(n.source_name);
        walk_free(n.children[0], bound);
        return;
      case NodeKind::Lambda: {
        const auto& params = at(n.children[0]).names;
        bind(params, 1);
        walk_free(n.children[1], bound);
        bind(params, -1);
        return;
      }
      case NodeKind::Let: {
        const Node bl = at(n.children[0]);
        for (Label c : bl.children) walk_free(c, bound);
        bind(bl.names, 1);
        walk_free(n.children[1], bound);
        bind(bl.names, -1);
        return;
      }
      default:
        for (Label c : n.children) walk_free(c, bound);
    }
  }

  std::string unique_for(const std::string& name) {
    std::string candidate = name;
    for (int k = 1; used_.contains(candidate); ++k) candidate = name + "#" + std::to_string(k);
    used_.insert(candidate);
    return candidate;
  }

  using Scope = std::unordered_map<std::string, std::vector<std::string>>;

  static std::string resolve(const Scope& scope, const std::string& name) {
    auto it = scope.find(name);
    if (it == scope.end() || it->second.empty()) return name;
    return it->second.back();
  }

  void rename(Label l, Scope& scope) {
    Node& n = at(l);
    switch (n.kind) {
      case NodeKind::Var:
        n.name = resolve(scope, n.source_name);
        return;
      case NodeKind::SetBang:
        n.name = resolve(scope, n.source_name);
        rename(n.children[0], scope);
        return;
      case NodeKind::Lambda: {
        Label pl = n.children[0], body = n.children[1];
        std::vector<std::string> originals = at(pl).names;
        std::vector<std::string> uniques;
        for (const auto& x : originals) uniques.push_back(unique_for(x));
        at(pl).names = uniques;
        for (std::size_t i = 0; i < originals.size(); ++i) scope[originals[i]].push_back(uniques[i]);
        rename(body, scope);
        for (const auto& x : originals) scope[x].pop_back();
        return;
      }
      case NodeKind::Let: {
        Label bl = n.children[0], body = n.children[1];
        for (Label c : std::vector<Label>(at(bl).children)) rename(c, scope);
        std::vector<std::string> originals = at(bl).names;
        std::vector<std::string> uniques;
        for (const auto& x : originals) uniques.push_back(unique_for(x));
        at(bl).names = uniques;
        for (std::size_t i = 0; i < originals.size(); ++i) scope[originals[i]].push_back(uniques[i]);
        rename(body, scope);
        for (const auto& x : originals) scope[x].pop_back();
        return;
      }
      default:
        for (Label c : std::vector<Label>(n.children)) rename(c, scope);
    }
  }

  const FrontendOptions& opts_;
  LabeledProgram prog_;
  std::unordered_set<std::string> used_;
};

LabeledProgram label_program(const std::vector<SExpr>& forms, const FrontendOptions& opts) {
  if (forms.size() != 1) {
    SourcePos pos = forms.size() > 1 ? forms[1].pos : SourcePos{};
    throw SourceError(pos, "expected exactly one top-level expression, found " +
                               std::to_string(forms.size()));
  }
  return ProgramBuilder(opts).build(forms[0]);
}

LabeledProgram parse_program(std::string_view source, const FrontendOptions& opts) {
  return label_program(read_sexprs(source), opts);
}

// --- Input relations ------------------------------------------------------

const std::vector<RelationSchema>& edb_schema() {
  using K = ColumnKind;
  static const std::vector<RelationSchema> schema = {
      {"top_exp", {"Id"}, {K::Label}},
      {"lambda", {"Id", "Vars", "BodyId"}, {K::Label, K::Label, K::Label}},
      {"lambda_arg_list", {"Id", "Pos", "X"}, {K::Label, K::Integer, K::Name}},
      {"prim", {"Id", "OpName"}, {K::Label, K::Name}},
      {"prim_call", {"Id", "PrimId", "Args"}, {K::Label, K::Label, K::Label}},
      {"call", {"Id", "FuncId", "Args"}, {K::Label, K::Label, K::Label}},
      {"call_arg_list", {"Id", "Pos", "X"}, {K::Label, K::Integer, K::Label}},
      {"var", {"Id", "MetaName"}, {K::Label, K::Name}},
      {"num", {"Id", "v"}, {K::Label, K::Integer}},
      {"bool", {"Id", "v"}, {K::Label, K::Name}},
      {"quotation", {"Id", "Expr"}, {K::Label, K::Label}},
      {"if", {"Id", "GuardId", "TrueId", "False"}, {K::Label, K::Label, K::Label, K::Label}},
      {"setb", {"Id", "Var", "ExprId"}, {K::Label, K::Name, K::Label}},
      {"callcc", {"Id", "ExprId"}, {K::Label, K::Label}},
      {"let", {"Id", "BindId", "BodyId"}, {K::Label, K::Label, K::Label}},
      {"let_list", {"Id", "X", "EId"}, {K::Label, K::Name, K::Label}},
  };
  return schema;
}

const std::vector<FactTuple>& Edb::operator[](std::string_view rel) const {
  static const std::vector<FactTuple> kEmpty;
  auto it = relations.find(rel);
  return it == relations.end() ? kEmpty : it->second;
}

std::size_t Edb::total() const {
  std::size_t n = 0;
  for (const auto& [_, tuples] : relations) n += tuples.size();
  return n;
}

Edb extract_facts(const LabeledProgram& p) {
  Edb edb;
  for (const auto& s : edb_schema()) edb.relations[s.name];
  auto add = [&](const char* rel, FactTuple t) { edb.relations[rel].push_back(std::move(t)); };
  auto lab = [](Label l) { return FactValue(label_name(l)); };
  auto pos = [](std::size_t i) { return FactValue(static_cast<std::int64_t>(i)); };

  add("top_exp", {lab(p.root())});
  for (std::uint32_t i = 0; i < p.size(); ++i) {
    const Label l{i};
    const Node& n = p.node(l);
    const auto& c = n.children;
    switch (n.kind) {
      case NodeKind::Var:
        add("var", {lab(l), n.name});
        break;
      case NodeKind::Num:
        add("num", {lab(l), n.number});
        break;
      case NodeKind::Bool:
        add("bool", {lab(l), std::string(n.boolean ? "#t" : "#f")});
        break;
      case NodeKind::Lambda:
        add("lambda", {lab(l), lab(c[0]), lab(c[1])});
        break;
      case NodeKind::ParamList:
        for (std::size_t k = 0; k < n.names.size(); ++k) {
          add("lambda_arg_list", {lab(l), pos(k), n.names[k]});
        }
        break;
      case NodeKind::If:
        add("if", {lab(l), lab(c[0]), lab(c[1]), lab(c[2])});
        break;
      case NodeKind::SetBang:
        add("setb", {lab(l), n.name, lab(c[0])});
        break;
      case NodeKind::Callcc:
        add("callcc", {lab(l), lab(c[0])});
        break;
      case NodeKind::Let:
        add("let", {lab(l), lab(c[0]), lab(c[1])});
        break;
      case NodeKind::BindList:
        for (std::size_t k = 0; k < n.names.size(); ++k) {
          add("let_list", {lab(l), n.names[k], lab(c[k])});
        }
        break;
      case NodeKind::PrimCall:
        add("prim_call", {lab(l), lab(c[0]), lab(c[1])});
        break;
      case NodeKind::PrimOp:
        add("prim", {lab(l), n.name});
        break;
      case NodeKind::Call:
        add("call", {lab(l), lab(c[0]), lab(c[1])});
        break;
      case NodeKind::ArgList:
        for (std::size_t k = 0; k < c.size(); ++k) add("call_arg_list", {lab(l), pos(k), lab(c[k])});
        break;
      case NodeKind::Quote:
        add("quotation", {lab(l), lab(c[0])});
        break;
      case NodeKind::Datum:
        break;
    }
  }
  return edb;
}

void write_facts(const Edb& edb, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& s : edb_schema()) {
    std::ofstream out(dir / (s.name + ".facts"), std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / (s.name + ".facts")).string());
    for (const FactTuple& t : edb[s.name]) {
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (i) out << '\t';
        std::visit([&](const auto& v) { out << v; }, t[i]);
      }
      out << '\n';
    }
  }
}

Edb read_facts(const std::filesystem::path& dir) {
  Edb edb;
  for (const auto& s : edb_schema()) {
    auto& tuples = edb.relations[s.name];
    std::ifstream in(dir / (s.name + ".facts"), std::ios::binary);
    if (!in) continue;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      FactTuple t;
      std::stringstream cols(line);
      std::string col;
      while (std::getline(cols, col, '\t')) {
        if (s.kinds[t.size() < s.kinds.size() ? t.size() : 0] == ColumnKind::Integer) {
          t.emplace_back(static_cast<std::int64_t>(std::stoll(col)));
        } else {
          t.emplace_back(col);
        }
      }
      if (t.size() != s.arity()) {
        throw std::runtime_error(s.name + ".facts:" + std::to_string(lineno) + ": expected " +
                                 std::to_string(s.arity()) + " columns");
      }
      tuples.push_back(std::move(t));
    }
  }
  return edb;
}

std::vector<std::set<std::string>> all_free_vars(const LabeledProgram& p) {
  std::vector<std::set<std::string>> fv(p.size());
  // Children carry larger labels than their parents, so a reverse sweep
  // sees every child first.
  for (std::size_t i = p.size(); i-- > 0;) {
    const Node& n = p.node(Label{static_cast<std::uint32_t>(i)});
    auto& out = fv[i];
    auto merge = [&](Label c) { out.insert(fv[c.index].begin(), fv[c.index].end()); };
    switch (n.kind) {
      case NodeKind::Var:
        out.insert(n.name);
        break;
      case NodeKind::Lambda: {
        // freevar(x, e) :- lambda(e, vars, body), freevar(x, body),
        //                  lambda_arg_list(vars, _, v), x != v.
        const auto& params = p.node(n.children[0]).names;
        for (const auto& x : fv[n.children[1].index]) {
          for (const auto& v : params) {
            if (x != v) {
              out.insert(x);
              break;
            }
          }
        }
        break;
      }
      case NodeKind::BindList:
        for (std::size_t k = 0; k < n.children.size(); ++k) {
          for (const auto& x : fv[n.children[k].index]) {
            if (x != n.names[k]) out.insert(x);
          }
        }
        break;
      case NodeKind::PrimCall:
        merge(n.children[1]);
        break;
      case NodeKind::Call: case NodeKind::If: case NodeKind::SetBang: case NodeKind::Callcc:
      case NodeKind::Let: case NodeKind::ArgList:
        for (Label c : n.children) merge(c);
        break;
      case NodeKind::Num: case NodeKind::Bool: case NodeKind::ParamList: case NodeKind::PrimOp:
      case NodeKind::Quote: case NodeKind::Datum:
        break;
    }
  }
  return fv;
}

std::set<std::string> syntactic_free_vars(const LabeledProgram& p, Label e) {
  return all_free_vars(p).at(e.index);
}

}  // namespace schemeflow
