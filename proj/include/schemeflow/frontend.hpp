#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "schemeflow/model.hpp"
#include "schemeflow/sexpr.hpp"

namespace schemeflow {

enum class NodeKind {
  Var, Num, Bool, Lambda, If, SetBang, Callcc, Let, PrimCall, Call,
  // Auxiliary nodes: parameter, argument and binding lists, operator, quote.
  ParamList, ArgList, BindList, PrimOp, Quote, Datum,
};

std::string_view to_string(NodeKind k);

/// One labeled node. `children` layout per kind:
///   Lambda [params, body]   If [guard, then, else]   SetBang [expr]
///   Callcc [expr]           Let [binds, body]        PrimCall [op, args]
///   Call [func, args]       ArgList/BindList [elements...]   Quote [datum]
struct Node {
  NodeKind kind = NodeKind::Num;
  SourcePos pos;
  std::string name;         // Var/SetBang: unique variable; PrimOp: operator
  std::string source_name;  // spelling before alpha-renaming
  std::int64_t number = 0;
  bool boolean = false;
  std::vector<Label> children;
  std::vector<std::string> names;  // ParamList: parameters; BindList: bound names
};

class LabeledProgram {
 public:
  Label root() const { return Label{0}; }
  const Node& node(Label l) const { return nodes_.at(l.index); }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }

  /// Argument expression labels of a Call/PrimCall node, by position.
  std::vector<Label> call_args(Label call) const;
  /// Body label of a lambda.
  Label lambda_body(Label lam) const { return node(lam).children.at(1); }
  const std::vector<std::string>& lambda_params(Label lam) const {
    return node(node(lam).children.at(0)).names;
  }

 private:
  friend class ProgramBuilder;
  std::vector<Node> nodes_;
};

struct FrontendOptions {
  std::set<std::string, std::less<>> primitives = {"+", "-", "*", "=", "<", "cons",
                                                   "car", "cdr", "and", "or", "not"};
  bool allow_quote = false;
};

/// Labels the single top-level form in pre-order and validates the subset.
/// Binders are alpha-renamed (`x`, `x#1`, ...) so every binder owns a
/// distinct name.
LabeledProgram label_program(const std::vector<SExpr>& forms, const FrontendOptions& opts = {});

/// read_sexprs + label_program.
LabeledProgram parse_program(std::string_view source, const FrontendOptions& opts = {});

// --- Input relations ------------------------------------------------------

enum class ColumnKind { Label, Name, Integer, Term };

struct RelationSchema {
  std::string name;
  std::vector<std::string> columns;
  std::vector<ColumnKind> kinds;
  std::size_t arity() const { return columns.size(); }
};

/// The input relations, in declaration order.
const std::vector<RelationSchema>& edb_schema();

using FactValue = std::variant<std::string, std::int64_t>;
using FactTuple = std::vector<FactValue>;

struct Edb {
  std::map<std::string, std::vector<FactTuple>, std::less<>> relations;

  const std::vector<FactTuple>& operator[](std::string_view rel) const;
  std::size_t total() const;
  bool operator==(const Edb&) const = default;
};

Edb extract_facts(const LabeledProgram& p);

/// One `<relation>.facts` TSV per input relation (all of them, even empty).
void write_facts(const Edb& edb, const std::filesystem::path& dir);
Edb read_facts(const std::filesystem::path& dir);

/// Free variables following the input-relation freevar rules literally
/// (see README for the two places where they differ from textbook scoping).
std::set<std::string> syntactic_free_vars(const LabeledProgram& p, Label e);
std::vector<std::set<std::string>> all_free_vars(const LabeledProgram& p);

}  // namespace schemeflow
