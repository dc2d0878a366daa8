#include "schemeflow/termgen.hpp"

#include <stdexcept>

namespace schemeflow::termgen {

void GenSpec::validate() const {
  if (n_bindings < 1) throw std::invalid_argument("n_bindings must be >= 1");
  if (n_plus < 0) throw std::invalid_argument("n_plus must be >= 0");
  if (padding < 0) throw std::invalid_argument("padding must be >= 0");
}

std::string gen_vanhorn() {
  return "((lambda (f) (let ((m (f #t)) (n (f #f))) m)) "
         "(lambda (z) ((lambda (x) x) (lambda (w) (w z z)))))";
}

namespace {

std::string body(int k) {
  std::string out;
  for (int i = 0; i < k; ++i) out += "(+ z ";
  out += "z";
  out.append(static_cast<std::size_t>(k), ')');
  return out;
}

std::string pad(int j, const std::string& inner) {
  if (j == 0) return inner;
  return "((lambda (z) " + pad(j - 1, inner) + ") z)";
}

}  // namespace

std::string gen_mcfa_worst(const GenSpec& spec) {
  spec.validate();
  std::string out = "((lambda (f)\n   (let (";
  for (int i = spec.n_bindings - 1; i >= 0; --i) {
    if (i != spec.n_bindings - 1) out += "\n         ";
    out += "(m" + std::to_string(i) + " (f " + std::to_string(i) + "))";
  }
  out += ")\n     m0))\n (lambda (z)\n   ";
  out += pad(spec.padding, "(if " + body(spec.n_plus) + " z z)");
  out += "))\n";
  return out;
}

}  // namespace schemeflow::termgen
