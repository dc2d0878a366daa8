#pragma once

#include <string>

namespace schemeflow::termgen {

struct GenSpec {
  int n_bindings = 1;  // calls to f, with constants 0..N-1
  int n_plus = 0;      // nested + applications in the body
  int padding = 0;     // identity applications before the conflation point

  /// Throws std::invalid_argument.
  void validate() const;
};

/// The classic term that is exponential for k-CFA.
std::string gen_vanhorn();

/// Worst-case m-CFA term:
///
///   ((lambda (f) (let ((m<N-1> (f <N-1>)) ... (m0 (f 0))) m0))
///    (lambda (z) PAD_p[(if BODY_K z z)]))
///
/// BODY_K is K right-nested (+ z ...) ending in z. PAD_0[B] = B and
/// PAD_j[B] = ((lambda (z) PAD_{j-1}[B]) z): each layer rebinds z through
/// one more call frame. Bindings stay distinct iff m > p.
std::string gen_mcfa_worst(const GenSpec& spec);

}  // namespace schemeflow::termgen
