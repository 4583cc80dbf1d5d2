#pragma once

namespace lazyla {

// Rule families, matched greedily in priority order (ties: longest pattern):
//
//   priority  family     pattern                                      result
//   40        reduction  sum/accu/mean/var over an element-wise tree  1 ReduceKernel (var: 2)
//   30        gemm       [a *] op(X) * op(Y), op in {id, trans^n}      1 Gemm or Gemv, flags set
//   20        axpy       y += a*x, y -= a*x, y = a*x + y, y = y - a*x  1 Axpy
//   10        elem       element-wise tree                            1 ElemKernel
//    0        fallback   any node                                     1 call per node
//
// A disabled family falls through to the next one; results never change,
// only launch counts and temporaries do.
struct RuleSet {
  bool reduction = true;
  bool gemm = true;
  bool axpy = true;
  bool elem = true;

  static RuleSet none() { return {false, false, false, false}; }
  friend bool operator==(const RuleSet&, const RuleSet&) = default;
};

}  // namespace lazyla
