#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "lazyla/backend.hpp"
#include "lazyla/context.hpp"
#include "lazyla/expr.hpp"
#include "lazyla/program.hpp"
#include "lazyla/rules.hpp"
#include "lazyla/types.hpp"

namespace lazyla {

enum class AssignMode : std::uint8_t { Replace, PlusEq, MinusEq };

// One backend call. Operand roles by kind:
//   Gemm         inputs = {A, B}, output = C
//   Gemv         inputs = {A, x}, output = y
//   Axpy         inputs = {x},    output = y
//   ElemKernel   inputs = program inputs
//   ReduceKernel inputs = map inputs, output = one element, center optional
//   Copy         inputs = {src}
//   Fill         no inputs
struct PlannedCall {
  CallKind kind = CallKind::Copy;
  std::vector<Region> inputs;
  Region output;
  bool trans_a = false;
  bool trans_b = false;
  double alpha = 1.0;
  double beta = 0.0;
  ElemProgram program;
  ReduceKind reduce = ReduceKind::Sum;
  std::optional<Region> center;
  ReduceEpilogue epilogue;
  FillKind fill = FillKind::Zeros;
  double fill_value = 0.0;
};

struct TempSpec {
  std::size_t rows = 0;
  std::size_t cols = 0;
};

struct CallPlan {
  ElemType elem = ElemType::F64;
  std::vector<PlannedCall> steps;
  std::vector<TempSpec> temps;
};

struct PlanCost {
  std::size_t launches = 0;
  std::size_t temp_bytes = 0;

  friend bool operator==(const PlanCost&, const PlanCost&) = default;
};

struct AssignTarget {
  Region region;
  Dims dims;
  ElemType elem = ElemType::F64;
  const BackendContext* ctx = nullptr;
};

// Pure: inspects the tree and returns the call sequence without touching the
// backend. Throws ConformabilityError when the expression shape differs from
// the destination shape.
CallPlan lower(const ExprNode& expr, const AssignTarget& dest, AssignMode mode,
               const RuleSet& rules = {});

// Allocates the plan's temporaries, runs every step in order and frees the
// temporaries. A failing step is reported with its index.
void execute(const CallPlan& plan, BackendContext& ctx);

PlanCost plan_cost(const CallPlan& plan);

// One line per step, e.g. "GEMM tA=1 tB=0 m=3 n=3 k=2 alpha=1 beta=0 out=dst".
std::string dump(const CallPlan& plan);

}  // namespace lazyla
