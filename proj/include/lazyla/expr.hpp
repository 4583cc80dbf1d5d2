#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "lazyla/types.hpp"

namespace lazyla {

class BackendContext;

enum class OpTag : std::uint8_t {
  Transpose,
  ScalarTimes,
  ScalarPlus,
  Negate,
  ElemPlus,
  ElemMinus,
  ElemTimes,
  MatMul,
  Sum,
  Mean,
  Variance,
  Accu,
};

enum class OpClass : std::uint8_t {
  UnaryShapeChanging,
  UnaryElementWise,
  BinaryShapeChanging,
  BinaryElementWise,
  Reduction,
};

OpClass classify(OpTag op) noexcept;
const char* to_string(OpTag op) noexcept;

enum class NodeKind : std::uint8_t {
  Terminal,
  UnaryOp,       // shape-changing unary (transpose)
  ElemUnaryOp,   // dimension-preserving unary
  BinaryOp,      // shape-changing binary (matrix product)
  ElemBinaryOp,  // dimension-preserving binary
  Reduction,     // full reduction to 1x1
};

// A matrix or view used as a leaf: which buffer, how it is laid out, and
// nothing else.
struct TerminalRef {
  const BackendContext* ctx = nullptr;
  ElemType elem = ElemType::F64;
  Region region;
  std::string name;

  Dims dims() const noexcept { return {region.rows, region.cols, 1}; }
};

class ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

// Immutable expression tree node. Holds operand references, at most two
// scalars and the inferred shape; never element data.
class ExprNode {
 public:
  NodeKind kind() const noexcept { return kind_; }
  // Meaningless for terminals.
  OpTag op() const noexcept { return op_; }
  ElemType elem() const noexcept { return elem_; }
  const Dims& dims() const noexcept { return dims_; }
  const BackendContext* context() const noexcept { return ctx_; }

  std::size_t arity() const noexcept { return operands_[1] ? 2 : (operands_[0] ? 1 : 0); }
  const ExprPtr& operand(std::size_t i) const noexcept { return operands_[i]; }
  double scalar(std::size_t i = 0) const noexcept { return scalars_[i]; }
  // Precondition: kind() == Terminal.
  const TerminalRef& terminal() const noexcept { return *terminal_; }
  bool is_terminal() const noexcept { return kind_ == NodeKind::Terminal; }

  std::size_t depth() const noexcept { return depth_; }

 private:
  friend ExprPtr build_terminal(TerminalRef ref);
  friend ExprPtr build_unary(OpTag op, ExprPtr a, double scalar);
  friend ExprPtr build_binary(OpTag op, ExprPtr a, ExprPtr b);
  friend ExprPtr build_reduction(OpTag op, ExprPtr a);

  ExprNode() = default;

  NodeKind kind_ = NodeKind::Terminal;
  OpTag op_ = OpTag::Transpose;
  ElemType elem_ = ElemType::F64;
  Dims dims_;
  const BackendContext* ctx_ = nullptr;
  std::array<ExprPtr, 2> operands_;
  std::array<double, 2> scalars_{};
  std::optional<TerminalRef> terminal_;
  std::size_t depth_ = 0;
};

ExprPtr build_terminal(TerminalRef ref);
ExprPtr build_trans(ExprPtr a);
// Transpose, ScalarTimes, ScalarPlus, Negate.
ExprPtr build_unary(OpTag op, ExprPtr a, double scalar = 0.0);
// ElemPlus, ElemMinus, ElemTimes, MatMul. Throws ConformabilityError on
// mismatched shapes and ContractError on mixed element types or contexts.
ExprPtr build_binary(OpTag op, ExprPtr a, ExprPtr b);
// Sum, Accu, Mean, Variance; the result is 1x1. Mean and Variance of an
// empty operand throw ContractError.
ExprPtr build_reduction(OpTag op, ExprPtr a);

Dims infer_dims(const ExprNode& expr) noexcept;

// Parenthesized debug text, e.g. "mul(trans(X), Y)".
std::string render(const ExprNode& expr);

}  // namespace lazyla
