#include "lazyla/expr.hpp"

#include <algorithm>
#include <cstdio>

#include "lazyla/error.hpp"

namespace lazyla {

OpClass classify(OpTag op) noexcept {
  switch (op) {
    case OpTag::Transpose: return OpClass::UnaryShapeChanging;
    case OpTag::ScalarTimes:
    case OpTag::ScalarPlus:
    case OpTag::Negate: return OpClass::UnaryElementWise;
    case OpTag::ElemPlus:
    case OpTag::ElemMinus:
    case OpTag::ElemTimes: return OpClass::BinaryElementWise;
    case OpTag::MatMul: return OpClass::BinaryShapeChanging;
    case OpTag::Sum:
    case OpTag::Mean:
    case OpTag::Variance:
    case OpTag::Accu: return OpClass::Reduction;
  }
  return OpClass::Reduction;
}

const char* to_string(OpTag op) noexcept {
  switch (op) {
    case OpTag::Transpose: return "trans";
    case OpTag::ScalarTimes: return "scale";
    case OpTag::ScalarPlus: return "shift";
    case OpTag::Negate: return "neg";
    case OpTag::ElemPlus: return "plus";
    case OpTag::ElemMinus: return "minus";
    case OpTag::ElemTimes: return "schur";
    case OpTag::MatMul: return "mul";
    case OpTag::Sum: return "sum";
    case OpTag::Mean: return "mean";
    case OpTag::Variance: return "var";
    case OpTag::Accu: return "accu";
  }
  return "?";
}

namespace {

// Contexts must agree unless one side has none (an empty, unbound operand).
const BackendContext* merge_context(const ExprNode& a, const ExprNode& b) {
  if (a.context() && b.context() && a.context() != b.context()) {
    throw ContractError("operands belong to different backend contexts");
  }
  return a.context() ? a.context() : b.context();
}

void require(const ExprPtr& p, const char* what) {
  if (!p) throw ContractError(std::string(what) + ": null operand");
}

}  // namespace

ExprPtr build_terminal(TerminalRef ref) {
  auto node = std::shared_ptr<ExprNode>(new ExprNode());
  node->kind_ = NodeKind::Terminal;
  node->elem_ = ref.elem;
  node->dims_ = ref.dims();
  node->ctx_ = ref.ctx;
  node->terminal_ = std::move(ref);
  node->depth_ = 0;
  return node;
}

ExprPtr build_trans(ExprPtr a) { return build_unary(OpTag::Transpose, std::move(a)); }

ExprPtr build_unary(OpTag op, ExprPtr a, double scalar) {
  require(a, to_string(op));
  const OpClass cls = classify(op);
  if (cls != OpClass::UnaryShapeChanging && cls != OpClass::UnaryElementWise) {
    throw ContractError(std::string(to_string(op)) + " is not a unary operation");
  }
  auto node = std::shared_ptr<ExprNode>(new ExprNode());
  node->kind_ = cls == OpClass::UnaryShapeChanging ? NodeKind::UnaryOp : NodeKind::ElemUnaryOp;
  node->op_ = op;
  node->elem_ = a->elem();
  node->ctx_ = a->context();
  node->dims_ = op == OpTag::Transpose ? Dims{a->dims().cols, a->dims().rows, 1} : a->dims();
  node->scalars_[0] = op == OpTag::Transpose || op == OpTag::Negate ? 0.0 : scalar;
  node->depth_ = a->depth() + 1;
  node->operands_[0] = std::move(a);
  return node;
}

ExprPtr build_binary(OpTag op, ExprPtr a, ExprPtr b) {
  require(a, to_string(op));
  require(b, to_string(op));
  const OpClass cls = classify(op);
  if (cls != OpClass::BinaryShapeChanging && cls != OpClass::BinaryElementWise) {
    throw ContractError(std::string(to_string(op)) + " is not a binary operation");
  }
  if (a->elem() != b->elem()) {
    throw ContractError(std::string(to_string(op)) + ": mixed element types " + to_string(a->elem()) +
                        " and " + to_string(b->elem()));
  }
  const Dims& da = a->dims();
  const Dims& db = b->dims();
  Dims out;
  if (cls == OpClass::BinaryElementWise) {
    if (da.rows != db.rows || da.cols != db.cols) {
      throw ConformabilityError(std::string(to_string(op)) + ": dims " + to_string(da) + " and " +
                                to_string(db) + " differ");
    }
    out = {da.rows, da.cols, 1};
  } else {
    if (da.cols != db.rows) {
      throw ConformabilityError(std::string(to_string(op)) + ": dims " + to_string(da) + " and " +
                                to_string(db) + " are not conformant (" + std::to_string(da.cols) +
                                " columns vs " + std::to_string(db.rows) + " rows)");
    }
    out = {da.rows, db.cols, 1};
  }
  auto node = std::shared_ptr<ExprNode>(new ExprNode());
  node->kind_ = cls == OpClass::BinaryElementWise ? NodeKind::ElemBinaryOp : NodeKind::BinaryOp;
  node->op_ = op;
  node->elem_ = a->elem();
  node->ctx_ = merge_context(*a, *b);
  node->dims_ = out;
  node->depth_ = std::max(a->depth(), b->depth()) + 1;
  node->operands_[0] = std::move(a);
  node->operands_[1] = std::move(b);
  return node;
}

ExprPtr build_reduction(OpTag op, ExprPtr a) {
  require(a, to_string(op));
  if (classify(op) != OpClass::Reduction) {
    throw ContractError(std::string(to_string(op)) + " is not a reduction");
  }
  if ((op == OpTag::Mean || op == OpTag::Variance) && a->dims().empty()) {
    throw ContractError(std::string(to_string(op)) + " of an empty operand (dims " + to_string(a->dims()) +
                        ")");
  }
  auto node = std::shared_ptr<ExprNode>(new ExprNode());
  node->kind_ = NodeKind::Reduction;
  node->op_ = op;
  node->elem_ = a->elem();
  node->ctx_ = a->context();
  node->dims_ = {1, 1, 1};
  node->depth_ = a->depth() + 1;
  node->operands_[0] = std::move(a);
  return node;
}

Dims infer_dims(const ExprNode& expr) noexcept { return expr.dims(); }

std::string render(const ExprNode& expr) {
  if (expr.is_terminal()) return expr.terminal().name;
  std::string out = to_string(expr.op());
  out += "(";
  out += render(*expr.operand(0));
  if (expr.arity() == 2) {
    out += ", ";
    out += render(*expr.operand(1));
  }
  if (expr.op() == OpTag::ScalarTimes || expr.op() == OpTag::ScalarPlus) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", expr.scalar());
    out += ", ";
    out += buf;
  }
  out += ")";
  return out;
}

}  // namespace lazyla
