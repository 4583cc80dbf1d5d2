#include "lazyla/lowering.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "lazyla/error.hpp"

namespace lazyla {

namespace {

// One input slot is kept free for the destination in accumulate modes, two
// stack slots for the destination load and the final combine.
constexpr std::size_t kMaxInputs = 25;
constexpr std::size_t kMaxStack = kMaxProgramDepth - 2;

bool is_elementwise(const ExprNode& n) {
  return n.kind() == NodeKind::ElemUnaryOp || n.kind() == NodeKind::ElemBinaryOp;
}

bool overlaps(const Region& a, const Region& b) {
  if (!a.same_storage(b) || a.count() == 0 || b.count() == 0) return false;
  return a.offset < b.extent() && b.offset < a.extent();
}

// Terminal, or a chain of transposes over one: readable in place with
// swapped strides.
std::optional<Region> free_region(const ExprNode& n) {
  if (n.is_terminal()) return n.terminal().region;
  if (n.kind() == NodeKind::UnaryOp && n.op() == OpTag::Transpose) {
    if (auto r = free_region(*n.operand(0))) return r->transposed();
  }
  return std::nullopt;
}

ElemOp elem_op(OpTag op) {
  switch (op) {
    case OpTag::ScalarTimes: return ElemOp::MulScalar;
    case OpTag::ScalarPlus: return ElemOp::AddScalar;
    case OpTag::Negate: return ElemOp::Neg;
    case OpTag::ElemPlus: return ElemOp::Add;
    case OpTag::ElemMinus: return ElemOp::Sub;
    case OpTag::ElemTimes: return ElemOp::Mul;
    default: break;
  }
  throw ContractError(std::string(to_string(op)) + " is not element-wise");
}

struct Fused {
  std::vector<ElemInstr> code;
  std::vector<Region> inputs;

  std::uint8_t input(const Region& r) {
    const auto it = std::find(inputs.begin(), inputs.end(), r);
    if (it != inputs.end()) return static_cast<std::uint8_t>(it - inputs.begin());
    inputs.push_back(r);
    return static_cast<std::uint8_t>(inputs.size() - 1);
  }
};

struct FusionSize {
  std::size_t leaves = 1;
  std::size_t stack = 1;
};

class Lowerer {
 public:
  Lowerer(ElemType elem, const RuleSet& rules) : rules_(rules) { plan_.elem = elem; }

  CallPlan take() { return std::move(plan_); }

  void assign(const ExprNode& n, const Region& out, AssignMode mode) {
    if (n.kind() == NodeKind::Reduction) return reduction(n, out, mode);
    if (rules_.gemm && try_gemm(n, out, mode)) return;
    if (rules_.axpy && try_axpy(n, out, mode)) return;
    if (mode != AssignMode::Replace) {
      if (rules_.elem) {
        Fused f;
        f.code.push_back({ElemOp::Load, f.input(out), 0.0});
        fuse(n, f);
        f.code.push_back({mode == AssignMode::PlusEq ? ElemOp::Add : ElemOp::Sub, 0, 0.0});
        return emit_fused(f, out);
      }
      const Region v = materialize(n);
      return emit_elem(ElemProgram::parse(mode == AssignMode::PlusEq ? "a+b" : "a-b"), {out, v}, out);
    }
    if (rules_.elem && is_elementwise(n)) {
      Fused f;
      fuse(n, f);
      return emit_fused(f, out);
    }
    fallback(n, out);
  }

 private:
  void emit_fused(Fused& f, const Region& out) {
    ElemProgram program(std::move(f.code), f.inputs.size());
    emit_elem(std::move(program), std::move(f.inputs), out);
  }

  Region temp(std::size_t rows, std::size_t cols) {
    const auto slot = static_cast<std::int32_t>(plan_.temps.size());
    plan_.temps.push_back({rows, cols});
    return Region::temp(slot, rows, cols);
  }

  Region materialize(const ExprNode& n) {
    if (n.is_terminal()) return n.terminal().region;
    const Region t = temp(n.dims().rows, n.dims().cols);
    assign(n, t, AssignMode::Replace);
    return t;
  }

  // One call per node, children first.
  void fallback(const ExprNode& n, const Region& out) {
    switch (n.kind()) {
      case NodeKind::Terminal:
        emit_copy(n.terminal().region, out);
        return;
      case NodeKind::UnaryOp:
        emit_copy(materialize(*n.operand(0)).transposed(), out);
        return;
      case NodeKind::ElemUnaryOp: {
        const Region a = materialize(*n.operand(0));
        std::vector<ElemInstr> code{{ElemOp::Load, 0, 0.0}, {elem_op(n.op()), 0, n.scalar()}};
        emit_elem(ElemProgram(std::move(code), 1), {a}, out);
        return;
      }
      case NodeKind::ElemBinaryOp: {
        const Region a = materialize(*n.operand(0));
        const Region b = materialize(*n.operand(1));
        std::vector<ElemInstr> code{{ElemOp::Load, 0, 0.0}, {ElemOp::Load, 1, 0.0}, {elem_op(n.op()), 0, 0.0}};
        emit_elem(ElemProgram(std::move(code), 2), {a, b}, out);
        return;
      }
      case NodeKind::BinaryOp: {
        const Region a = materialize(*n.operand(0));
        const Region b = materialize(*n.operand(1));
        emit_product(false, false, 1.0, a, b, out, AssignMode::Replace, false);
        return;
      }
      case NodeKind::Reduction:
        reduction(n, out, AssignMode::Replace);
        return;
    }
  }

  // ---- element-wise fusion ----

  FusionSize size(const ExprNode& n, std::set<const ExprNode*>& cut) {
    if (!is_elementwise(n) || cut.count(&n)) return {};
    if (n.arity() == 1) return size(*n.operand(0), cut);
    for (;;) {
      const FusionSize l = size(*n.operand(0), cut);
      const FusionSize r = size(*n.operand(1), cut);
      const FusionSize s{l.leaves + r.leaves, std::max(l.stack, r.stack + 1)};
      if (s.leaves <= kMaxInputs && s.stack <= kMaxStack) return s;
      // Materialize the larger side separately, then retry.
      const ExprNode* big = l.leaves + l.stack >= r.leaves + r.stack ? n.operand(0).get() : n.operand(1).get();
      if (cut.count(big)) big = big == n.operand(0).get() ? n.operand(1).get() : n.operand(0).get();
      cut.insert(big);
    }
  }

  void fuse(const ExprNode& root, Fused& f) {
    std::set<const ExprNode*> cut;
    size(root, cut);
    fuse_node(root, f, cut);
  }

  void fuse_node(const ExprNode& n, Fused& f, const std::set<const ExprNode*>& cut) {
    if (is_elementwise(n) && !cut.count(&n)) {
      fuse_node(*n.operand(0), f, cut);
      if (n.arity() == 2) fuse_node(*n.operand(1), f, cut);
      f.code.push_back({elem_op(n.op()), 0, n.arity() == 1 ? n.scalar() : 0.0});
      return;
    }
    const std::optional<Region> r = free_region(n);
    f.code.push_back({ElemOp::Load, f.input(r ? *r : materialize(n)), 0.0});
  }

  // ---- gemm / gemv ----

  static const ExprNode& strip(const ExprNode& n, bool& trans) {
    const ExprNode* p = &n;
    while (p->kind() == NodeKind::UnaryOp && p->op() == OpTag::Transpose) {
      trans = !trans;
      p = p->operand(0).get();
    }
    return *p;
  }

  bool try_gemm(const ExprNode& n, const Region& out, AssignMode mode) {
    double alpha = 1.0;
    const ExprNode* mm = &n;
    if (n.kind() == NodeKind::ElemUnaryOp && n.op() == OpTag::ScalarTimes) {
      alpha = n.scalar();
      mm = n.operand(0).get();
    }
    if (mm->kind() != NodeKind::BinaryOp || mm->op() != OpTag::MatMul) return false;
    bool ta = false;
    bool tb = false;
    const ExprNode& a = strip(*mm->operand(0), ta);
    const ExprNode& b = strip(*mm->operand(1), tb);
    const Region ra = materialize(a);
    const Region rb = materialize(b);
    emit_product(ta, tb, alpha, ra, rb, out, mode, true);
    return true;
  }

  // out (op)= alpha * op(a) * op(b). Writes through a temporary when out
  // overlaps an operand.
  void emit_product(bool ta, bool tb, double alpha, const Region& a, const Region& b, const Region& out,
                    AssignMode mode, bool allow_gemv) {
    if (mode == AssignMode::MinusEq) alpha = -alpha;
    const bool alias = overlaps(a, out) || overlaps(b, out);
    const Region target = alias ? temp(out.rows, out.cols) : out;
    const double beta = mode == AssignMode::Replace || alias ? 0.0 : 1.0;

    PlannedCall c;
    c.output = target;
    c.alpha = alpha;
    c.beta = beta;
    const std::size_t m = ta ? a.cols : a.rows;
    const std::size_t n = tb ? b.rows : b.cols;
    if (allow_gemv && n == 1) {
      c.kind = CallKind::Gemv;
      c.trans_a = ta;
      c.inputs = {a, b};
    } else if (allow_gemv && m == 1) {
      c.kind = CallKind::Gemv;
      c.trans_a = !tb;
      c.inputs = {b, a};
    } else {
      c.kind = CallKind::Gemm;
      c.trans_a = ta;
      c.trans_b = tb;
      c.inputs = {a, b};
    }
    plan_.steps.push_back(std::move(c));

    if (!alias) return;
    if (mode == AssignMode::Replace) {
      emit_copy(target, out);
    } else {
      emit_elem(ElemProgram::parse("a+b"), {out, target}, out);
    }
  }

  // ---- axpy ----

  static std::optional<std::pair<double, Region>> scaled(const ExprNode& n) {
    if (n.kind() == NodeKind::ElemUnaryOp && n.op() == OpTag::ScalarTimes) {
      if (auto r = free_region(*n.operand(0))) return std::make_pair(n.scalar(), *r);
      return std::nullopt;
    }
    if (auto r = free_region(n)) return std::make_pair(1.0, *r);
    return std::nullopt;
  }

  static bool is_dest(const ExprNode& n, const Region& out) {
    const auto r = free_region(n);
    return r && r->same_mapping(out);
  }

  bool try_axpy(const ExprNode& n, const Region& out, AssignMode mode) {
    std::optional<std::pair<double, Region>> x;
    double sign = 1.0;
    if (mode != AssignMode::Replace) {
      x = scaled(n);
      if (mode == AssignMode::MinusEq) sign = -1.0;
    } else if (n.kind() == NodeKind::ElemBinaryOp && n.op() == OpTag::ElemPlus) {
      if (is_dest(*n.operand(1), out)) x = scaled(*n.operand(0));
      if (!x && is_dest(*n.operand(0), out)) x = scaled(*n.operand(1));
    } else if (n.kind() == NodeKind::ElemBinaryOp && n.op() == OpTag::ElemMinus) {
      if (is_dest(*n.operand(0), out)) {
        x = scaled(*n.operand(1));
        sign = -1.0;
      }
    }
    if (!x) return false;
    if (overlaps(x->second, out) && !x->second.same_mapping(out)) return false;
    PlannedCall c;
    c.kind = CallKind::Axpy;
    c.alpha = sign * x->first;
    c.inputs = {x->second};
    c.output = out;
    plan_.steps.push_back(std::move(c));
    return true;
  }

  // ---- reductions ----

  void reduction(const ExprNode& n, const Region& out, AssignMode mode) {
    const ExprNode& operand = *n.operand(0);
    const std::size_t count = operand.dims().n_elem();
    ElemProgram map = ElemProgram::identity();
    std::vector<Region> inputs;
    if (rules_.reduction) {
      Fused f;
      fuse(operand, f);
      map = ElemProgram(std::move(f.code), f.inputs.size());
      inputs = std::move(f.inputs);
    } else {
      inputs = {materialize(operand)};
    }

    ReduceEpilogue ep;
    ep.scale = mode == AssignMode::MinusEq ? -1.0 : 1.0;
    ep.beta = mode == AssignMode::Replace ? 0.0 : 1.0;

    PlannedCall c;
    c.kind = CallKind::ReduceKernel;
    c.program = map;
    c.inputs = inputs;
    c.output = out;
    switch (n.op()) {
      case OpTag::Sum:
      case OpTag::Accu:
        c.reduce = ReduceKind::Sum;
        c.epilogue = ep;
        break;
      case OpTag::Mean:
        c.reduce = ReduceKind::Sum;
        ep.divisor = static_cast<double>(count);
        c.epilogue = ep;
        break;
      case OpTag::Variance: {
        PlannedCall m = c;
        const Region center = temp(1, 1);
        m.output = center;
        m.epilogue = {static_cast<double>(count), 1.0, 0.0};
        plan_.steps.push_back(std::move(m));
        c.reduce = ReduceKind::SumSq;
        c.center = center;
        ep.divisor = static_cast<double>(std::max<std::size_t>(count, 2) - 1);
        c.epilogue = ep;
        break;
      }
      default:
        throw ContractError(std::string(to_string(n.op())) + " is not a reduction");
    }
    plan_.steps.push_back(std::move(c));
  }

  // ---- emission with alias handling ----

  void emit_copy(const Region& src, const Region& dst) {
    if (src.same_mapping(dst)) return;
    PlannedCall c;
    c.kind = CallKind::Copy;
    if (overlaps(src, dst)) {
      const Region t = temp(src.rows, src.cols);
      c.inputs = {src};
      c.output = t;
      plan_.steps.push_back(c);
      c.inputs = {t};
    } else {
      c.inputs = {src};
    }
    c.output = dst;
    plan_.steps.push_back(std::move(c));
  }

  void emit_elem(ElemProgram program, std::vector<Region> inputs, const Region& out) {
    for (Region& in : inputs) {
      if (overlaps(in, out) && !in.same_mapping(out)) {
        const Region t = temp(in.rows, in.cols);
        PlannedCall c;
        c.kind = CallKind::Copy;
        c.inputs = {in};
        c.output = t;
        plan_.steps.push_back(std::move(c));
        in = t;
      }
    }
    PlannedCall c;
    c.kind = CallKind::ElemKernel;
    c.program = std::move(program);
    c.inputs = std::move(inputs);
    c.output = out;
    plan_.steps.push_back(std::move(c));
  }

  RuleSet rules_;
  CallPlan plan_;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string out_label(const Region& r) {
  return r.is_temp() ? "t" + std::to_string(r.temp_slot) : "dst";
}

Region bind_temp(const Region& r, const std::vector<BufferId>& temps) {
  if (!r.is_temp()) return r;
  Region b = r;
  b.buffer = temps.at(static_cast<std::size_t>(r.temp_slot));
  b.temp_slot = -1;
  return b;
}

[[noreturn]] void rethrow_at_step(const Error& e, std::size_t step, CallKind kind) {
  const std::string prefix = std::string(to_string(e.category())) + " error: ";
  std::string what = e.what();
  if (what.rfind(prefix, 0) == 0) what = what.substr(prefix.size());
  const std::string msg = "plan step " + std::to_string(step) + " (" + to_string(kind) + "): " + what;
  switch (e.category()) {
    case ErrorCategory::Configuration: throw ConfigurationError(msg);
    case ErrorCategory::Conformability: throw ConformabilityError(msg);
    case ErrorCategory::Bounds: throw BoundsError(msg);
    case ErrorCategory::Resource:
      throw ResourceError(msg, dynamic_cast<const ResourceError&>(e).requested_bytes());
    case ErrorCategory::Singularity:
      throw SingularityError(msg, dynamic_cast<const SingularityError&>(e).pivot());
    case ErrorCategory::NotPositiveDefinite:
      throw NotPositiveDefiniteError(msg, dynamic_cast<const NotPositiveDefiniteError&>(e).pivot());
    case ErrorCategory::Parse: throw ParseError(msg, dynamic_cast<const ParseError&>(e).line());
    case ErrorCategory::Contract: break;
  }
  throw ContractError(msg);
}

}  // namespace

CallPlan lower(const ExprNode& expr, const AssignTarget& dest, AssignMode mode, const RuleSet& rules) {
  if (expr.elem() != dest.elem) {
    throw ContractError(std::string("cannot assign a ") + to_string(expr.elem()) + " expression to a " +
                        to_string(dest.elem) + " destination");
  }
  if (expr.context() && dest.ctx && expr.context() != dest.ctx) {
    throw ContractError("expression and destination belong to different backend contexts");
  }
  const Dims& d = expr.dims();
  if (d.rows != dest.region.rows || d.cols != dest.region.cols) {
    throw ConformabilityError("cannot assign " + to_string(d) + " expression " + render(expr) +
                              " to a destination of dims " + to_string(dest.dims));
  }
  Lowerer l(dest.elem, rules);
  l.assign(expr, dest.region, mode);
  return l.take();
}

void execute(const CallPlan& plan, BackendContext& ctx) {
  if (plan.steps.empty()) return;
  std::vector<BufferId> temps;
  temps.reserve(plan.temps.size());
  const auto release_all = [&] {
    for (BufferId id : temps) ctx.release(id);
  };
  try {
    for (const TempSpec& t : plan.temps) temps.push_back(ctx.allocate(plan.elem, t.rows * t.cols));
    for (std::size_t i = 0; i < plan.steps.size(); ++i) {
      const PlannedCall& s = plan.steps[i];
      std::vector<Region> in;
      in.reserve(s.inputs.size());
      for (const Region& r : s.inputs) in.push_back(bind_temp(r, temps));
      const Region out = bind_temp(s.output, temps);
      try {
        switch (s.kind) {
          case CallKind::Gemm: ctx.gemm(s.trans_a, s.trans_b, s.alpha, in[0], in[1], s.beta, out); break;
          case CallKind::Gemv: ctx.gemv(s.trans_a, s.alpha, in[0], in[1], s.beta, out); break;
          case CallKind::Axpy: ctx.axpy(s.alpha, in[0], out); break;
          case CallKind::ElemKernel: ctx.elem(s.program, in, out); break;
          case CallKind::ReduceKernel: {
            std::optional<Region> center;
            if (s.center) center = bind_temp(*s.center, temps);
            ctx.reduce(s.reduce, s.program, in, center, s.epilogue, out);
            break;
          }
          case CallKind::Fill: ctx.fill(s.fill, out, s.fill_value); break;
          case CallKind::Copy: ctx.copy(in[0], out); break;
        }
      } catch (const Error& e) {
        rethrow_at_step(e, i, s.kind);
      }
    }
  } catch (...) {
    release_all();
    throw;
  }
  release_all();
}

PlanCost plan_cost(const CallPlan& plan) {
  PlanCost cost;
  cost.launches = plan.steps.size();
  for (const TempSpec& t : plan.temps) cost.temp_bytes += t.rows * t.cols * byte_size(plan.elem);
  return cost;
}

std::string dump(const CallPlan& plan) {
  std::string out;
  for (const PlannedCall& s : plan.steps) {
    std::string line = to_string(s.kind);
    switch (s.kind) {
      case CallKind::Gemm: {
        const Region& a = s.inputs[0];
        const Region& b = s.inputs[1];
        line += " tA=" + std::to_string(s.trans_a) + " tB=" + std::to_string(s.trans_b);
        line += " m=" + std::to_string(s.trans_a ? a.cols : a.rows);
        line += " n=" + std::to_string(s.trans_b ? b.rows : b.cols);
        line += " k=" + std::to_string(s.trans_a ? a.rows : a.cols);
        line += " alpha=" + num(s.alpha) + " beta=" + num(s.beta);
        break;
      }
      case CallKind::Gemv: {
        const Region& a = s.inputs[0];
        line += " tA=" + std::to_string(s.trans_a);
        line += " m=" + std::to_string(s.trans_a ? a.cols : a.rows);
        line += " n=" + std::to_string(s.trans_a ? a.rows : a.cols);
        line += " alpha=" + num(s.alpha) + " beta=" + num(s.beta);
        break;
      }
      case CallKind::Axpy:
        line += " n=" + std::to_string(s.output.count()) + " alpha=" + num(s.alpha);
        break;
      case CallKind::ElemKernel:
        line += " prog=" + s.program.render() + " inputs=" + std::to_string(s.inputs.size()) +
                " n=" + std::to_string(s.output.count());
        break;
      case CallKind::ReduceKernel:
        line += std::string(" kind=") + to_string(s.reduce) + " prog=" + s.program.render() +
                " inputs=" + std::to_string(s.inputs.size()) + " n=" + std::to_string(s.inputs[0].count()) +
                " divisor=" + num(s.epilogue.divisor) + " scale=" + num(s.epilogue.scale) +
                " beta=" + num(s.epilogue.beta);
        if (s.center) line += " center=" + out_label(*s.center);
        break;
      case CallKind::Fill:
        line += std::string(" kind=") + to_string(s.fill) + " n=" + std::to_string(s.output.count());
        break;
      case CallKind::Copy:
        line += " m=" + std::to_string(s.output.rows) + " n=" + std::to_string(s.output.cols);
        break;
    }
    line += " out=" + out_label(s.output);
    out += line + "\n";
  }
  return out;
}

}  // namespace lazyla
