#include "lazyla/program.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <optional>
#include <set>

#include "lazyla/error.hpp"

namespace lazyla {

ElemProgram::ElemProgram(std::vector<ElemInstr> code, std::size_t arity)
    : code_(std::move(code)), arity_(arity) {
  std::size_t depth = 0;
  for (const ElemInstr& ins : code_) {
    switch (ins.op) {
      case ElemOp::Load:
        if (ins.input >= arity_) {
          throw ContractError("program loads input " + std::to_string(ins.input) +
                              " but has arity " + std::to_string(arity_));
        }
        [[fallthrough]];
      case ElemOp::Const:
        ++depth;
        break;
      case ElemOp::Add:
      case ElemOp::Sub:
      case ElemOp::Mul:
        if (depth < 2) throw ContractError("program stack underflow");
        --depth;
        break;
      case ElemOp::Neg:
      case ElemOp::AddScalar:
      case ElemOp::MulScalar:
        if (depth < 1) throw ContractError("program stack underflow");
        break;
    }
    stack_depth_ = std::max(stack_depth_, depth);
  }
  if (depth != 1) throw ContractError("program must leave exactly one value");
  if (stack_depth_ > kMaxProgramDepth) {
    throw ContractError("program needs a stack of " + std::to_string(stack_depth_) + " (max " +
                        std::to_string(kMaxProgramDepth) + ")");
  }
}

std::size_t ElemProgram::op_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(code_.begin(), code_.end(), [](const ElemInstr& i) {
    return i.op != ElemOp::Load && i.op != ElemOp::Const;
  }));
}

std::vector<std::string> ElemProgram::required_kernels() const {
  std::set<std::string> names;
  for (const ElemInstr& ins : code_) {
    switch (ins.op) {
      case ElemOp::Add: names.insert("elem_add"); break;
      case ElemOp::Sub: names.insert("elem_sub"); break;
      case ElemOp::Mul: names.insert("elem_mul"); break;
      case ElemOp::Neg: names.insert("elem_neg"); break;
      case ElemOp::AddScalar: names.insert("elem_scalar_add"); break;
      case ElemOp::MulScalar: names.insert("elem_scalar_mul"); break;
      case ElemOp::Load:
      case ElemOp::Const: break;
    }
  }
  return {names.begin(), names.end()};
}

namespace {

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

struct Rendered {
  std::string text;
  bool compound = false;
};

std::string wrap(const Rendered& r) { return r.compound ? "(" + r.text + ")" : r.text; }

}  // namespace

std::string ElemProgram::render() const {
  std::vector<Rendered> stack;
  for (const ElemInstr& ins : code_) {
    switch (ins.op) {
      case ElemOp::Load:
        stack.push_back({std::string(1, static_cast<char>('a' + ins.input)), false});
        break;
      case ElemOp::Const:
        stack.push_back({number(ins.imm), false});
        break;
      case ElemOp::Add:
      case ElemOp::Sub:
      case ElemOp::Mul: {
        Rendered rhs = stack.back();
        stack.pop_back();
        Rendered lhs = stack.back();
        stack.pop_back();
        const char op = ins.op == ElemOp::Add ? '+' : (ins.op == ElemOp::Sub ? '-' : '*');
        stack.push_back({wrap(lhs) + op + wrap(rhs), true});
        break;
      }
      case ElemOp::Neg:
        stack.back() = {"-" + wrap(stack.back()), true};
        break;
      case ElemOp::AddScalar:
        stack.back() = {wrap(stack.back()) + "+" + number(ins.imm), true};
        break;
      case ElemOp::MulScalar:
        stack.back() = {wrap(stack.back()) + "*" + number(ins.imm), true};
        break;
    }
  }
  return stack.empty() ? std::string() : stack.back().text;
}

namespace {

// Recursive-descent parser over the infix program text.
class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  ElemProgram run() {
    Node n = expr();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    std::vector<ElemInstr> code = emit(n);
    std::size_t arity = 0;
    for (const ElemInstr& ins : code) {
      if (ins.op == ElemOp::Load) arity = std::max<std::size_t>(arity, ins.input + 1u);
    }
    return ElemProgram(std::move(code), arity);
  }

 private:
  struct Node {
    std::vector<ElemInstr> code;
    std::optional<double> literal;
  };

  static std::vector<ElemInstr> emit(const Node& n) {
    if (n.literal) return {{ElemOp::Const, 0, *n.literal}};
    return n.code;
  }

  static Node combine(char op, Node lhs, Node rhs) {
    if (lhs.literal && rhs.literal) {
      const double l = *lhs.literal;
      const double r = *rhs.literal;
      return {{}, op == '+' ? l + r : (op == '-' ? l - r : l * r)};
    }
    Node out;
    if (rhs.literal) {
      out.code = lhs.code;
      const double v = *rhs.literal;
      if (op == '*') out.code.push_back({ElemOp::MulScalar, 0, v});
      else out.code.push_back({ElemOp::AddScalar, 0, op == '+' ? v : -v});
      return out;
    }
    if (lhs.literal) {
      out.code = rhs.code;
      const double v = *lhs.literal;
      if (op == '*') {
        out.code.push_back({ElemOp::MulScalar, 0, v});
      } else {
        if (op == '-') out.code.push_back({ElemOp::Neg, 0, 0.0});
        out.code.push_back({ElemOp::AddScalar, 0, v});
      }
      return out;
    }
    out.code = lhs.code;
    out.code.insert(out.code.end(), rhs.code.begin(), rhs.code.end());
    out.code.push_back({op == '+' ? ElemOp::Add : (op == '-' ? ElemOp::Sub : ElemOp::Mul), 0, 0.0});
    return out;
  }

  Node expr() {
    Node lhs = term();
    for (;;) {
      skip_space();
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) {
        const char op = text_[pos_++];
        lhs = combine(op, std::move(lhs), term());
      } else {
        return lhs;
      }
    }
  }

  Node term() {
    Node lhs = unary();
    for (;;) {
      skip_space();
      if (pos_ < text_.size() && text_[pos_] == '*') {
        ++pos_;
        lhs = combine('*', std::move(lhs), unary());
      } else {
        return lhs;
      }
    }
  }

  Node unary() {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == '-') {
      ++pos_;
      Node n = unary();
      if (n.literal) return {{}, -*n.literal};
      n.code.push_back({ElemOp::Neg, 0, 0.0});
      return n;
    }
    return primary();
  }

  Node primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of program");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Node n = expr();
      skip_space();
      if (pos_ >= text_.size() || text_[pos_] != ')') fail("missing ')'");
      ++pos_;
      return n;
    }
    if (c >= 'a' && c <= 'z') {
      ++pos_;
      return {{{ElemOp::Load, static_cast<std::uint8_t>(c - 'a'), 0.0}}, std::nullopt};
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), v);
      if (ec != std::errc()) fail("bad number");
      pos_ = static_cast<std::size_t>(ptr - text_.data());
      return {{}, v};
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ContractError("cannot parse program \"" + std::string(text_) + "\" at " +
                        std::to_string(pos_) + ": " + what);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

ElemProgram ElemProgram::parse(std::string_view text) { return Parser(text).run(); }

}  // namespace lazyla
