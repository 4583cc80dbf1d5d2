#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace lazyla {

enum class ElemOp : std::uint8_t {
  Load,       // push input[arg]
  Const,      // push imm
  Add,
  Sub,
  Mul,
  Neg,
  AddScalar,  // top + imm
  MulScalar,  // top * imm
};

struct ElemInstr {
  ElemOp op = ElemOp::Load;
  std::uint8_t input = 0;
  double imm = 0.0;

  friend bool operator==(const ElemInstr&, const ElemInstr&) = default;
};

// A fused element-wise program in postfix form. Evaluated once per output
// element over k input streams; intermediate values are held in the element
// type of the launch, so fusing never changes rounding relative to
// evaluating each node separately.
class ElemProgram {
 public:
  ElemProgram() = default;
  ElemProgram(std::vector<ElemInstr> code, std::size_t arity);

  // Infix text over inputs a, b, c, ... and numeric literals, e.g.
  // "(a+b)-a", "d+100", "a-b*c". A binary op with a literal operand becomes
  // AddScalar / MulScalar. Throws ContractError on malformed text.
  static ElemProgram parse(std::string_view text);
  static ElemProgram identity() { return ElemProgram({{ElemOp::Load, 0, 0.0}}, 1); }

  const std::vector<ElemInstr>& code() const noexcept { return code_; }
  std::size_t arity() const noexcept { return arity_; }
  std::size_t stack_depth() const noexcept { return stack_depth_; }
  bool is_identity() const noexcept {
    return code_.size() == 1 && code_[0].op == ElemOp::Load && code_[0].input == 0;
  }

  // Number of arithmetic instructions (loads excluded).
  std::size_t op_count() const noexcept;

  // Kernel names from the predefined set that this program needs.
  std::vector<std::string> required_kernels() const;

  std::string render() const;

  template <class T>
  T eval(const T* inputs) const noexcept;

  friend bool operator==(const ElemProgram&, const ElemProgram&) = default;

 private:
  std::vector<ElemInstr> code_;
  std::size_t arity_ = 0;
  std::size_t stack_depth_ = 0;
};

template <class T>
T ElemProgram::eval(const T* inputs) const noexcept {
  T stack[32];
  std::size_t top = 0;
  for (const ElemInstr& ins : code_) {
    switch (ins.op) {
      case ElemOp::Load: stack[top++] = inputs[ins.input]; break;
      case ElemOp::Const: stack[top++] = static_cast<T>(ins.imm); break;
      case ElemOp::Add: --top; stack[top - 1] = stack[top - 1] + stack[top]; break;
      case ElemOp::Sub: --top; stack[top - 1] = stack[top - 1] - stack[top]; break;
      case ElemOp::Mul: --top; stack[top - 1] = stack[top - 1] * stack[top]; break;
      case ElemOp::Neg: stack[top - 1] = -stack[top - 1]; break;
      case ElemOp::AddScalar: stack[top - 1] = stack[top - 1] + static_cast<T>(ins.imm); break;
      case ElemOp::MulScalar: stack[top - 1] = stack[top - 1] * static_cast<T>(ins.imm); break;
    }
  }
  return stack[0];
}

inline constexpr std::size_t kMaxProgramDepth = 32;

}  // namespace lazyla
