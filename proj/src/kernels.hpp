// Element-level kernels shared by both backends. Both backends run these
// exact loops over index ranges, so element-wise results agree bitwise no
// matter how the index space is partitioned.
#pragma once

#include <algorithm>
#include <atomic>
#include <cstring>
#include <limits>
#include <new>
#include <span>
#include <unordered_map>
#include <variant>
#include <vector>

#include "lazyla/backend.hpp"
#include "lazyla/error.hpp"
#include "lazyla/rng.hpp"

namespace lazyla::detail {

// Plain host arrays keyed by id. Ids are unique process-wide so a region
// from another context is never mistaken for one of ours.
class BufferStore {
 public:
  explicit BufferStore(std::size_t limit_bytes) : limit_(limit_bytes) {}

  BufferId allocate(ElemType elem, std::size_t count) {
    const std::size_t bytes = count * byte_size(elem);
    if (count > limit_ / byte_size(elem) || used_ + bytes > limit_) {
      throw ResourceError("cannot allocate " + std::to_string(bytes) + " bytes (" +
                              std::to_string(used_) + " of " + std::to_string(limit_) + " in use)",
                          bytes);
    }
    Slot slot;
    try {
      if (elem == ElemType::F32) {
        slot.data = std::vector<float>(count);
      } else {
        slot.data = std::vector<double>(count);
      }
    } catch (const std::bad_alloc&) {
      throw ResourceError("cannot allocate " + std::to_string(bytes) + " bytes", bytes);
    }
    slot.bytes = bytes;
    const BufferId id = next_id().fetch_add(1) + 1;
    used_ += bytes;
    buffers_.emplace(id, std::move(slot));
    return id;
  }

  void release(BufferId id) {
    const auto it = buffers_.find(id);
    if (it == buffers_.end()) return;
    used_ -= it->second.bytes;
    buffers_.erase(it);
  }

  bool owns(BufferId id) const noexcept { return buffers_.count(id) != 0; }
  std::size_t live() const noexcept { return buffers_.size(); }

  std::size_t capacity(BufferId id) const {
    const Slot& s = at(id);
    return s.bytes / (std::holds_alternative<std::vector<float>>(s.data) ? 4 : 8);
  }
  ElemType elem_type(BufferId id) const {
    return std::holds_alternative<std::vector<float>>(at(id).data) ? ElemType::F32 : ElemType::F64;
  }

  template <class T>
  T* data(BufferId id) {
    return std::get<std::vector<T>>(at(id).data).data();
  }

 private:
  struct Slot {
    std::variant<std::vector<float>, std::vector<double>> data;
    std::size_t bytes = 0;
  };

  static std::atomic<BufferId>& next_id() {
    static std::atomic<BufferId> id{0};
    return id;
  }

  const Slot& at(BufferId id) const {
    const auto it = buffers_.find(id);
    if (it == buffers_.end()) throw ContractError("unknown buffer " + std::to_string(id));
    return it->second;
  }
  Slot& at(BufferId id) { return const_cast<Slot&>(std::as_const(*this).at(id)); }

  std::size_t limit_;
  std::size_t used_ = 0;
  std::unordered_map<BufferId, Slot> buffers_;
};

// A region bound to its storage. Linear index k walks the region in
// column-major order.
template <class T>
struct View2 {
  T* base = nullptr;
  Region r;

  T& at(std::size_t i, std::size_t j) const { return base[r.index(i, j)]; }
  T& linear(std::size_t k) const { return base[r.index(k % r.rows, k / r.rows)]; }
};

template <class T>
View2<T> bind(BufferStore& store, const Region& r) {
  if (r.count() == 0) return {nullptr, r};
  return {store.data<T>(r.buffer), r};
}

template <class F>
decltype(auto) dispatch(ElemType elem, F&& f) {
  if (elem == ElemType::F32) return f(float{});
  return f(double{});
}

template <class T>
void fill_range(const FillSpec& spec, const View2<T>& out, std::size_t begin, std::size_t end) {
  for (std::size_t k = begin; k < end; ++k) {
    T v{};
    switch (spec.kind) {
      case FillKind::Zeros: v = T(0); break;
      case FillKind::Ones: v = T(1); break;
      case FillKind::Identity: v = (k % out.r.rows) == (k / out.r.rows) ? T(1) : T(0); break;
      case FillKind::RandUniform: v = CounterRng::uniform<T>(spec.rng_key, spec.rng_counter + k); break;
      case FillKind::Value: v = static_cast<T>(spec.value); break;
    }
    out.linear(k) = v;
  }
}

template <class T>
void copy_range(const View2<T>& src, const View2<T>& dst, std::size_t begin, std::size_t end) {
  for (std::size_t k = begin; k < end; ++k) dst.linear(k) = src.linear(k);
}

template <class T>
void axpy_range(T alpha, const View2<T>& x, const View2<T>& y, std::size_t begin, std::size_t end) {
  for (std::size_t k = begin; k < end; ++k) y.linear(k) = alpha * x.linear(k) + y.linear(k);
}

template <class T>
void elem_range(const ElemProgram& program, std::span<const View2<T>> inputs, const View2<T>& out,
                std::size_t begin, std::size_t end) {
  T args[26];
  const std::size_t k_in = inputs.size();
  for (std::size_t k = begin; k < end; ++k) {
    for (std::size_t a = 0; a < k_in; ++a) args[a] = inputs[a].linear(k);
    out.linear(k) = program.eval(args);
  }
}

template <class T>
T mapped(const ElemProgram& program, std::span<const View2<T>> inputs, std::size_t k) {
  if (inputs.size() == 1 && program.is_identity()) return inputs[0].linear(k);
  T args[26] = {};
  for (std::size_t a = 0; a < inputs.size(); ++a) args[a] = inputs[a].linear(k);
  return program.eval(args);
}

template <class T>
T reduce_identity(ReduceKind kind) {
  switch (kind) {
    case ReduceKind::Min: return std::numeric_limits<T>::infinity();
    case ReduceKind::Max: return -std::numeric_limits<T>::infinity();
    default: return T(0);
  }
}

// Leaf value of element k: the mapped value, or its squared deviation for SumSq.
template <class T>
T reduce_leaf(ReduceKind kind, const ElemProgram& program, std::span<const View2<T>> inputs, T center,
              std::size_t k) {
  const T v = mapped(program, inputs, k);
  if (kind == ReduceKind::SumSq) {
    const T d = v - center;
    return d * d;
  }
  return v;
}

template <class T>
T combine(ReduceKind kind, T a, T b) {
  switch (kind) {
    case ReduceKind::Min: return b < a ? b : a;
    case ReduceKind::Max: return b > a ? b : a;
    default: return a + b;
  }
}

template <class T>
void reduce_epilogue(const ReduceEpilogue& ep, T r, T& out) {
  if (ep.divisor != 1.0) r = r / static_cast<T>(ep.divisor);
  if (ep.scale != 1.0) r = static_cast<T>(ep.scale) * r;
  out = ep.beta == 0.0 ? r : static_cast<T>(ep.beta) * out + r;
}

// C(i, j) for i in [i0, i1), j in [j0, j1): products accumulate in
// ascending k from zero, then alpha and beta are applied. Any blocking that
// keeps that per-element order gives the same bits.
template <class T>
void gemm_block(bool ta, bool tb, T alpha, const View2<T>& a, const View2<T>& b, T beta,
                const View2<T>& c, std::size_t kdim, std::size_t i0, std::size_t i1, std::size_t j0,
                std::size_t j1, std::size_t ktile, std::vector<T>& acc) {
  const std::size_t mi = i1 - i0;
  acc.assign(mi * (j1 - j0), T(0));
  if (ktile == 0) ktile = kdim == 0 ? 1 : kdim;
  for (std::size_t p0 = 0; p0 < kdim; p0 += ktile) {
    const std::size_t p1 = std::min(kdim, p0 + ktile);
    for (std::size_t j = j0; j < j1; ++j) {
      T* col = acc.data() + (j - j0) * mi;
      for (std::size_t p = p0; p < p1; ++p) {
        const T bv = tb ? b.at(j, p) : b.at(p, j);
        if (ta) {
          for (std::size_t i = i0; i < i1; ++i) col[i - i0] += a.at(p, i) * bv;
        } else {
          for (std::size_t i = i0; i < i1; ++i) col[i - i0] += a.at(i, p) * bv;
        }
      }
    }
  }
  for (std::size_t j = j0; j < j1; ++j) {
    for (std::size_t i = i0; i < i1; ++i) {
      const T r = alpha * acc[(j - j0) * mi + (i - i0)];
      T& dst = c.at(i, j);
      dst = beta == T(0) ? r : beta * dst + r;
    }
  }
}

// y(i) for i in [i0, i1); x and y are vectors of either orientation.
template <class T>
void gemv_range(bool ta, T alpha, const View2<T>& a, const View2<T>& x, T beta, const View2<T>& y,
                std::size_t kdim, std::size_t i0, std::size_t i1) {
  for (std::size_t i = i0; i < i1; ++i) {
    T acc = T(0);
    for (std::size_t p = 0; p < kdim; ++p) acc += (ta ? a.at(p, i) : a.at(i, p)) * x.linear(p);
    const T r = alpha * acc;
    T& dst = y.linear(i);
    dst = beta == T(0) ? r : beta * dst + r;
  }
}

}  // namespace lazyla::detail
