#include <vector>

#include "kernels.hpp"
#include "lazyla/backend.hpp"

namespace lazyla {

namespace {

using detail::bind;
using detail::dispatch;

class ReferenceBackend final : public Backend {
 public:
  explicit ReferenceBackend(const ReferenceOptions& options) : store_(options.memory_limit_bytes) {}

  std::string_view name() const noexcept override { return "reference"; }
  int device() const noexcept override { return 0; }
  std::string description() const override { return "sequential host loops (oracle)"; }
  bool compiles_kernels() const noexcept override { return false; }

  BufferId allocate(ElemType elem, std::size_t count) override { return store_.allocate(elem, count); }
  void release(BufferId id) override { store_.release(id); }
  bool owns(BufferId id) const noexcept override { return store_.owns(id); }
  std::size_t live_buffers() const noexcept override { return store_.live(); }
  std::size_t capacity(BufferId id) const override { return store_.capacity(id); }
  ElemType elem_type(BufferId id) const override { return store_.elem_type(id); }

  void write(const Region& dst, const void* host) override {
    dispatch(store_.elem_type(dst.buffer), [&]<class T>(T) {
      const auto out = bind<T>(store_, dst);
      const T* src = static_cast<const T*>(host);
      for (std::size_t k = 0; k < dst.count(); ++k) out.linear(k) = src[k];
    });
  }

  void read(const Region& src, void* host) const override {
    auto& store = const_cast<detail::BufferStore&>(store_);
    dispatch(store_.elem_type(src.buffer), [&]<class T>(T) {
      const auto in = bind<T>(store, src);
      T* dst = static_cast<T*>(host);
      for (std::size_t k = 0; k < src.count(); ++k) dst[k] = in.linear(k);
    });
  }

  std::size_t fill(const FillSpec& spec, const Region& out) override {
    if (out.count() == 0) return 1;
    dispatch(store_.elem_type(out.buffer), [&]<class T>(T) {
      detail::fill_range(spec, bind<T>(store_, out), 0, out.count());
    });
    return 1;
  }

  std::size_t copy(const Region& src, const Region& dst) override {
    if (dst.count() == 0) return 1;
    dispatch(store_.elem_type(dst.buffer), [&]<class T>(T) {
      detail::copy_range(bind<T>(store_, src), bind<T>(store_, dst), 0, dst.count());
    });
    return 1;
  }

  std::size_t axpy(double alpha, const Region& x, const Region& y) override {
    if (y.count() == 0) return 1;
    dispatch(store_.elem_type(y.buffer), [&]<class T>(T) {
      detail::axpy_range(static_cast<T>(alpha), bind<T>(store_, x), bind<T>(store_, y), 0, y.count());
    });
    return 1;
  }

  std::size_t gemm(bool ta, bool tb, double alpha, const Region& a, const Region& b, double beta,
                   const Region& c) override {
    if (c.count() == 0) return 1;
    const std::size_t kdim = ta ? a.rows : a.cols;
    dispatch(store_.elem_type(c.buffer), [&]<class T>(T) {
      std::vector<T> acc;
      detail::gemm_block(ta, tb, static_cast<T>(alpha), bind<T>(store_, a), bind<T>(store_, b),
                         static_cast<T>(beta), bind<T>(store_, c), kdim, 0, c.rows, 0, c.cols, 0, acc);
    });
    return 1;
  }

  std::size_t gemv(bool ta, double alpha, const Region& a, const Region& x, double beta,
                   const Region& y) override {
    if (y.count() == 0) return 1;
    const std::size_t kdim = ta ? a.rows : a.cols;
    dispatch(store_.elem_type(y.buffer), [&]<class T>(T) {
      detail::gemv_range(ta, static_cast<T>(alpha), bind<T>(store_, a), bind<T>(store_, x),
                         static_cast<T>(beta), bind<T>(store_, y), kdim, 0, y.count());
    });
    return 1;
  }

  std::size_t elem(const ElemProgram& program, std::span<const Region> inputs,
                   const Region& out) override {
    if (out.count() == 0) return 1;
    dispatch(store_.elem_type(out.buffer), [&]<class T>(T) {
      std::vector<detail::View2<T>> in;
      for (const Region& r : inputs) in.push_back(bind<T>(store_, r));
      detail::elem_range<T>(program, in, bind<T>(store_, out), 0, out.count());
    });
    return 1;
  }

  // Left to right, one accumulator.
  std::size_t reduce(ReduceKind kind, const ElemProgram& map, std::span<const Region> inputs,
                     const Region* center, const ReduceEpilogue& epilogue,
                     const Region& out) override {
    dispatch(store_.elem_type(out.buffer), [&]<class T>(T) {
      std::vector<detail::View2<T>> in;
      for (const Region& r : inputs) in.push_back(bind<T>(store_, r));
      const T c = center ? bind<T>(store_, *center).linear(0) : T(0);
      T acc = detail::reduce_identity<T>(kind);
      const std::size_t n = inputs[0].count();
      for (std::size_t k = 0; k < n; ++k) {
        acc = detail::combine(kind, acc, detail::reduce_leaf<T>(kind, map, in, c, k));
      }
      detail::reduce_epilogue(epilogue, acc, bind<T>(store_, out).linear(0));
    });
    return 1;
  }

 private:
  detail::BufferStore store_;
};

}  // namespace

std::unique_ptr<Backend> make_reference_backend(const ReferenceOptions& options) {
  return std::make_unique<ReferenceBackend>(options);
}

}  // namespace lazyla
