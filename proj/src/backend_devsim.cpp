#include <algorithm>
#include <vector>

#include "kernels.hpp"
#include "lazyla/backend.hpp"
#include "worker_pool.hpp"

namespace lazyla {

namespace {

using detail::bind;
using detail::dispatch;
using detail::View2;

// Balanced pairwise tree over [lo, hi): split at lo + n/2. N - 1 combines,
// ceil(log2 N) depth. The shape depends only on N.
template <class T, class Leaf>
T tree_reduce(ReduceKind kind, const Leaf& leaf, std::size_t lo, std::size_t hi) {
  const std::size_t n = hi - lo;
  if (n == 1) return leaf(lo);
  if (n == 2) return detail::combine(kind, leaf(lo), leaf(lo + 1));
  const std::size_t mid = lo + n / 2;
  return detail::combine(kind, tree_reduce<T>(kind, leaf, lo, mid), tree_reduce<T>(kind, leaf, mid, hi));
}

// Subtrees at `depth` below the root, in order.
void cut_tree(std::size_t lo, std::size_t hi, std::size_t depth, std::vector<std::pair<std::size_t, std::size_t>>& out) {
  if (depth == 0 || hi - lo <= 2) {
    out.emplace_back(lo, hi);
    return;
  }
  const std::size_t mid = lo + (hi - lo) / 2;
  cut_tree(lo, mid, depth - 1, out);
  cut_tree(mid, hi, depth - 1, out);
}

// Recombines subtree values along the same cut.
template <class T>
T join_tree(ReduceKind kind, std::size_t lo, std::size_t hi, std::size_t depth, const std::vector<T>& values,
            std::size_t& next) {
  if (depth == 0 || hi - lo <= 2) return values[next++];
  const std::size_t mid = lo + (hi - lo) / 2;
  const T a = join_tree<T>(kind, lo, mid, depth - 1, values, next);
  const T b = join_tree<T>(kind, mid, hi, depth - 1, values, next);
  return detail::combine(kind, a, b);
}

class DevsimBackend final : public Backend {
 public:
  explicit DevsimBackend(const DevsimOptions& options)
      : options_(options), store_(options.memory_limit_bytes), pool_(std::max<std::size_t>(1, options.workers)) {
    options_.workers = pool_.size();
    if (options_.tile == 0) options_.tile = 32;
    if (options_.grain == 0) options_.grain = 1;
  }

  std::string_view name() const noexcept override { return "device-sim"; }
  int device() const noexcept override { return 0; }
  std::string description() const override {
    return "simulated device, " + std::to_string(options_.workers) + " workers, gemm tile " +
           std::to_string(options_.tile);
  }
  bool compiles_kernels() const noexcept override { return true; }

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
    return dispatch(store_.elem_type(out.buffer), [&]<class T>(T) {
      const auto o = bind<T>(store_, out);
      return for_ranges(out.count(), [&](std::size_t b, std::size_t e) { detail::fill_range(spec, o, b, e); });
    });
  }

  std::size_t copy(const Region& src, const Region& dst) override {
    if (dst.count() == 0) return 1;
    return dispatch(store_.elem_type(dst.buffer), [&]<class T>(T) {
      const auto s = bind<T>(store_, src);
      const auto d = bind<T>(store_, dst);
      return for_ranges(dst.count(), [&](std::size_t b, std::size_t e) { detail::copy_range(s, d, b, e); });
    });
  }

  std::size_t axpy(double alpha, const Region& x, const Region& y) override {
    if (y.count() == 0) return 1;
    return dispatch(store_.elem_type(y.buffer), [&]<class T>(T) {
      const auto xs = bind<T>(store_, x);
      const auto ys = bind<T>(store_, y);
      const T a = static_cast<T>(alpha);
      return for_ranges(y.count(), [&](std::size_t b, std::size_t e) { detail::axpy_range(a, xs, ys, b, e); });
    });
  }

  std::size_t gemm(bool ta, bool tb, double alpha, const Region& a, const Region& b, double beta,
                   const Region& c) override {
    if (c.count() == 0) return 1;
    const std::size_t kdim = ta ? a.rows : a.cols;
    const std::size_t tile = options_.tile;
    const std::size_t tiles_m = (c.rows + tile - 1) / tile;
    const std::size_t tiles_n = (c.cols + tile - 1) / tile;
    const std::size_t tiles = tiles_m * tiles_n;
    const std::size_t work = c.count() * std::max<std::size_t>(kdim, 1);
    const std::size_t parts =
        work < options_.grain ? 1 : std::clamp<std::size_t>(tiles, 1, options_.workers);
    dispatch(store_.elem_type(c.buffer), [&]<class T>(T) {
      const auto av = bind<T>(store_, a);
      const auto bv = bind<T>(store_, b);
      const auto cv = bind<T>(store_, c);
      pool_.run(tiles, parts, [&](std::size_t t) {
        thread_local std::vector<T> acc;
        const std::size_t ti = t % tiles_m;
        const std::size_t tj = t / tiles_m;
        const std::size_t i0 = ti * tile;
        const std::size_t j0 = tj * tile;
        detail::gemm_block(ta, tb, static_cast<T>(alpha), av, bv, static_cast<T>(beta), cv, kdim, i0,
                           std::min(c.rows, i0 + tile), j0, std::min(c.cols, j0 + tile), tile, acc);
      });
    });
    return parts;
  }

  std::size_t gemv(bool ta, double alpha, const Region& a, const Region& x, double beta,
                   const Region& y) override {
    if (y.count() == 0) return 1;
    const std::size_t kdim = ta ? a.rows : a.cols;
    const std::size_t m = y.count();
    const std::size_t parts = m * std::max<std::size_t>(kdim, 1) < options_.grain
                                  ? 1
                                  : std::clamp<std::size_t>((m + options_.tile - 1) / options_.tile, 1,
                                                            options_.workers);
    dispatch(store_.elem_type(y.buffer), [&]<class T>(T) {
      const auto av = bind<T>(store_, a);
      const auto xv = bind<T>(store_, x);
      const auto yv = bind<T>(store_, y);
      const std::size_t chunk = (m + parts - 1) / parts;
      pool_.run(parts, parts, [&](std::size_t p) {
        const std::size_t i0 = p * chunk;
        const std::size_t i1 = std::min(m, i0 + chunk);
        if (i0 < i1) {
          detail::gemv_range(ta, static_cast<T>(alpha), av, xv, static_cast<T>(beta), yv, kdim, i0, i1);
        }
      });
    });
    return parts;
  }

  std::size_t elem(const ElemProgram& program, std::span<const Region> inputs,
                   const Region& out) override {
    if (out.count() == 0) return 1;
    return dispatch(store_.elem_type(out.buffer), [&]<class T>(T) {
      std::vector<View2<T>> in;
      for (const Region& r : inputs) in.push_back(bind<T>(store_, r));
      const auto o = bind<T>(store_, out);
      return for_ranges(out.count(), [&](std::size_t b, std::size_t e) {
        detail::elem_range<T>(program, in, o, b, e);
      });
    });
  }

  std::size_t reduce(ReduceKind kind, const ElemProgram& map, std::span<const Region> inputs,
                     const Region* center, const ReduceEpilogue& epilogue,
                     const Region& out) override {
    const std::size_t n = inputs[0].count();
    const std::size_t parts = partitions(n);
    dispatch(store_.elem_type(out.buffer), [&]<class T>(T) {
      std::vector<View2<T>> in;
      for (const Region& r : inputs) in.push_back(bind<T>(store_, r));
      const T c = center ? bind<T>(store_, *center).linear(0) : T(0);
      const auto leaf = [&](std::size_t k) { return detail::reduce_leaf<T>(kind, map, in, c, k); };
      T result = detail::reduce_identity<T>(kind);
      if (n > 0) {
        std::size_t depth = 0;
        while ((std::size_t{1} << depth) < parts) ++depth;
        std::vector<std::pair<std::size_t, std::size_t>> cuts;
        cut_tree(0, n, depth, cuts);
        std::vector<T> values(cuts.size());
        pool_.run(cuts.size(), parts, [&](std::size_t i) {
          values[i] = tree_reduce<T>(kind, leaf, cuts[i].first, cuts[i].second);
        });
        std::size_t next = 0;
        result = join_tree<T>(kind, 0, n, depth, values, next);
      }
      detail::reduce_epilogue(epilogue, result, bind<T>(store_, out).linear(0));
    });
    return parts;
  }

 private:
  std::size_t partitions(std::size_t n) const {
    const std::size_t p = (n + options_.grain - 1) / options_.grain;
    return std::clamp<std::size_t>(p, 1, options_.workers);
  }

  // Contiguous linear ranges, one per partition.
  template <class F>
  std::size_t for_ranges(std::size_t n, const F& body) {
    const std::size_t parts = partitions(n);
    const std::size_t chunk = (n + parts - 1) / parts;
    pool_.run(parts, parts, [&](std::size_t p) {
      const std::size_t b = p * chunk;
      const std::size_t e = std::min(n, b + chunk);
      if (b < e) body(b, e);
    });
    return parts;
  }

  DevsimOptions options_;
  detail::BufferStore store_;
  detail::WorkerPool pool_;
};

}  // namespace

std::unique_ptr<Backend> make_devsim_backend(const DevsimOptions& options) {
  return std::make_unique<DevsimBackend>(options);
}

}  // namespace lazyla
