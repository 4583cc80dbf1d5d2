// Shared helpers for the unit and acceptance tests.
#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <unistd.h>
#include <vector>

#include "lazyla/lazyla.hpp"

namespace testing_support {

using namespace lazyla;

// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("lazyla-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

// One cache dir for the whole test process so warm inits stay cheap.
inline const std::filesystem::path& shared_cache_dir() {
  static TempDir dir;
  return dir.path();
}

inline ContextOptions test_options(std::uint64_t seed = 7) {
  ContextOptions o;
  o.kernel_cache_dir = shared_cache_dir();
  o.workers = 4;
  o.seed = seed;
  return o;
}

inline std::shared_ptr<BackendContext> make_ctx(const std::string& backend, std::uint64_t seed = 7) {
  return init(backend, 0, false, test_options(seed));
}

inline const std::vector<std::string>& backends() {
  static const std::vector<std::string> names{"reference", "device-sim"};
  return names;
}

// Host copy of a matrix, column-major.
template <Scalar T>
std::vector<T> host(const Mat<T>& m) {
  return m.context()->template download<T>(m.region());
}

template <Scalar T>
Mat<T> upload(std::size_t rows, std::size_t cols, const std::vector<T>& col_major,
              const std::shared_ptr<BackendContext>& ctx) {
  Mat<T> m(rows, cols, Fill::None, ctx);
  ctx->template upload<T>(m.region(), col_major);
  return m;
}

// Entries uniform in [-1, 1) from a seeded stream, independent of any backend.
template <Scalar T>
std::vector<T> seeded_values(std::size_t n, std::uint64_t seed) {
  std::vector<T> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = static_cast<T>(2.0 * CounterRng::uniform<double>(seed, i) - 1.0);
  }
  return v;
}

// ---------------------------------------------------------------------------
// Naive recursive evaluator. Works in long double on host values and also
// carries the magnitude tree (|a|+|b|, |a|*|b|, sum of |x|) so that errors
// can be measured against the scale the floating-point bound depends on.

struct HostEval {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<long double> v;
  std::vector<long double> mag;

  long double& at(std::size_t i, std::size_t j) { return v[i + j * rows]; }
  long double at(std::size_t i, std::size_t j) const { return v[i + j * rows]; }
};

using LeafFn = std::function<std::vector<long double>(const TerminalRef&)>;

// Reads terminal values through their context (counted as transfers).
inline std::vector<long double> download_leaf(const TerminalRef& t) {
  auto* ctx = const_cast<BackendContext*>(t.ctx);
  std::vector<long double> out;
  if (t.region.count() == 0) return out;
  if (t.elem == ElemType::F32) {
    for (float x : ctx->download<float>(t.region)) out.push_back(x);
  } else {
    for (double x : ctx->download<double>(t.region)) out.push_back(x);
  }
  return out;
}

inline HostEval oracle_eval(const ExprNode& e, const LeafFn& leaf = download_leaf) {
  HostEval out;
  out.rows = e.dims().rows;
  out.cols = e.dims().cols;
  const std::size_t n = out.rows * out.cols;
  out.v.assign(n, 0.0L);
  out.mag.assign(n, 0.0L);
  if (e.is_terminal()) {
    out.v = leaf(e.terminal());
    for (std::size_t i = 0; i < n; ++i) out.mag[i] = std::fabs(out.v[i]);
    return out;
  }
  const HostEval a = oracle_eval(*e.operand(0), leaf);
  switch (e.op()) {
    case OpTag::Transpose:
      for (std::size_t i = 0; i < out.rows; ++i) {
        for (std::size_t j = 0; j < out.cols; ++j) {
          out.v[i + j * out.rows] = a.v[j + i * a.rows];
          out.mag[i + j * out.rows] = a.mag[j + i * a.rows];
        }
      }
      return out;
    case OpTag::ScalarTimes:
      for (std::size_t i = 0; i < n; ++i) {
        out.v[i] = static_cast<long double>(e.scalar()) * a.v[i];
        out.mag[i] = std::fabs(static_cast<long double>(e.scalar())) * a.mag[i];
      }
      return out;
    case OpTag::ScalarPlus:
      for (std::size_t i = 0; i < n; ++i) {
        out.v[i] = a.v[i] + static_cast<long double>(e.scalar());
        out.mag[i] = a.mag[i] + std::fabs(static_cast<long double>(e.scalar()));
      }
      return out;
    case OpTag::Negate:
      for (std::size_t i = 0; i < n; ++i) {
        out.v[i] = -a.v[i];
        out.mag[i] = a.mag[i];
      }
      return out;
    case OpTag::Sum:
    case OpTag::Accu:
    case OpTag::Mean: {
      long double s = 0, m = 0;
      for (std::size_t i = 0; i < a.v.size(); ++i) {
        s += a.v[i];
        m += a.mag[i];
      }
      const long double d = e.op() == OpTag::Mean ? static_cast<long double>(a.v.size()) : 1.0L;
      out.v[0] = s / d;
      out.mag[0] = m / d;
      return out;
    }
    case OpTag::Variance: {
      const std::size_t cnt = a.v.size();
      long double s = 0, m = 0;
      for (std::size_t i = 0; i < cnt; ++i) {
        s += a.v[i];
        m += a.mag[i];
      }
      const long double mu = s / cnt;
      long double ss = 0, sm = 0;
      for (std::size_t i = 0; i < cnt; ++i) {
        ss += (a.v[i] - mu) * (a.v[i] - mu);
        sm += (a.mag[i] + m / cnt) * (a.mag[i] + m / cnt);
      }
      out.v[0] = cnt > 1 ? ss / (cnt - 1) : 0.0L;
      out.mag[0] = cnt > 1 ? sm / (cnt - 1) : 0.0L;
      return out;
    }
    default: break;
  }
  const HostEval b = oracle_eval(*e.operand(1), leaf);
  switch (e.op()) {
    case OpTag::ElemPlus:
    case OpTag::ElemMinus:
      for (std::size_t i = 0; i < n; ++i) {
        out.v[i] = e.op() == OpTag::ElemPlus ? a.v[i] + b.v[i] : a.v[i] - b.v[i];
        out.mag[i] = a.mag[i] + b.mag[i];
      }
      return out;
    case OpTag::ElemTimes:
      for (std::size_t i = 0; i < n; ++i) {
        out.v[i] = a.v[i] * b.v[i];
        out.mag[i] = a.mag[i] * b.mag[i];
      }
      return out;
    case OpTag::MatMul: {
      const std::size_t k = a.cols;
      for (std::size_t i = 0; i < out.rows; ++i) {
        for (std::size_t j = 0; j < out.cols; ++j) {
          long double s = 0, m = 0;
          for (std::size_t p = 0; p < k; ++p) {
            s += a.v[i + p * a.rows] * b.v[p + j * b.rows];
            m += a.mag[i + p * a.rows] * b.mag[p + j * b.rows];
          }
          out.v[i + j * out.rows] = s;
          out.mag[i + j * out.rows] = m;
        }
      }
      return out;
    }
    default: break;
  }
  return out;
}

// Largest |got - want| / max(magnitude, tiny) over all elements.
template <class T>
double scaled_error(const std::vector<T>& got, const HostEval& want) {
  double worst = 0.0;
  for (std::size_t i = 0; i < want.v.size(); ++i) {
    const long double scale = std::max<long double>(want.mag[i], 1e-30L);
    const long double err = std::fabs(static_cast<long double>(got[i]) - want.v[i]) / scale;
    worst = std::max(worst, static_cast<double>(err));
  }
  return got.size() == want.v.size() ? worst : INFINITY;
}

// max |a - b| / max |b|
template <class T, class U>
double rel_diff(const std::vector<T>& a, const std::vector<U>& b) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    diff = std::max(diff, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    scale = std::max(scale, std::abs(static_cast<double>(b[i])));
  }
  if (a.size() != b.size()) return INFINITY;
  return scale == 0.0 ? diff : diff / scale;
}

template <Scalar T>
constexpr double elem_tolerance() {
  return sizeof(T) == 4 ? 1e-5 : 1e-12;
}

// Triple-loop product in long double: C = op(A) * op(B).
inline std::vector<long double> naive_gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k,
                                           const std::vector<long double>& a, std::size_t lda,
                                           const std::vector<long double>& b, std::size_t ldb) {
  std::vector<long double> c(m * n, 0.0L);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      long double s = 0;
      for (std::size_t p = 0; p < k; ++p) {
        const long double av = ta ? a[p + i * lda] : a[i + p * lda];
        const long double bv = tb ? b[j + p * ldb] : b[p + j * ldb];
        s += av * bv;
      }
      c[i + j * m] = s;
    }
  }
  return c;
}

}  // namespace testing_support
