#include "lazyla/decomp.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace lazyla {

namespace {

Region block(const Region& r, std::size_t i0, std::size_t j0, std::size_t rows, std::size_t cols) {
  Region b = r;
  b.offset = r.index(i0, j0);
  b.rows = rows;
  b.cols = cols;
  return b;
}

// rows x cols window whose element (i, j) reads column segment entry i.
Region column_broadcast(const Region& r, std::size_t i0, std::size_t j, std::size_t rows, std::size_t cols) {
  Region b = block(r, i0, j, rows, cols);
  b.col_stride = 0;
  return b;
}

// rows x cols window whose element (i, j) reads row segment entry j.
Region row_broadcast(const Region& r, std::size_t i, std::size_t j0, std::size_t rows, std::size_t cols) {
  Region b = block(r, i, j0, rows, cols);
  b.row_stride = 0;
  return b;
}

const ElemProgram& rank1_program() {
  static const ElemProgram p = ElemProgram::parse("a-b*c");
  return p;
}

ElemProgram scale_program(double s) { return ElemProgram({{ElemOp::Load, 0, 0.0}, {ElemOp::MulScalar, 0, s}}, 1); }

// out -= b * c with b, c broadcast windows; one element-wise launch.
void rank1_update(BackendContext& ctx, const Region& out, const Region& b, const Region& c) {
  if (out.count() == 0) return;
  const Region in[] = {out, b, c};
  ctx.elem(rank1_program(), in, out);
}

void scale(BackendContext& ctx, const Region& r, double s) {
  if (r.count() == 0) return;
  const Region in[] = {r};
  ctx.elem(scale_program(s), in, r);
}

template <Scalar T>
void require_same_context(const Mat<T>& a, const Mat<T>& b, const char* what) {
  if (a.context() && b.context() && a.context() != b.context()) {
    throw ContractError(std::string(what) + ": operands belong to different backend contexts");
  }
}

template <Scalar T>
void require_square(const Mat<T>& a, const char* what) {
  if (a.n_rows() != a.n_cols()) {
    throw ConformabilityError(std::string(what) + " needs a square matrix, got " + to_string(a.dims()));
  }
}

template <Scalar T>
std::shared_ptr<BackendContext> context_or_default(const Mat<T>& a) {
  return a.context() ? a.context() : default_context();
}

}  // namespace

template <Scalar T>
Mat<T> LUResult<T>::permutation_matrix() const {
  const std::size_t m = perm.size();
  std::vector<T> host(m * m, T(0));
  for (std::size_t i = 0; i < m; ++i) host[i + perm[i] * m] = T(1);
  Mat<T> p(m, m, Fill::None, L.context());
  if (m != 0) p.context()->template upload<T>(p.region(), host);
  return p;
}

template struct LUResult<float>;
template struct LUResult<double>;

template <Scalar T>
LUResult<T> lu(const Mat<T>& a, const DecompOptions& options) {
  const auto ctxp = context_or_default(a);
  BackendContext& ctx = *ctxp;
  const std::size_t m = a.n_rows();
  const std::size_t n = a.n_cols();
  const std::size_t kmax = std::min(m, n);
  const std::size_t nb = std::max<std::size_t>(options.block, 1);

  LUResult<T> out;
  out.perm.resize(m);
  std::iota(out.perm.begin(), out.perm.end(), std::size_t{0});

  Mat<T> w(a);
  const Region W = w.region();
  Mat<T> swap_row(1, n, Fill::None, ctxp);

  for (std::size_t k0 = 0; k0 < kmax; k0 += nb) {
    const std::size_t kb = std::min(nb, kmax - k0);
    const std::size_t kend = k0 + kb;

    // Panel: unblocked elimination of columns k0 .. kend-1.
    for (std::size_t j = k0; j < kend; ++j) {
      const std::vector<T> col = ctx.download<T>(block(W, j, j, m - j, 1));
      std::size_t p = 0;
      for (std::size_t i = 1; i < col.size(); ++i) {
        if (std::abs(col[i]) > std::abs(col[p])) p = i;
      }
      const T pivot = col[p];
      if (pivot == T(0)) {
        if (!out.zero_pivot) out.zero_pivot = j;
        continue;
      }
      if (p != 0) {
        const Region rj = block(W, j, 0, 1, n);
        const Region rp = block(W, j + p, 0, 1, n);
        ctx.copy(rj, swap_row.region());
        ctx.copy(rp, rj);
        ctx.copy(swap_row.region(), rp);
        std::swap(out.perm[j], out.perm[j + p]);
      }
      if (j + 1 < m) {
        scale(ctx, block(W, j + 1, j, m - j - 1, 1), 1.0 / static_cast<double>(pivot));
        if (j + 1 < kend) {
          const std::size_t rows = m - j - 1;
          const std::size_t cols = kend - j - 1;
          rank1_update(ctx, block(W, j + 1, j + 1, rows, cols), column_broadcast(W, j + 1, j, rows, cols),
                       row_broadcast(W, j, j + 1, rows, cols));
        }
      }
    }

    if (kend >= n) continue;
    // U12 = inv(L11) * A12, forward substitution one row at a time.
    const std::size_t ncols = n - kend;
    for (std::size_t p = k0; p + 1 < kend; ++p) {
      const std::size_t rows = kend - p - 1;
      rank1_update(ctx, block(W, p + 1, kend, rows, ncols), column_broadcast(W, p + 1, p, rows, ncols),
                   row_broadcast(W, p, kend, rows, ncols));
    }
    // A22 -= L21 * U12.
    if (kend < m) {
      ctx.gemm(false, false, -1.0, block(W, kend, k0, m - kend, kb), block(W, k0, kend, kb, ncols), 1.0,
               block(W, kend, kend, m - kend, ncols));
    }
  }

  out.L = Mat<T>(m, kmax, Fill::Zeros, ctxp);
  out.U = Mat<T>(kmax, n, Fill::Zeros, ctxp);
  const Region L = out.L.region();
  const Region U = out.U.region();
  for (std::size_t j = 0; j < kmax; ++j) {
    if (j + 1 < m) ctx.copy(block(W, j + 1, j, m - j - 1, 1), block(L, j + 1, j, m - j - 1, 1));
  }
  if (kmax != 0) ctx.fill(FillKind::Value, Region::view(L.buffer, {m, kmax, 1}, ViewSpec::diagonal({m, kmax, 1})), 1.0);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t rows = std::min(j + 1, kmax);
    if (rows != 0) ctx.copy(block(W, 0, j, rows, 1), block(U, 0, j, rows, 1));
  }
  return out;
}

template <Scalar T>
void lu(Mat<T>& l, Mat<T>& u, Mat<T>& p, const Mat<T>& a) {
  LUResult<T> r = lu(a);
  p = r.permutation_matrix();
  l = std::move(r.L);
  u = std::move(r.U);
}

template <Scalar T>
Mat<T> trisolve(const Mat<T>& t, const Mat<T>& b, Triangle side, bool unit_diag) {
  require_square(t, "trisolve");
  require_same_context(t, b, "trisolve");
  const std::size_t n = t.n_rows();
  if (b.n_rows() != n) {
    throw ConformabilityError("trisolve: triangle " + to_string(t.dims()) + " and right-hand side " +
                              to_string(b.dims()));
  }
  const auto ctxp = context_or_default(t);
  BackendContext& ctx = *ctxp;
  const std::size_t k = b.n_cols();

  std::vector<T> diag;
  if (!unit_diag && n != 0) {
    diag = ctx.download<T>(Region::view(t.buffer(), t.dims(), ViewSpec::diagonal(t.dims())));
    for (std::size_t i = 0; i < n; ++i) {
      if (diag[i] == T(0)) {
        throw SingularityError("trisolve: zero diagonal entry at index " + std::to_string(i), i);
      }
    }
  }

  Mat<T> x(b);
  if (n == 0 || k == 0) return x;
  const Region X = x.region();
  const Region R = t.region();
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t i = side == Triangle::Lower ? s : n - 1 - s;
    if (!unit_diag) scale(ctx, block(X, i, 0, 1, k), 1.0 / static_cast<double>(diag[i]));
    if (side == Triangle::Lower && i + 1 < n) {
      const std::size_t rows = n - i - 1;
      rank1_update(ctx, block(X, i + 1, 0, rows, k), column_broadcast(R, i + 1, i, rows, k),
                   row_broadcast(X, i, 0, rows, k));
    } else if (side == Triangle::Upper && i > 0) {
      rank1_update(ctx, block(X, 0, 0, i, k), column_broadcast(R, 0, i, i, k), row_broadcast(X, i, 0, i, k));
    }
  }
  return x;
}

template <Scalar T>
Mat<T> solve(const Mat<T>& a, const Mat<T>& b) {
  require_square(a, "solve");
  require_same_context(a, b, "solve");
  const std::size_t n = a.n_rows();
  if (b.n_rows() != n) {
    throw ConformabilityError("solve: system " + to_string(a.dims()) + " and right-hand side " +
                              to_string(b.dims()));
  }
  LUResult<T> f = lu(a);
  if (f.zero_pivot) {
    throw SingularityError("solve: matrix is singular (zero pivot at index " + std::to_string(*f.zero_pivot) + ")",
                           *f.zero_pivot);
  }
  const auto ctxp = context_or_default(a);
  Mat<T> pb(n, b.n_cols(), Fill::None, ctxp);
  if (b.n_cols() != 0) {
    for (std::size_t i = 0; i < n; ++i) {
      ctxp->copy(block(b.region(), f.perm[i], 0, 1, b.n_cols()), block(pb.region(), i, 0, 1, b.n_cols()));
    }
  }
  const Mat<T> y = trisolve(f.L, pb, Triangle::Lower, true);
  return trisolve(f.U, y, Triangle::Upper, false);
}

template <Scalar T>
Mat<T> inv(const Mat<T>& a) {
  require_square(a, "inv");
  const Mat<T> eye(a.n_rows(), a.n_rows(), Fill::Identity, context_or_default(a));
  return solve(a, eye);
}

template <Scalar T>
double norm_fro(const Mat<T>& a) {
  if (a.n_elem() == 0) return 0.0;
  const Mat<T> s(1, 1, Fill::None, a.context());
  const Region in[] = {a.region()};
  a.context()->reduce(ReduceKind::SumSq, ElemProgram::identity(), in, std::nullopt, {}, s.region());
  return std::sqrt(static_cast<double>(s(0, 0)));
}

template <Scalar T>
Mat<T> chol(const Mat<T>& a) {
  require_square(a, "chol");
  const std::size_t n = a.n_rows();
  const auto ctxp = context_or_default(a);
  BackendContext& ctx = *ctxp;
  if (n == 0) return Mat<T>(0, 0, Fill::None, ctxp);

  // ||A - A^T||_F in one reduction.
  {
    const Mat<T> s(1, 1, Fill::None, ctxp);
    const Region in[] = {a.region(), a.region().transposed()};
    ctx.reduce(ReduceKind::SumSq, ElemProgram::parse("a-b"), in, std::nullopt, {}, s.region());
    const double asym = std::sqrt(static_cast<double>(s(0, 0)));
    const double limit = 10.0 * std::numeric_limits<T>::epsilon() * norm_fro(a);
    if (asym > limit) {
      throw ContractError("chol: matrix is not symmetric (||A - A^T||_F = " + std::to_string(asym) +
                          ", limit " + std::to_string(limit) + ")");
    }
  }

  Mat<T> r(a);
  const Region R = r.region();
  for (std::size_t k = 0; k < n; ++k) {
    const T d = ctx.download<T>(block(R, k, k, 1, 1))[0];
    if (!(d > T(0))) {
      throw NotPositiveDefiniteError("chol: non-positive pivot " + std::to_string(d) + " at index " +
                                         std::to_string(k),
                                     k);
    }
    const T s = std::sqrt(d);
    ctx.fill(FillKind::Value, block(R, k, k, 1, 1), static_cast<double>(s));
    if (k + 1 == n) break;
    const std::size_t rest = n - k - 1;
    scale(ctx, block(R, k, k + 1, 1, rest), 1.0 / static_cast<double>(s));
    // Trailing block -= outer(row k, row k).
    Region b = block(R, k, k + 1, rest, rest);
    b.row_stride = R.col_stride;
    b.col_stride = 0;
    rank1_update(ctx, block(R, k + 1, k + 1, rest, rest), b, row_broadcast(R, k, k + 1, rest, rest));
  }
  for (std::size_t j = 0; j + 1 < n; ++j) ctx.fill(FillKind::Zeros, block(R, j + 1, j, n - j - 1, 1));
  return r;
}

#define LAZYLA_DECOMP(T)                                                              \
  template LUResult<T> lu<T>(const Mat<T>&, const DecompOptions&);                    \
  template void lu<T>(Mat<T>&, Mat<T>&, Mat<T>&, const Mat<T>&);                      \
  template Mat<T> trisolve<T>(const Mat<T>&, const Mat<T>&, Triangle, bool);          \
  template Mat<T> solve<T>(const Mat<T>&, const Mat<T>&);                             \
  template Mat<T> inv<T>(const Mat<T>&);                                              \
  template Mat<T> chol<T>(const Mat<T>&);                                             \
  template double norm_fro<T>(const Mat<T>&);

LAZYLA_DECOMP(float)
LAZYLA_DECOMP(double)

#undef LAZYLA_DECOMP

}  // namespace lazyla
