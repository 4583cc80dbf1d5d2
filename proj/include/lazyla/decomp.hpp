#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "lazyla/mat.hpp"

namespace lazyla {

template <Scalar T>
struct LUResult {
  Mat<T> L;  // m x min(m, n), unit lower triangular
  Mat<T> U;  // min(m, n) x n, upper triangular
  // Row i of P*A is row perm[i] of A.
  std::vector<std::size_t> perm;
  // Set when some pivot column was exactly zero; U then has a zero diagonal
  // entry at that position.
  std::optional<std::size_t> zero_pivot;

  bool singular() const noexcept { return zero_pivot.has_value(); }
  Mat<T> permutation_matrix() const;
};

struct DecompOptions {
  std::size_t block = 32;
};

// Blocked right-looking LU with partial pivoting. Pivot columns are read
// back to choose the pivot; all arithmetic runs as backend launches (row
// swaps as copies, column scaling and rank-1 panel updates as element-wise
// kernels, the trailing update as one GEMM per block column).
template <Scalar T>
LUResult<T> lu(const Mat<T>& a, const DecompOptions& options = {});

// Four-output form: P*A = L*U with P materialized.
template <Scalar T>
void lu(Mat<T>& l, Mat<T>& u, Mat<T>& p, const Mat<T>& a);

enum class Triangle { Lower, Upper };

// Solves t * x = b by forward (Lower) or back (Upper) substitution. Throws
// SingularityError on a zero diagonal entry when unit_diag is false.
template <Scalar T>
Mat<T> trisolve(const Mat<T>& t, const Mat<T>& b, Triangle side, bool unit_diag);

template <Scalar T>
Mat<T> solve(const Mat<T>& a, const Mat<T>& b);

template <Scalar T>
Mat<T> inv(const Mat<T>& a);

// Upper triangular r with trans(r) * r == a. Throws ContractError when a is
// not symmetric to 10 * eps * ||a||_F and NotPositiveDefiniteError on a
// non-positive pivot.
template <Scalar T>
Mat<T> chol(const Mat<T>& a);

// Frobenius norm through a single SumSq reduction.
template <Scalar T>
double norm_fro(const Mat<T>& a);

extern template struct LUResult<float>;
extern template struct LUResult<double>;

}  // namespace lazyla
