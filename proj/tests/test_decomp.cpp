#include <gtest/gtest.h>

#include <algorithm>
#include <limits>
#include <numeric>

#include "support.hpp"

using namespace lazyla;
using namespace testing_support;

namespace {

// Dense host matrix in long double for residual oracles.
struct HM {
  std::size_t r = 0, c = 0;
  std::vector<long double> v;
  long double operator()(std::size_t i, std::size_t j) const { return v[i + j * r]; }
};

HM from_device(const mat& m) {
  HM h{m.n_rows(), m.n_cols(), {}};
  for (double x : host(m)) h.v.push_back(x);
  return h;
}

HM multiply(const HM& a, const HM& b) {
  HM out{a.r, b.c, std::vector<long double>(a.r * b.c, 0.0L)};
  for (std::size_t i = 0; i < a.r; ++i)
    for (std::size_t j = 0; j < b.c; ++j) {
      long double s = 0;
      for (std::size_t p = 0; p < a.c; ++p) s += a(i, p) * b(p, j);
      out.v[i + j * a.r] = s;
    }
  return out;
}

long double fro(const HM& a) {
  long double s = 0;
  for (long double x : a.v) s += x * x;
  return std::sqrt(s);
}

long double fro_diff(const HM& a, const HM& b) {
  long double s = 0;
  for (std::size_t i = 0; i < a.v.size(); ++i) s += (a.v[i] - b.v[i]) * (a.v[i] - b.v[i]);
  return std::sqrt(s);
}

HM permute_rows(const HM& a, const std::vector<std::size_t>& perm) {
  HM out{a.r, a.c, std::vector<long double>(a.v.size())};
  for (std::size_t i = 0; i < a.r; ++i)
    for (std::size_t j = 0; j < a.c; ++j) out.v[i + j * a.r] = a(perm[i], j);
  return out;
}

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Diagonally boosted so the seeded systems are well conditioned.
mat seeded_square(std::size_t n, std::uint64_t seed, const std::shared_ptr<BackendContext>& ctx,
                  double boost = 0.0) {
  auto v = seeded_values<double>(n * n, seed);
  for (std::size_t i = 0; i < n; ++i) v[i + i * n] += boost;
  return upload<double>(n, n, v, ctx);
}

}  // namespace

class Decomp : public ::testing::TestWithParam<std::string> {
 protected:
  void SetUp() override { ctx = make_ctx(GetParam()); }
  void TearDown() override { EXPECT_EQ(ctx->live_buffers(), 0u); }
  std::shared_ptr<BackendContext> ctx;
};

TEST_P(Decomp, LuTwoByTwoExample) {
  mat a({{4, 3}, {6, 3}}, ctx);
  const auto r = lu(a);
  EXPECT_EQ(r.perm, (std::vector<std::size_t>{1, 0}));
  const auto l = host(r.L);
  EXPECT_EQ(l[0], 1.0);
  EXPECT_EQ(l[2], 0.0);
  EXPECT_EQ(l[3], 1.0);
  EXPECT_NEAR(l[1], 2.0 / 3.0, 1e-16);
  EXPECT_EQ(host(r.U), (std::vector<double>{6, 0, 3, 1}));
  EXPECT_FALSE(r.singular());
  // P*A == L*U, reconstructed on host.
  const HM pa = permute_rows(from_device(a), r.perm);
  EXPECT_LE(fro_diff(pa, multiply(from_device(r.L), from_device(r.U))), 1e-15L);
  EXPECT_EQ(host(r.permutation_matrix()), (std::vector<double>{0, 1, 1, 0}));
}

TEST_P(Decomp, LuOfIdentity) {
  mat a(5, 5, fill::eye, ctx);
  const auto r = lu(a);
  EXPECT_EQ(host(r.L), host(a));
  EXPECT_EQ(host(r.U), host(a));
  std::vector<std::size_t> id(5);
  std::iota(id.begin(), id.end(), 0);
  EXPECT_EQ(r.perm, id);
}

TEST_P(Decomp, LuReconstructionAndPivotBound) {
  for (std::size_t n : {1u, 7u, 33u, 50u, 70u}) {
    mat a = seeded_square(n, 100 + n, ctx);
    const auto r = lu(a, {16});
    const HM pa = permute_rows(from_device(a), r.perm);
    const HM l = from_device(r.L);
    const HM u = from_device(r.U);
    EXPECT_LE(fro_diff(pa, multiply(l, u)) / fro(pa), n == 50 ? 1e-12L : 10.0L * n * kEps) << n;
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(l(i, i), 1.0L);
      for (std::size_t j = i + 1; j < n; ++j) {
        EXPECT_EQ(l(i, j), 0.0L);
        EXPECT_EQ(u(j, i), 0.0L);
      }
      for (std::size_t j = 0; j < i; ++j) EXPECT_LE(std::fabs(l(i, j)), 1.0L);
    }
    auto sorted = r.perm;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> id(n);
    std::iota(id.begin(), id.end(), 0);
    EXPECT_EQ(sorted, id);
  }
}

TEST_P(Decomp, LuRectangular) {
  for (auto [m, n] : {std::pair<std::size_t, std::size_t>{6, 4}, {4, 6}}) {
    mat a = upload<double>(m, n, seeded_values<double>(m * n, 5), ctx);
    const auto r = lu(a, {3});
    const std::size_t k = std::min(m, n);
    EXPECT_EQ(r.L.dims(), (Dims{m, k, 1}));
    EXPECT_EQ(r.U.dims(), (Dims{k, n, 1}));
    const HM pa = permute_rows(from_device(a), r.perm);
    EXPECT_LE(fro_diff(pa, multiply(from_device(r.L), from_device(r.U))) / fro(pa), 10.0L * k * kEps);
  }
}

TEST_P(Decomp, SingularMatrixFactorsWithFlag) {
  mat a({{1, 2}, {2, 4}}, ctx);
  const auto r = lu(a);
  ASSERT_TRUE(r.singular());
  EXPECT_EQ(*r.zero_pivot, 1u);
  try {
    (void)solve(a, mat({{1}, {1}}, ctx));
    FAIL();
  } catch (const SingularityError& e) {
    EXPECT_EQ(e.pivot(), 1u);
  }
  EXPECT_THROW((void)inv(a), SingularityError);
}

TEST_P(Decomp, LuWithMaterializedPermutation) {
  mat a = seeded_square(9, 3, ctx);
  mat l, u, p;
  lu(l, u, p, a);
  const HM pa = multiply(from_device(p), from_device(a));
  EXPECT_LE(fro_diff(pa, multiply(from_device(l), from_device(u))) / fro(pa), 90.0L * kEps);
}

TEST_P(Decomp, LuLaunchCountGrowsWithBlocks) {
  const std::size_t block = 16;
  std::size_t prev = 0;
  for (std::size_t n : {8u, 16u, 17u, 32u, 48u, 64u, 100u}) {
    mat a = seeded_square(n, n, ctx);
    const std::size_t start = ctx->ledger().size();
    (void)lu(a, {block});
    const auto ledger = ctx->ledger();
    const std::size_t launches = ledger.size() - start;
    const auto gemms = std::count_if(ledger.begin() + start, ledger.end(),
                                     [](const LaunchRecord& r) { return r.kind == CallKind::Gemm; });
    EXPECT_GE(launches, prev) << n;
    EXPECT_LE(static_cast<std::size_t>(gemms), 3 * ((n + block - 1) / block) + 2) << n;
    prev = launches;
  }
}

TEST_P(Decomp, TrisolveExamples) {
  mat lower({{2, 0}, {1, 3}}, ctx);
  mat b({{4}, {5}}, ctx);
  const mat x = trisolve(lower, b, Triangle::Lower, false);
  EXPECT_EQ(host(x), (std::vector<double>{2, 1}));
  // Substitute back.
  const HM tx = multiply(from_device(lower), from_device(x));
  EXPECT_EQ(tx.v, (std::vector<long double>{4, 5}));

  mat id(3, 3, fill::eye, ctx);
  mat rhs = upload<double>(3, 2, seeded_values<double>(6, 1), ctx);
  EXPECT_EQ(host(trisolve(id, rhs, Triangle::Upper, false)), host(rhs));
  EXPECT_EQ(host(trisolve(id, rhs, Triangle::Lower, true)), host(rhs));

  mat upper({{1, 2, 3}, {0, 0, 1}, {0, 0, 2}}, ctx);
  try {
    (void)trisolve(upper, rhs, Triangle::Upper, false);
    FAIL();
  } catch (const SingularityError& e) {
    EXPECT_EQ(e.pivot(), 1u);
  }
  EXPECT_THROW((void)trisolve(upper, mat(2, 1, fill::ones, ctx), Triangle::Upper, false), ConformabilityError);
}

TEST_P(Decomp, SolveExamples) {
  mat id(4, 4, fill::eye, ctx);
  mat b = upload<double>(4, 3, seeded_values<double>(12, 2), ctx);
  EXPECT_EQ(host(solve(id, b)), host(b));
  mat d({{2, 0}, {0, 4}}, ctx);
  EXPECT_EQ(host(solve(d, mat({{2}, {8}}, ctx))), (std::vector<double>{1, 2}));
}

TEST_P(Decomp, SolveResidualBound) {
  const std::size_t n = 100;
  mat a = seeded_square(n, 77, ctx, 4.0);
  mat b = upload<double>(n, 2, seeded_values<double>(2 * n, 78), ctx);
  const mat x = solve(a, b);
  const HM ha = from_device(a), hx = from_device(x), hb = from_device(b);
  const long double res = fro_diff(multiply(ha, hx), hb) / (fro(ha) * fro(hx));
  EXPECT_LE(res, 100.0L * n * kEps);
}

TEST_P(Decomp, InverseExamples) {
  mat id(3, 3, fill::eye, ctx);
  EXPECT_EQ(host(inv(id)), host(id));
  mat d({{2, 0}, {0, 4}}, ctx);
  EXPECT_EQ(host(inv(d)), (std::vector<double>{0.5, 0, 0, 0.25}));

  const std::size_t n = 50;
  mat a = seeded_square(n, 51, ctx, 2.0);
  const mat x = inv(a);
  const HM ha = from_device(a), hx = from_device(x);
  HM eye{n, n, std::vector<long double>(n * n, 0.0L)};
  for (std::size_t i = 0; i < n; ++i) eye.v[i + i * n] = 1;
  EXPECT_LE(fro_diff(multiply(ha, hx), eye) / (fro(ha) * fro(hx)), 100.0L * n * kEps);
  EXPECT_THROW((void)inv(mat(2, 3, fill::ones, ctx)), ConformabilityError);
}

TEST_P(Decomp, CholeskyExamples) {
  mat id(4, 4, fill::eye, ctx);
  EXPECT_EQ(host(chol(id)), host(id));

  mat a({{4, 2}, {2, 2}}, ctx);
  const mat r = chol(a);
  EXPECT_EQ(host(r), (std::vector<double>{2, 0, 1, 1}));
  const HM hr = from_device(r);
  HM rt{2, 2, {hr(0, 0), hr(0, 1), hr(1, 0), hr(1, 1)}};
  EXPECT_EQ(multiply(rt, hr).v, from_device(a).v);

  try {
    (void)chol(mat({{1, 2}, {2, 1}}, ctx));
    FAIL();
  } catch (const NotPositiveDefiniteError& e) {
    EXPECT_EQ(e.pivot(), 1u);
  }
  EXPECT_THROW((void)chol(mat({{1, 2}, {0, 1}}, ctx)), ContractError);
}

TEST_P(Decomp, CholeskyReconstructionOnSeededSpd) {
  for (std::size_t n : {3u, 20u, 45u}) {
    mat g = upload<double>(n, n, seeded_values<double>(n * n, 300 + n), ctx);
    mat id(n, n, fill::eye, ctx);
    mat a = trans(g) * g + double(n) * id;
    const mat r = chol(a);
    const HM hr = from_device(r);
    HM rt{n, n, std::vector<long double>(n * n)};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        rt.v[i + j * n] = hr(j, i);
        if (i > j) {
          EXPECT_EQ(hr(i, j), 0.0L);
        }
      }
    const HM ha = from_device(a);
    EXPECT_LE(fro_diff(multiply(rt, hr), ha), 10.0L * n * kEps * fro(ha)) << n;
  }
}

TEST_P(Decomp, FrobeniusNorm) {
  mat a({{3, 0}, {0, 4}}, ctx);
  EXPECT_EQ(norm_fro(a), 5.0);
  const std::size_t start = ctx->launch_count();
  (void)norm_fro(a);
  EXPECT_EQ(ctx->launch_count(), start + 1);
}

TEST_P(Decomp, SinglePrecisionLu) {
  const std::size_t n = 24;
  fmat a = upload<float>(n, n, seeded_values<float>(n * n, 9), ctx);
  const auto r = lu(a, {8});
  auto widen = [](const fmat& m) {
    HM h{m.n_rows(), m.n_cols(), {}};
    for (float x : host(m)) h.v.push_back(x);
    return h;
  };
  const HM pa = permute_rows(widen(a), r.perm);
  EXPECT_LE(fro_diff(pa, multiply(widen(r.L), widen(r.U))) / fro(pa),
            10.0L * n * std::numeric_limits<float>::epsilon());
}

INSTANTIATE_TEST_SUITE_P(Backends, Decomp, ::testing::Values("reference", "device-sim"),
                         [](const auto& info) { return info.param == "reference" ? "reference" : "devsim"; });
