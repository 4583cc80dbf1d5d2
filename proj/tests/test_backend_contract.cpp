#include <gtest/gtest.h>

#include <thread>

#include "support.hpp"

using namespace lazyla;
using namespace testing_support;

namespace {

// Host code gets no pointer into device storage.
template <class C>
concept ExposesRawStorage = requires(C& c, BufferId id) { c.data(id); };
static_assert(!ExposesRawStorage<BackendContext>);
static_assert(!ExposesRawStorage<Backend>);

// Scoped device buffer on a context.
class Buf {
 public:
  Buf(std::shared_ptr<BackendContext> ctx, ElemType elem, std::size_t rows, std::size_t cols)
      : ctx_(std::move(ctx)), id_(ctx_->allocate(elem, rows * cols)), rows_(rows), cols_(cols) {}
  ~Buf() { ctx_->release(id_); }
  Buf(const Buf&) = delete;
  Buf& operator=(const Buf&) = delete;

  Region region() const { return Region::whole(id_, rows_, cols_); }
  BufferId id() const { return id_; }

 private:
  std::shared_ptr<BackendContext> ctx_;
  BufferId id_;
  std::size_t rows_, cols_;
};

template <Scalar T>
std::unique_ptr<Buf> make_buf(const std::shared_ptr<BackendContext>& ctx, std::size_t rows, std::size_t cols,
                              const std::vector<T>& values) {
  auto b = std::make_unique<Buf>(ctx, elem_type_of<T>, rows, cols);
  ctx->upload<T>(b->region(), values);
  return b;
}

std::vector<long double> widen(const std::vector<double>& v) { return {v.begin(), v.end()}; }

// Pairwise sum in double of float values; independent of the device tree.
double pairwise(const float* x, std::size_t n) {
  if (n <= 8) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  return pairwise(x, n / 2) + pairwise(x + n / 2, n - n / 2);
}

}  // namespace

class Contract : public ::testing::TestWithParam<std::string> {
 protected:
  void SetUp() override { ctx = make_ctx(GetParam()); }
  void TearDown() override { EXPECT_EQ(ctx->live_buffers(), 0u); }
  std::shared_ptr<BackendContext> ctx;
};

TEST_P(Contract, GemmIdentity) {
  auto a = make_buf<double>(ctx, 2, 2, {1, 3, 2, 4});
  auto i = make_buf<double>(ctx, 2, 2, {1, 0, 0, 1});
  Buf c(ctx, ElemType::F64, 2, 2);
  ctx->gemm(false, false, 1.0, a->region(), i->region(), 0.0, c.region());
  EXPECT_EQ(ctx->download<double>(c.region()), (std::vector<double>{1, 3, 2, 4}));
}

TEST_P(Contract, GemmTransposedA) {
  // A = [[1,2],[3,4]]; A^T * I = [[1,3],[2,4]]
  auto a = make_buf<double>(ctx, 2, 2, {1, 3, 2, 4});
  auto i = make_buf<double>(ctx, 2, 2, {1, 0, 0, 1});
  Buf c(ctx, ElemType::F64, 2, 2);
  ctx->gemm(true, false, 1.0, a->region(), i->region(), 0.0, c.region());
  EXPECT_EQ(ctx->download<double>(c.region()), (std::vector<double>{1, 2, 3, 4}));
}

TEST_P(Contract, GemmMatchesTripleLoopForAllTransposeFlags) {
  const auto av = seeded_values<double>(9, 1);
  const auto bv = seeded_values<double>(9, 2);
  const auto cv = seeded_values<double>(9, 3);
  auto a = make_buf<double>(ctx, 3, 3, av);
  auto b = make_buf<double>(ctx, 3, 3, bv);
  for (bool ta : {false, true}) {
    for (bool tb : {false, true}) {
      auto c = make_buf<double>(ctx, 3, 3, cv);
      ctx->gemm(ta, tb, 1.5, a->region(), b->region(), 0.5, c->region());
      const auto prod = naive_gemm(ta, tb, 3, 3, 3, widen(av), 3, widen(bv), 3);
      const auto got = ctx->download<double>(c->region());
      for (std::size_t k = 0; k < 9; ++k) {
        const long double want = 1.5L * prod[k] + 0.5L * cv[k];
        EXPECT_NEAR(got[k], static_cast<double>(want), 1e-14) << ta << tb << k;
      }
    }
  }
}

TEST_P(Contract, GemmRejectsMismatchedShapes) {
  Buf a(ctx, ElemType::F64, 2, 3);
  Buf b(ctx, ElemType::F64, 2, 3);
  Buf c(ctx, ElemType::F64, 2, 3);
  EXPECT_THROW(ctx->gemm(false, false, 1.0, a.region(), b.region(), 0.0, c.region()), ConformabilityError);
}

TEST_P(Contract, GemvMatchesLoop) {
  auto a = make_buf<double>(ctx, 2, 3, {1, 4, 2, 5, 3, 6});
  auto x = make_buf<double>(ctx, 3, 1, {1, 1, 2});
  auto y = make_buf<double>(ctx, 2, 1, {10, 20});
  ctx->gemv(false, 2.0, a->region(), x->region(), 1.0, y->region());
  // A*x = [9, 21]
  EXPECT_EQ(ctx->download<double>(y->region()), (std::vector<double>{28, 62}));
}

TEST_P(Contract, AxpyExample) {
  auto x = make_buf<double>(ctx, 3, 1, {1, 2, 3});
  auto y = make_buf<double>(ctx, 3, 1, {4, 5, 6});
  ctx->axpy(3.0, x->region(), y->region());
  EXPECT_EQ(ctx->download<double>(y->region()), (std::vector<double>{7, 11, 15}));
}

TEST_P(Contract, AxpyZeroAlphaLeavesYUnchanged) {
  const auto yv = seeded_values<double>(100, 5);
  auto x = make_buf<double>(ctx, 100, 1, seeded_values<double>(100, 4));
  auto y = make_buf<double>(ctx, 100, 1, yv);
  ctx->axpy(0.0, x->region(), y->region());
  EXPECT_EQ(ctx->download<double>(y->region()), yv);
}

TEST_P(Contract, AxpyLargeIsExactAgainstScalarLoop) {
  const std::size_t n = 10000;
  const auto xv = seeded_values<double>(n, 8);
  auto yv = seeded_values<double>(n, 9);
  auto x = make_buf<double>(ctx, n, 1, xv);
  auto y = make_buf<double>(ctx, n, 1, yv);
  ctx->axpy(-0.75, x->region(), y->region());
  for (std::size_t i = 0; i < n; ++i) yv[i] = -0.75 * xv[i] + yv[i];
  EXPECT_EQ(ctx->download<double>(y->region()), yv);
}

TEST_P(Contract, ElemPrograms) {
  auto a = make_buf<double>(ctx, 2, 2, {1, 1, 1, 1});
  auto b = make_buf<double>(ctx, 2, 2, {1, 1, 1, 1});
  Buf out(ctx, ElemType::F64, 2, 2);
  const std::vector<Region> ins{a->region(), b->region()};
  ctx->elem(ElemProgram::parse("a+b"), ins, out.region());
  EXPECT_EQ(ctx->download<double>(out.region()), (std::vector<double>{2, 2, 2, 2}));

  auto c = make_buf<double>(ctx, 2, 2, {3, -4, 5, 7});
  const std::vector<Region> ins2{a->region(), c->region()};
  ctx->elem(ElemProgram::parse("(a+b)-a"), ins2, out.region());
  EXPECT_EQ(ctx->download<double>(out.region()), (std::vector<double>{3, -4, 5, 7}));
}

TEST_P(Contract, ElemOnStridedDiagonal) {
  // [[1,2],[3,4]] with 100 added to the diagonal only.
  auto m = make_buf<double>(ctx, 2, 2, {1, 3, 2, 4});
  Region d{m->id(), -1, 0, 2, 1, 3, 0};
  const std::vector<Region> ins{d};
  ctx->elem(ElemProgram::parse("a+100"), ins, d);
  EXPECT_EQ(ctx->download<double>(m->region()), (std::vector<double>{101, 3, 2, 104}));
}

TEST_P(Contract, ElemArityMismatchIsContractError) {
  Buf a(ctx, ElemType::F64, 2, 2);
  Buf out(ctx, ElemType::F64, 2, 2);
  const std::vector<Region> ins{a.region()};
  EXPECT_THROW(ctx->elem(ElemProgram::parse("a+b"), ins, out.region()), ContractError);
}

TEST_P(Contract, ReduceSmallExamples) {
  auto x = make_buf<double>(ctx, 4, 1, {1, 2, 3, 4});
  EXPECT_EQ(ctx->reduce_scalar(ReduceKind::Sum, x->region()), 10.0);
  EXPECT_EQ(ctx->reduce_scalar(ReduceKind::Min, x->region()), 1.0);
  EXPECT_EQ(ctx->reduce_scalar(ReduceKind::Max, x->region()), 4.0);

  std::vector<double> seq(100);
  for (int i = 0; i < 100; ++i) seq[i] = i + 1;
  auto s = make_buf<double>(ctx, 100, 1, seq);
  EXPECT_EQ(ctx->reduce_scalar(ReduceKind::Sum, s->region()), 5050.0);
}

TEST_P(Contract, ReduceOnesGivesN) {
  for (std::size_t n : {1u, 7u, 4096u, 4097u, 100000u}) {
    Buf x(ctx, ElemType::F32, n, 1);
    ctx->fill(FillKind::Ones, x.region());
    EXPECT_EQ(ctx->reduce_scalar(ReduceKind::Sum, x.region()), static_cast<double>(n)) << n;
  }
}

TEST_P(Contract, ReduceLargeFloatAgainstPairwiseOracle) {
  const std::size_t n = 100000;
  const auto xv = seeded_values<float>(n, 21);
  auto x = make_buf<float>(ctx, n, 1, xv);
  const double want = pairwise(xv.data(), n);
  double abs_sum = 0;
  for (float v : xv) abs_sum += std::abs(v);
  const double got = ctx->reduce_scalar(ReduceKind::Sum, x->region());
  EXPECT_LE(std::abs(got - want) / abs_sum, 1e-4);
  EXPECT_LE(std::abs(got - want) / std::abs(want), 1e-4);
}

TEST_P(Contract, ReduceOfEmptySumIsZero) {
  Buf x(ctx, ElemType::F64, 1, 1);
  Region empty{x.id(), -1, 0, 0, 1, 1, 0};
  EXPECT_EQ(ctx->reduce_scalar(ReduceKind::Sum, empty), 0.0);
}

TEST_P(Contract, TransferAccounting) {
  const std::size_t launches = ctx->launch_count();
  const TransferStats before = ctx->transfers();
  Buf x(ctx, ElemType::F64, 10, 1);
  EXPECT_EQ(ctx->transfer_count(), before.total());
  ctx->upload<double>(x.region(), std::vector<double>(10, 2.0));
  (void)ctx->download<double>(x.region());
  (void)ctx->download<double>(Region{x.id(), -1, 3, 1, 1, 1, 0});
  const TransferStats after = ctx->transfers();
  // Counted in elements moved.
  EXPECT_EQ(after.host_to_device, before.host_to_device + 10);
  EXPECT_EQ(after.device_to_host, before.device_to_host + 11);
  EXPECT_EQ(ctx->launch_count(), launches);
}

TEST_P(Contract, LedgerSequenceAndContents) {
  auto x = make_buf<double>(ctx, 6, 1, {1, 2, 3, 4, 5, 6});
  Buf y(ctx, ElemType::F64, 6, 1);
  const std::size_t start = ctx->ledger().size();
  ctx->fill(FillKind::Zeros, y.region());
  ctx->axpy(2.0, x->region(), y.region());
  ctx->copy(x->region(), y.region());
  const auto ledger = ctx->ledger();
  ASSERT_EQ(ledger.size(), start + 3);
  EXPECT_EQ(ledger[start].kind, CallKind::Fill);
  EXPECT_EQ(ledger[start + 1].kind, CallKind::Axpy);
  EXPECT_EQ(ledger[start + 1].elements, 6u);
  EXPECT_EQ(ledger[start + 1].dims.front(), (Dims{6, 1, 1}));
  EXPECT_EQ(ledger[start + 2].kind, CallKind::Copy);
  for (std::size_t i = 1; i < ledger.size(); ++i) EXPECT_GT(ledger[i].sequence, ledger[i - 1].sequence);
  EXPECT_EQ(ctx->launch_count(), ledger.size());
}

TEST_P(Contract, RegionChecks) {
  Buf f(ctx, ElemType::F32, 4, 1);
  Buf d(ctx, ElemType::F64, 4, 1);
  auto other = make_ctx(GetParam());
  Buf foreign(other, ElemType::F64, 4, 1);

  EXPECT_THROW(ctx->copy(f.region(), d.region()), ContractError);
  EXPECT_THROW(ctx->copy(foreign.region(), d.region()), ContractError);
  EXPECT_THROW(ctx->fill(FillKind::Ones, Region::whole(d.id(), 5, 1)), BoundsError);
  EXPECT_THROW(ctx->fill(FillKind::Ones, Region::temp(0, 4, 1)), ContractError);
  EXPECT_THROW(ctx->axpy(1.0, Region::whole(d.id(), 2, 2), d.region()), ConformabilityError);
  EXPECT_THROW((void)ctx->download<float>(d.region()), ContractError);
  EXPECT_THROW(ctx->upload<double>(d.region(), std::vector<double>(3)), ContractError);
}

TEST_P(Contract, ErrorsCarryTheirCategory) {
  try {
    Buf d(ctx, ElemType::F64, 4, 1);
    ctx->fill(FillKind::Ones, Region::whole(d.id(), 9, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::Bounds);
    EXPECT_EQ(std::string(e.what()).rfind("bounds error: ", 0), 0u) << e.what();
  }
}

TEST_P(Contract, ConcurrentCallersAreSerialized) {
  constexpr int kThreads = 4;
  constexpr int kCalls = 50;
  const std::size_t start = ctx->ledger().size();
  std::vector<std::unique_ptr<Buf>> xs, ys;
  for (int t = 0; t < kThreads; ++t) {
    xs.push_back(make_buf<double>(ctx, 64, 1, std::vector<double>(64, t + 1.0)));
    ys.push_back(make_buf<double>(ctx, 64, 1, std::vector<double>(64, 0.0)));
  }
  std::vector<std::thread> threads;
  for (int t = 0; t < kThreads; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < kCalls; ++i) ctx->axpy(1.0, xs[t]->region(), ys[t]->region());
    });
  }
  for (auto& th : threads) th.join();
  for (int t = 0; t < kThreads; ++t) {
    EXPECT_EQ(ctx->download<double>(ys[t]->region()), std::vector<double>(64, kCalls * (t + 1.0)));
  }
  const auto ledger = ctx->ledger();
  EXPECT_EQ(ledger.size(), start + kThreads * kCalls);
  for (std::size_t i = 1; i < ledger.size(); ++i) EXPECT_GT(ledger[i].sequence, ledger[i - 1].sequence);
}

TEST_P(Contract, ReleaseReturnsBuffers) {
  const std::size_t live = ctx->live_buffers();
  {
    Buf a(ctx, ElemType::F32, 100, 1);
    Buf b(ctx, ElemType::F64, 3, 3);
    EXPECT_EQ(ctx->live_buffers(), live + 2);
  }
  EXPECT_EQ(ctx->live_buffers(), live);
}

INSTANTIATE_TEST_SUITE_P(Backends, Contract, ::testing::Values("reference", "device-sim"),
                         [](const auto& info) { return info.param == "reference" ? "reference" : "devsim"; });

// Non-reduction primitives give identical bits on both backends; reductions
// agree to 1e-12 relative in F64.
TEST(Interchangeability, SameCallsSameResults) {
  auto ref = make_ctx("reference");
  auto dev = make_ctx("device-sim");
  const std::size_t m = 37, k = 29, n = 41;
  const auto av = seeded_values<double>(m * k, 31);
  const auto bv = seeded_values<double>(k * n, 32);
  const auto cv = seeded_values<double>(m * n, 33);
  auto run = [&](const std::shared_ptr<BackendContext>& ctx) {
    auto a = make_buf<double>(ctx, m, k, av);
    auto b = make_buf<double>(ctx, k, n, bv);
    auto c = make_buf<double>(ctx, m, n, cv);
    Buf t(ctx, ElemType::F64, m, n);
    ctx->gemm(false, false, 0.5, a->region(), b->region(), 2.0, c->region());
    const std::vector<Region> ins{c->region(), c->region()};
    ctx->elem(ElemProgram::parse("(a*b)+a*0.25"), ins, t.region());
    ctx->axpy(-1.5, c->region(), t.region());
    auto out = ctx->download<double>(t.region());
    out.push_back(ctx->reduce_scalar(ReduceKind::Sum, t.region()));
    return out;
  };
  const auto r = run(ref);
  const auto d = run(dev);
  ASSERT_EQ(r.size(), d.size());
  for (std::size_t i = 0; i + 1 < r.size(); ++i) ASSERT_EQ(r[i], d[i]) << i;
  EXPECT_LE(std::abs(r.back() - d.back()) / std::abs(r.back()), 1e-12);
}
