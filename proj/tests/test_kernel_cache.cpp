#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <thread>

#include "support.hpp"

using namespace lazyla;
using namespace testing_support;

namespace {

std::shared_ptr<BackendContext> devsim_in(const std::filesystem::path& dir) {
  ContextOptions o;
  o.kernel_cache_dir = dir;
  o.workers = 2;
  return init("device-sim", 0, false, o);
}

std::vector<std::string> lines_of(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

void write_lines(const std::filesystem::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p, std::ios::trunc);
  for (const auto& l : lines) out << l << "\n";
}

constexpr std::size_t kAll = 20 * 2;

}  // namespace

TEST(KernelCache, PredefinedSetIsFixed) {
  const auto& k = predefined_kernels();
  EXPECT_EQ(k.size(), 20u);
  std::set<std::string> names;
  for (const auto& s : k) names.insert(s.name);
  EXPECT_EQ(names.size(), k.size());
  for (const char* n : {"gemm", "gemv", "axpy", "copy", "reduce_sum", "elem_add", "fill_randu"}) {
    EXPECT_TRUE(names.count(n)) << n;
  }
}

TEST(KernelCache, FingerprintDependsOnSourceAndElem) {
  EXPECT_EQ(kernel_fingerprint("x", ElemType::F32), kernel_fingerprint("x", ElemType::F32));
  EXPECT_NE(kernel_fingerprint("x", ElemType::F32), kernel_fingerprint("x", ElemType::F64));
  EXPECT_NE(kernel_fingerprint("x", ElemType::F32), kernel_fingerprint("y", ElemType::F32));
}

TEST(KernelCache, ColdWarmAndDeletedManifest) {
  TempDir dir;
  {
    auto cold = devsim_in(dir.path());
    EXPECT_EQ(cold->kernel_compilations(), kAll);
    EXPECT_TRUE(std::filesystem::exists(cold->kernel_cache()->manifest_path()));
    EXPECT_EQ(lines_of(cold->kernel_cache()->manifest_path()).size(), kAll);
  }
  {
    auto warm = devsim_in(dir.path());
    EXPECT_EQ(warm->kernel_compilations(), 0u);
    EXPECT_EQ(warm->kernel_cache()->loaded_count(), kAll);
    // Work on a warm context never compiles.
    mat a(8, 8, fill::randu, warm);
    mat b = a * a + 1.0;
    EXPECT_EQ(warm->kernel_compilations(), 0u);
    std::filesystem::remove(warm->kernel_cache()->manifest_path());
  }
  auto again = devsim_in(dir.path());
  EXPECT_EQ(again->kernel_compilations(), kAll);
}

TEST(KernelCache, StaleOrMalformedEntriesRecompileOnlyThose) {
  TempDir dir;
  std::filesystem::path manifest;
  {
    auto ctx = devsim_in(dir.path());
    manifest = ctx->kernel_cache()->manifest_path();
  }
  auto lines = lines_of(manifest);
  ASSERT_EQ(lines.size(), kAll);
  // Flip one fingerprint digit, mangle another line.
  std::string& stale = lines[3];
  stale.back() = stale.back() == '0' ? '1' : '0';
  lines[7] = "not a manifest line";
  write_lines(manifest, lines);

  auto ctx = devsim_in(dir.path());
  EXPECT_EQ(ctx->kernel_compilations(), 2u);
  EXPECT_EQ(ctx->kernel_cache()->loaded_count(), kAll - 2);
  // The rewritten manifest is clean again.
  EXPECT_EQ(read_manifest(manifest).size(), kAll);
  EXPECT_EQ(devsim_in(dir.path())->kernel_compilations(), 0u);
}

TEST(KernelCache, ManifestRoundTrip) {
  TempDir dir;
  const std::vector<KernelDescriptor> entries{
      {"gemm", ElemType::F32, 0x0123456789abcdefULL},
      {"axpy", ElemType::F64, 1},
      {"copy", ElemType::F64, 0xffffffffffffffffULL},
  };
  const auto path = dir.path() / "m.manifest";
  write_manifest(path, entries);
  EXPECT_EQ(read_manifest(path), entries);
  EXPECT_EQ(lines_of(path).front(), "gemm\tf32\t0123456789abcdef");
  EXPECT_TRUE(read_manifest(dir.path() / "missing").empty());
}

TEST(KernelCache, RequireUnknownNameIsContractError) {
  TempDir dir;
  KernelCache cache("device-sim", 0, dir.path());
  EXPECT_THROW(cache.require("no_such_kernel", ElemType::F32), ContractError);
  // Predefined names compile on demand when they were never prepared.
  EXPECT_NO_THROW(cache.require("gemm", ElemType::F64));
  EXPECT_EQ(cache.compile_count(), 1u);
  EXPECT_TRUE(cache.contains("gemm", ElemType::F64));
  EXPECT_FALSE(cache.contains("gemm", ElemType::F32));
}

TEST(KernelCache, CompileDelayIsPaidOnlyWhenCold) {
  TempDir dir;
  const std::vector<ElemType> elems{ElemType::F32};
  auto timed = [&] {
    KernelCache cache("device-sim", 0, dir.path(), std::chrono::milliseconds(2));
    const auto t0 = std::chrono::steady_clock::now();
    cache.prepare(predefined_kernels(), elems);
    return std::chrono::steady_clock::now() - t0;
  };
  EXPECT_GE(timed(), std::chrono::milliseconds(40));
  EXPECT_LT(timed(), std::chrono::milliseconds(40));
}

TEST(KernelCache, ConcurrentRequireHandsOutStableHandles) {
  TempDir dir;
  KernelCache cache("device-sim", 0, dir.path());
  std::vector<KernelHandle> seen(8);
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < seen.size(); ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 100; ++i) seen[t] = cache.require("axpy", ElemType::F32);
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(cache.compile_count(), 1u);
  for (KernelHandle h : seen) EXPECT_EQ(h, seen.front());
}

TEST(KernelCache, DirectoryComesFromEnvironment) {
  const char* old = std::getenv("LA_KERNEL_CACHE_DIR");
  const std::string saved = old ? old : "";
  ::setenv("LA_KERNEL_CACHE_DIR", "/tmp/lazyla-env-probe", 1);
  EXPECT_EQ(default_kernel_cache_dir(), std::filesystem::path("/tmp/lazyla-env-probe"));
  if (old) {
    ::setenv("LA_KERNEL_CACHE_DIR", saved.c_str(), 1);
  } else {
    ::unsetenv("LA_KERNEL_CACHE_DIR");
  }
}

TEST(KernelCache, ReferenceBackendHasNoCache) {
  auto ref = make_ctx("reference");
  EXPECT_EQ(ref->kernel_cache(), nullptr);
  EXPECT_EQ(ref->kernel_compilations(), 0u);
}
