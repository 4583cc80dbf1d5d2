#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include "support.hpp"

using namespace lazyla;
using namespace testing_support;

class Interop : public ::testing::TestWithParam<std::string> {
 protected:
  void SetUp() override { ctx = make_ctx(GetParam()); }
  std::shared_ptr<BackendContext> ctx;
};

TEST_P(Interop, ToHostOfIdentity) {
  mat i(2, 2, fill::eye, ctx);
  const std::size_t launches = ctx->launch_count();
  const TransferStats before = ctx->transfers();
  const HostMatrix<double> h = to_host(i);
  EXPECT_EQ(h.dims, (Dims{2, 2, 1}));
  EXPECT_EQ(h(0, 0), 1.0);
  EXPECT_EQ(h(0, 1), 0.0);
  EXPECT_EQ(h(1, 0), 0.0);
  EXPECT_EQ(h(1, 1), 1.0);
  EXPECT_EQ(ctx->transfers().device_to_host, before.device_to_host + 4);
  EXPECT_EQ(ctx->transfers().host_to_device, before.host_to_device);
  EXPECT_EQ(ctx->launch_count(), launches);
}

TEST_P(Interop, RoundTripsAreBitwise) {
  HostMatrix<double> h(5, 3);
  h.values = seeded_values<double>(15, 4);
  h.values[2] = -0.0;
  h.values[7] = 1e-310;
  const std::size_t launches = ctx->launch_count();
  const TransferStats before = ctx->transfers();
  const mat m = to_device<double>(h, ctx);
  EXPECT_EQ(ctx->transfers().host_to_device, before.host_to_device + 15);
  const HostMatrix<double> back = to_host(m);
  EXPECT_EQ(std::memcmp(back.values.data(), h.values.data(), 15 * sizeof(double)), 0);
  EXPECT_EQ(back.dims, h.dims);
  EXPECT_EQ(ctx->launch_count(), launches);

  const fmat d = upload<float>(2, 3, seeded_values<float>(6, 1), ctx);
  EXPECT_EQ(host(to_device<float>(to_host(d), ctx)), host(d));
}

TEST_P(Interop, NarrowingNeedsExplicitFlag) {
  HostMatrix<double> h(1, 2);
  h.values = {0.1, 1e40};
  EXPECT_THROW((void)to_device<float>(h, ctx), ContractError);
  const fmat f = to_device<float>(h, ctx, Conversion::AllowNarrowing);
  EXPECT_EQ(host(f)[0], static_cast<float>(0.1));
  EXPECT_TRUE(std::isinf(host(f)[1]));

  HostMatrix<float> g(1, 1);
  g.values = {0.1f};
  EXPECT_EQ(host(to_device<double>(g, ctx)), (std::vector<double>{static_cast<double>(0.1f)}));
}

INSTANTIATE_TEST_SUITE_P(Backends, Interop, ::testing::Values("reference", "device-sim"),
                         [](const auto& info) { return info.param == "reference" ? "reference" : "devsim"; });

TEST(Csv, ParseSimple) {
  const auto h = csv_parse<double>("1,2\n3,4");
  EXPECT_EQ(h.dims, (Dims{2, 2, 1}));
  EXPECT_EQ(h(0, 0), 1.0);
  EXPECT_EQ(h(0, 1), 2.0);
  EXPECT_EQ(h(1, 0), 3.0);
  EXPECT_EQ(h(1, 1), 4.0);
  EXPECT_EQ(csv_parse<double>("1.5, -2\r\n3e2,4\n").values, (std::vector<double>{1.5, 300, -2, 4}));
}

TEST(Csv, RaggedRowReportsLine) {
  try {
    (void)csv_parse<double>("1,2\n3");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.category(), ErrorCategory::Parse);
  }
}

TEST(Csv, MalformedNumberReportsLine) {
  try {
    (void)csv_parse<double>("1,2\n3,4\n5,x\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW((void)csv_parse<double>("1,,2"), ParseError);
}

TEST(Csv, SaveLoadRoundTripIsBitwise) {
  TempDir dir;
  HostMatrix<double> h(3, 3);
  h.values = seeded_values<double>(9, 17);
  h.values[4] = 1.0 / 3.0;
  const auto path = dir.path() / "m.csv";
  csv_save(h, path);
  EXPECT_EQ(csv_load<double>(path), h);

  HostMatrix<float> f(2, 4);
  f.values = seeded_values<float>(8, 18);
  csv_save(f, dir.path() / "f.csv");
  EXPECT_EQ(csv_load<float>(dir.path() / "f.csv"), f);
}

TEST(Csv, WriteFormat) {
  HostMatrix<double> h(2, 2);
  h.values = {1, 3, 2, 0.1};
  std::ostringstream os;
  csv_write(os, h);
  EXPECT_EQ(os.str(), "1,2\n3,0.10000000000000001\n");
}

TEST(Csv, MissingFileIsParseError) {
  TempDir dir;
  EXPECT_THROW((void)csv_load<double>(dir.path() / "nope.csv"), Error);
}
