#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lazyla/program.hpp"
#include "lazyla/types.hpp"

namespace lazyla {

enum class FillKind : std::uint8_t { Zeros, Ones, Identity, RandUniform, Value };

const char* to_string(FillKind kind) noexcept;

struct FillSpec {
  FillKind kind = FillKind::Zeros;
  double value = 0.0;
  std::uint64_t rng_key = 0;
  std::uint64_t rng_counter = 0;
};

enum class ReduceKind : std::uint8_t { Sum, Min, Max, SumSq };

const char* to_string(ReduceKind kind) noexcept;

// result = scale * (r / divisor); out = beta == 0 ? result : beta * out + result
struct ReduceEpilogue {
  double divisor = 1.0;
  double scale = 1.0;
  double beta = 0.0;

  friend bool operator==(const ReduceEpilogue&, const ReduceEpilogue&) = default;
};

// The primitive set a compute backend implements. Callers go through
// BackendContext, which validates shapes and buffer ownership, serializes
// calls, consults the kernel cache and keeps the ledger; a Backend only
// computes. Buffer contents are reachable solely through write() and read().
//
// Every compute call returns the number of partitions the index space was
// split into.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::string_view name() const noexcept = 0;
  virtual int device() const noexcept = 0;
  virtual std::string description() const = 0;
  virtual bool compiles_kernels() const noexcept = 0;

  // Throws ResourceError with the requested byte count.
  virtual BufferId allocate(ElemType elem, std::size_t count) = 0;
  virtual void release(BufferId id) = 0;
  virtual bool owns(BufferId id) const noexcept = 0;
  virtual std::size_t live_buffers() const noexcept = 0;
  virtual std::size_t capacity(BufferId id) const = 0;
  virtual ElemType elem_type(BufferId id) const = 0;

  // host holds dst.count() packed column-major values of the buffer's type.
  virtual void write(const Region& dst, const void* host) = 0;
  virtual void read(const Region& src, void* host) const = 0;

  virtual std::size_t fill(const FillSpec& spec, const Region& out) = 0;
  virtual std::size_t copy(const Region& src, const Region& dst) = 0;
  virtual std::size_t axpy(double alpha, const Region& x, const Region& y) = 0;
  virtual std::size_t gemm(bool trans_a, bool trans_b, double alpha, const Region& a,
                           const Region& b, double beta, const Region& c) = 0;
  virtual std::size_t gemv(bool trans_a, double alpha, const Region& a, const Region& x,
                           double beta, const Region& y) = 0;
  virtual std::size_t elem(const ElemProgram& program, std::span<const Region> inputs,
                           const Region& out) = 0;
  // map is applied to the inputs before reducing; for SumSq the value at
  // center (if given) is subtracted before squaring.
  virtual std::size_t reduce(ReduceKind kind, const ElemProgram& map,
                             std::span<const Region> inputs, const Region* center,
                             const ReduceEpilogue& epilogue, const Region& out) = 0;
};

struct ReferenceOptions {
  std::size_t memory_limit_bytes = std::size_t{64} << 30;
};

// Sequential loops, left-to-right reductions. The correctness oracle.
std::unique_ptr<Backend> make_reference_backend(const ReferenceOptions& options = {});

struct DevsimOptions {
  std::size_t workers = 4;
  std::size_t tile = 32;
  // Index ranges shorter than this run as a single partition.
  std::size_t grain = 4096;
  std::size_t memory_limit_bytes = std::size_t{4} << 30;
};

// Device-like backend: private buffer space, worker-pool execution,
// balanced-tree reductions, tiled GEMM.
std::unique_ptr<Backend> make_devsim_backend(const DevsimOptions& options = {});

}  // namespace lazyla
