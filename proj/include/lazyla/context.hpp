#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lazyla/backend.hpp"
#include "lazyla/error.hpp"
#include "lazyla/kernel_cache.hpp"
#include "lazyla/rng.hpp"
#include "lazyla/rules.hpp"
#include "lazyla/types.hpp"

namespace lazyla {

enum class CallKind : std::uint8_t { Gemm, Gemv, Axpy, ElemKernel, ReduceKernel, Fill, Copy };

const char* to_string(CallKind kind) noexcept;

struct LaunchRecord {
  std::uint64_t sequence = 0;
  CallKind kind = CallKind::Copy;
  std::string kernel;
  std::size_t elements = 0;
  std::vector<Dims> dims;
  std::size_t partitions = 1;
};

enum class TransferDirection : std::uint8_t { HostToDevice, DeviceToHost };

struct TransferStats {
  std::size_t host_to_device = 0;
  std::size_t device_to_host = 0;

  std::size_t total() const noexcept { return host_to_device + device_to_host; }
};

struct ContextOptions {
  // Empty: default_kernel_cache_dir().
  std::filesystem::path kernel_cache_dir;
  std::chrono::milliseconds compile_delay{0};
  // 0: $LA_DEVSIM_WORKERS, else hardware concurrency.
  std::size_t workers = 0;
  std::size_t tile = 32;
  std::uint64_t seed = 0;
  std::ostream* log = nullptr;
};

// One compute device. Owns the backend, its kernel cache, the launch ledger,
// transfer counters and the fill RNG stream. All calls are serialized; the
// ledger sequence numbers give the execution order.
class BackendContext : public std::enable_shared_from_this<BackendContext> {
 public:
  BackendContext(std::unique_ptr<Backend> backend, const ContextOptions& options = {},
                 bool verbose = false);
  ~BackendContext();

  BackendContext(const BackendContext&) = delete;
  BackendContext& operator=(const BackendContext&) = delete;

  std::string_view backend_name() const noexcept { return backend_->name(); }
  int device() const noexcept { return backend_->device(); }
  std::string description() const { return backend_->description(); }
  std::span<const ElemType> capabilities() const noexcept { return capabilities_; }
  bool supports(ElemType elem) const noexcept;

  // nullptr for backends without runtime compilation.
  const KernelCache* kernel_cache() const noexcept { return cache_.get(); }
  std::size_t kernel_compilations() const;

  std::vector<LaunchRecord> ledger() const;
  std::size_t launch_count() const;
  TransferStats transfers() const;
  std::size_t transfer_count() const { return transfers().total(); }
  std::size_t allocation_count() const;
  std::size_t live_buffers() const;

  void seed(std::uint64_t seed);

  // Rule families used when containers in this context are assigned.
  RuleSet rules() const;
  void set_rules(const RuleSet& rules);

  BufferId allocate(ElemType elem, std::size_t count);
  void release(BufferId id) noexcept;
  ElemType elem_type(BufferId id) const;
  std::size_t capacity(BufferId id) const;

  // Counted transfers of region.count() elements.
  template <Scalar T>
  void upload(const Region& dst, std::span<const T> values);
  template <Scalar T>
  std::vector<T> download(const Region& src);

  void fill(FillKind kind, const Region& out, double value = 0.0);
  void copy(const Region& src, const Region& dst);
  void axpy(double alpha, const Region& x, const Region& y);
  void gemm(bool trans_a, bool trans_b, double alpha, const Region& a, const Region& b,
            double beta, const Region& c);
  void gemv(bool trans_a, double alpha, const Region& a, const Region& x, double beta,
            const Region& y);
  void elem(const ElemProgram& program, std::span<const Region> inputs, const Region& out);
  void reduce(ReduceKind kind, const ElemProgram& map, std::span<const Region> inputs,
              const std::optional<Region>& center, const ReduceEpilogue& epilogue,
              const Region& out);

  // reduce() into a scratch element followed by a one-element download.
  double reduce_scalar(ReduceKind kind, const Region& x);

 private:
  void check_region(const Region& r, ElemType elem, const char* what) const;
  ElemType common_elem(std::span<const Region> regions) const;
  void require_kernel(std::string_view name, ElemType elem);
  void record(CallKind kind, std::string kernel, std::size_t elements, std::vector<Dims> dims,
              std::size_t partitions);
  void count_transfer(TransferDirection direction, std::size_t elements);
  void write_raw(const Region& dst, const void* host, ElemType elem);
  void read_raw(const Region& src, void* host, ElemType elem);

  std::unique_ptr<Backend> backend_;
  std::unique_ptr<KernelCache> cache_;
  std::vector<ElemType> capabilities_;

  mutable std::recursive_mutex mutex_;
  std::vector<LaunchRecord> ledger_;
  TransferStats transfers_;
  std::size_t allocations_ = 0;
  CounterRng rng_;
  RuleSet rules_;
};

template <Scalar T>
void BackendContext::upload(const Region& dst, std::span<const T> values) {
  if (values.size() != dst.count()) {
    throw ContractError("upload of " + std::to_string(values.size()) + " values into a region of " +
                        std::to_string(dst.count()));
  }
  write_raw(dst, values.data(), elem_type_of<T>);
}

template <Scalar T>
std::vector<T> BackendContext::download(const Region& src) {
  std::vector<T> out(src.count());
  read_raw(src, out.data(), elem_type_of<T>);
  return out;
}

}  // namespace lazyla
