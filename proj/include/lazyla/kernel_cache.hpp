#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "lazyla/types.hpp"

namespace lazyla {

struct KernelSource {
  std::string name;
  std::string source;
};

// The kernels every device backend compiles at startup. Fixed list,
// one entry per name; each is compiled once per element type.
const std::vector<KernelSource>& predefined_kernels();

// FNV-1a over the kernel source and element type name.
std::uint64_t kernel_fingerprint(std::string_view source, ElemType elem) noexcept;

struct KernelDescriptor {
  std::string name;
  ElemType elem = ElemType::F32;
  std::uint64_t fingerprint = 0;

  friend bool operator==(const KernelDescriptor&, const KernelDescriptor&) = default;
  friend auto operator<=>(const KernelDescriptor& a, const KernelDescriptor& b) {
    return std::tie(a.elem, a.name, a.fingerprint) <=> std::tie(b.elem, b.name, b.fingerprint);
  }
};

// $LA_KERNEL_CACHE_DIR, else $XDG_CACHE_HOME/lazyla, else ~/.cache/lazyla,
// else <tmp>/lazyla.
std::filesystem::path default_kernel_cache_dir();

// Manifest format: one "name\telem\tfingerprint" line per kernel, the
// fingerprint as 16 lowercase hex digits. Lines that fail to parse are
// dropped on read, which makes those kernels recompile.
std::vector<KernelDescriptor> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, std::span<const KernelDescriptor> entries);

using KernelHandle = std::uint32_t;

// Compiled kernels for one (backend, device). A descriptor whose name, elem
// and fingerprint all match the on-disk manifest is loaded without
// compiling. Thread-safe.
class KernelCache {
 public:
  KernelCache(std::string backend, int device, std::filesystem::path dir,
              std::chrono::milliseconds compile_delay = std::chrono::milliseconds{0});

  KernelCache(const KernelCache&) = delete;
  KernelCache& operator=(const KernelCache&) = delete;

  // Makes every (source, elem) pair available; rewrites the manifest if
  // anything had to be compiled.
  void prepare(std::span<const KernelSource> sources, std::span<const ElemType> elems);

  bool contains(std::string_view name, ElemType elem) const;

  // Returns the handle, compiling the predefined kernel on demand if it was
  // never prepared. Throws ContractError for names outside the predefined set.
  KernelHandle require(std::string_view name, ElemType elem);

  std::size_t compile_count() const;
  std::size_t loaded_count() const;
  std::vector<KernelDescriptor> descriptors() const;

  const std::filesystem::path& manifest_path() const noexcept { return manifest_path_; }

 private:
  KernelHandle compile_locked(const KernelDescriptor& desc);

  std::string backend_;
  int device_;
  std::filesystem::path manifest_path_;
  std::chrono::milliseconds compile_delay_;

  mutable std::mutex mutex_;
  std::map<std::pair<std::string, ElemType>, std::pair<KernelDescriptor, KernelHandle>> entries_;
  std::size_t compiled_ = 0;
  std::size_t loaded_ = 0;
};

}  // namespace lazyla
