#include "lazyla/kernel_cache.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <system_error>
#include <thread>

#include "lazyla/error.hpp"

namespace lazyla {

const std::vector<KernelSource>& predefined_kernels() {
  static const std::vector<KernelSource> kernels = {
      {"fill_zeros", "out[i] = 0"},
      {"fill_ones", "out[i] = 1"},
      {"fill_identity", "out[i,j] = i == j ? 1 : 0"},
      {"fill_randu", "out[i] = u01(splitmix64(key + (ctr + i + 1) * golden))"},
      {"fill_value", "out[i] = v"},
      {"elem_add", "out[i] = a[i] + b[i]"},
      {"elem_sub", "out[i] = a[i] - b[i]"},
      {"elem_mul", "out[i] = a[i] * b[i]"},
      {"elem_scalar_add", "out[i] = a[i] + s"},
      {"elem_scalar_mul", "out[i] = a[i] * s"},
      {"elem_neg", "out[i] = -a[i]"},
      {"elem_diag_add", "out[i * (ld + 1)] = a[i * (ld + 1)] + s"},
      {"reduce_sum", "tree(+, 0, x[i])"},
      {"reduce_min", "tree(min, +inf, x[i])"},
      {"reduce_max", "tree(max, -inf, x[i])"},
      {"reduce_sumsq", "tree(+, 0, (x[i] - c) * (x[i] - c))"},
      {"axpy", "y[i] = alpha * x[i] + y[i]"},
      {"gemm", "C = alpha * op(A) * op(B) + beta * C; tiled"},
      {"gemv", "y = alpha * op(A) * x + beta * y"},
      {"copy", "dst[i] = src[i]; strided"},
  };
  return kernels;
}

std::uint64_t kernel_fingerprint(std::string_view source, ElemType elem) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  feed(source);
  feed("|");
  feed(to_string(elem));
  return h;
}

std::filesystem::path default_kernel_cache_dir() {
  if (const char* dir = std::getenv("LA_KERNEL_CACHE_DIR"); dir && *dir) return dir;
  if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg) {
    return std::filesystem::path(xdg) / "lazyla";
  }
  if (const char* home = std::getenv("HOME"); home && *home) {
    return std::filesystem::path(home) / ".cache" / "lazyla";
  }
  return std::filesystem::temp_directory_path() / "lazyla";
}

namespace {

std::optional<ElemType> parse_elem(std::string_view s) {
  if (s == "f32") return ElemType::F32;
  if (s == "f64") return ElemType::F64;
  return std::nullopt;
}

}  // namespace

std::vector<KernelDescriptor> read_manifest(const std::filesystem::path& path) {
  std::vector<KernelDescriptor> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) continue;
    const auto elem = parse_elem(std::string_view(line).substr(t1 + 1, t2 - t1 - 1));
    const std::string hex = line.substr(t2 + 1);
    if (!elem || hex.size() != 16) continue;
    char* end = nullptr;
    const std::uint64_t fp = std::strtoull(hex.c_str(), &end, 16);
    if (end != hex.c_str() + hex.size()) continue;
    out.push_back({line.substr(0, t1), *elem, fp});
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, std::span<const KernelDescriptor> entries) {
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) {
      throw ConfigurationError("cannot write kernel cache manifest " + tmp.string());
    }
    char hex[17];
    for (const KernelDescriptor& d : entries) {
      std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(d.fingerprint));
      out << d.name << '\t' << to_string(d.elem) << '\t' << hex << '\n';
    }
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw ConfigurationError("cannot install kernel cache manifest " + path.string());
}

KernelCache::KernelCache(std::string backend, int device, std::filesystem::path dir,
                         std::chrono::milliseconds compile_delay)
    : backend_(std::move(backend)),
      device_(device),
      manifest_path_(std::move(dir) / (backend_ + "-dev" + std::to_string(device_) + ".manifest")),
      compile_delay_(compile_delay) {}

KernelHandle KernelCache::compile_locked(const KernelDescriptor& desc) {
  if (compile_delay_.count() > 0) std::this_thread::sleep_for(compile_delay_);
  ++compiled_;
  const auto handle = static_cast<KernelHandle>(entries_.size());
  entries_[{desc.name, desc.elem}] = {desc, handle};
  return handle;
}

void KernelCache::prepare(std::span<const KernelSource> sources, std::span<const ElemType> elems) {
  std::lock_guard lock(mutex_);
  const std::vector<KernelDescriptor> on_disk = read_manifest(manifest_path_);
  std::map<std::pair<std::string, ElemType>, std::uint64_t> known;
  for (const KernelDescriptor& d : on_disk) known[{d.name, d.elem}] = d.fingerprint;

  bool changed = false;
  for (ElemType elem : elems) {
    for (const KernelSource& src : sources) {
      const KernelDescriptor desc{src.name, elem, kernel_fingerprint(src.source, elem)};
      if (entries_.count({desc.name, elem}) != 0) continue;
      const auto it = known.find({desc.name, elem});
      if (it != known.end() && it->second == desc.fingerprint) {
        ++loaded_;
        const auto handle = static_cast<KernelHandle>(entries_.size());
        entries_[{desc.name, elem}] = {desc, handle};
      } else {
        compile_locked(desc);
        changed = true;
      }
    }
  }
  if (changed || on_disk.size() != entries_.size()) {
    std::vector<KernelDescriptor> all;
    all.reserve(entries_.size());
    for (const auto& [key, value] : entries_) all.push_back(value.first);
    std::sort(all.begin(), all.end());
    write_manifest(manifest_path_, all);
  }
}

bool KernelCache::contains(std::string_view name, ElemType elem) const {
  std::lock_guard lock(mutex_);
  return entries_.count({std::string(name), elem}) != 0;
}

KernelHandle KernelCache::require(std::string_view name, ElemType elem) {
  std::lock_guard lock(mutex_);
  const auto it = entries_.find({std::string(name), elem});
  if (it != entries_.end()) return it->second.second;
  for (const KernelSource& src : predefined_kernels()) {
    if (src.name == name) return compile_locked({src.name, elem, kernel_fingerprint(src.source, elem)});
  }
  throw ContractError("no predefined kernel named '" + std::string(name) + "'");
}

std::size_t KernelCache::compile_count() const {
  std::lock_guard lock(mutex_);
  return compiled_;
}

std::size_t KernelCache::loaded_count() const {
  std::lock_guard lock(mutex_);
  return loaded_;
}

std::vector<KernelDescriptor> KernelCache::descriptors() const {
  std::lock_guard lock(mutex_);
  std::vector<KernelDescriptor> all;
  for (const auto& [key, value] : entries_) all.push_back(value.first);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace lazyla
