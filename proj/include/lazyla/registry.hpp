#pragma once

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "lazyla/context.hpp"

namespace lazyla {

struct DeviceInfo {
  std::string backend;
  int device = 0;
  std::string description;

  friend bool operator==(const DeviceInfo&, const DeviceInfo&) = default;
};

struct RegistryEntry {
  std::string name;
  std::function<std::unique_ptr<Backend>(int device, const ContextOptions&)> factory;
  std::vector<std::pair<int, std::string>> devices;
  // Lower ranks are preferred by select_default().
  int preference = 0;
};

// Process-wide backend table. The built-in "reference" and "device-sim"
// entries are present from first use; further entries may be added during
// startup.
class BackendRegistry {
 public:
  static BackendRegistry& instance();

  void add(RegistryEntry entry);
  void clear();  // test hook; leaves the registry empty
  void reset();  // back to the built-in entries

  std::vector<std::string> names() const;
  const RegistryEntry* find(std::string_view name) const;
  const std::vector<RegistryEntry>& entries() const noexcept { return entries_; }

 private:
  BackendRegistry();
  std::vector<RegistryEntry> entries_;
};

// Creates a context for an explicit backend and device. The first init for
// a (backend, device) compiles the predefined kernels and writes the cache
// manifest; later inits load from the manifest.
std::shared_ptr<BackendContext> init(std::string_view backend, int device = 0, bool verbose = false,
                                     const ContextOptions& options = {});

// Honors $LA_BACKEND when set, otherwise the most preferred registered
// backend (device-sim before reference), device 0.
std::shared_ptr<BackendContext> select_default(const ContextOptions& options = {});

std::vector<DeviceInfo> list_devices();

// The process-wide context used by containers constructed without one.
// Created by select_default() on first use.
std::shared_ptr<BackendContext> default_context();
void set_default_context(std::shared_ptr<BackendContext> ctx);

}  // namespace lazyla
