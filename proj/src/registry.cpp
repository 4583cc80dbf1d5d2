#include "lazyla/registry.hpp"

#include <algorithm>
#include <cstdlib>
#include <mutex>
#include <thread>

namespace lazyla {

namespace {

std::size_t devsim_workers(const ContextOptions& options) {
  if (options.workers > 0) return options.workers;
  if (const char* env = std::getenv("LA_DEVSIM_WORKERS"); env && *env) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*end != '\0' || v == 0) {
      throw ConfigurationError(std::string("LA_DEVSIM_WORKERS must be a positive integer, got '") + env + "'");
    }
    return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<RegistryEntry> builtin_entries() {
  std::vector<RegistryEntry> out;
  out.push_back({"device-sim",
                 [](int, const ContextOptions& options) {
                   DevsimOptions d;
                   d.workers = devsim_workers(options);
                   d.tile = options.tile == 0 ? 32 : options.tile;
                   return make_devsim_backend(d);
                 },
                 {{0, "simulated device (worker pool, tiled gemm, tree reductions)"}},
                 0});
  out.push_back({"reference",
                 [](int, const ContextOptions&) { return make_reference_backend(); },
                 {{0, "sequential host reference"}},
                 1});
  return out;
}

std::string joined_names() {
  std::string s;
  for (const std::string& n : BackendRegistry::instance().names()) {
    if (!s.empty()) s += ", ";
    s += n;
  }
  return s.empty() ? "(none)" : s;
}

std::mutex& default_mutex() {
  static std::mutex m;
  return m;
}

std::shared_ptr<BackendContext>& default_slot() {
  static std::shared_ptr<BackendContext> ctx;
  return ctx;
}

}  // namespace

BackendRegistry& BackendRegistry::instance() {
  static BackendRegistry registry;
  return registry;
}

BackendRegistry::BackendRegistry() : entries_(builtin_entries()) {}

void BackendRegistry::add(RegistryEntry entry) {
  if (entry.name.empty() || !entry.factory) throw ConfigurationError("registry entry needs a name and a factory");
  if (find(entry.name)) throw ConfigurationError("backend '" + entry.name + "' is already registered");
  entries_.push_back(std::move(entry));
}

void BackendRegistry::clear() { entries_.clear(); }

void BackendRegistry::reset() { entries_ = builtin_entries(); }

std::vector<std::string> BackendRegistry::names() const {
  std::vector<std::string> out;
  for (const RegistryEntry& e : entries_) out.push_back(e.name);
  std::sort(out.begin(), out.end());
  return out;
}

const RegistryEntry* BackendRegistry::find(std::string_view name) const {
  for (const RegistryEntry& e : entries_) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

std::shared_ptr<BackendContext> init(std::string_view backend, int device, bool verbose,
                                     const ContextOptions& options) {
  const RegistryEntry* entry = BackendRegistry::instance().find(backend);
  if (!entry) {
    throw ConfigurationError("unknown backend '" + std::string(backend) + "'; registered: " + joined_names());
  }
  const bool known = std::any_of(entry->devices.begin(), entry->devices.end(),
                                 [device](const auto& d) { return d.first == device; });
  if (!known) {
    throw ConfigurationError("backend '" + entry->name + "' has no device " + std::to_string(device));
  }
  return std::make_shared<BackendContext>(entry->factory(device, options), options, verbose);
}

std::shared_ptr<BackendContext> select_default(const ContextOptions& options) {
  const BackendRegistry& registry = BackendRegistry::instance();
  if (registry.entries().empty()) throw ConfigurationError("no backends are registered");
  if (const char* env = std::getenv("LA_BACKEND"); env && *env) {
    if (!registry.find(env)) {
      throw ConfigurationError("LA_BACKEND='" + std::string(env) + "' is not a registered backend; registered: " +
                               joined_names());
    }
    return init(env, 0, false, options);
  }
  const auto best = std::min_element(registry.entries().begin(), registry.entries().end(),
                                     [](const RegistryEntry& a, const RegistryEntry& b) {
                                       return a.preference < b.preference;
                                     });
  const int device = best->devices.empty() ? 0 : best->devices.front().first;
  return init(best->name, device, false, options);
}

std::vector<DeviceInfo> list_devices() {
  std::vector<DeviceInfo> out;
  for (const RegistryEntry& e : BackendRegistry::instance().entries()) {
    for (const auto& [id, text] : e.devices) out.push_back({e.name, id, text});
  }
  std::sort(out.begin(), out.end(), [](const DeviceInfo& a, const DeviceInfo& b) {
    return a.backend != b.backend ? a.backend < b.backend : a.device < b.device;
  });
  return out;
}

std::shared_ptr<BackendContext> default_context() {
  std::lock_guard lock(default_mutex());
  if (!default_slot()) default_slot() = select_default();
  return default_slot();
}

void set_default_context(std::shared_ptr<BackendContext> ctx) {
  std::lock_guard lock(default_mutex());
  default_slot() = std::move(ctx);
}

}  // namespace lazyla
