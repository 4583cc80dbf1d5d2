#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lazyla/context.hpp"
#include "lazyla/types.hpp"

namespace lazyla {

enum class BenchTask { Sum, Axpy, MatMul, LuDecomp };

const char* to_string(BenchTask task) noexcept;
// "sum", "axpy", "matmul", "lu"; throws ConfigurationError otherwise.
BenchTask parse_task(std::string_view text);
// Vector tasks take n as an element count, matrix tasks as n x n.
bool is_vector_task(BenchTask task) noexcept;

struct BenchResult {
  BenchTask task = BenchTask::Sum;
  std::string backend;
  std::size_t n = 0;
  double seconds_median = 0.0;
  // Per timed evaluation.
  std::size_t launches = 0;
  std::size_t transfers = 0;
};

struct BenchConfig {
  std::vector<BenchTask> tasks;
  std::vector<std::size_t> sizes;
  std::vector<std::string> backends;
  std::size_t repeats = 5;
  std::uint64_t seed = 42;
  ElemType elem = ElemType::F32;
  ContextOptions context;
};

// For every (task, size, backend): build the inputs, run one untimed
// evaluation and compare it against the reference backend, run one warm-up,
// then time `repeats` evaluations and keep the median. Context creation,
// kernel compilation and input generation are outside the timed region.
// Throws ConfigurationError for bad configs and ContractError when an
// oracle check fails.
std::vector<BenchResult> run_bench(const BenchConfig& config);

std::vector<BenchResult> run_bench(BenchTask task, const std::vector<std::size_t>& sizes,
                                   const std::vector<std::string>& backends, std::size_t repeats,
                                   std::uint64_t seed);

// Header "task,backend,n,seconds_median,launches,transfers".
std::string results_csv(const std::vector<BenchResult>& results);

struct Crossover {
  BenchTask task = BenchTask::Sum;
  std::optional<std::size_t> n;  // empty: none in sweep
};

// Per task, the smallest n where `device` has a strictly smaller median than
// `host`.
std::vector<Crossover> find_crossovers(const std::vector<BenchResult>& results,
                                       std::string_view host = "reference",
                                       std::string_view device = "device-sim");
std::string crossover_report(const std::vector<BenchResult>& results);
// Header "task,crossover_n"; "none" when no crossover.
std::string crossover_csv(const std::vector<BenchResult>& results);

// Log-log time vs n, one polyline per (task, backend).
std::string results_svg(const std::vector<BenchResult>& results);

}  // namespace lazyla
