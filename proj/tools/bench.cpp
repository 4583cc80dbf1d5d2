// bench: size sweeps of sum, axpy, matmul and lu on the registered backends.
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "lazyla/bench.hpp"
#include "lazyla/error.hpp"

using namespace lazyla;

namespace {

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Accepts "1000", "1e3", "1.5e4".
std::size_t parse_size(const std::string& text) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || !(v >= 1) || v != std::floor(v) || v > 1e12) {
    throw ConfigurationError("bad size '" + text + "'");
  }
  return static_cast<std::size_t>(v);
}

std::vector<std::size_t> desk_sizes(BenchTask task) {
  if (is_vector_task(task)) return {1000, 10000, 100000, 1000000};
  return {16, 32, 64, 128, 256, 512};
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigurationError("cannot open " + path + " for writing");
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lazyla benchmark sweeps"};
  std::string task_arg = "all";
  std::string sizes_arg;
  std::string backends_arg = "reference,device-sim";
  std::string elem_arg = "f32";
  std::size_t repeats = 5;
  std::uint64_t seed = 42;
  std::string out_path;
  std::string plot_path;
  std::string crossover_path;
  app.add_option("--task", task_arg, "sum|axpy|matmul|lu|all")->capture_default_str();
  app.add_option("--sizes", sizes_arg, "comma separated sizes, e.g. 1e3,1e4 (default: desk sweep per task)");
  app.add_option("--backends", backends_arg, "comma separated backend names")->capture_default_str();
  app.add_option("--repeats", repeats, "timed repeats per point (>= 3)")->capture_default_str();
  app.add_option("--seed", seed, "input seed")->capture_default_str();
  app.add_option("--elem", elem_arg, "f32|f64")->capture_default_str();
  app.add_option("--out", out_path, "CSV output path (default: stdout)");
  app.add_option("--plot", plot_path, "SVG log-log plot path");
  app.add_option("--crossover", crossover_path, "crossover CSV path");
  CLI11_PARSE(app, argc, argv);

  try {
    std::vector<BenchTask> tasks;
    for (const std::string& t : split(task_arg)) {
      if (t == "all") {
        tasks = {BenchTask::Sum, BenchTask::Axpy, BenchTask::MatMul, BenchTask::LuDecomp};
      } else {
        tasks.push_back(parse_task(t));
      }
    }
    if (elem_arg != "f32" && elem_arg != "f64") throw ConfigurationError("unknown elem '" + elem_arg + "'");

    std::vector<std::size_t> sizes;
    for (const std::string& s : split(sizes_arg)) sizes.push_back(parse_size(s));

    std::vector<BenchResult> results;
    for (BenchTask task : tasks) {
      BenchConfig config;
      config.tasks = {task};
      config.sizes = sizes.empty() ? desk_sizes(task) : sizes;
      config.backends = split(backends_arg);
      config.repeats = repeats;
      config.seed = seed;
      config.elem = elem_arg == "f64" ? ElemType::F64 : ElemType::F32;
      std::cerr << "running " << to_string(task) << "...\n";
      const auto part = run_bench(config);
      results.insert(results.end(), part.begin(), part.end());
    }

    const std::string csv = results_csv(results);
    if (out_path.empty()) {
      std::cout << csv;
    } else {
      write_file(out_path, csv);
    }
    if (!plot_path.empty()) write_file(plot_path, results_svg(results));
    if (!crossover_path.empty()) write_file(crossover_path, crossover_csv(results));
    std::cerr << crossover_report(results);
    return 0;
  } catch (const ConfigurationError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const ContractError& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 4;
  }
}
