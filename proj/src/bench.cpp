#include "lazyla/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "lazyla/decomp.hpp"
#include "lazyla/mat.hpp"
#include "lazyla/registry.hpp"

namespace lazyla {

const char* to_string(BenchTask task) noexcept {
  switch (task) {
    case BenchTask::Sum: return "sum";
    case BenchTask::Axpy: return "axpy";
    case BenchTask::MatMul: return "matmul";
    case BenchTask::LuDecomp: return "lu";
  }
  return "?";
}

BenchTask parse_task(std::string_view text) {
  if (text == "sum") return BenchTask::Sum;
  if (text == "axpy") return BenchTask::Axpy;
  if (text == "matmul") return BenchTask::MatMul;
  if (text == "lu") return BenchTask::LuDecomp;
  throw ConfigurationError("unknown task '" + std::string(text) + "' (expected sum, axpy, matmul or lu)");
}

bool is_vector_task(BenchTask task) noexcept { return task == BenchTask::Sum || task == BenchTask::Axpy; }

namespace {

using Clock = std::chrono::steady_clock;

class Workload {
 public:
  virtual ~Workload() = default;
  virtual void run() = 0;
  virtual std::vector<double> output() = 0;
};

template <Scalar T>
std::vector<double> widen(const std::vector<T>& v) {
  return {v.begin(), v.end()};
}

template <Scalar T>
class SumWork final : public Workload {
 public:
  SumWork(const std::shared_ptr<BackendContext>& ctx, std::size_t n)
      : x_(n, fill::randu, ctx), s_(1, 1, Fill::None, ctx) {}
  void run() override { s_ = sum(x_); }
  std::vector<double> output() override { return {static_cast<double>(s_(0, 0))}; }

 private:
  Col<T> x_;
  Mat<T> s_;
};

template <Scalar T>
class AxpyWork final : public Workload {
 public:
  AxpyWork(const std::shared_ptr<BackendContext>& ctx, std::size_t n) : a_(n, fill::randu, ctx), b_(n, fill::randu, ctx) {}
  void run() override { b_ += T(3) * a_; }
  std::vector<double> output() override { return widen(b_.context()->template download<T>(b_.region())); }

 private:
  Col<T> a_;
  Col<T> b_;
};

template <Scalar T>
class MatMulWork final : public Workload {
 public:
  MatMulWork(const std::shared_ptr<BackendContext>& ctx, std::size_t n)
      : x_(n, n, fill::randu, ctx), y_(n, n, fill::randu, ctx), z_(n, n, Fill::None, ctx) {}
  void run() override { z_ = trans(x_) * y_; }
  std::vector<double> output() override { return widen(z_.context()->template download<T>(z_.region())); }

 private:
  Mat<T> x_;
  Mat<T> y_;
  Mat<T> z_;
};

template <Scalar T>
class LuWork final : public Workload {
 public:
  LuWork(const std::shared_ptr<BackendContext>& ctx, std::size_t n) : x_(n, n, fill::randu, ctx) {}
  void run() override { result_ = lu(x_); }
  std::vector<double> output() override {
    auto ctx = x_.context();
    std::vector<double> out = widen(ctx->template download<T>(result_.L.region()));
    const std::vector<double> u = widen(ctx->template download<T>(result_.U.region()));
    out.insert(out.end(), u.begin(), u.end());
    for (std::size_t p : result_.perm) out.push_back(static_cast<double>(p));
    return out;
  }

 private:
  Mat<T> x_;
  LUResult<T> result_;
};

template <Scalar T>
std::unique_ptr<Workload> make_work(BenchTask task, const std::shared_ptr<BackendContext>& ctx, std::size_t n) {
  switch (task) {
    case BenchTask::Sum: return std::make_unique<SumWork<T>>(ctx, n);
    case BenchTask::Axpy: return std::make_unique<AxpyWork<T>>(ctx, n);
    case BenchTask::MatMul: return std::make_unique<MatMulWork<T>>(ctx, n);
    case BenchTask::LuDecomp: return std::make_unique<LuWork<T>>(ctx, n);
  }
  throw ConfigurationError("unknown task");
}

std::unique_ptr<Workload> make_work(BenchTask task, ElemType elem, const std::shared_ptr<BackendContext>& ctx,
                                    std::size_t n) {
  return elem == ElemType::F32 ? make_work<float>(task, ctx, n) : make_work<double>(task, ctx, n);
}

double tolerance(BenchTask task, ElemType elem) {
  if (elem == ElemType::F64) return 1e-12;
  return task == BenchTask::Sum ? 1e-4 : 1e-5;
}

// Largest difference relative to the largest reference magnitude.
void check_oracle(const std::vector<double>& got, const std::vector<double>& want, double tol, BenchTask task,
                  const std::string& backend, std::size_t n) {
  double scale = 0.0;
  double diff = 0.0;
  for (std::size_t i = 0; i < want.size(); ++i) scale = std::max(scale, std::abs(want[i]));
  for (std::size_t i = 0; i < want.size() && i < got.size(); ++i) diff = std::max(diff, std::abs(got[i] - want[i]));
  const double rel = scale == 0.0 ? diff : diff / scale;
  if (got.size() != want.size() || !(rel <= tol)) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", rel);
    throw ContractError(std::string("oracle check failed: ") + to_string(task) + " on " + backend +
                        " at n=" + std::to_string(n) + " differs from the reference backend by " + buf +
                        " (tolerance " + std::to_string(tol) + ")");
  }
}

void validate(const BenchConfig& config) {
  if (config.tasks.empty()) throw ConfigurationError("no tasks given");
  if (config.backends.empty()) throw ConfigurationError("no backends given");
  if (config.sizes.empty()) throw ConfigurationError("no sizes given");
  if (config.repeats < 3) {
    throw ConfigurationError("repeats must be at least 3, got " + std::to_string(config.repeats));
  }
  for (std::size_t i = 0; i < config.sizes.size(); ++i) {
    if (config.sizes[i] == 0) throw ConfigurationError("sizes must be positive");
    if (i > 0 && config.sizes[i] <= config.sizes[i - 1]) throw ConfigurationError("sizes must be ascending");
  }
  for (const std::string& b : config.backends) {
    if (!BackendRegistry::instance().find(b)) {
      std::string names;
      for (const std::string& n : BackendRegistry::instance().names()) names += (names.empty() ? "" : ", ") + n;
      throw ConfigurationError("unknown backend '" + b + "'; registered: " + names);
    }
  }
}

}  // namespace

std::vector<BenchResult> run_bench(const BenchConfig& config) {
  validate(config);
  ContextOptions options = config.context;
  options.seed = config.seed;

  std::vector<BenchResult> results;
  for (BenchTask task : config.tasks) {
    for (std::size_t n : config.sizes) {
      std::vector<double> expected;
      {
        auto ref = init("reference", 0, false, options);
        auto work = make_work(task, config.elem, ref, n);
        work->run();
        expected = work->output();
      }
      for (const std::string& backend : config.backends) {
        auto ctx = init(backend, 0, false, options);
        auto work = make_work(task, config.elem, ctx, n);

        // Oracle check on the first evaluation, then one warm-up.
        work->run();
        check_oracle(work->output(), expected, tolerance(task, config.elem), task, backend, n);
        work->run();

        std::vector<double> seconds;
        std::size_t launches = 0;
        std::size_t transfers = 0;
        for (std::size_t r = 0; r < config.repeats; ++r) {
          const std::size_t l0 = ctx->launch_count();
          const std::size_t t0 = ctx->transfer_count();
          const auto start = Clock::now();
          work->run();
          const auto stop = Clock::now();
          seconds.push_back(std::chrono::duration<double>(stop - start).count());
          launches = ctx->launch_count() - l0;
          transfers = ctx->transfer_count() - t0;
        }
        std::sort(seconds.begin(), seconds.end());
        const std::size_t mid = seconds.size() / 2;
        const double median = seconds.size() % 2 ? seconds[mid] : 0.5 * (seconds[mid - 1] + seconds[mid]);
        results.push_back({task, backend, n, median, launches, transfers});
      }
    }
  }
  return results;
}

std::vector<BenchResult> run_bench(BenchTask task, const std::vector<std::size_t>& sizes,
                                   const std::vector<std::string>& backends, std::size_t repeats,
                                   std::uint64_t seed) {
  BenchConfig config;
  config.tasks = {task};
  config.sizes = sizes;
  config.backends = backends;
  config.repeats = repeats;
  config.seed = seed;
  return run_bench(config);
}

std::string results_csv(const std::vector<BenchResult>& results) {
  std::string out = "task,backend,n,seconds_median,launches,transfers\n";
  char buf[256];
  for (const BenchResult& r : results) {
    std::snprintf(buf, sizeof buf, "%s,%s,%zu,%.9g,%zu,%zu\n", to_string(r.task), r.backend.c_str(), r.n,
                  r.seconds_median, r.launches, r.transfers);
    out += buf;
  }
  return out;
}

std::vector<Crossover> find_crossovers(const std::vector<BenchResult>& results, std::string_view host,
                                       std::string_view device) {
  std::vector<BenchTask> order;
  std::map<BenchTask, std::map<std::size_t, std::pair<std::optional<double>, std::optional<double>>>> times;
  for (const BenchResult& r : results) {
    if (std::find(order.begin(), order.end(), r.task) == order.end()) order.push_back(r.task);
    auto& slot = times[r.task][r.n];
    if (r.backend == host) slot.first = r.seconds_median;
    if (r.backend == device) slot.second = r.seconds_median;
  }
  std::vector<Crossover> out;
  for (BenchTask task : order) {
    Crossover c{task, std::nullopt};
    for (const auto& [n, pair] : times[task]) {
      if (pair.first && pair.second && *pair.second < *pair.first) {
        c.n = n;
        break;
      }
    }
    out.push_back(c);
  }
  return out;
}

std::string crossover_report(const std::vector<BenchResult>& results) {
  std::string out;
  for (const Crossover& c : find_crossovers(results)) {
    out += std::string(to_string(c.task)) + ": ";
    out += c.n ? "device-sim faster from n=" + std::to_string(*c.n) : std::string("none in sweep");
    out += "\n";
  }
  return out;
}

std::string crossover_csv(const std::vector<BenchResult>& results) {
  std::string out = "task,crossover_n\n";
  for (const Crossover& c : find_crossovers(results)) {
    out += std::string(to_string(c.task)) + "," + (c.n ? std::to_string(*c.n) : std::string("none")) + "\n";
  }
  return out;
}

std::string results_svg(const std::vector<BenchResult>& results) {
  constexpr double W = 640, H = 420, L = 70, R = 170, T = 20, B = 50;
  double nmin = 1e300, nmax = 0, smin = 1e300, smax = 0;
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  for (const BenchResult& r : results) {
    const double n = static_cast<double>(r.n);
    const double s = std::max(r.seconds_median, 1e-9);
    nmin = std::min(nmin, n);
    nmax = std::max(nmax, n);
    smin = std::min(smin, s);
    smax = std::max(smax, s);
    series[std::string(to_string(r.task)) + " / " + r.backend].emplace_back(n, s);
  }
  if (results.empty()) nmin = nmax = smin = smax = 1;
  const double lx0 = std::log10(nmin), lx1 = std::log10(nmax) + (nmax == nmin ? 1 : 0);
  const double ly0 = std::log10(smin), ly1 = std::log10(smax) + (smax == smin ? 1 : 0);
  const auto px = [&](double n) { return L + (std::log10(n) - lx0) / (lx1 - lx0) * (W - L - R); };
  const auto py = [&](double s) { return H - B - (std::log10(s) - ly0) / (ly1 - ly0) * (H - T - B); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  char buf[256];
  std::string svg;
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" font-family=\"sans-serif\" "
                "font-size=\"11\">\n",
                W, H);
  svg += buf;
  std::snprintf(buf, sizeof buf,
                "<rect x=\"%.0f\" y=\"%.0f\" width=\"%.0f\" height=\"%.0f\" fill=\"none\" stroke=\"#444\"/>\n", L, T,
                W - L - R, H - T - B);
  svg += buf;
  std::snprintf(buf, sizeof buf, "<text x=\"%.0f\" y=\"%.0f\" text-anchor=\"middle\">n (log)</text>\n",
                L + (W - L - R) / 2, H - 12);
  svg += buf;
  std::snprintf(buf, sizeof buf,
                "<text x=\"14\" y=\"%.0f\" transform=\"rotate(-90 14 %.0f)\" text-anchor=\"middle\">median seconds "
                "(log)</text>\n",
                T + (H - T - B) / 2, T + (H - T - B) / 2);
  svg += buf;
  std::snprintf(buf, sizeof buf, "<text x=\"%.0f\" y=\"%.0f\" text-anchor=\"start\">%g</text>\n", L, H - B + 14, nmin);
  svg += buf;
  std::snprintf(buf, sizeof buf, "<text x=\"%.0f\" y=\"%.0f\" text-anchor=\"end\">%g</text>\n", W - R, H - B + 14, nmax);
  svg += buf;
  std::snprintf(buf, sizeof buf, "<text x=\"%.0f\" y=\"%.0f\" text-anchor=\"end\">%.2g</text>\n", L - 4, H - B, smin);
  svg += buf;
  std::snprintf(buf, sizeof buf, "<text x=\"%.0f\" y=\"%.0f\" text-anchor=\"end\">%.2g</text>\n", L - 4, T + 10, smax);
  svg += buf;

  std::size_t k = 0;
  for (auto& [name, points] : series) {
    std::sort(points.begin(), points.end());
    const char* color = colors[k % std::size(colors)];
    svg += "<polyline fill=\"none\" stroke=\"";
    svg += color;
    svg += "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [n, s] : points) {
      std::snprintf(buf, sizeof buf, "%.1f,%.1f ", px(n), py(s));
      svg += buf;
    }
    svg += "\"/>\n";
    std::snprintf(buf, sizeof buf, "<text x=\"%.0f\" y=\"%.0f\" fill=\"%s\">%s</text>\n", W - R + 10,
                  T + 14 + 14 * static_cast<double>(k), color, name.c_str());
    svg += buf;
    ++k;
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace lazyla
