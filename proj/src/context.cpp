#include "lazyla/context.hpp"

#include <algorithm>
#include <iostream>

namespace lazyla {

namespace {

std::string dims_text(const Region& r) { return std::to_string(r.rows) + "x" + std::to_string(r.cols); }

Dims dims_of(const Region& r) { return {r.rows, r.cols, 1}; }

const char* fill_kernel(FillKind kind) {
  switch (kind) {
    case FillKind::Zeros: return "fill_zeros";
    case FillKind::Ones: return "fill_ones";
    case FillKind::Identity: return "fill_identity";
    case FillKind::RandUniform: return "fill_randu";
    case FillKind::Value: return "fill_value";
  }
  return "fill_value";
}

const char* reduce_kernel(ReduceKind kind) {
  switch (kind) {
    case ReduceKind::Sum: return "reduce_sum";
    case ReduceKind::Min: return "reduce_min";
    case ReduceKind::Max: return "reduce_max";
    case ReduceKind::SumSq: return "reduce_sumsq";
  }
  return "reduce_sum";
}

std::string elem_kernel_name(const ElemProgram& program, const Region& out) {
  const auto& code = program.code();
  if (program.op_count() == 0) return "copy";
  if (program.op_count() > 1) return "elem_fused";
  const ElemOp op = code.back().op;
  switch (op) {
    case ElemOp::Add: return "elem_add";
    case ElemOp::Sub: return "elem_sub";
    case ElemOp::Mul: return "elem_mul";
    case ElemOp::Neg: return "elem_neg";
    case ElemOp::AddScalar:
      return out.cols == 1 && out.rows > 1 && out.row_stride > 1 ? "elem_diag_add" : "elem_scalar_add";
    case ElemOp::MulScalar: return "elem_scalar_mul";
    default: return "elem_fused";
  }
}

}  // namespace

BackendContext::BackendContext(std::unique_ptr<Backend> backend, const ContextOptions& options,
                               bool verbose)
    : backend_(std::move(backend)),
      capabilities_{ElemType::F32, ElemType::F64},
      rng_(options.seed) {
  if (!backend_) throw ConfigurationError("context needs a backend");
  if (backend_->compiles_kernels()) {
    const std::filesystem::path dir =
        options.kernel_cache_dir.empty() ? default_kernel_cache_dir() : options.kernel_cache_dir;
    cache_ = std::make_unique<KernelCache>(std::string(backend_->name()), backend_->device(), dir,
                                           options.compile_delay);
    cache_->prepare(predefined_kernels(), capabilities_);
  }
  if (verbose) {
    std::ostream& log = options.log ? *options.log : std::clog;
    log << "lazyla: backend " << backend_->name() << " device " << backend_->device() << ": "
        << backend_->description() << "\n";
    if (cache_) {
      log << "lazyla: kernel cache " << cache_->manifest_path().string() << " (" << cache_->compile_count()
          << " compiled, " << cache_->loaded_count() << " loaded)\n";
    }
  }
}

BackendContext::~BackendContext() = default;

bool BackendContext::supports(ElemType elem) const noexcept {
  return std::find(capabilities_.begin(), capabilities_.end(), elem) != capabilities_.end();
}

std::size_t BackendContext::kernel_compilations() const {
  return cache_ ? cache_->compile_count() : 0;
}

std::vector<LaunchRecord> BackendContext::ledger() const {
  std::lock_guard lock(mutex_);
  return ledger_;
}

std::size_t BackendContext::launch_count() const {
  std::lock_guard lock(mutex_);
  return ledger_.size();
}

TransferStats BackendContext::transfers() const {
  std::lock_guard lock(mutex_);
  return transfers_;
}

std::size_t BackendContext::allocation_count() const {
  std::lock_guard lock(mutex_);
  return allocations_;
}

std::size_t BackendContext::live_buffers() const {
  std::lock_guard lock(mutex_);
  return backend_->live_buffers();
}

void BackendContext::seed(std::uint64_t seed) {
  std::lock_guard lock(mutex_);
  rng_ = CounterRng(seed);
}

RuleSet BackendContext::rules() const {
  std::lock_guard lock(mutex_);
  return rules_;
}

void BackendContext::set_rules(const RuleSet& rules) {
  std::lock_guard lock(mutex_);
  rules_ = rules;
}

BufferId BackendContext::allocate(ElemType elem, std::size_t count) {
  std::lock_guard lock(mutex_);
  if (!supports(elem)) {
    throw ConfigurationError(std::string("backend ") + std::string(backend_->name()) +
                             " does not support " + to_string(elem));
  }
  const BufferId id = backend_->allocate(elem, count);
  ++allocations_;
  return id;
}

void BackendContext::release(BufferId id) noexcept {
  std::lock_guard lock(mutex_);
  if (id != kNoBuffer && backend_->owns(id)) backend_->release(id);
}

ElemType BackendContext::elem_type(BufferId id) const {
  std::lock_guard lock(mutex_);
  if (!backend_->owns(id)) throw ContractError("buffer " + std::to_string(id) + " is not owned by this context");
  return backend_->elem_type(id);
}

std::size_t BackendContext::capacity(BufferId id) const {
  std::lock_guard lock(mutex_);
  if (!backend_->owns(id)) throw ContractError("buffer " + std::to_string(id) + " is not owned by this context");
  return backend_->capacity(id);
}

void BackendContext::check_region(const Region& r, ElemType elem, const char* what) const {
  if (r.is_temp()) {
    throw ContractError(std::string(what) + " refers to an unbound plan temporary");
  }
  if (r.count() == 0) {
    if (r.buffer == kNoBuffer) return;
  }
  if (!backend_->owns(r.buffer)) {
    throw ContractError(std::string(what) + " buffer " + std::to_string(r.buffer) +
                        " is not owned by this context");
  }
  if (backend_->elem_type(r.buffer) != elem) {
    throw ContractError(std::string(what) + " has element type " +
                        to_string(backend_->elem_type(r.buffer)) + ", expected " + to_string(elem));
  }
  if (r.extent() > backend_->capacity(r.buffer)) {
    throw BoundsError(std::string(what) + " region " + dims_text(r) + " at offset " +
                      std::to_string(r.offset) + " reaches index " + std::to_string(r.extent()) +
                      " of a buffer holding " + std::to_string(backend_->capacity(r.buffer)));
  }
}

ElemType BackendContext::common_elem(std::span<const Region> regions) const {
  for (const Region& r : regions) {
    if (r.buffer != kNoBuffer && !r.is_temp() && backend_->owns(r.buffer)) {
      return backend_->elem_type(r.buffer);
    }
  }
  for (const Region& r : regions) {
    if (r.count() != 0) check_region(r, ElemType::F64, "operand");
  }
  return ElemType::F64;
}

void BackendContext::require_kernel(std::string_view name, ElemType elem) {
  if (cache_) cache_->require(name, elem);
}

void BackendContext::record(CallKind kind, std::string kernel, std::size_t elements,
                            std::vector<Dims> dims, std::size_t partitions) {
  LaunchRecord rec;
  rec.sequence = ledger_.empty() ? 1 : ledger_.back().sequence + 1;
  rec.kind = kind;
  rec.kernel = std::move(kernel);
  rec.elements = elements;
  rec.dims = std::move(dims);
  rec.partitions = partitions;
  ledger_.push_back(std::move(rec));
}

void BackendContext::count_transfer(TransferDirection direction, std::size_t elements) {
  if (direction == TransferDirection::HostToDevice) {
    transfers_.host_to_device += elements;
  } else {
    transfers_.device_to_host += elements;
  }
}

void BackendContext::write_raw(const Region& dst, const void* host, ElemType elem) {
  std::lock_guard lock(mutex_);
  check_region(dst, elem, "upload destination");
  if (dst.count() == 0) return;
  backend_->write(dst, host);
  count_transfer(TransferDirection::HostToDevice, dst.count());
}

void BackendContext::read_raw(const Region& src, void* host, ElemType elem) {
  std::lock_guard lock(mutex_);
  check_region(src, elem, "download source");
  if (src.count() == 0) return;
  backend_->read(src, host);
  count_transfer(TransferDirection::DeviceToHost, src.count());
}

void BackendContext::fill(FillKind kind, const Region& out, double value) {
  std::lock_guard lock(mutex_);
  const Region regions[] = {out};
  const ElemType elem = common_elem(regions);
  check_region(out, elem, "fill output");
  const char* kernel = fill_kernel(kind);
  require_kernel(kernel, elem);
  FillSpec spec;
  spec.kind = kind;
  spec.value = value;
  if (kind == FillKind::RandUniform) {
    spec.rng_key = rng_.key();
    spec.rng_counter = rng_.advance(out.count());
  }
  const std::size_t parts = backend_->fill(spec, out);
  record(CallKind::Fill, kernel, out.count(), {dims_of(out)}, parts);
}

void BackendContext::copy(const Region& src, const Region& dst) {
  std::lock_guard lock(mutex_);
  const Region regions[] = {dst, src};
  const ElemType elem = common_elem(regions);
  check_region(src, elem, "copy source");
  check_region(dst, elem, "copy destination");
  if (src.rows != dst.rows || src.cols != dst.cols) {
    throw ConformabilityError("copy: source " + dims_text(src) + " vs destination " + dims_text(dst));
  }
  require_kernel("copy", elem);
  const std::size_t parts = backend_->copy(src, dst);
  record(CallKind::Copy, "copy", dst.count(), {dims_of(src), dims_of(dst)}, parts);
}

void BackendContext::axpy(double alpha, const Region& x, const Region& y) {
  std::lock_guard lock(mutex_);
  const Region regions[] = {y, x};
  const ElemType elem = common_elem(regions);
  check_region(x, elem, "axpy x");
  check_region(y, elem, "axpy y");
  if (x.count() != y.count() || x.rows != y.rows) {
    throw ConformabilityError("axpy: x " + dims_text(x) + " vs y " + dims_text(y));
  }
  require_kernel("axpy", elem);
  const std::size_t parts = backend_->axpy(alpha, x, y);
  record(CallKind::Axpy, "axpy", y.count(), {dims_of(x), dims_of(y)}, parts);
}

void BackendContext::gemm(bool trans_a, bool trans_b, double alpha, const Region& a, const Region& b,
                          double beta, const Region& c) {
  std::lock_guard lock(mutex_);
  const Region regions[] = {c, a, b};
  const ElemType elem = common_elem(regions);
  check_region(a, elem, "gemm A");
  check_region(b, elem, "gemm B");
  check_region(c, elem, "gemm C");
  const std::size_t m = trans_a ? a.cols : a.rows;
  const std::size_t ka = trans_a ? a.rows : a.cols;
  const std::size_t kb = trans_b ? b.cols : b.rows;
  const std::size_t n = trans_b ? b.rows : b.cols;
  if (ka != kb || c.rows != m || c.cols != n) {
    throw ConformabilityError("gemm: op(A) " + std::to_string(m) + "x" + std::to_string(ka) +
                              ", op(B) " + std::to_string(kb) + "x" + std::to_string(n) + ", C " +
                              dims_text(c));
  }
  require_kernel("gemm", elem);
  const std::size_t parts = backend_->gemm(trans_a, trans_b, alpha, a, b, beta, c);
  record(CallKind::Gemm, "gemm", m * n * ka, {dims_of(a), dims_of(b), dims_of(c)}, parts);
}

void BackendContext::gemv(bool trans_a, double alpha, const Region& a, const Region& x, double beta,
                          const Region& y) {
  std::lock_guard lock(mutex_);
  const Region regions[] = {y, a, x};
  const ElemType elem = common_elem(regions);
  check_region(a, elem, "gemv A");
  check_region(x, elem, "gemv x");
  check_region(y, elem, "gemv y");
  const std::size_t m = trans_a ? a.cols : a.rows;
  const std::size_t k = trans_a ? a.rows : a.cols;
  const bool x_vec = x.rows == 1 || x.cols == 1;
  const bool y_vec = y.rows == 1 || y.cols == 1;
  if (!x_vec || !y_vec || x.count() != k || y.count() != m) {
    throw ConformabilityError("gemv: op(A) " + std::to_string(m) + "x" + std::to_string(k) + ", x " +
                              dims_text(x) + ", y " + dims_text(y));
  }
  require_kernel("gemv", elem);
  const std::size_t parts = backend_->gemv(trans_a, alpha, a, x, beta, y);
  record(CallKind::Gemv, "gemv", m * k, {dims_of(a), dims_of(x), dims_of(y)}, parts);
}

void BackendContext::elem(const ElemProgram& program, std::span<const Region> inputs,
                          const Region& out) {
  std::lock_guard lock(mutex_);
  if (program.arity() != inputs.size()) {
    throw ContractError("element-wise program of arity " + std::to_string(program.arity()) +
                        " given " + std::to_string(inputs.size()) + " inputs");
  }
  if (program.code().empty()) throw ContractError("empty element-wise program");
  std::vector<Region> all{out};
  all.insert(all.end(), inputs.begin(), inputs.end());
  const ElemType elem = common_elem(all);
  check_region(out, elem, "elem output");
  std::vector<Dims> dims;
  for (const Region& in : inputs) {
    check_region(in, elem, "elem input");
    if (in.rows != out.rows || in.cols != out.cols) {
      throw ConformabilityError("elem: input " + dims_text(in) + " vs output " + dims_text(out));
    }
    dims.push_back(dims_of(in));
  }
  dims.push_back(dims_of(out));
  for (const std::string& k : program.required_kernels()) require_kernel(k, elem);
  std::string kernel = elem_kernel_name(program, out);
  if (kernel != "elem_fused") require_kernel(kernel, elem);
  const std::size_t parts = backend_->elem(program, inputs, out);
  record(CallKind::ElemKernel, std::move(kernel), out.count(), std::move(dims), parts);
}

void BackendContext::reduce(ReduceKind kind, const ElemProgram& map, std::span<const Region> inputs,
                            const std::optional<Region>& center, const ReduceEpilogue& epilogue,
                            const Region& out) {
  std::lock_guard lock(mutex_);
  if (map.arity() != inputs.size() || inputs.empty()) {
    throw ContractError("reduction map of arity " + std::to_string(map.arity()) + " given " +
                        std::to_string(inputs.size()) + " inputs");
  }
  std::vector<Region> all{out};
  all.insert(all.end(), inputs.begin(), inputs.end());
  const ElemType elem = common_elem(all);
  check_region(out, elem, "reduce output");
  if (out.count() != 1) throw ConformabilityError("reduce: output must be 1x1, got " + dims_text(out));
  std::vector<Dims> dims;
  for (const Region& in : inputs) {
    check_region(in, elem, "reduce input");
    if (in.rows != inputs[0].rows || in.cols != inputs[0].cols) {
      throw ConformabilityError("reduce: input " + dims_text(in) + " vs " + dims_text(inputs[0]));
    }
    dims.push_back(dims_of(in));
  }
  if (center) {
    check_region(*center, elem, "reduce center");
    if (center->count() != 1) throw ConformabilityError("reduce: center must be 1x1");
  }
  const std::size_t n = inputs[0].count();
  if (n == 0 && (kind == ReduceKind::Min || kind == ReduceKind::Max)) {
    throw ContractError(std::string(to_string(kind)) + " of an empty operand");
  }
  for (const std::string& k : map.required_kernels()) require_kernel(k, elem);
  const char* kernel = reduce_kernel(kind);
  require_kernel(kernel, elem);
  const std::size_t parts =
      backend_->reduce(kind, map, inputs, center ? &*center : nullptr, epilogue, out);
  record(CallKind::ReduceKernel, kernel, n, std::move(dims), parts);
}

double BackendContext::reduce_scalar(ReduceKind kind, const Region& x) {
  std::lock_guard lock(mutex_);
  const Region regions[] = {x};
  const ElemType elem = common_elem(regions);
  const BufferId scratch = allocate(elem, 1);
  double value = 0.0;
  try {
    const Region out = Region::whole(scratch, 1, 1);
    const Region inputs[] = {x};
    reduce(kind, ElemProgram::identity(), inputs, std::nullopt, {}, out);
    if (elem == ElemType::F32) {
      value = download<float>(out)[0];
    } else {
      value = download<double>(out)[0];
    }
  } catch (...) {
    release(scratch);
    throw;
  }
  release(scratch);
  return value;
}

}  // namespace lazyla
