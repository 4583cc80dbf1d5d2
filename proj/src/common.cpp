#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "lazyla/backend.hpp"
#include "lazyla/context.hpp"
#include "lazyla/error.hpp"
#include "lazyla/mat.hpp"
#include "lazyla/types.hpp"

namespace lazyla {

const char* to_string(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::Configuration: return "configuration";
    case ErrorCategory::Conformability: return "conformability";
    case ErrorCategory::Bounds: return "bounds";
    case ErrorCategory::Resource: return "resource";
    case ErrorCategory::Contract: return "contract";
    case ErrorCategory::Singularity: return "singularity";
    case ErrorCategory::NotPositiveDefinite: return "not-positive-definite";
    case ErrorCategory::Parse: return "parse";
  }
  return "unknown";
}

Error::Error(ErrorCategory category, const std::string& message)
    : std::runtime_error(std::string(to_string(category)) + " error: " + message),
      category_(category) {}

const char* to_string(ElemType elem) noexcept { return elem == ElemType::F32 ? "f32" : "f64"; }

std::size_t byte_size(ElemType elem) noexcept { return elem == ElemType::F32 ? 4 : 8; }

std::string to_string(const Dims& dims) {
  std::string s = std::to_string(dims.rows) + "x" + std::to_string(dims.cols);
  if (dims.slices != 1) s += "x" + std::to_string(dims.slices);
  return s;
}

ViewSpec ViewSpec::diagonal(const Dims& parent) {
  const std::size_t extent = std::min(parent.rows, parent.cols);
  return {ViewKind::Diagonal, 0, 0, extent, extent};
}

ViewSpec ViewSpec::submatrix(std::size_t row_offset, std::size_t col_offset,
                             std::size_t row_extent, std::size_t col_extent) {
  return {ViewKind::Submatrix, row_offset, col_offset, row_extent, col_extent};
}

void validate(const ViewSpec& spec, const Dims& parent) {
  const bool ok = spec.row_offset + spec.row_extent <= parent.rows &&
                  spec.col_offset + spec.col_extent <= parent.cols &&
                  (spec.kind != ViewKind::Diagonal || spec.row_extent == spec.col_extent);
  if (!ok) {
    throw BoundsError("view rows [" + std::to_string(spec.row_offset) + ", " +
                      std::to_string(spec.row_offset + spec.row_extent) + ") cols [" +
                      std::to_string(spec.col_offset) + ", " +
                      std::to_string(spec.col_offset + spec.col_extent) +
                      ") does not fit parent dims " + to_string(parent));
  }
}

std::size_t Region::extent() const noexcept {
  if (rows == 0 || cols == 0) return 0;
  return index(rows - 1, cols - 1) + 1;
}

Region Region::transposed() const noexcept {
  Region t = *this;
  t.rows = cols;
  t.cols = rows;
  t.row_stride = col_stride;
  t.col_stride = row_stride;
  return t;
}

bool Region::same_mapping(const Region& other) const noexcept {
  if (!same_storage(other) || rows != other.rows || cols != other.cols) return false;
  if (count() == 0) return true;
  if (offset != other.offset) return false;
  // Strides along a unit dimension never matter.
  const bool rs = rows == 1 || row_stride == other.row_stride;
  const bool cs = cols == 1 || col_stride == other.col_stride;
  return rs && cs;
}

Region Region::whole(BufferId buffer, std::size_t rows, std::size_t cols) {
  Region r;
  r.buffer = buffer;
  r.rows = rows;
  r.cols = cols;
  r.row_stride = 1;
  r.col_stride = rows;
  return r;
}

Region Region::temp(std::int32_t slot, std::size_t rows, std::size_t cols) {
  Region r = whole(kNoBuffer, rows, cols);
  r.temp_slot = slot;
  return r;
}

Region Region::view(BufferId buffer, const Dims& parent, const ViewSpec& spec) {
  Region r;
  r.buffer = buffer;
  r.offset = spec.row_offset + spec.col_offset * parent.rows;
  if (spec.kind == ViewKind::Diagonal) {
    r.rows = spec.row_extent;
    r.cols = 1;
    r.row_stride = parent.rows + 1;
    r.col_stride = parent.rows;
  } else {
    r.rows = spec.row_extent;
    r.cols = spec.col_extent;
    r.row_stride = 1;
    r.col_stride = parent.rows;
  }
  return r;
}

const char* to_string(FillKind kind) noexcept {
  switch (kind) {
    case FillKind::Zeros: return "zeros";
    case FillKind::Ones: return "ones";
    case FillKind::Identity: return "identity";
    case FillKind::RandUniform: return "randu";
    case FillKind::Value: return "value";
  }
  return "?";
}

const char* to_string(ReduceKind kind) noexcept {
  switch (kind) {
    case ReduceKind::Sum: return "sum";
    case ReduceKind::Min: return "min";
    case ReduceKind::Max: return "max";
    case ReduceKind::SumSq: return "sumsq";
  }
  return "?";
}

const char* to_string(CallKind kind) noexcept {
  switch (kind) {
    case CallKind::Gemm: return "GEMM";
    case CallKind::Gemv: return "GEMV";
    case CallKind::Axpy: return "AXPY";
    case CallKind::ElemKernel: return "ELEM";
    case CallKind::ReduceKernel: return "REDUCE";
    case CallKind::Fill: return "FILL";
    case CallKind::Copy: return "COPY";
  }
  return "?";
}

std::string format_matrix(const std::string& header, std::size_t rows, std::size_t cols,
                          const std::vector<double>& column_major) {
  std::string out;
  if (!header.empty()) out += header + "\n";
  if (rows == 0 || cols == 0) return out;

  std::vector<std::string> cells(column_major.size());
  std::size_t width = 0;
  char buf[64];
  for (std::size_t k = 0; k < column_major.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.6g", column_major[k]);
    cells[k] = buf;
    width = std::max(width, cells[k].size());
  }
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const std::string& c = cells[i + j * rows];
      if (j != 0) out += ' ';
      out.append(width - c.size(), ' ');
      out += c;
    }
    out += '\n';
  }
  return out;
}

std::shared_ptr<BackendContext> context_of(const ExprNode& node) {
  const BackendContext* ctx = node.context();
  if (!ctx) return nullptr;
  return const_cast<BackendContext*>(ctx)->shared_from_this();
}

}  // namespace lazyla
