#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "lazyla/mat.hpp"

namespace lazyla {

// Host-resident, column-major, no context.
template <Scalar T>
struct HostMatrix {
  using elem_type = T;
  static constexpr ElemType elem = elem_type_of<T>;

  Dims dims;
  std::vector<T> values;

  HostMatrix() = default;
  HostMatrix(std::size_t rows, std::size_t cols) : dims{rows, cols, 1}, values(rows * cols) {}

  std::size_t n_rows() const noexcept { return dims.rows; }
  std::size_t n_cols() const noexcept { return dims.cols; }
  T& operator()(std::size_t i, std::size_t j) { return values[i + j * dims.rows]; }
  T operator()(std::size_t i, std::size_t j) const { return values[i + j * dims.rows]; }

  friend bool operator==(const HostMatrix&, const HostMatrix&) = default;
};

enum class Conversion { Exact, AllowNarrowing };

// One device-to-host transfer of rows * cols elements; no kernel launch.
template <Scalar T>
HostMatrix<T> to_host(const Mat<T>& m) {
  HostMatrix<T> h;
  h.dims = {m.n_rows(), m.n_cols(), 1};
  if (m.context()) h.values = m.context()->template download<T>(m.region());
  return h;
}

// One host-to-device transfer. Widening (float to double) is implicit;
// narrowing needs Conversion::AllowNarrowing.
template <Scalar T, Scalar U>
Mat<T> to_device(const HostMatrix<U>& h, std::shared_ptr<BackendContext> ctx = nullptr,
                 Conversion conversion = Conversion::Exact) {
  if constexpr (sizeof(U) > sizeof(T)) {
    if (conversion != Conversion::AllowNarrowing) {
      throw ContractError(std::string("narrowing conversion from ") + to_string(elem_type_of<U>) +
                          " to " + to_string(elem_type_of<T>) + " needs Conversion::AllowNarrowing");
    }
  }
  Mat<T> m(h.dims.rows, h.dims.cols, Fill::None, std::move(ctx));
  if constexpr (std::is_same_v<T, U>) {
    m.context()->template upload<T>(m.region(), h.values);
  } else {
    const std::vector<T> converted(h.values.begin(), h.values.end());
    m.context()->template upload<T>(m.region(), converted);
  }
  return m;
}

// Comma-separated, one matrix row per line. Values are written with enough
// significant digits to round-trip (17 for double, 9 for float).
template <Scalar T>
void csv_write(std::ostream& os, const HostMatrix<T>& h);
template <Scalar T>
HostMatrix<T> csv_parse(std::string_view text);

template <Scalar T>
void csv_save(const HostMatrix<T>& h, const std::filesystem::path& path);
// Throws ParseError (with the 1-based line) on malformed numbers or ragged rows.
template <Scalar T>
HostMatrix<T> csv_load(const std::filesystem::path& path);

}  // namespace lazyla
