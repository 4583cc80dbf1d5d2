#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <string>

namespace lazyla {

enum class ElemType : std::uint8_t { F32, F64 };

const char* to_string(ElemType elem) noexcept;
std::size_t byte_size(ElemType elem) noexcept;

template <class T>
concept Scalar = std::same_as<T, float> || std::same_as<T, double>;

template <Scalar T>
inline constexpr ElemType elem_type_of = std::same_as<T, float> ? ElemType::F32 : ElemType::F64;

struct Dims {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t slices = 1;

  std::size_t n_elem() const noexcept { return rows * cols * slices; }
  bool empty() const noexcept { return n_elem() == 0; }

  friend bool operator==(const Dims&, const Dims&) = default;
};

std::string to_string(const Dims& dims);

enum class ViewKind : std::uint8_t { Diagonal, Submatrix };

struct ViewSpec {
  ViewKind kind = ViewKind::Submatrix;
  std::size_t row_offset = 0;
  std::size_t col_offset = 0;
  std::size_t row_extent = 0;
  std::size_t col_extent = 0;

  static ViewSpec diagonal(const Dims& parent);
  static ViewSpec submatrix(std::size_t row_offset, std::size_t col_offset, std::size_t row_extent,
                            std::size_t col_extent);

  friend bool operator==(const ViewSpec&, const ViewSpec&) = default;
};

// Throws BoundsError when the view does not fit inside the parent.
void validate(const ViewSpec& spec, const Dims& parent);

using BufferId = std::uint64_t;
inline constexpr BufferId kNoBuffer = 0;

// A strided 2-D window into a buffer. Element (i, j) lives at
// offset + i * row_stride + j * col_stride. Plain column-major storage has
// row_stride = 1, col_stride = rows; a diagonal has row_stride = ld + 1.
// A stride of 0 broadcasts. Plans may refer to plan-local temporaries via
// temp_slot (>= 0) before execution binds them to real buffers.
struct Region {
  BufferId buffer = kNoBuffer;
  std::int32_t temp_slot = -1;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t row_stride = 1;
  std::size_t col_stride = 0;

  std::size_t count() const noexcept { return rows * cols; }
  std::size_t index(std::size_t i, std::size_t j) const noexcept {
    return offset + i * row_stride + j * col_stride;
  }
  // One past the largest touched index; 0 for an empty region.
  std::size_t extent() const noexcept;

  Region transposed() const noexcept;
  bool is_temp() const noexcept { return temp_slot >= 0; }
  bool same_storage(const Region& other) const noexcept {
    return buffer == other.buffer && temp_slot == other.temp_slot;
  }
  bool same_mapping(const Region& other) const noexcept;

  static Region whole(BufferId buffer, std::size_t rows, std::size_t cols);
  static Region temp(std::int32_t slot, std::size_t rows, std::size_t cols);
  static Region view(BufferId buffer, const Dims& parent, const ViewSpec& spec);

  friend bool operator==(const Region&, const Region&) = default;
};

}  // namespace lazyla
