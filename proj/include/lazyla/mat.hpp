#pragma once

#include <cassert>
#include <concepts>
#include <cstddef>
#include <initializer_list>
#include <iostream>
#include <memory>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "lazyla/context.hpp"
#include "lazyla/error.hpp"
#include "lazyla/expr.hpp"
#include "lazyla/lowering.hpp"
#include "lazyla/registry.hpp"
#include "lazyla/types.hpp"

namespace lazyla {

enum class Fill : std::uint8_t { None, Zeros, Ones, Identity, RandUniform };

namespace fill {
inline constexpr Fill none = Fill::None;
inline constexpr Fill zeros = Fill::Zeros;
inline constexpr Fill ones = Fill::Ones;
inline constexpr Fill eye = Fill::Identity;
inline constexpr Fill randu = Fill::RandUniform;
}  // namespace fill

// Header line, then one line per row with values right-aligned to a common
// width and separated by a single space.
std::string format_matrix(const std::string& header, std::size_t rows, std::size_t cols,
                          const std::vector<double>& column_major);

// The shared context of an expression node (nullptr for context-free empties).
std::shared_ptr<BackendContext> context_of(const ExprNode& node);

template <Scalar T>
class Expr {
 public:
  using elem_type = T;

  explicit Expr(ExprPtr node) : node_(std::move(node)) {}

  const ExprPtr& node() const noexcept { return node_; }
  Expr to_expr() const { return *this; }

  Dims dims() const noexcept { return node_->dims(); }
  std::size_t n_rows() const noexcept { return dims().rows; }
  std::size_t n_cols() const noexcept { return dims().cols; }
  std::size_t n_elem() const noexcept { return dims().n_elem(); }
  std::string render() const { return lazyla::render(*node_); }

 private:
  ExprPtr node_;
};

template <class E>
concept Expression = requires(const E& e) {
  typename E::elem_type;
  { e.to_expr() } -> std::same_as<Expr<typename E::elem_type>>;
};

template <Expression E>
using elem_t = typename E::elem_type;

template <Scalar T>
class View;

// Owner of one device buffer. Base of Mat and Cube; views pin it.
template <Scalar T>
class DenseBase {
 public:
  using elem_type = T;

  DenseBase(const DenseBase&) = delete;
  DenseBase& operator=(const DenseBase&) = delete;

  const std::shared_ptr<BackendContext>& context() const noexcept { return ctx_; }
  BufferId buffer() const noexcept { return buffer_; }
  const Dims& dims() const noexcept { return dims_; }
  std::size_t n_rows() const noexcept { return dims_.rows; }
  std::size_t n_cols() const noexcept { return dims_.cols; }
  std::size_t n_elem() const noexcept { return dims_.n_elem(); }
  bool is_empty() const noexcept { return dims_.empty(); }
  ElemType elem() const noexcept { return elem_type_of<T>; }

  const std::string& name() const noexcept { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

  std::size_t pins() const noexcept { return pins_; }

 protected:
  DenseBase() = default;
  ~DenseBase() {
    assert(pins_ == 0 && "container destroyed while a view is alive");
    release();
  }

  void allocate(const Dims& dims, std::shared_ptr<BackendContext> ctx) {
    if (!ctx) ctx = default_context();
    const BufferId id = ctx->allocate(elem_type_of<T>, dims.n_elem());
    release();
    ctx_ = std::move(ctx);
    buffer_ = id;
    dims_ = dims;
  }

  void release() noexcept {
    if (ctx_ && buffer_ != kNoBuffer) ctx_->release(buffer_);
    buffer_ = kNoBuffer;
  }

  void require_unpinned(const char* what) const {
    if (pins_ != 0) {
      throw ContractError(std::string(what) + " while " + std::to_string(pins_) +
                          " view(s) of the container are alive");
    }
  }

  // Takes over other's buffer; other is left empty on the same context.
  void steal(DenseBase& other) noexcept {
    release();
    if (other.ctx_) ctx_ = other.ctx_;
    buffer_ = std::exchange(other.buffer_, kNoBuffer);
    dims_ = std::exchange(other.dims_, Dims{});
  }

  void apply_fill(Fill fill) {
    if (fill == Fill::None) return;
    ctx_->fill(to_fill_kind(fill), whole_region());
  }

  static FillKind to_fill_kind(Fill fill) noexcept {
    switch (fill) {
      case Fill::Zeros: return FillKind::Zeros;
      case Fill::Ones: return FillKind::Ones;
      case Fill::Identity: return FillKind::Identity;
      case Fill::RandUniform: return FillKind::RandUniform;
      case Fill::None: break;
    }
    return FillKind::Zeros;
  }

  Region whole_region() const noexcept {
    return Region::whole(buffer_, dims_.rows, dims_.cols * dims_.slices);
  }

  std::string label() const {
    return name_.empty() ? "M" + std::to_string(buffer_) : name_;
  }

  std::shared_ptr<BackendContext> ctx_;
  BufferId buffer_ = kNoBuffer;
  Dims dims_;
  std::string name_;
  std::size_t pins_ = 0;

  friend class View<T>;
};

template <Scalar T>
class Mat : public DenseBase<T> {
 public:
  using elem_type = T;

  // 0x0 with no context; the first assignment adopts the expression's.
  Mat() = default;

  Mat(std::size_t rows, std::size_t cols, Fill fill = fill::zeros,
      std::shared_ptr<BackendContext> ctx = nullptr) {
    this->allocate({rows, cols, 1}, std::move(ctx));
    this->apply_fill(fill);
  }

  Mat(std::size_t rows, std::size_t cols, std::shared_ptr<BackendContext> ctx)
      : Mat(rows, cols, fill::zeros, std::move(ctx)) {}

  // Row-wise literal, uploaded in one transfer.
  Mat(std::initializer_list<std::initializer_list<T>> rows,
      std::shared_ptr<BackendContext> ctx = nullptr) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<T> values(r * c);
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != c) throw ConformabilityError("ragged initializer list");
      std::size_t j = 0;
      for (T v : row) values[i + j++ * r] = v;
      ++i;
    }
    this->allocate({r, c, 1}, std::move(ctx));
    this->ctx_->template upload<T>(this->whole_region(), values);
  }

  Mat(const Mat& other) : shape_(other.shape_) {
    if (!other.ctx_) return;
    this->allocate(other.dims_, other.ctx_);
    if (other.n_elem() != 0) this->ctx_->copy(other.whole_region(), this->whole_region());
  }

  Mat(Mat&& other) noexcept : shape_(other.shape_) {
    assert(other.pins_ == 0);
    this->steal(other);
  }

  template <Expression E>
    requires std::same_as<elem_t<E>, T> && (!std::derived_from<E, Mat>)
  Mat(const E& expr) {  // NOLINT(google-explicit-constructor)
    assign(expr.to_expr().node(), AssignMode::Replace);
  }

  Mat& operator=(const Mat& other) {
    if (this != &other) assign(other.to_expr().node(), AssignMode::Replace);
    return *this;
  }

  Mat& operator=(Mat&& other) {
    if (this != &other) {
      this->require_unpinned("move-assignment");
      check_shape(other.dims_);
      this->steal(other);
    }
    return *this;
  }

  template <Expression E>
    requires std::same_as<elem_t<E>, T>
  Mat& operator=(const E& expr) {
    assign(expr.to_expr().node(), AssignMode::Replace);
    return *this;
  }

  template <Expression E>
    requires std::same_as<elem_t<E>, T>
  Mat& operator+=(const E& expr) {
    assign(expr.to_expr().node(), AssignMode::PlusEq);
    return *this;
  }

  template <Expression E>
    requires std::same_as<elem_t<E>, T>
  Mat& operator-=(const E& expr) {
    assign(expr.to_expr().node(), AssignMode::MinusEq);
    return *this;
  }

  Mat& operator+=(T s) { return scalar_update(OpTag::ScalarPlus, s); }
  Mat& operator-=(T s) { return scalar_update(OpTag::ScalarPlus, -s); }
  Mat& operator*=(T s) { return scalar_update(OpTag::ScalarTimes, s); }

  Expr<T> to_expr() const {
    TerminalRef ref;
    ref.ctx = this->ctx_.get();
    ref.elem = elem_type_of<T>;
    ref.region = region();
    ref.name = this->label();
    return Expr<T>(build_terminal(std::move(ref)));
  }

  Region region() const noexcept { return this->whole_region(); }

  // One element transferred to the host.
  T operator()(std::size_t i, std::size_t j) const {
    check_index(i, j);
    return this->ctx_->template download<T>(element_region(i, j))[0];
  }
  T operator()(std::size_t i) const {
    if (i >= this->n_elem()) {
      throw BoundsError("linear index " + std::to_string(i) + " out of range for dims " +
                        lazyla::to_string(this->dims_));
    }
    return (*this)(i % this->n_rows(), i / this->n_rows());
  }

  // One element transferred to the device.
  void set(std::size_t i, std::size_t j, T value) {
    check_index(i, j);
    const T v[1] = {value};
    this->ctx_->template upload<T>(element_region(i, j), std::span<const T>(v, 1));
  }

  View<T> diag() { return view(ViewSpec::diagonal(this->dims_)); }

  // Inclusive corners, as in submat(first_row, first_col, last_row, last_col).
  View<T> submat(std::size_t first_row, std::size_t first_col, std::size_t last_row,
                 std::size_t last_col) {
    if (last_row < first_row || last_col < first_col) {
      throw BoundsError("submatrix corners out of order");
    }
    const ViewSpec spec = ViewSpec::submatrix(first_row, first_col, last_row - first_row + 1,
                                              last_col - first_col + 1);
    return view(spec);
  }

  View<T> view(const ViewSpec& spec) {
    validate(spec, this->dims_);
    std::string text = spec.kind == ViewKind::Diagonal
                           ? "diag(" + this->label() + ")"
                           : this->label() + "(" + std::to_string(spec.row_offset) + ":" +
                                 std::to_string(spec.row_offset + spec.row_extent) + "," +
                                 std::to_string(spec.col_offset) + ":" +
                                 std::to_string(spec.col_offset + spec.col_extent) + ")";
    return View<T>(*this, Region::view(this->buffer_, this->dims_, spec), std::move(text));
  }

  View<T> col(std::size_t j) { return submat(0, j, this->n_rows() - 1, j); }
  View<T> row(std::size_t i) { return submat(i, 0, i, this->n_cols() - 1); }

  void fill(T value) { this->ctx_->fill(FillKind::Value, region(), static_cast<double>(value)); }
  void zeros() { this->apply_fill(Fill::Zeros); }
  void ones() { this->apply_fill(Fill::Ones); }
  void eye() { this->apply_fill(Fill::Identity); }
  void randu() { this->apply_fill(Fill::RandUniform); }

  // Contents are unspecified after a size change.
  void set_size(std::size_t rows, std::size_t cols) {
    if (rows == this->n_rows() && cols == this->n_cols() && this->ctx_) return;
    this->require_unpinned("resize");
    check_shape({rows, cols, 1});
    this->allocate({rows, cols, 1}, this->ctx_);
  }

  std::string to_string(const std::string& header = "") const {
    std::vector<T> values =
        this->ctx_ ? this->ctx_->template download<T>(region()) : std::vector<T>{};
    return format_matrix(header, this->n_rows(), this->n_cols(),
                         std::vector<double>(values.begin(), values.end()));
  }
  void print(std::ostream& os, const std::string& header = "") const { os << to_string(header); }
  void print(const std::string& header = "") const { print(std::cout, header); }

 protected:
  enum class Shape : std::uint8_t { Any, Column, Row };

  void check_shape(const Dims& dims) const {
    if ((shape_ == Shape::Column && dims.cols != 1) || (shape_ == Shape::Row && dims.rows != 1)) {
      throw ConformabilityError(std::string(shape_ == Shape::Column ? "column" : "row") +
                                " vector cannot hold dims " + lazyla::to_string(dims));
    }
  }

  void assign(const ExprPtr& node, AssignMode mode) {
    adopt_context(*node);
    const Dims dims = node->dims();
    if (!this->ctx_) return;  // empty expression, empty destination
    if (mode == AssignMode::Replace &&
        (dims.rows != this->n_rows() || dims.cols != this->n_cols() || this->buffer_ == kNoBuffer)) {
      this->require_unpinned("resize");
      check_shape(dims);
      Mat fresh(dims.rows, dims.cols, Fill::None, this->ctx_);
      fresh.assign(node, mode);
      this->steal(fresh);
      return;
    }
    AssignTarget target{region(), {this->n_rows(), this->n_cols(), 1}, elem_type_of<T>,
                        this->ctx_.get()};
    execute(lower(*node, target, mode, this->ctx_->rules()), *this->ctx_);
  }

  void adopt_context(const ExprNode& node) {
    const BackendContext* other = node.context();
    if (!this->ctx_) {
      if (other) this->ctx_ = context_of(node);
      return;
    }
    if (other && other != this->ctx_.get()) {
      throw ContractError("expression belongs to a different backend context");
    }
  }

  Mat& scalar_update(OpTag op, T s) {
    assign(build_unary(op, to_expr().node(), static_cast<double>(s)), AssignMode::Replace);
    return *this;
  }

  void check_index(std::size_t i, std::size_t j) const {
    if (i >= this->n_rows() || j >= this->n_cols()) {
      throw BoundsError("index (" + std::to_string(i) + ", " + std::to_string(j) +
                        ") out of range for dims " + lazyla::to_string(this->dims_));
    }
  }

  Region element_region(std::size_t i, std::size_t j) const noexcept {
    Region r = region();
    r.offset = i + j * this->n_rows();
    r.rows = 1;
    r.cols = 1;
    return r;
  }

  Shape shape_ = Shape::Any;
};

template <Scalar T>
class Col : public Mat<T> {
 public:
  Col() { this->shape_ = Mat<T>::Shape::Column; }
  explicit Col(std::size_t n, Fill fill = fill::zeros, std::shared_ptr<BackendContext> ctx = nullptr)
      : Mat<T>(n, 1, fill, std::move(ctx)) {
    this->shape_ = Mat<T>::Shape::Column;
  }
  Col(std::size_t n, std::shared_ptr<BackendContext> ctx) : Col(n, fill::zeros, std::move(ctx)) {}
  Col(std::initializer_list<T> values, std::shared_ptr<BackendContext> ctx = nullptr)
      : Mat<T>(values.size(), 1, Fill::None, std::move(ctx)) {
    this->shape_ = Mat<T>::Shape::Column;
    this->ctx_->template upload<T>(this->region(), std::span<const T>(values.begin(), values.size()));
  }
  Col(Mat<T>&& m) : Mat<T>(std::move(m)) {  // NOLINT(google-explicit-constructor)
    this->shape_ = Mat<T>::Shape::Column;
    this->check_shape(this->dims_);
  }
  template <Expression E>
    requires std::same_as<elem_t<E>, T> && (!std::derived_from<E, Mat<T>>)
  Col(const E& expr) {  // NOLINT(google-explicit-constructor)
    this->shape_ = Mat<T>::Shape::Column;
    this->assign(expr.to_expr().node(), AssignMode::Replace);
  }
  Col(const Col&) = default;
  Col(Col&&) noexcept = default;
  Col& operator=(const Col&) = default;
  Col& operator=(Col&&) = default;
  using Mat<T>::operator=;
};

template <Scalar T>
class Row : public Mat<T> {
 public:
  Row() { this->shape_ = Mat<T>::Shape::Row; }
  explicit Row(std::size_t n, Fill fill = fill::zeros, std::shared_ptr<BackendContext> ctx = nullptr)
      : Mat<T>(1, n, fill, std::move(ctx)) {
    this->shape_ = Mat<T>::Shape::Row;
  }
  Row(std::size_t n, std::shared_ptr<BackendContext> ctx) : Row(n, fill::zeros, std::move(ctx)) {}
  Row(std::initializer_list<T> values, std::shared_ptr<BackendContext> ctx = nullptr)
      : Mat<T>(1, values.size(), Fill::None, std::move(ctx)) {
    this->shape_ = Mat<T>::Shape::Row;
    this->ctx_->template upload<T>(this->region(), std::span<const T>(values.begin(), values.size()));
  }
  Row(Mat<T>&& m) : Mat<T>(std::move(m)) {  // NOLINT(google-explicit-constructor)
    this->shape_ = Mat<T>::Shape::Row;
    this->check_shape(this->dims_);
  }
  template <Expression E>
    requires std::same_as<elem_t<E>, T> && (!std::derived_from<E, Mat<T>>)
  Row(const E& expr) {  // NOLINT(google-explicit-constructor)
    this->shape_ = Mat<T>::Shape::Row;
    this->assign(expr.to_expr().node(), AssignMode::Replace);
  }
  Row(const Row&) = default;
  Row(Row&&) noexcept = default;
  Row& operator=(const Row&) = default;
  Row& operator=(Row&&) = default;
  using Mat<T>::operator=;
};

// Slices are contiguous, each slice column-major.
template <Scalar T>
class Cube : public DenseBase<T> {
 public:
  using elem_type = T;

  Cube(std::size_t rows, std::size_t cols, std::size_t slices, Fill fill = fill::zeros,
       std::shared_ptr<BackendContext> ctx = nullptr) {
    if (slices == 0) throw ContractError("a cube needs at least one slice");
    this->allocate({rows, cols, slices}, std::move(ctx));
    this->apply_fill(fill);
  }

  Cube(Cube&& other) noexcept { this->steal(other); }

  std::size_t n_slices() const noexcept { return this->dims_.slices; }

  View<T> slice(std::size_t s) {
    if (s >= n_slices()) {
      throw BoundsError("slice " + std::to_string(s) + " out of range for dims " +
                        lazyla::to_string(this->dims_));
    }
    Region r = Region::whole(this->buffer_, this->n_rows(), this->n_cols());
    r.offset = s * this->n_rows() * this->n_cols();
    return View<T>(*this, r, this->label() + "[" + std::to_string(s) + "]");
  }

  T operator()(std::size_t i, std::size_t j, std::size_t s) const {
    if (i >= this->n_rows() || j >= this->n_cols() || s >= n_slices()) {
      throw BoundsError("index (" + std::to_string(i) + ", " + std::to_string(j) + ", " +
                        std::to_string(s) + ") out of range for dims " +
                        lazyla::to_string(this->dims_));
    }
    Region r = Region::whole(this->buffer_, 1, 1);
    r.offset = i + j * this->n_rows() + s * this->n_rows() * this->n_cols();
    return this->ctx_->template download<T>(r)[0];
  }

  std::string to_string(const std::string& header = "") const {
    const std::vector<T> all = this->ctx_->template download<T>(this->whole_region());
    std::string out = header.empty() ? "" : header + "\n";
    const std::size_t per = this->n_rows() * this->n_cols();
    for (std::size_t s = 0; s < n_slices(); ++s) {
      std::vector<double> slice(all.begin() + s * per, all.begin() + (s + 1) * per);
      out += format_matrix("[slice " + std::to_string(s) + "]", this->n_rows(), this->n_cols(), slice);
    }
    return out;
  }
  void print(std::ostream& os, const std::string& header = "") const { os << to_string(header); }
};

// A diagonal, submatrix or cube-slice window. Reads and writes go straight
// to the parent's buffer; the parent cannot be resized while the view lives.
template <Scalar T>
class View {
 public:
  using elem_type = T;

  View(DenseBase<T>& parent, Region region, std::string label)
      : parent_(&parent), region_(region), label_(std::move(label)) {
    ++parent_->pins_;
  }
  View(const View& other) : parent_(other.parent_), region_(other.region_), label_(other.label_) {
    ++parent_->pins_;
  }
  ~View() { --parent_->pins_; }

  // Element-wise copy into this window.
  View& operator=(const View& other) {
    assign(other.to_expr().node(), AssignMode::Replace);
    return *this;
  }

  template <Expression E>
    requires std::same_as<elem_t<E>, T>
  View& operator=(const E& expr) {
    assign(expr.to_expr().node(), AssignMode::Replace);
    return *this;
  }
  template <Expression E>
    requires std::same_as<elem_t<E>, T>
  View& operator+=(const E& expr) {
    assign(expr.to_expr().node(), AssignMode::PlusEq);
    return *this;
  }
  template <Expression E>
    requires std::same_as<elem_t<E>, T>
  View& operator-=(const E& expr) {
    assign(expr.to_expr().node(), AssignMode::MinusEq);
    return *this;
  }

  View& operator=(T value) {
    parent_->ctx_->fill(FillKind::Value, region_, static_cast<double>(value));
    return *this;
  }
  View& operator+=(T s) { return scalar_update(OpTag::ScalarPlus, s); }
  View& operator-=(T s) { return scalar_update(OpTag::ScalarPlus, -s); }
  View& operator*=(T s) { return scalar_update(OpTag::ScalarTimes, s); }

  Expr<T> to_expr() const {
    TerminalRef ref;
    ref.ctx = parent_->ctx_.get();
    ref.elem = elem_type_of<T>;
    ref.region = region_;
    ref.name = label_;
    return Expr<T>(build_terminal(std::move(ref)));
  }

  const Region& region() const noexcept { return region_; }
  Dims dims() const noexcept { return {region_.rows, region_.cols, 1}; }
  std::size_t n_rows() const noexcept { return region_.rows; }
  std::size_t n_cols() const noexcept { return region_.cols; }
  std::size_t n_elem() const noexcept { return region_.count(); }

  T operator()(std::size_t i, std::size_t j) const {
    if (i >= n_rows() || j >= n_cols()) {
      throw BoundsError("index (" + std::to_string(i) + ", " + std::to_string(j) +
                        ") out of range for view dims " + to_string(dims()));
    }
    Region r = region_;
    r.offset = region_.index(i, j);
    r.rows = 1;
    r.cols = 1;
    return parent_->ctx_->template download<T>(r)[0];
  }

 private:
  void assign(const ExprPtr& node, AssignMode mode) {
    BackendContext& ctx = *parent_->ctx_;
    if (node->context() && node->context() != &ctx) {
      throw ContractError("expression belongs to a different backend context");
    }
    AssignTarget target{region_, dims(), elem_type_of<T>, &ctx};
    execute(lower(*node, target, mode, ctx.rules()), ctx);
  }

  View& scalar_update(OpTag op, T s) {
    assign(build_unary(op, to_expr().node(), static_cast<double>(s)), AssignMode::Replace);
    return *this;
  }

  DenseBase<T>* parent_;
  Region region_;
  std::string label_;
};

using fmat = Mat<float>;
using dmat = Mat<double>;
using mat = Mat<double>;
using fvec = Col<float>;
using dvec = Col<double>;
using vec = Col<double>;
using fcolvec = Col<float>;
using dcolvec = Col<double>;
using frowvec = Row<float>;
using drowvec = Row<double>;
using rowvec = Row<double>;
using fcube = Cube<float>;
using dcube = Cube<double>;
using cube = Cube<double>;

// ---------------------------------------------------------------------------
// Expression builders. None of these touch the backend.

template <Expression E>
Expr<elem_t<E>> trans(const E& e) {
  return Expr<elem_t<E>>(build_trans(e.to_expr().node()));
}

template <Expression A, Expression B>
  requires std::same_as<elem_t<A>, elem_t<B>>
Expr<elem_t<A>> operator*(const A& a, const B& b) {
  return Expr<elem_t<A>>(build_binary(OpTag::MatMul, a.to_expr().node(), b.to_expr().node()));
}

template <Expression A, Expression B>
  requires std::same_as<elem_t<A>, elem_t<B>>
Expr<elem_t<A>> operator+(const A& a, const B& b) {
  return Expr<elem_t<A>>(build_binary(OpTag::ElemPlus, a.to_expr().node(), b.to_expr().node()));
}

template <Expression A, Expression B>
  requires std::same_as<elem_t<A>, elem_t<B>>
Expr<elem_t<A>> operator-(const A& a, const B& b) {
  return Expr<elem_t<A>>(build_binary(OpTag::ElemMinus, a.to_expr().node(), b.to_expr().node()));
}

// Element-wise (Schur) product.
template <Expression A, Expression B>
  requires std::same_as<elem_t<A>, elem_t<B>>
Expr<elem_t<A>> operator%(const A& a, const B& b) {
  return Expr<elem_t<A>>(build_binary(OpTag::ElemTimes, a.to_expr().node(), b.to_expr().node()));
}

template <Expression E>
Expr<elem_t<E>> operator*(std::type_identity_t<elem_t<E>> s, const E& e) {
  return Expr<elem_t<E>>(build_unary(OpTag::ScalarTimes, e.to_expr().node(), s));
}

template <Expression E>
Expr<elem_t<E>> operator*(const E& e, std::type_identity_t<elem_t<E>> s) {
  return Expr<elem_t<E>>(build_unary(OpTag::ScalarTimes, e.to_expr().node(), s));
}

template <Expression E>
Expr<elem_t<E>> operator+(const E& e, std::type_identity_t<elem_t<E>> s) {
  return Expr<elem_t<E>>(build_unary(OpTag::ScalarPlus, e.to_expr().node(), s));
}

template <Expression E>
Expr<elem_t<E>> operator+(std::type_identity_t<elem_t<E>> s, const E& e) {
  return Expr<elem_t<E>>(build_unary(OpTag::ScalarPlus, e.to_expr().node(), s));
}

template <Expression E>
Expr<elem_t<E>> operator-(const E& e, std::type_identity_t<elem_t<E>> s) {
  return Expr<elem_t<E>>(build_unary(OpTag::ScalarPlus, e.to_expr().node(), -s));
}

template <Expression E>
Expr<elem_t<E>> operator-(std::type_identity_t<elem_t<E>> s, const E& e) {
  return Expr<elem_t<E>>(
      build_unary(OpTag::ScalarPlus, build_unary(OpTag::Negate, e.to_expr().node()), s));
}

template <Expression E>
Expr<elem_t<E>> operator-(const E& e) {
  return Expr<elem_t<E>>(build_unary(OpTag::Negate, e.to_expr().node()));
}

// Full reductions; each is a 1x1 expression.
template <Expression E>
Expr<elem_t<E>> sum(const E& e) {
  return Expr<elem_t<E>>(build_reduction(OpTag::Sum, e.to_expr().node()));
}

template <Expression E>
Expr<elem_t<E>> mean(const E& e) {
  return Expr<elem_t<E>>(build_reduction(OpTag::Mean, e.to_expr().node()));
}

// Sample variance (normalized by N - 1; 0 for a single element).
template <Expression E>
Expr<elem_t<E>> var(const E& e) {
  return Expr<elem_t<E>>(build_reduction(OpTag::Variance, e.to_expr().node()));
}

// Evaluates a 1x1 expression and transfers the value to the host.
template <Expression E>
elem_t<E> as_scalar(const E& e) {
  using T = elem_t<E>;
  const Expr<T> x = e.to_expr();
  if (x.n_rows() != 1 || x.n_cols() != 1) {
    throw ConformabilityError("as_scalar needs a 1x1 expression, got " + to_string(x.dims()));
  }
  Mat<T> out(1, 1, Fill::None, context_of(*x.node()));
  out = x;
  return out(0, 0);
}

// Sum of all elements, evaluated immediately.
template <Expression E>
elem_t<E> accu(const E& e) {
  return as_scalar(Expr<elem_t<E>>(build_reduction(OpTag::Accu, e.to_expr().node())));
}

namespace detail {
template <Expression E>
elem_t<E> reduce_value(const E& e, ReduceKind kind) {
  using T = elem_t<E>;
  const Expr<T> x = e.to_expr();
  auto ctx = context_of(*x.node());
  if (!ctx || x.n_elem() == 0) throw ContractError("min/max of an empty expression");
  if (x.node()->is_terminal()) return static_cast<T>(ctx->reduce_scalar(kind, x.node()->terminal().region));
  const Mat<T> tmp(x);
  return static_cast<T>(ctx->reduce_scalar(kind, tmp.region()));
}
}  // namespace detail

template <Expression E>
elem_t<E> min(const E& e) {
  return detail::reduce_value(e, ReduceKind::Min);
}

template <Expression E>
elem_t<E> max(const E& e) {
  return detail::reduce_value(e, ReduceKind::Max);
}

}  // namespace lazyla
