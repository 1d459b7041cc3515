#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace wbsgd {

using Vector = std::vector<double>;
using Index = std::size_t;

/// Row-major real matrix. Immutable once built; every entry is finite.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static DenseMatrix zeros(std::size_t rows, std::size_t cols);
  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  std::span<const double> row(Index i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }
  double operator()(Index i, Index j) const noexcept { return data_[i * cols_ + j]; }
  std::span<const double> data() const noexcept { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// A subset of rows of a parent matrix, in caller-given order (A_tau).
/// Holds references; the parent and index storage must outlive the view.
class RowView {
 public:
  RowView(const DenseMatrix& parent, std::span<const Index> indices);

  std::size_t size() const noexcept { return indices_.size(); }
  std::size_t cols() const noexcept { return parent_->cols(); }
  Index index(std::size_t k) const noexcept { return indices_[k]; }
  std::span<const Index> indices() const noexcept { return indices_; }
  std::span<const double> row(std::size_t k) const noexcept {
    return parent_->row(indices_[k]);
  }
  const DenseMatrix& parent() const noexcept { return *parent_; }

 private:
  const DenseMatrix* parent_;
  std::span<const Index> indices_;
};

}  // namespace wbsgd
