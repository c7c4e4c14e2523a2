#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace boxtax {

struct Triplet {
  int row;
  int col;
  double value;
};

/// Compressed sparse row matrix of doubles. Column indices within a row are
/// strictly increasing.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(int rows, int cols) : rows_(rows), cols_(cols), row_ptr_(static_cast<std::size_t>(rows) + 1, 0) {}

  /// Duplicate coordinates are summed; explicit zeros are dropped.
  static SparseMatrix from_triplets(int rows, int cols, std::vector<Triplet> triplets);

  [[nodiscard]] int rows() const { return rows_; }
  [[nodiscard]] int cols() const { return cols_; }
  [[nodiscard]] std::size_t nnz() const { return values_.size(); }

  [[nodiscard]] double at(int row, int col) const;
  [[nodiscard]] double row_sum(int row) const;

  /// Calls fn(col, value) for each stored entry of the row.
  template <typename Fn>
  void for_row(int row, Fn&& fn) const {
    for (std::int64_t k = row_ptr_[row]; k < row_ptr_[row + 1]; ++k) fn(col_idx_[k], values_[k]);
  }

  [[nodiscard]] std::vector<Triplet> triplets() const;

  /// Text form: header "rows cols nnz", then one "i j value" line per entry, 0-indexed.
  void write(std::ostream& os) const;
  static SparseMatrix read(std::istream& is);
  void save(const std::filesystem::path& path) const;
  static SparseMatrix load(const std::filesystem::path& path);

  friend bool operator==(const SparseMatrix& a, const SparseMatrix& b) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<std::int64_t> row_ptr_{0};
  std::vector<int> col_idx_;
  std::vector<double> values_;
};

}  // namespace boxtax
