#include "boxtax/sparse.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "boxtax/errors.hpp"

namespace boxtax {

SparseMatrix SparseMatrix::from_triplets(int rows, int cols, std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols) {
      throw DimensionError("sparse triplet outside " + std::to_string(rows) + "x" + std::to_string(cols));
    }
  }
  std::sort(triplets.begin(), triplets.end(),
            [](const Triplet& a, const Triplet& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
  SparseMatrix m(rows, cols);
  std::vector<std::int64_t> per_row(static_cast<std::size_t>(rows), 0);
  for (std::size_t k = 0; k < triplets.size();) {
    const Triplet first = triplets[k];
    double v = 0.0;
    while (k < triplets.size() && triplets[k].row == first.row && triplets[k].col == first.col) {
      v += triplets[k].value;
      ++k;
    }
    if (v == 0.0) continue;
    m.col_idx_.push_back(first.col);
    m.values_.push_back(v);
    ++per_row[first.row];
  }
  for (int r = 0; r < rows; ++r) m.row_ptr_[r + 1] = m.row_ptr_[r] + per_row[r];
  return m;
}

double SparseMatrix::at(int row, int col) const {
  const auto begin = col_idx_.begin() + row_ptr_[row];
  const auto end = col_idx_.begin() + row_ptr_[row + 1];
  const auto it = std::lower_bound(begin, end, col);
  if (it == end || *it != col) return 0.0;
  return values_[static_cast<std::size_t>(it - col_idx_.begin())];
}

double SparseMatrix::row_sum(int row) const {
  double s = 0.0;
  for (std::int64_t k = row_ptr_[row]; k < row_ptr_[row + 1]; ++k) s += values_[k];
  return s;
}

std::vector<Triplet> SparseMatrix::triplets() const {
  std::vector<Triplet> out;
  out.reserve(values_.size());
  for (int r = 0; r < rows_; ++r) for_row(r, [&](int c, double v) { out.push_back({r, c, v}); });
  return out;
}

void SparseMatrix::write(std::ostream& os) const {
  os << rows_ << ' ' << cols_ << ' ' << nnz() << '\n';
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (int r = 0; r < rows_; ++r) {
    for_row(r, [&](int c, double v) { os << r << ' ' << c << ' ' << v << '\n'; });
  }
}

SparseMatrix SparseMatrix::read(std::istream& is) {
  long long rows = 0, cols = 0, nnz = 0;
  if (!(is >> rows >> cols >> nnz) || rows < 0 || cols < 0 || nnz < 0) {
    throw std::runtime_error("sparse matrix: malformed header");
  }
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(nnz));
  for (long long k = 0; k < nnz; ++k) {
    Triplet x{};
    if (!(is >> x.row >> x.col >> x.value)) throw std::runtime_error("sparse matrix: truncated entries");
    t.push_back(x);
  }
  return from_triplets(static_cast<int>(rows), static_cast<int>(cols), std::move(t));
}

void SparseMatrix::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write(os);
}

SparseMatrix SparseMatrix::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return read(is);
}

}  // namespace boxtax
