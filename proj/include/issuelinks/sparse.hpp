#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "issuelinks/error.hpp"
#include "issuelinks/text.hpp"

namespace issuelinks {

/// Row-major sparse matrix assembled from SparseVectors of equal dimension.
struct CsrMatrix {
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  std::size_t rows() const { return row_ptr.size() - 1; }

  std::span<const std::uint32_t> row_indices(std::size_t r) const {
    return {indices.data() + row_ptr[r], row_ptr[r + 1] - row_ptr[r]};
  }
  std::span<const double> row_values(std::size_t r) const {
    return {values.data() + row_ptr[r], row_ptr[r + 1] - row_ptr[r]};
  }

  static CsrMatrix from_rows(std::span<const SparseVector> rows, std::size_t cols) {
    CsrMatrix m;
    m.cols = cols;
    for (const auto& v : rows) {
      if (v.dimension != cols) {
        throw Error(ErrorKind::DimensionMismatch, "row dimension " + std::to_string(v.dimension) +
                                                      " != " + std::to_string(cols));
      }
      m.indices.insert(m.indices.end(), v.indices.begin(), v.indices.end());
      m.values.insert(m.values.end(), v.values.begin(), v.values.end());
      m.row_ptr.push_back(m.indices.size());
    }
    return m;
  }
};

/// Value of feature `f` in a sorted sparse row, 0 when absent.
inline double sparse_at(std::span<const std::uint32_t> idx, std::span<const double> val, std::uint32_t f) {
  auto it = std::lower_bound(idx.begin(), idx.end(), f);
  if (it == idx.end() || *it != f) return 0.0;
  return val[static_cast<std::size_t>(it - idx.begin())];
}

}  // namespace issuelinks
