#pragma once

#include <Eigen/Core>

#include "evkp/error.hpp"

namespace evkp {

inline constexpr int kCellSize = 8;
inline constexpr int kDetectorChannels = 65;  // 8x8 pixel bins + dustbin
inline constexpr int kDustbin = 64;
inline constexpr int kDefaultDescriptorDim = 256;

/// Per-cell channel vectors on a rows x cols grid of 8x8-pixel cells. Row
/// `r * cols + c` of `values` holds the channels of cell (r, c).
template <typename Scalar>
struct CellGrid {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  int rows = 0;
  int cols = 0;
  Matrix values;

  CellGrid() = default;
  CellGrid(int rows_, int cols_, int channels)
      : rows(rows_), cols(cols_), values(Matrix::Zero(static_cast<Eigen::Index>(rows_) * cols_, channels)) {
    if (rows_ < 0 || cols_ < 0 || channels < 1) throw InvalidArgument("invalid cell grid shape");
  }

  int channels() const { return static_cast<int>(values.cols()); }
  int cells() const { return rows * cols; }
  int index(int r, int c) const { return r * cols + c; }

  auto cell(int r, int c) { return values.row(index(r, c)); }
  auto cell(int r, int c) const { return values.row(index(r, c)); }

  template <typename Other>
  CellGrid<Other> cast() const {
    CellGrid<Other> out;
    out.rows = rows;
    out.cols = cols;
    out.values = values.template cast<Other>();
    return out;
  }
};

/// Detector logits: 65 channels per cell.
template <typename Scalar>
using CellScores = CellGrid<Scalar>;

/// Grid descriptors: D channels per cell.
template <typename Scalar>
using DescriptorGrid = CellGrid<Scalar>;

}  // namespace evkp
