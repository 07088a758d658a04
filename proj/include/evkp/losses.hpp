#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "evkp/grid.hpp"

namespace evkp {

/// Weights and margins of the training loss.
struct LossConfig {
  double descriptor_weight = 10.0;  // weight of the descriptor term in the total
  double positive_weight = 0.5;     // weight of corresponding-pair hinge terms
  double positive_margin = 1.0;     // similarity targeted for correspondences
  double negative_margin = 0.2;     // similarity ceiling for non-correspondences

  void validate() const {
    if (!(descriptor_weight > 0 && positive_weight > 0 && positive_margin > 0 && negative_margin > 0))
      throw InvalidArgument("loss weights and margins must be positive");
    if (!(positive_margin > negative_margin))
      throw InvalidArgument("positive margin must exceed negative margin");
  }
};

/// One class per cell: pixel bin 0..63 (row * 8 + col) or the dustbin 64.
struct DetectorTarget {
  int rows = 0;
  int cols = 0;
  std::vector<int> classes;

  static DetectorTarget all_dustbin(int rows, int cols) {
    return {rows, cols, std::vector<int>(static_cast<std::size_t>(rows) * cols, kDustbin)};
  }
};

/// Labeled cells of both grids plus the corresponding (positive) cell pairs.
/// Every other labeled cross pair is a non-correspondence.
struct DescriptorTarget {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> labeled_a;  // per cell, nonzero = labeled
  std::vector<std::uint8_t> labeled_b;
  std::vector<std::pair<int, int>> positives;  // (cell index in A, cell index in B)
};

template <typename Scalar>
struct DetectorLoss {
  Scalar value = 0;
  CellScores<Scalar> gradient;
};

/// Mean softmax cross-entropy over cells with gradient (softmax - onehot) / cells.
template <typename Scalar>
DetectorLoss<Scalar> detector_loss(const CellScores<Scalar>& logits, const DetectorTarget& target) {
  if (logits.channels() != kDetectorChannels) throw InvalidArgument("detector logits need 65 channels");
  if (target.rows != logits.rows || target.cols != logits.cols ||
      target.classes.size() != static_cast<std::size_t>(logits.cells()))
    throw InvalidArgument("detector target shape mismatch");

  DetectorLoss<Scalar> out{Scalar(0), CellScores<Scalar>(logits.rows, logits.cols, kDetectorChannels)};
  const int cells = logits.cells();
  if (cells == 0) return out;
  const Scalar inv_cells = Scalar(1) / static_cast<Scalar>(cells);
  for (int k = 0; k < cells; ++k) {
    const int cls = target.classes[k];
    if (cls < 0 || cls >= kDetectorChannels) throw InvalidArgument("detector target class out of range");
    const auto row = logits.values.row(k);
    const Scalar top = row.maxCoeff();
    const auto shifted_exp = (row.array() - top).exp();
    const Scalar sum = shifted_exp.sum();
    out.value += (std::log(sum) + top - row(cls)) * inv_cells;
    out.gradient.values.row(k) = shifted_exp / sum * inv_cells;
    out.gradient.values(k, cls) -= inv_cells;
  }
  return out;
}

template <typename Scalar>
struct DescriptorLoss {
  Scalar value = 0;
  DescriptorGrid<Scalar> grad_a;
  DescriptorGrid<Scalar> grad_b;
};

/// Hinge loss on cosine similarities between labeled cells of two raw
/// descriptor grids. Gradients are taken through the L2 normalization;
/// at a hinge kink the flat side (zero) is used. Unlabeled cells get zero.
template <typename Scalar>
DescriptorLoss<Scalar> descriptor_loss(const DescriptorGrid<Scalar>& a, const DescriptorGrid<Scalar>& b,
                                       const DescriptorTarget& target, const LossConfig& config) {
  using Matrix = typename DescriptorGrid<Scalar>::Matrix;
  config.validate();
  if (a.rows != b.rows || a.cols != b.cols || a.channels() != b.channels())
    throw InvalidArgument("descriptor grids must have the same shape");
  const std::size_t cells = static_cast<std::size_t>(a.cells());
  if (target.rows != a.rows || target.cols != a.cols || target.labeled_a.size() != cells ||
      target.labeled_b.size() != cells)
    throw InvalidArgument("descriptor target shape mismatch");

  // Local indices of the labeled cells on each side.
  std::vector<int> local_a(cells, -1), local_b(cells, -1), cells_a, cells_b;
  for (std::size_t k = 0; k < cells; ++k) {
    if (target.labeled_a[k]) { local_a[k] = static_cast<int>(cells_a.size()); cells_a.push_back(static_cast<int>(k)); }
    if (target.labeled_b[k]) { local_b[k] = static_cast<int>(cells_b.size()); cells_b.push_back(static_cast<int>(k)); }
  }
  const Eigen::Index na = static_cast<Eigen::Index>(cells_a.size());
  const Eigen::Index nb = static_cast<Eigen::Index>(cells_b.size());

  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> positive =
      Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(na, nb);
  std::vector<std::uint8_t> used_a(cells, 0), used_b(cells, 0);
  for (const auto& [ca, cb] : target.positives) {
    if (ca < 0 || cb < 0 || static_cast<std::size_t>(ca) >= cells || static_cast<std::size_t>(cb) >= cells)
      throw InvalidArgument("positive pair references a cell outside the grid");
    if (local_a[ca] < 0 || local_b[cb] < 0)
      throw InvalidArgument("positive pair (" + std::to_string(ca) + ", " + std::to_string(cb) +
                            ") references an unlabeled cell");
    if (used_a[ca]++ || used_b[cb]++) throw InvalidArgument("positive pairs must be disjoint per side");
    positive(local_a[ca], local_b[cb]) = 1;
  }

  const Eigen::Index dim = a.channels();
  Matrix ya(na, dim), yb(nb, dim);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> norm_a(na), norm_b(nb);
  const auto gather = [](const DescriptorGrid<Scalar>& grid, const std::vector<int>& idx, Matrix& unit,
                         Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& norms) {
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const auto raw = grid.values.row(idx[r]);
      const Scalar n = raw.norm();
      norms(r) = n;
      unit.row(r) = n > Scalar(0) ? (raw / n).eval() : raw.eval();
    }
  };
  gather(a, cells_a, ya, norm_a);
  gather(b, cells_b, yb, norm_b);

  const Matrix sim = ya * yb.transpose();
  Matrix dsim = Matrix::Zero(na, nb);
  const Scalar cd = static_cast<Scalar>(config.positive_weight);
  const Scalar cp = static_cast<Scalar>(config.positive_margin);
  const Scalar cn = static_cast<Scalar>(config.negative_margin);
  DescriptorLoss<Scalar> out{Scalar(0), DescriptorGrid<Scalar>(a.rows, a.cols, static_cast<int>(dim)),
                             DescriptorGrid<Scalar>(a.rows, a.cols, static_cast<int>(dim))};
  for (Eigen::Index i = 0; i < na; ++i) {
    for (Eigen::Index j = 0; j < nb; ++j) {
      const Scalar d = sim(i, j);
      if (positive(i, j)) {
        if (cp - d > Scalar(0)) { out.value += cd * (cp - d); dsim(i, j) = -cd; }
      } else if (d - cn > Scalar(0)) {
        out.value += d - cn;
        dsim(i, j) = Scalar(1);
      }
    }
  }

  // Back through y_hat = y / |y|: dL/dy = (g - y_hat (y_hat . g)) / |y|.
  const Matrix g_unit_a = dsim * yb;
  const Matrix g_unit_b = dsim.transpose() * ya;
  const auto scatter = [](const Matrix& g_unit, const Matrix& unit,
                          const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& norms, const std::vector<int>& idx,
                          DescriptorGrid<Scalar>& grad) {
    for (std::size_t r = 0; r < idx.size(); ++r) {
      if (!(norms(r) > Scalar(0))) continue;
      const auto g = g_unit.row(r);
      const auto u = unit.row(r);
      grad.values.row(idx[r]) = (g - u * u.dot(g)) / norms(r);
    }
  };
  scatter(g_unit_a, ya, norm_a, cells_a, out.grad_a);
  scatter(g_unit_b, yb, norm_b, cells_b, out.grad_b);
  return out;
}

struct LossParts {
  double detector_0 = 0.0;
  double detector_1 = 0.0;
  double descriptor = 0.0;
};

/// Detector losses of both tensors plus the weighted descriptor loss.
inline double total_loss(const LossParts& parts, const LossConfig& config) {
  return parts.detector_0 + parts.detector_1 + config.descriptor_weight * parts.descriptor;
}

}  // namespace evkp
