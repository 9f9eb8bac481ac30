#pragma once

#include <cmath>

#include "gruface/mesh.hpp"

namespace gruface {

struct LossResult {
  double value = 0.0;
  Matrix gradient;  // d value / d prediction, same layout as frames
};

inline double huber(double residual, double delta) {
  const double a = std::abs(residual);
  return a <= delta ? 0.5 * residual * residual : delta * (a - 0.5 * delta);
}

inline double huber_derivative(double residual, double delta) {
  if (std::abs(residual) <= delta) return residual;
  return residual > 0.0 ? delta : -delta;
}

/// Huber loss averaged over every coordinate of every frame.
inline LossResult huber_loss(const MeshSequence& pred, const MeshSequence& gt, double delta) {
  require(delta > 0.0, ErrorCode::invalid_config, "Huber delta must be positive");
  require(pred.frames.rows() == gt.frames.rows() && pred.frames.cols() == gt.frames.cols(),
          ErrorCode::shape_mismatch,
          "prediction " + shape_of(pred.frames) + " and ground truth " + shape_of(gt.frames) + " differ in shape");
  const double n = static_cast<double>(pred.frames.size());
  LossResult result{0.0, Matrix(pred.frames.rows(), pred.frames.cols())};
  for (Eigen::Index i = 0; i < pred.frames.size(); ++i) {
    const double r = pred.frames.data()[i] - gt.frames.data()[i];
    result.value += huber(r, delta);
    result.gradient.data()[i] = huber_derivative(r, delta) / n;
  }
  result.value /= n;
  return result;
}

}  // namespace gruface
