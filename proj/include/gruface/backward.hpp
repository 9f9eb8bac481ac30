#pragma once

// Reverse-mode gradients of the decoder, from dL/d(prediction) back to
// every trainable tensor.

#include "gruface/model.hpp"

namespace gruface {

/// One gradient tensor per trainable tensor, shape-congruent with the
/// parameters it was computed for.
struct GradientSet {
  ModelParams values;

  static GradientSet zeros_like(const ModelParams& params) { return {gruface::zeros_like(params)}; }

  std::vector<TensorView<double>> tensors() { return values.tensors(); }
  std::vector<TensorView<const double>> tensors() const { return values.tensors(); }

  bool all_finite() const {
    for (const auto& t : tensors())
      for (double v : t.values)
        if (!std::isfinite(v)) return false;
    return true;
  }

  void add(const GradientSet& other) {
    auto dst = tensors();
    const auto src = other.tensors();
    for (std::size_t i = 0; i < dst.size(); ++i)
      for (std::size_t j = 0; j < dst[i].values.size(); ++j) dst[i].values[j] += src[i].values[j];
  }

  void scale(double factor) {
    for (auto& t : tensors())
      for (double& v : t.values) v *= factor;
  }
};

/// `d_prediction` is T x 3V, laid out like MeshSequence::frames.
inline GradientSet backward(const ModelParams& params, const ForwardTape& tape, const Matrix& d_prediction) {
  require(tape.recorded() && tape.conditioned.size() > 0, ErrorCode::missing_tape,
          "backward needs a tape recorded by a full forward pass");
  require(d_prediction.rows() == tape.prediction.frames.rows() &&
              d_prediction.cols() == tape.prediction.frames.cols(),
          ErrorCode::shape_mismatch,
          "loss gradient has shape " + shape_of(d_prediction) + ", prediction is " +
              shape_of(tape.prediction.frames));

  GradientSet grads = GradientSet::zeros_like(params);
  ModelParams& g = grads.values;

  // The template is an additive constant, so d(displacement) = d(prediction).
  const Matrix d_disp = d_prediction.transpose();  // 3V x T
  g.out.W_out.noalias() = d_disp * tape.conditioned.transpose();
  g.out.b_out = d_disp.rowwise().sum();
  const Matrix d_conditioned = params.out.W_out.transpose() * d_disp;  // H x T

  // Product rule across hidden * S * E, with S and E broadcast over time.
  const Vector& s = tape.subject_embedding;
  const Vector& e = tape.emotion_embedding;
  const Vector d_s = (d_conditioned.cwiseProduct(tape.hidden)).rowwise().sum().cwiseProduct(e);
  const Vector d_e = (d_conditioned.cwiseProduct(tape.hidden)).rowwise().sum().cwiseProduct(s);
  g.cond.W_S.col(tape.subject) += d_s;
  g.cond.b_S += d_s;
  g.cond.W_E.col(tape.emotion) += d_e;
  g.cond.b_E += d_e;

  Matrix d_layer = d_conditioned.array().colwise() * s.cwiseProduct(e).array();
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    Matrix d_inputs = layer_backward(params.layers[l], tape.layers[l], d_layer, g.layers[l]);
    if (l > 0) {
      if (!tape.dropout_masks.empty()) d_inputs = d_inputs.cwiseProduct(tape.dropout_masks[l - 1]);
      d_layer = std::move(d_inputs);
    }
  }
  return grads;
}

}  // namespace gruface
