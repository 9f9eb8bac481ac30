#pragma once

// Speech feature sequences and their alignment to mesh frame rate.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gruface/error.hpp"
#include "gruface/tensor.hpp"

namespace gruface {

enum class FeatureProvenance : std::uint8_t {
  pretrained_export = 0,
  mfcc = 1,
  synthetic = 2,
};

inline std::string provenance_name(FeatureProvenance p) {
  switch (p) {
    case FeatureProvenance::pretrained_export: return "pretrained_export";
    case FeatureProvenance::mfcc: return "mfcc";
    case FeatureProvenance::synthetic: return "synthetic";
  }
  return "unknown";
}

/// T_X x B speech features sampled at `fps`.
struct FeatureSequence {
  Matrix data;
  double fps = 50.0;
  FeatureProvenance provenance = FeatureProvenance::synthetic;

  Eigen::Index num_frames() const { return data.rows(); }
  Eigen::Index width() const { return data.cols(); }
};

/// Features with exactly one row per mesh frame: T x (ceil(k) * B).
struct AdjustedFeatures {
  Matrix data;
  int k_ceil = 1;

  Eigen::Index num_frames() const { return data.rows(); }
  Eigen::Index width() const { return data.cols(); }
};

struct AudioWaveform {
  std::vector<double> samples;
  int sample_rate = 16000;
};

inline void validate(const FeatureSequence& f) {
  require(f.data.rows() >= 1 && f.data.cols() >= 1, ErrorCode::empty_input,
          "feature sequence is empty " + shape_of(f.data));
  require(f.fps > 0.0 && std::isfinite(f.fps), ErrorCode::invalid_config, "feature fps must be positive");
  require(f.data.allFinite(), ErrorCode::non_finite, "feature sequence contains non-finite values");
}

/// Ratio between feature and mesh frame rates, snapped to an integer when
/// the two rates divide (tolerates f32 rounding of stored rates).
struct FrameRatio {
  double k;
  bool integral;
  int k_ceil;
};

inline FrameRatio frame_ratio(double feature_fps, double mesh_fps) {
  require(feature_fps > 0.0 && mesh_fps > 0.0, ErrorCode::invalid_ratio, "frame rates must be positive");
  const double k = feature_fps / mesh_fps;
  const double nearest = std::round(k);
  const bool integral = nearest >= 1.0 && std::abs(k - nearest) < 1e-6;
  if (!integral && k < 1.0) {
    fail(ErrorCode::invalid_ratio, "mesh fps " + std::to_string(mesh_fps) + " exceeds feature fps " +
                                       std::to_string(feature_fps));
  }
  return {k, integral, integral ? static_cast<int>(nearest) : static_cast<int>(std::ceil(k))};
}

/// Linear interpolation of rows to `out_rows` samples, first and last
/// output rows aligned with the first and last input rows.
inline Matrix resample_rows_linear(const Matrix& in, Eigen::Index out_rows) {
  require(in.rows() >= 1, ErrorCode::empty_input, "cannot resample an empty sequence");
  require(out_rows >= 1, ErrorCode::empty_input, "resample target must have at least one row");
  Matrix out(out_rows, in.cols());
  if (in.rows() == 1 || out_rows == 1) {
    out.rowwise() = in.row(0);
    return out;
  }
  const double step = static_cast<double>(in.rows() - 1) / static_cast<double>(out_rows - 1);
  for (Eigen::Index j = 0; j < out_rows; ++j) {
    const double pos = (j == out_rows - 1) ? static_cast<double>(in.rows() - 1) : step * static_cast<double>(j);
    auto lo = static_cast<Eigen::Index>(std::floor(pos));
    if (lo >= in.rows() - 1) lo = in.rows() - 2;
    const double w = pos - static_cast<double>(lo);
    out.row(j) = (1.0 - w) * in.row(lo) + w * in.row(lo + 1);
  }
  return out;
}

/// Groups every k consecutive rows into one: (k*T, B) -> (T, k*B), segments
/// in temporal order.
inline Matrix stack_frames(const Matrix& in, int k) {
  require(k >= 1 && in.rows() % k == 0, ErrorCode::shape_mismatch,
          "cannot stack " + std::to_string(in.rows()) + " rows in groups of " + std::to_string(k));
  const Eigen::Index rows = in.rows() / k;
  const Eigen::Index width = in.cols();
  Matrix out(rows, width * k);
  for (Eigen::Index t = 0; t < rows; ++t)
    for (int s = 0; s < k; ++s) out.row(t).segment(s * width, width) = in.row(t * k + s);
  return out;
}

/// Maps T_X feature rows onto T_Y mesh frames. An exact integer ratio is a
/// pure reshape; anything else is resampled to ceil(k) * T_Y rows first.
inline AdjustedFeatures input_representation_adjustment(const FeatureSequence& features, double mesh_fps,
                                                        Eigen::Index mesh_frames) {
  require(features.data.rows() >= 1 && features.data.cols() >= 1, ErrorCode::empty_input,
          "feature sequence is empty " + shape_of(features.data));
  require(mesh_frames >= 1, ErrorCode::empty_input, "target mesh frame count must be at least 1");
  const FrameRatio ratio = frame_ratio(features.fps, mesh_fps);
  const Eigen::Index target_rows = ratio.k_ceil * mesh_frames;
  if (ratio.integral && features.data.rows() == target_rows) {
    return {stack_frames(features.data, ratio.k_ceil), ratio.k_ceil};
  }
  return {stack_frames(resample_rows_linear(features.data, target_rows), ratio.k_ceil), ratio.k_ceil};
}

}  // namespace gruface
