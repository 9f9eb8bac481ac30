#pragma once

// Mesh sequences, per-subject normalization, and evaluation metrics.

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "gruface/error.hpp"
#include "gruface/tensor.hpp"

namespace gruface {

/// A 4D scan: T frames of V vertices. Row t of `frames` holds frame t as
/// (x0, y0, z0, x1, y1, z1, ...).
struct MeshSequence {
  Matrix frames;
  double fps = 25.0;

  MeshSequence() = default;
  MeshSequence(Matrix f, double rate) : frames(std::move(f)), fps(rate) {}

  Eigen::Index num_frames() const { return frames.rows(); }
  Eigen::Index num_vertices() const { return frames.cols() / 3; }

  /// Frame t as a V x 3 matrix.
  Matrix frame(Eigen::Index t) const {
    Matrix out(num_vertices(), 3);
    for (Eigen::Index v = 0; v < out.rows(); ++v)
      for (int c = 0; c < 3; ++c) out(v, c) = frames(t, 3 * v + c);
    return out;
  }

  void set_frame(Eigen::Index t, const Matrix& vertices) {
    for (Eigen::Index v = 0; v < vertices.rows(); ++v)
      for (int c = 0; c < 3; ++c) frames(t, 3 * v + c) = vertices(v, c);
  }

  static MeshSequence from_frames(const std::vector<Matrix>& vertex_frames, double rate) {
    require(!vertex_frames.empty(), ErrorCode::empty_input, "mesh sequence needs at least one frame");
    const auto v = vertex_frames.front().rows();
    MeshSequence seq(Matrix(static_cast<Eigen::Index>(vertex_frames.size()), 3 * v), rate);
    for (std::size_t t = 0; t < vertex_frames.size(); ++t) {
      require(vertex_frames[t].rows() == v && vertex_frames[t].cols() == 3, ErrorCode::shape_mismatch,
              "frame " + std::to_string(t) + " has shape " + shape_of(vertex_frames[t]));
      seq.set_frame(static_cast<Eigen::Index>(t), vertex_frames[t]);
    }
    return seq;
  }
};

/// Neutral face of one subject, V x 3.
struct TemplateFace {
  Matrix vertices;
  std::string subject_id;

  Eigen::Index num_vertices() const { return vertices.rows(); }
};

struct NormalizationStats {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> range{1.0, 1.0, 1.0};

  void validate() const {
    for (int axis = 0; axis < 3; ++axis) {
      require(std::isfinite(range[axis]) && range[axis] > 0.0 && std::isfinite(mean[axis]),
              ErrorCode::degenerate_axis,
              "normalization range on axis " + std::to_string(axis) + " must be positive, got " +
                  std::to_string(range[axis]));
    }
  }
};

inline void validate(const MeshSequence& seq) {
  require(seq.frames.rows() >= 1 && seq.frames.cols() >= 3 && seq.frames.cols() % 3 == 0,
          ErrorCode::shape_mismatch, "mesh sequence has invalid shape " + shape_of(seq.frames));
  require(seq.fps > 0.0 && std::isfinite(seq.fps), ErrorCode::invalid_config, "mesh fps must be positive");
  require(seq.frames.allFinite(), ErrorCode::non_finite, "mesh sequence contains non-finite values");
}

inline void validate(const TemplateFace& face) {
  require(face.vertices.rows() >= 1 && face.vertices.cols() == 3, ErrorCode::shape_mismatch,
          "template " + face.subject_id + " has invalid shape " + shape_of(face.vertices));
  require(face.vertices.allFinite(), ErrorCode::non_finite,
          "template " + face.subject_id + " contains non-finite values");
}

/// Per-axis mean and (max - min) of the neutral face.
inline NormalizationStats compute_normalization_stats(const TemplateFace& neutral) {
  validate(neutral);
  require(neutral.num_vertices() >= 2, ErrorCode::degenerate_axis,
          "template " + neutral.subject_id + " needs at least 2 vertices to define a range");
  NormalizationStats stats;
  for (int axis = 0; axis < 3; ++axis) {
    const auto col = neutral.vertices.col(axis);
    const double lo = col.minCoeff();
    const double hi = col.maxCoeff();
    if (!(hi > lo)) {
      fail(ErrorCode::degenerate_axis, "template " + neutral.subject_id + " has zero extent on axis " +
                                           std::to_string(axis));
    }
    stats.mean[axis] = col.mean();
    stats.range[axis] = hi - lo;
  }
  return stats;
}

namespace detail {

// Applies f(value, axis) to every coordinate of an interleaved xyz row layout.
template <typename F>
Matrix map_axes(const Matrix& interleaved, F f) {
  Matrix out(interleaved.rows(), interleaved.cols());
  for (Eigen::Index c = 0; c < interleaved.cols(); ++c) {
    const int axis = static_cast<int>(c % 3);
    for (Eigen::Index r = 0; r < interleaved.rows(); ++r) out(r, c) = f(interleaved(r, c), axis);
  }
  return out;
}

}  // namespace detail

inline TemplateFace normalize(const TemplateFace& face, const NormalizationStats& stats) {
  stats.validate();
  TemplateFace out{face.vertices, face.subject_id};
  for (int axis = 0; axis < 3; ++axis) {
    out.vertices.col(axis) = (face.vertices.col(axis).array() - stats.mean[axis]) / stats.range[axis];
  }
  return out;
}

inline MeshSequence normalize(const MeshSequence& seq, const NormalizationStats& stats) {
  stats.validate();
  return {detail::map_axes(seq.frames,
                           [&](double v, int a) { return (v - stats.mean[a]) / stats.range[a]; }),
          seq.fps};
}

inline TemplateFace denormalize(const TemplateFace& face, const NormalizationStats& stats) {
  stats.validate();
  TemplateFace out{face.vertices, face.subject_id};
  for (int axis = 0; axis < 3; ++axis) {
    out.vertices.col(axis) = face.vertices.col(axis).array() * stats.range[axis] + stats.mean[axis];
  }
  return out;
}

inline MeshSequence denormalize(const MeshSequence& seq, const NormalizationStats& stats) {
  stats.validate();
  return {detail::map_axes(seq.frames,
                           [&](double v, int a) { return v * stats.range[a] + stats.mean[a]; }),
          seq.fps};
}

/// Mean over frames of the mean per-vertex Euclidean distance, for one pair.
inline double sequence_vertex_error(const MeshSequence& pred, const MeshSequence& gt) {
  require(pred.num_frames() == gt.num_frames() && pred.num_vertices() == gt.num_vertices(),
          ErrorCode::shape_mismatch,
          "prediction has " + std::to_string(pred.num_frames()) + " frames x " +
              std::to_string(pred.num_vertices()) + " vertices, ground truth has " +
              std::to_string(gt.num_frames()) + " x " + std::to_string(gt.num_vertices()));
  require(pred.num_frames() >= 1 && pred.num_vertices() >= 1, ErrorCode::empty_input, "empty mesh sequence");
  const Eigen::Index verts = pred.num_vertices();
  double frame_sum = 0.0;
  for (Eigen::Index t = 0; t < pred.num_frames(); ++t) {
    double vertex_sum = 0.0;
    for (Eigen::Index v = 0; v < verts; ++v) {
      vertex_sum += (pred.frames.row(t).segment<3>(3 * v) - gt.frames.row(t).segment<3>(3 * v)).norm();
    }
    frame_sum += vertex_sum / static_cast<double>(verts);
  }
  return frame_sum / static_cast<double>(pred.num_frames());
}

/// Mean face vertex error over a set of aligned sequences, each sequence
/// weighted equally regardless of its length.
inline double mean_face_vertex_error(std::span<const MeshSequence> pred, std::span<const MeshSequence> gt) {
  require(pred.size() == gt.size(), ErrorCode::shape_mismatch,
          std::to_string(pred.size()) + " predicted sequences vs " + std::to_string(gt.size()) +
              " ground-truth sequences");
  require(!pred.empty(), ErrorCode::empty_input, "no sequences to evaluate");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) total += sequence_vertex_error(pred[i], gt[i]);
  return total / static_cast<double>(pred.size());
}

/// Per-vertex distance between two V x 3 frames scaled so the largest is 1.
/// Identical frames give all zeros.
inline Vector vertex_difference_heatmap(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == 3 && b.cols() == 3, ErrorCode::shape_mismatch,
          "heatmap frames have shapes " + shape_of(a) + " and " + shape_of(b));
  Vector dist = (a - b).rowwise().norm();
  const double peak = dist.size() > 0 ? dist.maxCoeff() : 0.0;
  if (peak > 0.0) {
    dist /= peak;
  } else {
    dist.setZero();
  }
  return dist;
}

}  // namespace gruface
