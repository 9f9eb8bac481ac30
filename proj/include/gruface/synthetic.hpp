#pragma once

// Procedural (features, mesh sequence) datasets with a known generating map:
//
//   y_t = template_s + M_s * tanh(A * z_t + c) + [expressive] * D
//
// where z_t is the adjusted feature row for mesh frame t, M_s is a
// subject-specific linear map, and D is a fixed deformation supported only
// on the "upper-face" vertices (the first ceil(V / 3) indices). Everything
// is drawn from one seed and kept in SyntheticOracle so tests can recompute
// ground truth independently of any file round trip.

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "gruface/features.hpp"
#include "gruface/mesh.hpp"
#include "gruface/training.hpp"

namespace gruface {

inline const std::vector<std::string>& default_emotion_labels() {
  static const std::vector<std::string> labels{"expressive", "neutral"};
  return labels;
}

struct SyntheticSpec {
  int num_vertices = 50;
  int frames_per_sequence = 40;
  int num_sequences = 20;
  int num_subjects = 2;
  int feature_dim = 16;
  double feature_fps = 50.0;
  double mesh_fps = 25.0;
  std::uint64_t seed = 0;
  double emotion_effect_scale = 0.1;
  double speech_effect_scale = 0.08;
  int latent_dim = 6;
  int feature_sources = 4;  // features are a fixed mixing of this many smooth signals

  void validate() const {
    require(num_vertices >= 2 && frames_per_sequence >= 1 && num_sequences >= 1 && num_subjects >= 1 &&
                feature_dim >= 1 && latent_dim >= 1 && feature_sources >= 1,
            ErrorCode::invalid_config, "synthetic spec sizes must be positive (V >= 2)");
    require(feature_fps > 0.0 && mesh_fps > 0.0 && mesh_fps <= feature_fps, ErrorCode::invalid_config,
            "synthetic spec needs 0 < mesh_fps <= feature_fps");
    require(emotion_effect_scale >= 0.0 && speech_effect_scale >= 0.0, ErrorCode::invalid_config,
            "effect scales must be non-negative");
  }

  Eigen::Index upper_face_count() const { return (num_vertices + 2) / 3; }
};

struct SyntheticOracle {
  Matrix feature_mixing;             // B x sources
  Matrix projection;                 // latent x (ceil(k) * B)
  Vector projection_bias;            // latent
  std::vector<Matrix> subject_maps;  // per subject, 3V x latent
  Matrix emotion_deformation;        // per subject columns, 3V x subjects
  std::vector<TemplateFace> templates;
  double mesh_fps = 25.0;
  int expressive_index = 0;

  /// Ground truth for arbitrary features under this generating map.
  MeshSequence ground_truth(const FeatureSequence& features, Eigen::Index frames, int subject, int emotion) const {
    const AdjustedFeatures z = input_representation_adjustment(features, mesh_fps, frames);
    const Matrix latent = ((projection * z.data.transpose()).colwise() + projection_bias).array().tanh();
    Matrix disp = subject_maps[subject] * latent;  // 3V x T
    if (emotion == expressive_index) disp.colwise() += emotion_deformation.col(subject);
    MeshSequence seq(disp.transpose(), mesh_fps);
    seq.frames.rowwise() += templates[subject].vertices.reshaped<Eigen::RowMajor>().transpose();
    return seq;
  }
};

struct SyntheticDataset {
  SyntheticSpec spec;
  SyntheticOracle oracle;
  Dataset dataset;
};

inline std::string synthetic_subject_label(int s) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "S%02d", s + 1);
  return buf;
}

/// Sum of three random sinusoids per feature dimension.
inline FeatureSequence smooth_random_features(Eigen::Index frames, Eigen::Index width, double fps, Rng& rng) {
  FeatureSequence f{Matrix::Zero(frames, width), fps, FeatureProvenance::synthetic};
  for (Eigen::Index b = 0; b < width; ++b) {
    for (int component = 0; component < 3; ++component) {
      const double amplitude = uniform(rng, 0.3, 1.0);
      const double freq = uniform(rng, 0.5, 3.0);
      const double phase = uniform(rng, 0.0, 2.0 * M_PI);
      for (Eigen::Index t = 0; t < frames; ++t) {
        f.data(t, b) += amplitude * std::sin(2.0 * M_PI * freq * static_cast<double>(t) / fps + phase);
      }
    }
  }
  return f;
}

/// Smooth per-sequence sources pushed through the dataset's fixed mixing.
inline FeatureSequence mixed_random_features(const Matrix& mixing, Eigen::Index frames, double fps, Rng& rng) {
  FeatureSequence sources = smooth_random_features(frames, mixing.cols(), fps, rng);
  sources.data = sources.data * mixing.transpose();
  return sources;
}

inline SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const FrameRatio ratio = frame_ratio(spec.feature_fps, spec.mesh_fps);
  const Eigen::Index verts = spec.num_vertices;
  const Eigen::Index z_width = static_cast<Eigen::Index>(ratio.k_ceil) * spec.feature_dim;

  SyntheticSpec s = spec;
  SyntheticDataset out{s, {}, {}};
  SyntheticOracle& oracle = out.oracle;
  oracle.mesh_fps = spec.mesh_fps;
  oracle.expressive_index = 0;  // "expressive" sorts before "neutral"

  oracle.feature_mixing = Matrix(spec.feature_dim, spec.feature_sources);
  fill_uniform(oracle.feature_mixing, rng, -1.0, 1.0);
  oracle.projection = Matrix(spec.latent_dim, z_width);
  fill_uniform(oracle.projection, rng, -1.0, 1.0);
  oracle.projection *= 1.5 / std::sqrt(static_cast<double>(z_width));
  oracle.projection_bias = Vector(spec.latent_dim);
  fill_uniform(oracle.projection_bias, rng, -0.3, 0.3);

  oracle.emotion_deformation = Matrix::Zero(3 * verts, spec.num_subjects);
  Vector direction(3 * verts);
  for (Eigen::Index v = 0; v < spec.upper_face_count(); ++v) {
    Eigen::Vector3d d(standard_normal(rng), standard_normal(rng), standard_normal(rng));
    direction.segment<3>(3 * v) = d.normalized();
  }

  for (int subj = 0; subj < spec.num_subjects; ++subj) {
    // Raw units: a face a bit over 100 units across, offset from the origin.
    Eigen::Array3d axis_scale, offset;
    for (int a = 0; a < 3; ++a) {
      axis_scale[a] = uniform(rng, 80.0, 120.0);
      offset[a] = uniform(rng, -50.0, 50.0);
    }
    TemplateFace face{Matrix(verts, 3), synthetic_subject_label(subj)};
    fill_uniform(face.vertices, rng, -0.5, 0.5);
    for (int a = 0; a < 3; ++a) face.vertices.col(a) = face.vertices.col(a).array() * axis_scale[a] + offset[a];
    // Guarantee a non-degenerate extent on every axis.
    face.vertices.row(0) = (offset - 0.5 * axis_scale).matrix().transpose();
    face.vertices.row(1) = (offset + 0.5 * axis_scale).matrix().transpose();
    oracle.templates.push_back(face);

    Matrix map(3 * verts, spec.latent_dim);
    fill_uniform(map, rng, -1.0, 1.0);
    map *= spec.speech_effect_scale;
    for (Eigen::Index r = 0; r < map.rows(); ++r) map.row(r) *= axis_scale[r % 3];
    oracle.subject_maps.push_back(map);

    for (Eigen::Index r = 0; r < 3 * spec.upper_face_count(); ++r) {
      oracle.emotion_deformation(r, subj) = spec.emotion_effect_scale * axis_scale[r % 3] * direction[r];
    }
  }

  Dataset& data = out.dataset;
  for (int s_i = 0; s_i < spec.num_subjects; ++s_i) data.subject_labels.push_back(synthetic_subject_label(s_i));
  data.emotion_labels = default_emotion_labels();

  const auto feature_frames =
      static_cast<Eigen::Index>(std::llround(ratio.k * static_cast<double>(spec.frames_per_sequence)));
  for (int i = 0; i < spec.num_sequences; ++i) {
    DatasetItem item;
    item.subject = i % spec.num_subjects;
    item.emotion = (i / spec.num_subjects) % 2 == 0 ? 1 : 0;  // alternate neutral / expressive
    char name[48];
    std::snprintf(name, sizeof name, "%s_seq%03d", synthetic_subject_label(item.subject).c_str(), i);
    item.name = name;
    item.features = mixed_random_features(oracle.feature_mixing, std::max<Eigen::Index>(feature_frames, 1),
                                          spec.feature_fps, rng);
    item.face = oracle.templates[item.subject];
    item.target = oracle.ground_truth(item.features, spec.frames_per_sequence, item.subject, item.emotion);
    data.items.push_back(std::move(item));
  }
  return out;
}

/// Applies each subject's neutral-face normalization to its template and
/// sequences, returning the per-subject stats.
inline std::vector<NormalizationStats> normalize_dataset(Dataset& data) {
  std::vector<NormalizationStats> stats(data.subject_labels.size());
  std::vector<bool> seen(data.subject_labels.size(), false);
  for (auto& item : data.items) {
    if (!seen[item.subject]) {
      stats[item.subject] = compute_normalization_stats(item.face);
      seen[item.subject] = true;
    }
    item.face = normalize(item.face, stats[item.subject]);
    item.target = normalize(item.target, stats[item.subject]);
  }
  return stats;
}

}  // namespace gruface
