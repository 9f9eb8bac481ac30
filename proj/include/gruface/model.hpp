#pragma once

// The speech-to-mesh decoder: stacked recurrent layers over adjusted
// features, subject/emotion conditioning by elementwise product, and a
// linear projection to vertex displacements added to the neutral face.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gruface/cells.hpp"
#include "gruface/features.hpp"
#include "gruface/mesh.hpp"

namespace gruface {

struct ModelConfig {
  CellKind cell = CellKind::gru;
  int hidden_size = 256;
  int num_layers = 2;
  int input_width = 1536;  // ceil(k) * B
  int num_vertices = 1;
  int num_subjects = 1;
  int num_emotions = 2;
  double dropout_rate = 0.3;

  void validate() const {
    require(hidden_size >= 1 && num_layers >= 1 && input_width >= 1 && num_vertices >= 1 &&
                num_subjects >= 1 && num_emotions >= 1,
            ErrorCode::invalid_config, "model dimensions must all be positive");
    require(dropout_rate >= 0.0 && dropout_rate < 1.0, ErrorCode::invalid_config,
            "dropout rate must lie in [0, 1), got " + std::to_string(dropout_rate));
  }

  bool operator==(const ModelConfig&) const = default;
};

struct ConditioningParams {
  Matrix W_S;  // hidden x subjects
  Vector b_S;
  Matrix W_E;  // hidden x emotions
  Vector b_E;

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    f("W_S", self.W_S);
    f("b_S", self.b_S);
    f("W_E", self.W_E);
    f("b_E", self.b_E);
  }
};

struct OutputLayerParams {
  Matrix W_out;  // 3V x hidden
  Vector b_out;

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    f("W_out", self.W_out);
    f("b_out", self.b_out);
  }
};

/// A view of one trainable tensor in column-major storage.
template <typename T>
struct TensorView {
  std::string name;
  std::span<T> values;
  Eigen::Index rows;
  Eigen::Index cols;
};

struct ModelParams {
  ModelConfig config;
  std::vector<RecurrentLayer> layers;
  ConditioningParams cond;
  OutputLayerParams out;

  /// Calls f(name, tensor) for every trainable tensor in a fixed order.
  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    for (std::size_t l = 0; l < self.layers.size(); ++l) {
      const std::string prefix = "layer" + std::to_string(l) + ".";
      std::visit([&](auto& layer) {
        std::decay_t<decltype(layer)>::visit(layer, [&](const char* name, auto& t) { f(prefix + name, t); });
      }, self.layers[l]);
    }
    ConditioningParams::visit(self.cond, [&](const char* name, auto& t) { f(std::string("cond.") + name, t); });
    OutputLayerParams::visit(self.out, [&](const char* name, auto& t) { f(std::string("out.") + name, t); });
  }

  std::vector<TensorView<double>> tensors() {
    std::vector<TensorView<double>> views;
    visit(*this, [&](const std::string& name, auto& t) {
      views.push_back({name, std::span<double>(t.data(), static_cast<std::size_t>(t.size())), t.rows(), t.cols()});
    });
    return views;
  }

  std::vector<TensorView<const double>> tensors() const {
    std::vector<TensorView<const double>> views;
    visit(*this, [&](const std::string& name, const auto& t) {
      views.push_back(
          {name, std::span<const double>(t.data(), static_cast<std::size_t>(t.size())), t.rows(), t.cols()});
    });
    return views;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors()) n += t.values.size();
    return n;
  }

  bool operator==(const ModelParams& other) const {
    if (!(config == other.config)) return false;
    const auto a = tensors();
    const auto b = other.tensors();
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].name != b[i].name || a[i].rows != b[i].rows || a[i].cols != b[i].cols) return false;
      if (!std::equal(a[i].values.begin(), a[i].values.end(), b[i].values.begin())) return false;
    }
    return true;
  }
};

/// Same structure and shapes as `like`, every value zero.
inline ModelParams zeros_like(const ModelParams& like) {
  ModelParams z;
  z.config = like.config;
  for (const auto& layer : like.layers) z.layers.push_back(zero_layer_like(layer));
  z.cond = {Matrix::Zero(like.cond.W_S.rows(), like.cond.W_S.cols()), Vector::Zero(like.cond.b_S.size()),
            Matrix::Zero(like.cond.W_E.rows(), like.cond.W_E.cols()), Vector::Zero(like.cond.b_E.size())};
  z.out = {Matrix::Zero(like.out.W_out.rows(), like.out.W_out.cols()), Vector::Zero(like.out.b_out.size())};
  return z;
}

inline ModelParams zero_params(const ModelConfig& config) {
  config.validate();
  Rng rng(0);
  ModelParams p;
  p.config = config;
  for (int l = 0; l < config.num_layers; ++l) {
    const int input = l == 0 ? config.input_width : config.hidden_size;
    p.layers.push_back(zero_layer_like(make_layer(config.cell, config.hidden_size, input, rng)));
  }
  const int h = config.hidden_size;
  p.cond = {Matrix::Zero(h, config.num_subjects), Vector::Zero(h), Matrix::Zero(h, config.num_emotions),
            Vector::Zero(h)};
  p.out = {Matrix::Zero(3 * config.num_vertices, h), Vector::Zero(3 * config.num_vertices)};
  return p;
}

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for every tensor; a bias
/// shares the fan-in of the weight it accompanies.
inline ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ModelParams p;
  p.config = config;
  for (int l = 0; l < config.num_layers; ++l) {
    const int input = l == 0 ? config.input_width : config.hidden_size;
    p.layers.push_back(make_layer(config.cell, config.hidden_size, input, rng));
  }
  const int h = config.hidden_size;
  const auto uniform_tensor = [&](Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix m(rows, cols);
    fill_uniform(m, rng, -bound, bound);
    return m;
  };
  p.cond.W_S = uniform_tensor(h, config.num_subjects, config.num_subjects);
  p.cond.b_S = uniform_tensor(h, 1, config.num_subjects);
  p.cond.W_E = uniform_tensor(h, config.num_emotions, config.num_emotions);
  p.cond.b_E = uniform_tensor(h, 1, config.num_emotions);
  p.out.W_out = uniform_tensor(3 * config.num_vertices, h, h);
  p.out.b_out = uniform_tensor(3 * config.num_vertices, 1, h);
  return p;
}

// ---------------------------------------------------------------------------
// One-hot labels

inline Vector one_hot(int index, int size) {
  require(index >= 0 && index < size, ErrorCode::invalid_onehot,
          "label index " + std::to_string(index) + " outside [0, " + std::to_string(size) + ")");
  Vector v = Vector::Zero(size);
  v[index] = 1.0;
  return v;
}

/// Index of the single 1 in a one-hot vector.
inline int one_hot_index(const Vector& v) {
  int index = -1;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] == 1.0) {
      require(index < 0, ErrorCode::invalid_onehot, "one-hot vector has more than one active entry");
      index = static_cast<int>(i);
    } else {
      require(v[i] == 0.0, ErrorCode::invalid_onehot,
              "one-hot vector has non-binary entry " + std::to_string(v[i]) + " at " + std::to_string(i));
    }
  }
  require(index >= 0, ErrorCode::invalid_onehot, "one-hot vector has no active entry");
  return index;
}

// ---------------------------------------------------------------------------
// Forward pass

/// Everything the reverse pass needs, recorded during a forward pass.
struct ForwardTape {
  std::vector<LayerTape> layers;
  std::vector<Matrix> dropout_masks;  // one per layer boundary; empty at inference
  Matrix hidden;                       // H x T, last-layer states
  Vector subject_embedding;            // S
  Vector emotion_embedding;            // E
  Matrix conditioned;                  // H x T, hidden * S * E
  int subject = -1;
  int emotion = -1;
  MeshSequence prediction;

  bool recorded() const { return !layers.empty(); }
};

namespace detail {

inline Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  Matrix mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = uniform01(rng) < rate ? 0.0 : keep_scale;
  return mask;
}

inline void check_features(const ModelParams& params, const Matrix& features) {
  require(features.cols() == params.config.input_width, ErrorCode::shape_mismatch,
          "model expects feature width " + std::to_string(params.config.input_width) + ", got " +
              std::to_string(features.cols()));
  require(features.rows() >= 1, ErrorCode::empty_input, "no feature frames");
}

inline void check_template(const ModelParams& params, const TemplateFace& face) {
  require(face.num_vertices() == params.config.num_vertices && face.vertices.cols() == 3,
          ErrorCode::shape_mismatch,
          "model predicts " + std::to_string(params.config.num_vertices) + " vertices, template " +
              face.subject_id + " has " + std::to_string(face.num_vertices()));
}

}  // namespace detail

/// Runs the recurrent stack over T x width features from a zero state.
/// In training mode inverted dropout is applied between layers.
inline ForwardTape recurrent_forward(const ModelParams& params, const Matrix& features, bool training, Rng* rng) {
  detail::check_features(params, features);
  require(!training || params.config.dropout_rate == 0.0 || rng != nullptr, ErrorCode::invalid_config,
          "training-mode dropout needs a random generator");
  ForwardTape tape;
  Matrix current = features.transpose();
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    if (l > 0 && training && params.config.dropout_rate > 0.0) {
      tape.dropout_masks.push_back(
          detail::dropout_mask(current.rows(), current.cols(), params.config.dropout_rate, *rng));
      current = current.cwiseProduct(tape.dropout_masks.back());
    }
    tape.layers.push_back(layer_forward(params.layers[l], current));
    current = layer_outputs(tape.layers.back());
  }
  tape.hidden = std::move(current);
  return tape;
}

/// T x hidden states of the last layer.
inline Matrix gru_forward(const ModelParams& params, const AdjustedFeatures& features, bool training, Rng* rng) {
  return recurrent_forward(params, features.data, training, rng).hidden.transpose();
}

inline Vector subject_embedding(const ModelParams& params, int subject) {
  return params.cond.W_S * one_hot(subject, static_cast<int>(params.cond.W_S.cols())) + params.cond.b_S;
}

inline Vector emotion_embedding(const ModelParams& params, int emotion) {
  return params.cond.W_E * one_hot(emotion, static_cast<int>(params.cond.W_E.cols())) + params.cond.b_E;
}

/// Fills the conditioning and projection part of a tape whose hidden states
/// are already recorded.
inline void condition_and_project(const ModelParams& params, ForwardTape& tape, int subject, int emotion,
                                  const TemplateFace& face, double fps) {
  detail::check_template(params, face);
  tape.subject = subject;
  tape.emotion = emotion;
  tape.subject_embedding = subject_embedding(params, subject);
  tape.emotion_embedding = emotion_embedding(params, emotion);
  require(tape.hidden.rows() == tape.subject_embedding.size(), ErrorCode::shape_mismatch,
          "hidden width " + std::to_string(tape.hidden.rows()) + " does not match embedding width " +
              std::to_string(tape.subject_embedding.size()));
  const Vector scale = tape.subject_embedding.cwiseProduct(tape.emotion_embedding);
  tape.conditioned = tape.hidden.array().colwise() * scale.array();
  Matrix displacement = (params.out.W_out * tape.conditioned).colwise() + params.out.b_out;  // 3V x T
  const Eigen::RowVectorXd neutral = face.vertices.reshaped<Eigen::RowMajor>().transpose();
  MeshSequence mesh(displacement.transpose(), fps);
  mesh.frames.rowwise() += neutral;
  tape.prediction = std::move(mesh);
}

/// Conditioning by explicit one-hot vectors over T x hidden states `H`.
inline MeshSequence condition_and_project(const ModelParams& params, const Matrix& H, const Vector& subject_onehot,
                                          const Vector& emotion_onehot, const TemplateFace& face,
                                          double fps = 25.0) {
  require(subject_onehot.size() == params.config.num_subjects, ErrorCode::invalid_onehot,
          "subject one-hot has size " + std::to_string(subject_onehot.size()) + ", model knows " +
              std::to_string(params.config.num_subjects) + " subjects");
  require(emotion_onehot.size() == params.config.num_emotions, ErrorCode::invalid_onehot,
          "emotion one-hot has size " + std::to_string(emotion_onehot.size()) + ", model knows " +
              std::to_string(params.config.num_emotions) + " emotions");
  ForwardTape tape;
  tape.hidden = H.transpose();
  condition_and_project(params, tape, one_hot_index(subject_onehot), one_hot_index(emotion_onehot), face, fps);
  return std::move(tape.prediction);
}

/// Full forward pass over already adjusted features, recording a tape.
inline ForwardTape forward(const ModelParams& params, const AdjustedFeatures& features, int subject, int emotion,
                           const TemplateFace& face, double fps, bool training, Rng* rng) {
  ForwardTape tape = recurrent_forward(params, features.data, training, rng);
  condition_and_project(params, tape, subject, emotion, face, fps);
  return tape;
}

/// Inference: adjust features to `mesh_frames` frames at `mesh_fps`, run the
/// decoder without dropout, and add displacements to the template.
inline MeshSequence predict(const ModelParams& params, const FeatureSequence& features, double mesh_fps,
                            Eigen::Index mesh_frames, int subject, int emotion, const TemplateFace& face) {
  const AdjustedFeatures adjusted = input_representation_adjustment(features, mesh_fps, mesh_frames);
  return forward(params, adjusted, subject, emotion, face, mesh_fps, false, nullptr).prediction;
}

}  // namespace gruface
