#pragma once

// Recurrent cells used by the decoder. Every weight matrix acts on the
// concatenation [previous state; input], so its first `hidden` columns are
// the recurrent block and the remaining `input` columns the input block.
//
// Each cell family offers a single-step function, a sequence forward pass
// that records a tape, and the matching reverse pass through time.
// Sequences are stored column-per-time-step (width x T).

#include <string>
#include <variant>

#include "gruface/error.hpp"
#include "gruface/tensor.hpp"

namespace gruface {

enum class CellKind { gru, rnn, lstm };

inline std::string cell_name(CellKind kind) {
  switch (kind) {
    case CellKind::gru: return "gru";
    case CellKind::rnn: return "rnn";
    case CellKind::lstm: return "lstm";
  }
  return "unknown";
}

inline CellKind parse_cell(const std::string& name) {
  if (name == "gru") return CellKind::gru;
  if (name == "rnn") return CellKind::rnn;
  if (name == "lstm") return CellKind::lstm;
  fail(ErrorCode::invalid_config, "unknown cell type '" + name + "' (expected gru, rnn or lstm)");
}

namespace detail {

inline void check_step_shapes(const Matrix& w, const Vector& a_prev, const Vector& x) {
  require(a_prev.size() == w.rows() && w.cols() == a_prev.size() + x.size(), ErrorCode::shape_mismatch,
          "cell weight " + shape_of(w) + " does not match state of size " + std::to_string(a_prev.size()) +
              " and input of size " + std::to_string(x.size()));
}

inline Vector concat(const Vector& a, const Vector& b) {
  Vector out(a.size() + b.size());
  out << a, b;
  return out;
}

inline void check_sequence_input(const Matrix& w, Eigen::Index hidden, const Matrix& inputs) {
  require(inputs.rows() == w.cols() - hidden, ErrorCode::shape_mismatch,
          "layer expects input width " + std::to_string(w.cols() - hidden) + ", got " +
              std::to_string(inputs.rows()));
  require(inputs.cols() >= 1, ErrorCode::empty_input, "recurrent layer needs at least one time step");
}

inline Matrix init_weight(Eigen::Index hidden, Eigen::Index input, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden + input));
  Matrix w(hidden, hidden + input);
  fill_uniform(w, rng, -bound, bound);
  return w;
}

inline Vector init_bias(Eigen::Index hidden, Eigen::Index input, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden + input));
  Vector b(hidden);
  fill_uniform(b, rng, -bound, bound);
  return b;
}

// Accumulates dW += dpre * [prev; inputs]^T without materialising the
// concatenation.
inline void accumulate_weight(Matrix& grad, const Matrix& dpre, const Matrix& prev, const Matrix& inputs) {
  const Eigen::Index hidden = prev.rows();
  grad.leftCols(hidden).noalias() += dpre * prev.transpose();
  grad.rightCols(inputs.rows()).noalias() += dpre * inputs.transpose();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Gated recurrent unit
//   r  = sigmoid(W_r [a; x] + b_r)
//   a~ = tanh(W_a [r * a; x] + b_a)
//   u  = sigmoid(W_u [a; x] + b_u)
//   a' = u * a~ + (1 - u) * a

struct GruLayerParams {
  Matrix W_r, W_a, W_u;
  Vector b_r, b_a, b_u;

  Eigen::Index hidden() const { return W_r.rows(); }
  Eigen::Index input() const { return W_r.cols() - W_r.rows(); }

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    f("W_r", self.W_r);
    f("W_a", self.W_a);
    f("W_u", self.W_u);
    f("b_r", self.b_r);
    f("b_a", self.b_a);
    f("b_u", self.b_u);
  }

  static GruLayerParams zeros(Eigen::Index hidden, Eigen::Index input) {
    const Matrix w = Matrix::Zero(hidden, hidden + input);
    const Vector b = Vector::Zero(hidden);
    return {w, w, w, b, b, b};
  }

  static GruLayerParams random(Eigen::Index hidden, Eigen::Index input, Rng& rng) {
    GruLayerParams p;
    p.W_r = detail::init_weight(hidden, input, rng);
    p.W_a = detail::init_weight(hidden, input, rng);
    p.W_u = detail::init_weight(hidden, input, rng);
    p.b_r = detail::init_bias(hidden, input, rng);
    p.b_a = detail::init_bias(hidden, input, rng);
    p.b_u = detail::init_bias(hidden, input, rng);
    return p;
  }
};

inline Vector gru_cell_step(const GruLayerParams& p, const Vector& a_prev, const Vector& x) {
  detail::check_step_shapes(p.W_r, a_prev, x);
  const Vector joint = detail::concat(a_prev, x);
  const Vector reset = sigmoid(p.W_r * joint + p.b_r);
  const Vector gated = detail::concat(reset.cwiseProduct(a_prev), x);
  const Vector candidate = (p.W_a * gated + p.b_a).array().tanh();
  const Vector update = sigmoid(p.W_u * joint + p.b_u);
  return update.cwiseProduct(candidate) + (Vector::Ones(update.size()) - update).cwiseProduct(a_prev);
}

struct GruTape {
  Matrix inputs;     // I x T
  Matrix states;     // H x (T + 1), column 0 is the zero initial state
  Matrix reset;      // H x T
  Matrix update;     // H x T
  Matrix candidate;  // H x T
  Matrix gated;      // H x T, reset * previous state

  Matrix outputs() const { return states.rightCols(states.cols() - 1); }
};

inline GruTape gru_layer_forward(const GruLayerParams& p, const Matrix& inputs) {
  detail::check_sequence_input(p.W_r, p.hidden(), inputs);
  const Eigen::Index hidden = p.hidden();
  const Eigen::Index steps = inputs.cols();
  const Eigen::Index in = inputs.rows();
  GruTape tape{inputs, Matrix::Zero(hidden, steps + 1), Matrix(hidden, steps), Matrix(hidden, steps),
               Matrix(hidden, steps), Matrix(hidden, steps)};

  const Matrix pre_r = (p.W_r.rightCols(in) * inputs).colwise() + p.b_r;
  const Matrix pre_u = (p.W_u.rightCols(in) * inputs).colwise() + p.b_u;
  const Matrix pre_a = (p.W_a.rightCols(in) * inputs).colwise() + p.b_a;
  const auto rec_r = p.W_r.leftCols(hidden);
  const auto rec_u = p.W_u.leftCols(hidden);
  const auto rec_a = p.W_a.leftCols(hidden);

  for (Eigen::Index t = 0; t < steps; ++t) {
    const auto prev = tape.states.col(t);
    tape.reset.col(t) = sigmoid(pre_r.col(t) + rec_r * prev);
    tape.update.col(t) = sigmoid(pre_u.col(t) + rec_u * prev);
    tape.gated.col(t) = tape.reset.col(t).cwiseProduct(prev);
    tape.candidate.col(t) = (pre_a.col(t) + rec_a * tape.gated.col(t)).array().tanh();
    tape.states.col(t + 1) = tape.update.col(t).cwiseProduct(tape.candidate.col(t)) +
                             (1.0 - tape.update.col(t).array()).matrix().cwiseProduct(prev);
  }
  return tape;
}

/// Reverse pass through time. `d_outputs` is dL/d(states 1..T); gradients
/// are accumulated into `grads`; returns dL/d(inputs).
inline Matrix gru_layer_backward(const GruLayerParams& p, const GruTape& tape, const Matrix& d_outputs,
                                 GruLayerParams& grads) {
  const Eigen::Index hidden = p.hidden();
  const Eigen::Index steps = tape.inputs.cols();
  const Eigen::Index in = tape.inputs.rows();
  require(d_outputs.rows() == hidden && d_outputs.cols() == steps, ErrorCode::shape_mismatch,
          "layer output gradient has shape " + shape_of(d_outputs));
  const auto rec_r = p.W_r.leftCols(hidden);
  const auto rec_u = p.W_u.leftCols(hidden);
  const auto rec_a = p.W_a.leftCols(hidden);

  Matrix d_pre_r(hidden, steps), d_pre_u(hidden, steps), d_pre_a(hidden, steps);
  Vector d_next = Vector::Zero(hidden);
  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    const auto prev = tape.states.col(t);
    const auto r = tape.reset.col(t).array();
    const auto u = tape.update.col(t).array();
    const auto c = tape.candidate.col(t).array();
    const Vector dh = d_outputs.col(t) + d_next;

    const Vector d_update = dh.array() * (c - prev.array());
    Vector d_prev = dh.array() * (1.0 - u);
    d_pre_a.col(t) = dh.array() * u * (1.0 - c * c);
    const Vector d_gated = rec_a.transpose() * d_pre_a.col(t);
    d_prev.array() += d_gated.array() * r;
    d_pre_r.col(t) = d_gated.array() * prev.array() * r * (1.0 - r);
    d_pre_u.col(t) = d_update.array() * u * (1.0 - u);
    d_prev.noalias() += rec_r.transpose() * d_pre_r.col(t);
    d_prev.noalias() += rec_u.transpose() * d_pre_u.col(t);
    d_next = d_prev;
  }

  const Matrix prev_states = tape.states.leftCols(steps);
  detail::accumulate_weight(grads.W_r, d_pre_r, prev_states, tape.inputs);
  detail::accumulate_weight(grads.W_u, d_pre_u, prev_states, tape.inputs);
  detail::accumulate_weight(grads.W_a, d_pre_a, tape.gated, tape.inputs);
  grads.b_r += d_pre_r.rowwise().sum();
  grads.b_u += d_pre_u.rowwise().sum();
  grads.b_a += d_pre_a.rowwise().sum();

  Matrix d_inputs = p.W_r.rightCols(in).transpose() * d_pre_r;
  d_inputs.noalias() += p.W_u.rightCols(in).transpose() * d_pre_u;
  d_inputs.noalias() += p.W_a.rightCols(in).transpose() * d_pre_a;
  return d_inputs;
}

// ---------------------------------------------------------------------------
// Simple recurrent cell: a' = tanh(W_h [a; x] + b_h)

struct RnnLayerParams {
  Matrix W_h;
  Vector b_h;

  Eigen::Index hidden() const { return W_h.rows(); }
  Eigen::Index input() const { return W_h.cols() - W_h.rows(); }

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    f("W_h", self.W_h);
    f("b_h", self.b_h);
  }

  static RnnLayerParams zeros(Eigen::Index hidden, Eigen::Index input) {
    return {Matrix::Zero(hidden, hidden + input), Vector::Zero(hidden)};
  }

  static RnnLayerParams random(Eigen::Index hidden, Eigen::Index input, Rng& rng) {
    RnnLayerParams p;
    p.W_h = detail::init_weight(hidden, input, rng);
    p.b_h = detail::init_bias(hidden, input, rng);
    return p;
  }
};

inline Vector rnn_cell_step(const RnnLayerParams& p, const Vector& a_prev, const Vector& x) {
  detail::check_step_shapes(p.W_h, a_prev, x);
  return (p.W_h * detail::concat(a_prev, x) + p.b_h).array().tanh();
}

struct RnnTape {
  Matrix inputs;
  Matrix states;  // H x (T + 1)

  Matrix outputs() const { return states.rightCols(states.cols() - 1); }
};

inline RnnTape rnn_layer_forward(const RnnLayerParams& p, const Matrix& inputs) {
  detail::check_sequence_input(p.W_h, p.hidden(), inputs);
  const Eigen::Index hidden = p.hidden();
  const Eigen::Index steps = inputs.cols();
  RnnTape tape{inputs, Matrix::Zero(hidden, steps + 1)};
  const Matrix pre = (p.W_h.rightCols(inputs.rows()) * inputs).colwise() + p.b_h;
  const auto rec = p.W_h.leftCols(hidden);
  for (Eigen::Index t = 0; t < steps; ++t) {
    tape.states.col(t + 1) = (pre.col(t) + rec * tape.states.col(t)).array().tanh();
  }
  return tape;
}

inline Matrix rnn_layer_backward(const RnnLayerParams& p, const RnnTape& tape, const Matrix& d_outputs,
                                 RnnLayerParams& grads) {
  const Eigen::Index hidden = p.hidden();
  const Eigen::Index steps = tape.inputs.cols();
  require(d_outputs.rows() == hidden && d_outputs.cols() == steps, ErrorCode::shape_mismatch,
          "layer output gradient has shape " + shape_of(d_outputs));
  const auto rec = p.W_h.leftCols(hidden);
  Matrix d_pre(hidden, steps);
  Vector d_next = Vector::Zero(hidden);
  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    const auto h = tape.states.col(t + 1).array();
    d_pre.col(t) = (d_outputs.col(t) + d_next).array() * (1.0 - h * h);
    d_next = rec.transpose() * d_pre.col(t);
  }
  detail::accumulate_weight(grads.W_h, d_pre, tape.states.leftCols(steps), tape.inputs);
  grads.b_h += d_pre.rowwise().sum();
  return p.W_h.rightCols(tape.inputs.rows()).transpose() * d_pre;
}

// ---------------------------------------------------------------------------
// Long short-term memory
//   i = sigmoid(W_i z + b_i), f = sigmoid(W_f z + b_f), o = sigmoid(W_o z + b_o)
//   g = tanh(W_c z + b_c), c' = f * c + i * g, h' = o * tanh(c'), z = [h; x]

struct LstmLayerParams {
  Matrix W_i, W_f, W_o, W_c;
  Vector b_i, b_f, b_o, b_c;

  Eigen::Index hidden() const { return W_i.rows(); }
  Eigen::Index input() const { return W_i.cols() - W_i.rows(); }

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    f("W_i", self.W_i);
    f("W_f", self.W_f);
    f("W_o", self.W_o);
    f("W_c", self.W_c);
    f("b_i", self.b_i);
    f("b_f", self.b_f);
    f("b_o", self.b_o);
    f("b_c", self.b_c);
  }

  static LstmLayerParams zeros(Eigen::Index hidden, Eigen::Index input) {
    const Matrix w = Matrix::Zero(hidden, hidden + input);
    const Vector b = Vector::Zero(hidden);
    return {w, w, w, w, b, b, b, b};
  }

  static LstmLayerParams random(Eigen::Index hidden, Eigen::Index input, Rng& rng) {
    LstmLayerParams p;
    p.W_i = detail::init_weight(hidden, input, rng);
    p.W_f = detail::init_weight(hidden, input, rng);
    p.W_o = detail::init_weight(hidden, input, rng);
    p.W_c = detail::init_weight(hidden, input, rng);
    p.b_i = detail::init_bias(hidden, input, rng);
    p.b_f = detail::init_bias(hidden, input, rng);
    p.b_o = detail::init_bias(hidden, input, rng);
    p.b_c = detail::init_bias(hidden, input, rng);
    return p;
  }
};

struct LstmState {
  Vector hidden;
  Vector cell;
};

inline LstmState lstm_cell_step(const LstmLayerParams& p, const LstmState& prev, const Vector& x) {
  detail::check_step_shapes(p.W_i, prev.hidden, x);
  require(prev.cell.size() == prev.hidden.size(), ErrorCode::shape_mismatch, "LSTM cell/hidden size mismatch");
  const Vector joint = detail::concat(prev.hidden, x);
  const Vector in_gate = sigmoid(p.W_i * joint + p.b_i);
  const Vector forget = sigmoid(p.W_f * joint + p.b_f);
  const Vector out_gate = sigmoid(p.W_o * joint + p.b_o);
  const Vector cand = (p.W_c * joint + p.b_c).array().tanh();
  LstmState next;
  next.cell = forget.cwiseProduct(prev.cell) + in_gate.cwiseProduct(cand);
  next.hidden = out_gate.array() * next.cell.array().tanh();
  return next;
}

struct LstmTape {
  Matrix inputs;
  Matrix states;  // H x (T + 1)
  Matrix cells;   // H x (T + 1)
  Matrix in_gate, forget, out_gate, cand;

  Matrix outputs() const { return states.rightCols(states.cols() - 1); }
};

inline LstmTape lstm_layer_forward(const LstmLayerParams& p, const Matrix& inputs) {
  detail::check_sequence_input(p.W_i, p.hidden(), inputs);
  const Eigen::Index hidden = p.hidden();
  const Eigen::Index steps = inputs.cols();
  const Eigen::Index in = inputs.rows();
  LstmTape tape{inputs,
                Matrix::Zero(hidden, steps + 1),
                Matrix::Zero(hidden, steps + 1),
                Matrix(hidden, steps),
                Matrix(hidden, steps),
                Matrix(hidden, steps),
                Matrix(hidden, steps)};
  const Matrix pre_i = (p.W_i.rightCols(in) * inputs).colwise() + p.b_i;
  const Matrix pre_f = (p.W_f.rightCols(in) * inputs).colwise() + p.b_f;
  const Matrix pre_o = (p.W_o.rightCols(in) * inputs).colwise() + p.b_o;
  const Matrix pre_c = (p.W_c.rightCols(in) * inputs).colwise() + p.b_c;
  for (Eigen::Index t = 0; t < steps; ++t) {
    const auto h = tape.states.col(t);
    tape.in_gate.col(t) = sigmoid(pre_i.col(t) + p.W_i.leftCols(hidden) * h);
    tape.forget.col(t) = sigmoid(pre_f.col(t) + p.W_f.leftCols(hidden) * h);
    tape.out_gate.col(t) = sigmoid(pre_o.col(t) + p.W_o.leftCols(hidden) * h);
    tape.cand.col(t) = (pre_c.col(t) + p.W_c.leftCols(hidden) * h).array().tanh();
    tape.cells.col(t + 1) = tape.forget.col(t).cwiseProduct(tape.cells.col(t)) +
                            tape.in_gate.col(t).cwiseProduct(tape.cand.col(t));
    tape.states.col(t + 1) = tape.out_gate.col(t).array() * tape.cells.col(t + 1).array().tanh();
  }
  return tape;
}

inline Matrix lstm_layer_backward(const LstmLayerParams& p, const LstmTape& tape, const Matrix& d_outputs,
                                  LstmLayerParams& grads) {
  const Eigen::Index hidden = p.hidden();
  const Eigen::Index steps = tape.inputs.cols();
  const Eigen::Index in = tape.inputs.rows();
  require(d_outputs.rows() == hidden && d_outputs.cols() == steps, ErrorCode::shape_mismatch,
          "layer output gradient has shape " + shape_of(d_outputs));
  Matrix d_pre_i(hidden, steps), d_pre_f(hidden, steps), d_pre_o(hidden, steps), d_pre_c(hidden, steps);
  Vector d_h_next = Vector::Zero(hidden);
  Vector d_c_next = Vector::Zero(hidden);
  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    const auto i = tape.in_gate.col(t).array();
    const auto f = tape.forget.col(t).array();
    const auto o = tape.out_gate.col(t).array();
    const auto g = tape.cand.col(t).array();
    const Eigen::ArrayXd tc = tape.cells.col(t + 1).array().tanh();
    const Eigen::ArrayXd dh = (d_outputs.col(t) + d_h_next).array();
    const Eigen::ArrayXd dc = d_c_next.array() + dh * o * (1.0 - tc * tc);
    d_pre_o.col(t) = dh * tc * o * (1.0 - o);
    d_pre_i.col(t) = dc * g * i * (1.0 - i);
    d_pre_f.col(t) = dc * tape.cells.col(t).array() * f * (1.0 - f);
    d_pre_c.col(t) = dc * i * (1.0 - g * g);
    d_c_next = dc * f;
    d_h_next = p.W_i.leftCols(hidden).transpose() * d_pre_i.col(t);
    d_h_next.noalias() += p.W_f.leftCols(hidden).transpose() * d_pre_f.col(t);
    d_h_next.noalias() += p.W_o.leftCols(hidden).transpose() * d_pre_o.col(t);
    d_h_next.noalias() += p.W_c.leftCols(hidden).transpose() * d_pre_c.col(t);
  }
  const Matrix prev_states = tape.states.leftCols(steps);
  detail::accumulate_weight(grads.W_i, d_pre_i, prev_states, tape.inputs);
  detail::accumulate_weight(grads.W_f, d_pre_f, prev_states, tape.inputs);
  detail::accumulate_weight(grads.W_o, d_pre_o, prev_states, tape.inputs);
  detail::accumulate_weight(grads.W_c, d_pre_c, prev_states, tape.inputs);
  grads.b_i += d_pre_i.rowwise().sum();
  grads.b_f += d_pre_f.rowwise().sum();
  grads.b_o += d_pre_o.rowwise().sum();
  grads.b_c += d_pre_c.rowwise().sum();

  Matrix d_inputs = p.W_i.rightCols(in).transpose() * d_pre_i;
  d_inputs.noalias() += p.W_f.rightCols(in).transpose() * d_pre_f;
  d_inputs.noalias() += p.W_o.rightCols(in).transpose() * d_pre_o;
  d_inputs.noalias() += p.W_c.rightCols(in).transpose() * d_pre_c;
  return d_inputs;
}

// ---------------------------------------------------------------------------
// Type-erased layer, so the decoder can swap cell families through config.

using RecurrentLayer = std::variant<GruLayerParams, RnnLayerParams, LstmLayerParams>;
using LayerTape = std::variant<GruTape, RnnTape, LstmTape>;

inline RecurrentLayer make_layer(CellKind kind, Eigen::Index hidden, Eigen::Index input, Rng& rng) {
  switch (kind) {
    case CellKind::gru: return GruLayerParams::random(hidden, input, rng);
    case CellKind::rnn: return RnnLayerParams::random(hidden, input, rng);
    case CellKind::lstm: return LstmLayerParams::random(hidden, input, rng);
  }
  fail(ErrorCode::invalid_config, "unknown cell kind");
}

inline RecurrentLayer zero_layer_like(const RecurrentLayer& layer) {
  return std::visit(
      [](const auto& p) -> RecurrentLayer {
        using P = std::decay_t<decltype(p)>;
        return P::zeros(p.hidden(), p.input());
      },
      layer);
}

inline LayerTape layer_forward(const RecurrentLayer& layer, const Matrix& inputs) {
  return std::visit(
      [&](const auto& p) -> LayerTape {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, GruLayerParams>) return gru_layer_forward(p, inputs);
        else if constexpr (std::is_same_v<P, RnnLayerParams>) return rnn_layer_forward(p, inputs);
        else return lstm_layer_forward(p, inputs);
      },
      layer);
}

inline Matrix layer_backward(const RecurrentLayer& layer, const LayerTape& tape, const Matrix& d_outputs,
                             RecurrentLayer& grads) {
  return std::visit(
      [&](const auto& p) -> Matrix {
        using P = std::decay_t<decltype(p)>;
        auto& g = std::get<P>(grads);
        if constexpr (std::is_same_v<P, GruLayerParams>) {
          return gru_layer_backward(p, std::get<GruTape>(tape), d_outputs, g);
        } else if constexpr (std::is_same_v<P, RnnLayerParams>) {
          return rnn_layer_backward(p, std::get<RnnTape>(tape), d_outputs, g);
        } else {
          return lstm_layer_backward(p, std::get<LstmTape>(tape), d_outputs, g);
        }
      },
      layer);
}

inline Matrix layer_outputs(const LayerTape& tape) {
  return std::visit([](const auto& t) { return t.outputs(); }, tape);
}

}  // namespace gruface
