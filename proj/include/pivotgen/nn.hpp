#pragma once

// Building blocks shared by the tagger and the realizers.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "pivotgen/autograd.hpp"

namespace pivotgen::nn {

using ag::Matrix;
using ag::Parameter;
using ag::Tape;
using ag::Var;

inline Matrix uniform_matrix(Eigen::Index r, Eigen::Index c, double range, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-range, range);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

inline Matrix normal_matrix(Eigen::Index r, Eigen::Index c, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

enum class Init { kUniform, kFanIn };

// Weight initializer: uniform(-0.1, 0.1) for recurrent stacks, normal with
// stddev 1/sqrt(fan_in) for transformer blocks.
inline Matrix init_weight(Eigen::Index in, Eigen::Index out, Init init, std::mt19937_64& rng) {
  if (init == Init::kUniform) return uniform_matrix(in, out, 0.1, rng);
  return normal_matrix(in, out, 1.0 / std::sqrt(static_cast<double>(in)), rng);
}

struct Linear {
  Parameter weight;  // in x out
  Parameter bias;    // 1 x out

  Linear() = default;
  Linear(const std::string& name, Eigen::Index in, Eigen::Index out, Init init, std::mt19937_64& rng)
      : weight(name + ".weight", init_weight(in, out, init, rng)),
        bias(name + ".bias", init == Init::kUniform ? uniform_matrix(1, out, 0.1, rng)
                                                    : Matrix::Zero(1, out)) {}

  Var operator()(Tape& t, Var x) { return ag::add_bias(ag::matmul(x, t.param(weight)), t.param(bias)); }

  void collect(std::vector<Parameter*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
};

struct LayerNorm {
  Parameter gain;
  Parameter bias;

  LayerNorm() = default;
  LayerNorm(const std::string& name, Eigen::Index dim)
      : gain(name + ".gain", Matrix::Ones(1, dim)), bias(name + ".bias", Matrix::Zero(1, dim)) {}

  Var operator()(Tape& t, Var x) { return ag::layer_norm(x, t.param(gain), t.param(bias)); }

  void collect(std::vector<Parameter*>& out) {
    out.push_back(&gain);
    out.push_back(&bias);
  }
};

struct LstmState {
  Var h;
  Var c;
};

// Gate layout along the 4H axis: input, forget, candidate, output.
struct LstmCell {
  Parameter w_input;   // in x 4H
  Parameter w_hidden;  // H x 4H
  Parameter bias;      // 1 x 4H
  Eigen::Index hidden = 0;

  LstmCell() = default;
  LstmCell(const std::string& name, Eigen::Index in, Eigen::Index h, std::mt19937_64& rng)
      : w_input(name + ".w_input", uniform_matrix(in, 4 * h, 0.1, rng)),
        w_hidden(name + ".w_hidden", uniform_matrix(h, 4 * h, 0.1, rng)),
        bias(name + ".bias", uniform_matrix(1, 4 * h, 0.1, rng)),
        hidden(h) {}

  struct Bound {
    Var w_input, w_hidden, bias;
  };
  Bound bind(Tape& t) { return {t.param(w_input), t.param(w_hidden), t.param(bias)}; }

  LstmState step(const Bound& p, Var x, const LstmState& prev) const {
    Var gates = ag::add_bias(ag::add(ag::matmul(x, p.w_input), ag::matmul(prev.h, p.w_hidden)), p.bias);
    Var i = ag::sigmoid(ag::slice_cols(gates, 0, hidden));
    Var f = ag::sigmoid(ag::slice_cols(gates, hidden, hidden));
    Var g = ag::tanh(ag::slice_cols(gates, 2 * hidden, hidden));
    Var o = ag::sigmoid(ag::slice_cols(gates, 3 * hidden, hidden));
    Var c = ag::add(ag::mul(f, prev.c), ag::mul(i, g));
    Var h = ag::mul(o, ag::tanh(c));
    return {h, c};
  }

  LstmState zero_state(Tape& t, Eigen::Index batch) const {
    return {t.constant(Matrix::Zero(batch, hidden)), t.constant(Matrix::Zero(batch, hidden))};
  }

  void collect(std::vector<Parameter*>& out) {
    out.push_back(&w_input);
    out.push_back(&w_hidden);
    out.push_back(&bias);
  }
};

struct BiLstmOutput {
  std::vector<Var> outputs;  // per step, B x 2H (forward ++ backward)
  LstmState forward_final;
  LstmState backward_final;
};

// Runs both directions over padded batches. mask[t][b] = 1 for real tokens;
// padded steps carry the previous state through unchanged, so each direction
// starts and ends on the real tokens of every sequence.
struct BiLstm {
  LstmCell forward;
  LstmCell backward;

  BiLstm() = default;
  BiLstm(const std::string& name, Eigen::Index in, Eigen::Index h, std::mt19937_64& rng)
      : forward(name + ".fwd", in, h, rng), backward(name + ".bwd", in, h, rng) {}

  BiLstmOutput operator()(Tape& t, const std::vector<Var>& inputs,
                          const std::vector<std::vector<double>>& mask) {
    const std::size_t L = inputs.size();
    const auto B = inputs.at(0).rows();
    auto pf = forward.bind(t);
    auto pb = backward.bind(t);
    std::vector<Var> fwd(L), bwd(L);
    LstmState sf = forward.zero_state(t, B);
    for (std::size_t s = 0; s < L; ++s) {
      LstmState n = forward.step(pf, inputs[s], sf);
      sf = {ag::blend_rows(mask[s], n.h, sf.h), ag::blend_rows(mask[s], n.c, sf.c)};
      fwd[s] = sf.h;
    }
    LstmState sb = backward.zero_state(t, B);
    for (std::size_t s = L; s-- > 0;) {
      LstmState n = backward.step(pb, inputs[s], sb);
      sb = {ag::blend_rows(mask[s], n.h, sb.h), ag::blend_rows(mask[s], n.c, sb.c)};
      bwd[s] = sb.h;
    }
    BiLstmOutput out;
    out.outputs.reserve(L);
    for (std::size_t s = 0; s < L; ++s) out.outputs.push_back(ag::concat_cols({fwd[s], bwd[s]}));
    out.forward_final = sf;
    out.backward_final = sb;
    return out;
  }

  void collect(std::vector<Parameter*>& out) {
    forward.collect(out);
    backward.collect(out);
  }
};

inline void zero_grads(const std::vector<Parameter*>& params) {
  for (auto* p : params) p->zero_grad();
}

inline std::size_t parameter_count(const std::vector<Parameter*>& params) {
  std::size_t n = 0;
  for (auto* p : params) n += static_cast<std::size_t>(p->value.size());
  return n;
}

}  // namespace pivotgen::nn
