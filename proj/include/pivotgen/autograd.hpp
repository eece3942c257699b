#pragma once

// Tape-based reverse-mode differentiation over dense row-major matrices.
//
// A Tape records every operation of one forward pass. Parameters enter the
// tape through Tape::param(); their gradients accumulate into
// Parameter::grad when Tape::backward() runs.

#include <cassert>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pivotgen/error.hpp"

namespace pivotgen::ag {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::function<void(Tape&, const Node&)> backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value) {
    nodes_.push_back({std::move(value), {}, false, {}});
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  Var param(Parameter& p) {
    Node n{p.value, {}, true, {}};
    Parameter* target = &p;
    n.backward = [target](Tape&, const Node& self) { target->grad += self.grad; };
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  // Records an op. `inputs` decide whether gradients are needed.
  Var record(Matrix value, std::initializer_list<Var> inputs,
             std::function<void(Tape&, const Node&)> backward) {
    bool rg = false;
    for (const auto& v : inputs) rg = rg || node(v).requires_grad;
    return record_if(std::move(value), rg, std::move(backward));
  }

  Var record_if(Matrix value, bool requires_grad, std::function<void(Tape&, const Node&)> backward) {
    Node n{std::move(value), {}, requires_grad, {}};
    if (requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  const Node& node(const Var& v) const { return nodes_[static_cast<std::size_t>(v.id())]; }
  Node& node(const Var& v) { return nodes_[static_cast<std::size_t>(v.id())]; }
  bool requires_grad(const Var& v) const { return node(v).requires_grad; }

  // Adds `g` into the gradient of `v` (allocating on first use).
  template <typename Derived>
  void accumulate(const Var& v, const Eigen::MatrixBase<Derived>& g) {
    Node& n = node(v);
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.grad += g;
  }

  // Gradient buffer of `v`, allocated on demand; used by ops that scatter.
  Matrix* grad_buffer(const Var& v) {
    Node& n = node(v);
    if (!n.requires_grad) return nullptr;
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    return &n.grad;
  }

  // Seeds d(root)/d(root) = 1 (root must be 1x1) and runs the reverse sweep.
  void backward(const Var& root) {
    Node& r = node(root);
    if (r.value.rows() != 1 || r.value.cols() != 1) throw Error("backward root must be a scalar");
    if (!r.requires_grad) return;
    r.grad = Matrix::Ones(1, 1);
    for (int i = root.id(); i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.requires_grad && n.grad.size() != 0 && n.backward) n.backward(*this, n);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  std::deque<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->node(*this).value; }

// ---------------------------------------------------------------------------
// Elementwise and linear-algebra ops

inline Var matmul(Var a, Var b) {
  Tape& t = *a.tape();
  return t.record(a.value() * b.value(), {a, b}, [a, b](Tape& t, const Tape::Node& n) {
    if (t.requires_grad(a)) t.accumulate(a, n.grad * b.value().transpose());
    if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * n.grad);
  });
}

inline Var add(Var a, Var b) {
  Tape& t = *a.tape();
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error("add: shape mismatch");
  return t.record(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Tape::Node& n) {
    t.accumulate(a, n.grad);
    t.accumulate(b, n.grad);
  });
}

inline Var sub(Var a, Var b) {
  Tape& t = *a.tape();
  return t.record(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Tape::Node& n) {
    t.accumulate(a, n.grad);
    t.accumulate(b, -n.grad);
  });
}

// a (r x c) + broadcast row vector bias (1 x c).
inline Var add_bias(Var a, Var bias) {
  Tape& t = *a.tape();
  if (bias.rows() != 1 || bias.cols() != a.cols()) throw Error("add_bias: shape mismatch");
  Matrix v = a.value();
  v.rowwise() += bias.value().row(0);
  return t.record(std::move(v), {a, bias}, [a, bias](Tape& t, const Tape::Node& n) {
    t.accumulate(a, n.grad);
    if (t.requires_grad(bias)) t.accumulate(bias, n.grad.colwise().sum());
  });
}

inline Var mul(Var a, Var b) {
  Tape& t = *a.tape();
  return t.record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& t, const Tape::Node& n) {
    if (t.requires_grad(a)) t.accumulate(a, n.grad.cwiseProduct(b.value()));
    if (t.requires_grad(b)) t.accumulate(b, n.grad.cwiseProduct(a.value()));
  });
}

inline Var scale(Var a, double s) {
  Tape& t = *a.tape();
  return t.record(a.value() * s, {a},
                  [a, s](Tape& t, const Tape::Node& n) { t.accumulate(a, n.grad * s); });
}

inline Var sigmoid(Var a) {
  Tape& t = *a.tape();
  Matrix v = a.value().unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return t.record(std::move(v), {a}, [a](Tape& t, const Tape::Node& n) {
    t.accumulate(a, n.grad.cwiseProduct(n.value.cwiseProduct((1.0 - n.value.array()).matrix())));
  });
}

inline Var tanh(Var a) {
  Tape& t = *a.tape();
  Matrix v = a.value().array().tanh().matrix();
  return t.record(std::move(v), {a}, [a](Tape& t, const Tape::Node& n) {
    t.accumulate(a, n.grad.cwiseProduct((1.0 - n.value.array().square()).matrix()));
  });
}

inline Var relu(Var a) {
  Tape& t = *a.tape();
  Matrix v = a.value().cwiseMax(0.0);
  return t.record(std::move(v), {a}, [a](Tape& t, const Tape::Node& n) {
    t.accumulate(a, n.grad.cwiseProduct(
                        a.value().unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; })));
  });
}

inline Var sum(Var a) {
  Tape& t = *a.tape();
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  return t.record(std::move(v), {a}, [a](Tape& t, const Tape::Node& n) {
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), n.grad(0, 0)));
  });
}

// ---------------------------------------------------------------------------
// Shape ops

inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error("concat_cols: no inputs");
  Tape& t = *parts[0].tape();
  const auto rows = parts[0].rows();
  Eigen::Index cols = 0;
  bool rg = false;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw Error("concat_cols: row mismatch");
    cols += p.cols();
    rg = rg || t.requires_grad(p);
  }
  Matrix v(rows, cols);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    v.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  return t.record_if(std::move(v), rg, [parts](Tape& t, const Tape::Node& n) {
    Eigen::Index off = 0;
    for (const auto& p : parts) {
      if (t.requires_grad(p)) t.accumulate(p, n.grad.middleCols(off, p.cols()));
      off += p.cols();
    }
  });
}

inline Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error("concat_rows: no inputs");
  Tape& t = *parts[0].tape();
  const auto cols = parts[0].cols();
  Eigen::Index rows = 0;
  bool rg = false;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw Error("concat_rows: column mismatch");
    rows += p.rows();
    rg = rg || t.requires_grad(p);
  }
  Matrix v(rows, cols);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    v.middleRows(off, p.rows()) = p.value();
    off += p.rows();
  }
  return t.record_if(std::move(v), rg, [parts](Tape& t, const Tape::Node& n) {
    Eigen::Index off = 0;
    for (const auto& p : parts) {
      if (t.requires_grad(p)) t.accumulate(p, n.grad.middleRows(off, p.rows()));
      off += p.rows();
    }
  });
}

inline Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  Tape& t = *a.tape();
  Matrix v = a.value().middleCols(start, count);
  return t.record(std::move(v), {a}, [a, start, count](Tape& t, const Tape::Node& n) {
    if (Matrix* g = t.grad_buffer(a)) g->middleCols(start, count) += n.grad;
  });
}

inline Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  Tape& t = *a.tape();
  Matrix v = a.value().middleRows(start, count);
  return t.record(std::move(v), {a}, [a, start, count](Tape& t, const Tape::Node& n) {
    if (Matrix* g = t.grad_buffer(a)) g->middleRows(start, count) += n.grad;
  });
}

// Packs per-step B x D matrices into a (B*L) x D matrix, row b*L + t.
inline Var stack_steps(const std::vector<Var>& steps) {
  if (steps.empty()) throw Error("stack_steps: no inputs");
  Tape& t = *steps[0].tape();
  const auto L = static_cast<Eigen::Index>(steps.size());
  const auto B = steps[0].rows(), D = steps[0].cols();
  Matrix v(B * L, D);
  bool rg = false;
  for (Eigen::Index s = 0; s < L; ++s) {
    const Matrix& m = steps[static_cast<std::size_t>(s)].value();
    for (Eigen::Index b = 0; b < B; ++b) v.row(b * L + s) = m.row(b);
    rg = rg || t.requires_grad(steps[static_cast<std::size_t>(s)]);
  }
  return t.record_if(std::move(v), rg, [steps, B, L](Tape& t, const Tape::Node& n) {
    for (Eigen::Index s = 0; s < L; ++s) {
      Matrix* g = t.grad_buffer(steps[static_cast<std::size_t>(s)]);
      if (!g) continue;
      for (Eigen::Index b = 0; b < B; ++b) g->row(b) += n.grad.row(b * L + s);
    }
  });
}

// Embedding lookup: rows of the parameter table. Gradients scatter straight
// into the parameter, so the (possibly large) table is never copied.
inline Var embedding(Tape& t, Parameter& table, const std::vector<int>& ids) {
  Matrix v(static_cast<Eigen::Index>(ids.size()), table.value.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.value.rows()) throw Error("embedding index out of range");
    v.row(static_cast<Eigen::Index>(i)) = table.value.row(ids[i]);
  }
  Parameter* p = &table;
  return t.record_if(std::move(v), true, [p, ids](Tape&, const Tape::Node& n) {
    for (std::size_t i = 0; i < ids.size(); ++i)
      p->grad.row(ids[i]) += n.grad.row(static_cast<Eigen::Index>(i));
  });
}

// Row-wise select: out.row(r) = keep[r] ? a.row(r) : b.row(r).
inline Var blend_rows(const std::vector<double>& keep, Var a, Var b) {
  Tape& t = *a.tape();
  Matrix v = b.value();
  for (std::size_t r = 0; r < keep.size(); ++r)
    if (keep[r] != 0.0) v.row(static_cast<Eigen::Index>(r)) = a.value().row(static_cast<Eigen::Index>(r));
  return t.record(std::move(v), {a, b}, [keep, a, b](Tape& t, const Tape::Node& n) {
    Matrix* ga = t.grad_buffer(a);
    Matrix* gb = t.grad_buffer(b);
    for (std::size_t r = 0; r < keep.size(); ++r) {
      const auto i = static_cast<Eigen::Index>(r);
      if (keep[r] != 0.0) {
        if (ga) ga->row(i) += n.grad.row(i);
      } else if (gb) {
        gb->row(i) += n.grad.row(i);
      }
    }
  });
}

// Inverted dropout. Identity when p == 0 or rng is null (inference).
inline Var dropout(Var a, double p, std::mt19937_64* rng) {
  if (rng == nullptr || p <= 0.0) return a;
  Tape& t = *a.tape();
  std::bernoulli_distribution keep(1.0 - p);
  Matrix mask(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(*rng) ? 1.0 / (1.0 - p) : 0.0;
  Matrix v = a.value().cwiseProduct(mask);
  return t.record(std::move(v), {a}, [a, mask](Tape& t, const Tape::Node& n) {
    t.accumulate(a, n.grad.cwiseProduct(mask));
  });
}

// ---------------------------------------------------------------------------
// Normalization and probabilities

inline Matrix softmax_rows_value(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mx = x.row(r).maxCoeff();
    if (!std::isfinite(mx)) {
      out.row(r).setZero();
      continue;
    }
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      out(r, c) = std::isinf(x(r, c)) ? 0.0 : std::exp(x(r, c) - mx);
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

inline Var softmax_rows(Var a) {
  Tape& t = *a.tape();
  return t.record(softmax_rows_value(a.value()), {a}, [a](Tape& t, const Tape::Node& n) {
    const Matrix& p = n.value;
    Matrix dot = (n.grad.cwiseProduct(p)).rowwise().sum();
    Matrix g = p.cwiseProduct(n.grad - dot.replicate(1, p.cols()));
    t.accumulate(a, g);
  });
}

// Sum over rows r of -weight[r] * log softmax(logits.row(r))[target[r]].
// Rows with weight 0 (padding) contribute nothing.
inline Var cross_entropy(Var logits, const std::vector<int>& targets,
                         const std::vector<double>& weights) {
  Tape& t = *logits.tape();
  if (static_cast<Eigen::Index>(targets.size()) != logits.rows() || weights.size() != targets.size())
    throw Error("cross_entropy: targets/weights do not match logits rows");
  Matrix probs = softmax_rows_value(logits.value());
  double loss = 0.0;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    if (weights[r] == 0.0) continue;
    const auto i = static_cast<Eigen::Index>(r);
    const double mx = logits.value().row(i).maxCoeff();
    const double lse = mx + std::log((logits.value().row(i).array() - mx).exp().sum());
    loss += weights[r] * (lse - logits.value()(i, targets[r]));
  }
  Matrix v(1, 1);
  v(0, 0) = loss;
  return t.record(std::move(v), {logits},
                  [logits, targets, weights, probs](Tape& t, const Tape::Node& n) {
                    Matrix g = probs;
                    for (std::size_t r = 0; r < targets.size(); ++r) {
                      const auto i = static_cast<Eigen::Index>(r);
                      g(i, targets[r]) -= 1.0;
                      g.row(i) *= weights[r] * n.grad(0, 0);
                    }
                    t.accumulate(logits, g);
                  });
}

// Row-wise layer normalization with learned gain and bias (both 1 x c).
inline Var layer_norm(Var a, Var gain, Var bias, double eps = 1e-5) {
  Tape& t = *a.tape();
  const auto R = a.rows(), C = a.cols();
  Matrix xhat(R, C);
  std::vector<double> inv_std(static_cast<std::size_t>(R));
  for (Eigen::Index r = 0; r < R; ++r) {
    const double mean = a.value().row(r).mean();
    const double var = (a.value().row(r).array() - mean).square().mean();
    inv_std[static_cast<std::size_t>(r)] = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (a.value().row(r).array() - mean) * inv_std[static_cast<std::size_t>(r)];
  }
  Matrix v = xhat.array().rowwise() * gain.value().row(0).array();
  v.rowwise() += bias.value().row(0);
  return t.record(std::move(v), {a, gain, bias},
                  [a, gain, bias, xhat, inv_std, C](Tape& t, const Tape::Node& n) {
                    if (t.requires_grad(gain))
                      t.accumulate(gain, n.grad.cwiseProduct(xhat).colwise().sum());
                    if (t.requires_grad(bias)) t.accumulate(bias, n.grad.colwise().sum());
                    if (!t.requires_grad(a)) return;
                    Matrix dxhat = n.grad.array().rowwise() * gain.value().row(0).array();
                    Matrix g(dxhat.rows(), C);
                    for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
                      const double m1 = dxhat.row(r).mean();
                      const double m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
                      g.row(r) = (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2) *
                                 inv_std[static_cast<std::size_t>(r)];
                    }
                    t.accumulate(a, g);
                  });
}

// ---------------------------------------------------------------------------
// Attention

// Global attention for a batch of decoder states.
// query: B x H; keys: (B*L) x H packed per sample; key_mask[b*L + j] = 1 for
// real source positions. Returns B x L normalized weights.
inline Var attention_weights(Var query, Var keys, Eigen::Index L, const std::vector<double>& key_mask) {
  Tape& t = *query.tape();
  const auto B = query.rows();
  Matrix scores(B, L);
  for (Eigen::Index b = 0; b < B; ++b)
    for (Eigen::Index j = 0; j < L; ++j)
      scores(b, j) = key_mask[static_cast<std::size_t>(b * L + j)] != 0.0
                         ? query.value().row(b).dot(keys.value().row(b * L + j))
                         : -std::numeric_limits<double>::infinity();
  Matrix p = softmax_rows_value(scores);
  return t.record(std::move(p), {query, keys}, [query, keys, L](Tape& t, const Tape::Node& n) {
    const Matrix& p = n.value;
    const auto B = p.rows();
    Matrix dot = n.grad.cwiseProduct(p).rowwise().sum();
    Matrix ds = p.cwiseProduct(n.grad - dot.replicate(1, L));
    Matrix* gq = t.grad_buffer(query);
    Matrix* gk = t.grad_buffer(keys);
    for (Eigen::Index b = 0; b < B; ++b)
      for (Eigen::Index j = 0; j < L; ++j) {
        const double d = ds(b, j);
        if (d == 0.0) continue;
        if (gq) gq->row(b) += d * keys.value().row(b * L + j);
        if (gk) gk->row(b * L + j) += d * query.value().row(b);
      }
  });
}

// weights: B x L; values: (B*L) x D. Returns B x D context vectors.
inline Var attention_context(Var weights, Var values, Eigen::Index L) {
  Tape& t = *weights.tape();
  const auto B = weights.rows(), D = values.cols();
  Matrix ctx(B, D);
  for (Eigen::Index b = 0; b < B; ++b)
    ctx.row(b) = weights.value().row(b) * values.value().middleRows(b * L, L);
  return t.record(std::move(ctx), {weights, values}, [weights, values, L](Tape& t, const Tape::Node& n) {
    const auto B = weights.rows();
    Matrix* gw = t.grad_buffer(weights);
    Matrix* gv = t.grad_buffer(values);
    for (Eigen::Index b = 0; b < B; ++b) {
      if (gw) gw->row(b) += n.grad.row(b) * values.value().middleRows(b * L, L).transpose();
      if (gv) gv->middleRows(b * L, L) += weights.value().row(b).transpose() * n.grad.row(b);
    }
  });
}

struct AttentionShape {
  Eigen::Index batch = 1;
  Eigen::Index query_len = 1;
  Eigen::Index key_len = 1;
  int heads = 1;
  bool causal = false;
};

// Scaled dot-product multi-head attention on packed sequences.
// q: (B*Lq) x D, k/v: (B*Lk) x D. key_mask has B*Lk entries (1 = attend).
// Query rows whose keys are all masked produce zeros.
inline Var multi_head_attention(Var q, Var k, Var v, const AttentionShape& shape,
                                const std::vector<double>& key_mask) {
  Tape& t = *q.tape();
  const auto B = shape.batch, Lq = shape.query_len, Lk = shape.key_len;
  const auto D = q.cols();
  const int H = shape.heads;
  if (D % H != 0) throw Error("model dimension not divisible by head count");
  const auto dh = D / H;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix out = Matrix::Zero(B * Lq, D);
  std::vector<Matrix> probs(static_cast<std::size_t>(B * H));
  for (Eigen::Index b = 0; b < B; ++b)
    for (int h = 0; h < H; ++h) {
      const auto Q = q.value().block(b * Lq, h * dh, Lq, dh);
      const auto K = k.value().block(b * Lk, h * dh, Lk, dh);
      const auto V = v.value().block(b * Lk, h * dh, Lk, dh);
      Matrix s = (Q * K.transpose()) * sc;
      for (Eigen::Index i = 0; i < Lq; ++i)
        for (Eigen::Index j = 0; j < Lk; ++j)
          if (key_mask[static_cast<std::size_t>(b * Lk + j)] == 0.0 || (shape.causal && j > i))
            s(i, j) = -std::numeric_limits<double>::infinity();
      Matrix p = softmax_rows_value(s);
      out.block(b * Lq, h * dh, Lq, dh) = p * V;
      probs[static_cast<std::size_t>(b * H + h)] = std::move(p);
    }
  return t.record(std::move(out), {q, k, v},
                  [q, k, v, B, Lq, Lk, H, dh, sc, probs](Tape& t, const Tape::Node& n) {
                    Matrix* gq = t.grad_buffer(q);
                    Matrix* gk = t.grad_buffer(k);
                    Matrix* gv = t.grad_buffer(v);
                    for (Eigen::Index b = 0; b < B; ++b)
                      for (int h = 0; h < H; ++h) {
                        const Matrix& p = probs[static_cast<std::size_t>(b * H + h)];
                        const auto dO = n.grad.block(b * Lq, h * dh, Lq, dh);
                        const auto Q = q.value().block(b * Lq, h * dh, Lq, dh);
                        const auto K = k.value().block(b * Lk, h * dh, Lk, dh);
                        const auto V = v.value().block(b * Lk, h * dh, Lk, dh);
                        if (gv) gv->block(b * Lk, h * dh, Lk, dh) += p.transpose() * dO;
                        Matrix dp = dO * V.transpose();
                        Matrix dot = dp.cwiseProduct(p).rowwise().sum();
                        Matrix ds = p.cwiseProduct(dp - dot.replicate(1, Lk)) * sc;
                        if (gq) gq->block(b * Lq, h * dh, Lq, dh) += ds * K;
                        if (gk) gk->block(b * Lk, h * dh, Lk, dh) += ds.transpose() * Q;
                      }
                  });
}

}  // namespace pivotgen::ag
