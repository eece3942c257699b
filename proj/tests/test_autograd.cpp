#include "pivotgen/autograd.hpp"
#include "pivotgen/nn.hpp"

#include <random>

#include <gtest/gtest.h>

#include "gradcheck.hpp"

using namespace pivotgen;
using ag::Matrix;
using ag::Parameter;
using ag::Tape;
using ag::Var;

namespace {

Parameter rand_param(const char* name, int r, int c, std::mt19937_64& rng) {
  return Parameter(name, nn::normal_matrix(r, c, 0.7, rng));
}

// Reduces any matrix to a scalar with fixed random weights so every entry
// of the gradient is exercised.
Var probe(Tape& t, Var x, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  return ag::sum(ag::mul(x, t.constant(nn::normal_matrix(x.rows(), x.cols(), 1.0, rng))));
}

}  // namespace

TEST(Autograd, ElementwiseAndLinear) {
  std::mt19937_64 rng(1);
  auto a = rand_param("a", 3, 4, rng), b = rand_param("b", 4, 2, rng), c = rand_param("c", 3, 2, rng);
  auto bias = rand_param("bias", 1, 2, rng);
  auto res = check::grad_check({&a, &b, &c, &bias}, [&](Tape& t) {
    Var ab = ag::matmul(t.param(a), t.param(b));
    Var x = ag::add_bias(ag::add(ab, t.param(c)), t.param(bias));
    Var y = ag::mul(ag::sigmoid(x), ag::tanh(ag::sub(x, t.param(c))));
    return probe(t, ag::scale(ag::relu(ag::add(y, ag::scale(x, 0.3))), 1.7));
  });
  EXPECT_LT(res.max_rel_error, 1e-6);
}

TEST(Autograd, ShapeOps) {
  std::mt19937_64 rng(2);
  auto a = rand_param("a", 2, 3, rng), b = rand_param("b", 2, 2, rng), e = rand_param("e", 6, 3, rng);
  auto res = check::grad_check({&a, &b, &e}, [&](Tape& t) {
    Var cat = ag::concat_cols({t.param(a), t.param(b)});
    Var sl = ag::slice_cols(cat, 1, 3);
    Var rows = ag::concat_rows({sl, t.param(a)});
    Var part = ag::slice_rows(rows, 1, 2);
    Var emb = ag::embedding(t, e, {5, 0, 5});
    Var stacked = ag::stack_steps({part, ag::slice_rows(emb, 0, 2)});
    Var blended = ag::blend_rows({1.0, 0.0}, t.param(a), ag::slice_rows(emb, 1, 2));
    return ag::add(probe(t, stacked), probe(t, blended, 5));
  });
  EXPECT_LT(res.max_rel_error, 1e-6);
}

TEST(Autograd, SoftmaxCrossEntropyLayerNorm) {
  std::mt19937_64 rng(3);
  auto x = rand_param("x", 4, 5, rng), g = rand_param("g", 1, 5, rng), bb = rand_param("bb", 1, 5, rng);
  auto res = check::grad_check({&x, &g, &bb}, [&](Tape& t) {
    Var ln = ag::layer_norm(t.param(x), t.param(g), t.param(bb));
    Var ce = ag::cross_entropy(ln, {0, 4, 2, 1}, {1.0, 0.5, 0.0, 2.0});
    return ag::add(ce, probe(t, ag::softmax_rows(t.param(x))));
  });
  EXPECT_LT(res.max_rel_error, 1e-6);
}

TEST(Autograd, GlobalAttention) {
  std::mt19937_64 rng(4);
  const int L = 3;
  auto q = rand_param("q", 2, 4, rng), k = rand_param("k", 2 * L, 4, rng), v = rand_param("v", 2 * L, 5, rng);
  const std::vector<double> mask{1, 1, 1, 1, 1, 0};
  auto res = check::grad_check({&q, &k, &v}, [&](Tape& t) {
    Var w = ag::attention_weights(t.param(q), t.param(k), L, mask);
    return probe(t, ag::attention_context(w, t.param(v), L));
  });
  EXPECT_LT(res.max_rel_error, 1e-6);

  Tape t;
  Var w = ag::attention_weights(t.param(q), t.param(k), L, mask);
  EXPECT_NEAR(w.value().row(0).sum(), 1.0, 1e-12);
  EXPECT_NEAR(w.value().row(1).sum(), 1.0, 1e-12);
  EXPECT_EQ(w.value()(1, 2), 0.0);
}

TEST(Autograd, MultiHeadAttention) {
  std::mt19937_64 rng(5);
  const int B = 2, Lq = 3, Lk = 4, D = 6;
  auto q = rand_param("q", B * Lq, D, rng), k = rand_param("k", B * Lk, D, rng),
       v = rand_param("v", B * Lk, D, rng);
  const std::vector<double> mask{1, 1, 1, 0, 1, 1, 0, 0};
  ag::AttentionShape shape{B, Lq, Lk, 2, false};
  auto res = check::grad_check({&q, &k, &v}, [&](Tape& t) {
    return probe(t, ag::multi_head_attention(t.param(q), t.param(k), t.param(v), shape, mask));
  });
  EXPECT_LT(res.max_rel_error, 1e-6);

  auto s = rand_param("s", B * Lk, D, rng);
  ag::AttentionShape causal{B, Lk, Lk, 3, true};
  auto res2 = check::grad_check({&s}, [&](Tape& t) {
    Var x = t.param(s);
    return probe(t, ag::multi_head_attention(x, x, x, causal, std::vector<double>(B * Lk, 1.0)));
  });
  EXPECT_LT(res2.max_rel_error, 1e-6);
}

TEST(Autograd, LstmCell) {
  std::mt19937_64 rng(6);
  nn::LstmCell cell("cell", 3, 4, rng);
  std::vector<Parameter*> params;
  cell.collect(params);
  auto x = rand_param("x", 2, 3, rng);
  params.push_back(&x);
  auto res = check::grad_check(params, [&](Tape& t) {
    auto bound = cell.bind(t);
    auto s = cell.zero_state(t, 2);
    s = cell.step(bound, t.param(x), s);
    s = cell.step(bound, ag::scale(t.param(x), -1.0), s);
    return ag::add(probe(t, s.h), probe(t, s.c, 3));
  });
  EXPECT_LT(res.max_rel_error, 1e-6);
}

TEST(Autograd, DropoutIsIdentityWithoutRng) {
  Tape t;
  Var x = t.constant(Matrix::Ones(2, 2));
  EXPECT_EQ(ag::dropout(x, 0.5, nullptr).id(), x.id());
  std::mt19937_64 rng(1);
  Var d = ag::dropout(x, 0.5, &rng);
  for (Eigen::Index i = 0; i < 4; ++i) {
    const double v = d.value().data()[i];
    EXPECT_TRUE(v == 0.0 || v == 2.0);
  }
}

TEST(Autograd, BackwardRequiresScalar) {
  Tape t;
  Parameter p("p", Matrix::Ones(2, 2));
  EXPECT_THROW(t.backward(t.param(p)), Error);
}
