#include "pivotgen/training.hpp"

#include <random>
#include <sstream>

#include <gtest/gtest.h>

using namespace pivotgen;

namespace {

std::vector<Decision> run_trace(const std::vector<double>& scores) {
  ScheduleState s;
  std::vector<Decision> out;
  for (double x : scores) out.push_back(epoch_end(x, s));
  return out;
}

}  // namespace

TEST(Adam, FirstStepHandValue) {
  ag::Parameter p("p", ag::Matrix::Constant(1, 1, 0.5));
  Adam adam({&p}, {});
  p.grad(0, 0) = 1.0;
  ASSERT_TRUE(adam.step());
  // m_hat = 1, v_hat = 1 after bias correction: update = -lr / (1 + eps).
  EXPECT_NEAR(p.value(0, 0), 0.5 - 1e-3 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(p.grad(0, 0), 0.0);
}

TEST(Adam, ZeroGradientAdvancesCounterOnly) {
  ag::Parameter p("p", ag::Matrix::Constant(2, 2, 0.3));
  Adam adam({&p}, {});
  ASSERT_TRUE(adam.step());
  EXPECT_EQ(adam.steps(), 1);
  EXPECT_TRUE(p.value.isApprox(ag::Matrix::Constant(2, 2, 0.3)));
}

TEST(Adam, NonFiniteGradientSkipsAndLogs) {
  ag::Parameter p("p", ag::Matrix::Constant(1, 2, 1.0));
  Adam adam({&p}, {});
  p.grad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  std::ostringstream log;
  EXPECT_FALSE(adam.step("batch7", &log));
  EXPECT_EQ(adam.steps(), 0);
  EXPECT_NE(log.str().find("batch7"), std::string::npos);
  EXPECT_EQ(p.value(0, 0), 1.0);
}

TEST(Clip, ScalesOnlyAboveThreshold) {
  ag::Parameter a("a", ag::Matrix::Zero(1, 2)), b("b", ag::Matrix::Zero(1, 1));
  a.grad << 2.0, 0.0;
  EXPECT_DOUBLE_EQ(clip_gradients({&a}, 5.0), 2.0);
  EXPECT_EQ(a.grad(0, 0), 2.0);
  a.grad << 6.0, 0.0;
  b.grad << 8.0;
  EXPECT_DOUBLE_EQ(clip_gradients({&a, &b}, 5.0), 10.0);
  EXPECT_NEAR(std::sqrt(a.grad.squaredNorm() + b.grad.squaredNorm()), 5.0, 1e-12);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 10.0);
  for (int i = 0; i < 100; ++i) {
    a.grad << g(rng), g(rng);
    b.grad << g(rng);
    clip_gradients({&a, &b}, 5.0);
    EXPECT_LE(std::sqrt(a.grad.squaredNorm() + b.grad.squaredNorm()), 5.0 + 1e-9);
  }
}

TEST(Schedule, PatienceTraces) {
  using D = Decision;
  EXPECT_EQ(run_trace({10, 11, 12}), (std::vector<D>{D::kContinue, D::kContinue, D::kContinue}));
  EXPECT_EQ(run_trace({10, 9, 9, 9}), (std::vector<D>{D::kContinue, D::kContinue, D::kContinue, D::kHalveLr}));
  EXPECT_EQ(run_trace({10, 9, 9, 9, 9}),
            (std::vector<D>{D::kContinue, D::kContinue, D::kContinue, D::kHalveLr, D::kStop}));
  // Improvement resets both counters.
  EXPECT_EQ(run_trace({10, 9, 9, 11, 9, 9, 9}),
            (std::vector<D>{D::kContinue, D::kContinue, D::kContinue, D::kContinue, D::kContinue, D::kContinue,
                            D::kHalveLr}));
  ScheduleState s;
  s.lr = 1.0;
  double last = s.lr;
  for (double x : {5.0, 4.0, 6.0, 3.0, 3.0, 3.0, 3.0}) {
    epoch_end(x, s);
    EXPECT_LE(s.lr, last);
    last = s.lr;
  }
  EXPECT_DOUBLE_EQ(s.lr, 0.5);
  EXPECT_THROW(epoch_end(std::nan(""), s), Error);
}

TEST(MixBatches, RatiosAndHomogeneity) {
  std::mt19937_64 rng(1);
  for (const auto& b : mix_batches(10, 20, 1.0, 50, 4, rng)) EXPECT_TRUE(b.parallel);
  for (const auto& b : mix_batches(10, 20, 0.0, 50, 4, rng)) EXPECT_FALSE(b.parallel);
  auto stream = mix_batches(10, 20, 0.5, 10000, 4, rng);
  double par = 0;
  for (const auto& b : stream) {
    par += b.parallel;
    for (auto i : b.indices) EXPECT_LT(i, b.parallel ? 10u : 20u);
    EXPECT_EQ(b.indices.size(), 4u);
  }
  EXPECT_NEAR(par / 10000, 0.5, 0.02);
  EXPECT_THROW(mix_batches(10, 0, 0.5, 1, 4, rng), Error);
  std::mt19937_64 r1(5), r2(5);
  auto x = mix_batches(10, 20, 0.3, 100, 4, r1), y = mix_batches(10, 20, 0.3, 100, 4, r2);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_EQ(x[i].parallel, y[i].parallel);
    EXPECT_EQ(x[i].indices, y[i].indices);
  }
}

TEST(EpochBatches, CoversEverySampleOnce) {
  std::mt19937_64 rng(2);
  auto batches = epoch_batches(10, 4, rng);
  ASSERT_EQ(batches.size(), 3u);
  std::vector<int> seen(10, 0);
  for (const auto& b : batches)
    for (auto i : b.indices) ++seen[i];
  for (int c : seen) EXPECT_EQ(c, 1);
}

namespace {

std::vector<AnnotatedSample> tagger_data() {
  std::vector<AnnotatedSample> out;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 8; ++i) {
    Table t{{{"name", {"n" + std::to_string(rng() % 5), "m" + std::to_string(rng() % 5)}},
             {"image", {"img" + std::to_string(rng() % 5)}},
             {"job", {"j" + std::to_string(rng() % 5)}}}};
    AnnotatedSample s{linearize(t), {}, {}};
    s.labels = {1, 1, 0, 1};
    out.push_back(s);
  }
  return out;
}

Vocabulary vocab_of(const std::vector<AnnotatedSample>& d) {
  std::vector<Tokens> c;
  for (const auto& s : d) c.push_back(s.table.words());
  return Vocabulary::build(c, 100);
}

}  // namespace

TEST(TrainTagger, LossDecreasesAndRunsAreDeterministic) {
  auto data = tagger_data();
  TaggerConfig c;
  c.hidden_dim = 8;
  c.word_emb_dim = 6;
  c.attr_emb_dim = 4;
  c.pos_emb_dim = 2;
  c.dropout = 0.0;
  auto attrs = Vocabulary::build(std::vector<Tokens>{{"name", "image", "job"}}, 10);
  TaggerModel model(c, vocab_of(data), attrs);
  std::vector<const LinearizedTable*> tabs;
  std::vector<const KeyFactLabels*> gold;
  for (const auto& s : data) {
    tabs.push_back(&s.table);
    gold.push_back(&s.labels);
  }
  auto params = model.parameters();
  Adam adam(params, {});
  double prev = 1e300;
  for (int i = 0; i < 20; ++i) {
    ag::Tape t;
    auto l = model.loss(t, tabs, gold);
    EXPECT_LT(l.scalar(), prev);
    prev = l.scalar();
    t.backward(l);
    adam.step();
  }

  TrainOptions opt;
  opt.max_epochs = 6;
  opt.optimizer.batch_size = 3;
  std::ostringstream log1, log2;
  TaggerModel m1(c, vocab_of(data), attrs), m2(c, vocab_of(data), attrs);
  opt.log = &log1;
  auto r1 = train_tagger(m1, data, data, opt);
  opt.log = &log2;
  auto r2 = train_tagger(m2, data, data, opt);
  EXPECT_EQ(log1.str(), log2.str());
  EXPECT_EQ(r1.epochs.size(), r2.epochs.size());
  auto p1 = m1.parameters(), p2 = m2.parameters();
  for (std::size_t i = 0; i < p1.size(); ++i) EXPECT_EQ(p1[i]->value, p2[i]->value);
}

TEST(TrainRealizer, LossDecreasesOnFixedBatch) {
  std::vector<Tokens> src{{"a", "b"}, {"c"}, {"d", "e", "f"}};
  std::vector<Tokens> tgt{{"x", "a", "y", "b"}, {"c", "z"}, {"d", "q", "e", "f", "."}};
  std::vector<Tokens> corpus = tgt;
  corpus.insert(corpus.end(), src.begin(), src.end());
  for (auto v : {RealizerVariant::kVanilla, RealizerVariant::kTransformer}) {
    RealizerConfig c;
    c.variant = v;
    c.hidden_dim = 16;
    c.emb_dim = 8;
    c.model_dim = 16;
    c.ff_dim = 16;
    c.heads = 2;
    c.blocks = 1;
    c.dropout = 0.0;
    auto model = make_realizer(c, Vocabulary::build(corpus, 100));
    Adam adam(model->parameters(), {});
    std::vector<const Tokens*> ps, pt;
    for (std::size_t i = 0; i < src.size(); ++i) {
      ps.push_back(&src[i]);
      pt.push_back(&tgt[i]);
    }
    double prev = 1e300;
    for (int i = 0; i < 20; ++i) {
      ag::Tape t;
      auto l = model->loss(t, ps, pt, nullptr);
      EXPECT_LT(l.scalar(), prev) << to_string(v) << " step " << i;
      prev = l.scalar();
      t.backward(l);
      adam.step();
    }
  }
}

TEST(TrainRealizer, MemorizesTinyCorpusWithNoiseOff) {
  std::vector<TrainPair> data{{{"anna"}, {"anna", "is", "a", "poet", "."}},
                              {{"bob", "1950"}, {"bob", "was", "born", "in", "1950", "."}},
                              {{"carl", "chef"}, {"carl", "works", "as", "a", "chef", "."}}};
  std::vector<Tokens> corpus;
  for (const auto& p : data) corpus.push_back(p.target);
  RealizerConfig c;
  c.hidden_dim = 24;
  c.emb_dim = 16;
  c.dropout = 0.0;
  auto model = make_realizer(c, Vocabulary::build(corpus, 100));
  TrainOptions opt;
  opt.max_epochs = 300;
  opt.stop_after = 1000;
  opt.halve_after = 1000;
  opt.optimizer.lr = 0.01;
  opt.target_score = 1.0;
  RealizerPhase phase;
  phase.parallel = &data;
  phase.valid = &data;
  auto res = train_realizer(*model, phase, opt);
  EXPECT_DOUBLE_EQ(res.best_score, 1.0);
  EXPECT_DOUBLE_EQ(realizer_bleu(*model, data), 1.0);
}
