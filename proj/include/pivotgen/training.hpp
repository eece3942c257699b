#pragma once

// Optimization shared by both stages: Adam, global-norm clipping, the
// validation-driven schedule, batch mixing, and the epoch loops.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "pivotgen/autograd.hpp"
#include "pivotgen/denoise.hpp"
#include "pivotgen/keyfact.hpp"
#include "pivotgen/metrics.hpp"
#include "pivotgen/nn.hpp"
#include "pivotgen/realizer.hpp"
#include "pivotgen/tagger.hpp"

namespace pivotgen {

struct OptimizerConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;
  std::size_t batch_size = 64;

  void validate() const {
    if (!(lr > 0) || !(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1) || !(eps > 0))
      throw Error("optimizer: lr, betas and eps must be positive (betas below 1)");
    if (!(clip_norm > 0)) throw Error("optimizer: clip norm must be positive");
    if (batch_size < 1) throw Error("optimizer: batch size must be >= 1");
  }
};

// Scales all gradients by max_norm / norm when the global L2 norm exceeds
// max_norm. Returns the norm before clipping.
inline double clip_gradients(const std::vector<ag::Parameter*>& params, double max_norm) {
  double sq = 0.0;
  for (const auto* p : params) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (auto* p : params) p->grad *= s;
  }
  return norm;
}

class Adam {
 public:
  Adam() = default;
  Adam(std::vector<ag::Parameter*> params, OptimizerConfig config)
      : params_(std::move(params)), config_(config), lr_(config.lr) {
    config_.validate();
    for (const auto* p : params_) {
      m_.push_back(ag::Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(ag::Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  long steps() const { return t_; }

  // Clips, then applies one bias-corrected update from the accumulated
  // gradients. A non-finite gradient skips the update, is logged with the
  // batch id, and returns false. Gradients are zeroed either way.
  bool step(const std::string& batch_id = "", std::ostream* log = nullptr) {
    for (const auto* p : params_)
      if (!p->grad.allFinite()) {
        if (log) *log << "warning: non-finite gradient in " << p->name << " at batch " << batch_id
                      << ", step skipped\n";
        nn::zero_grads(params_);
        return false;
      }
    clip_gradients(params_, config_.clip_norm);
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = *params_[i];
      m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * p.grad;
      v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * p.grad.cwiseProduct(p.grad);
      p.value.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.eps);
      p.zero_grad();
    }
    return true;
  }

 private:
  std::vector<ag::Parameter*> params_;
  OptimizerConfig config_;
  double lr_ = 1e-3;
  long t_ = 0;
  std::vector<ag::Matrix> m_, v_;
};

// ---------------------------------------------------------------------------
// Schedule

enum class Decision { kContinue, kHalveLr, kStop };

inline const char* to_string(Decision d) {
  switch (d) {
    case Decision::kContinue: return "continue";
    case Decision::kHalveLr: return "halve_lr";
    case Decision::kStop: return "stop";
  }
  return "?";
}

struct ScheduleState {
  double best = -std::numeric_limits<double>::infinity();
  int since_improvement = 0;
  double lr = 1e-3;
  int epoch = 0;
  int halve_after = 3;
  int stop_after = 4;
};

// Higher scores are better. Counters reset on strict improvement.
inline Decision epoch_end(double score, ScheduleState& s) {
  if (!std::isfinite(score)) throw Error("epoch_end: non-finite validation score");
  ++s.epoch;
  if (score > s.best) {
    s.best = score;
    s.since_improvement = 0;
    return Decision::kContinue;
  }
  ++s.since_improvement;
  if (s.since_improvement >= s.stop_after) return Decision::kStop;
  if (s.since_improvement == s.halve_after) {
    s.lr *= 0.5;
    return Decision::kHalveLr;
  }
  return Decision::kContinue;
}

// ---------------------------------------------------------------------------
// Batching

struct BatchRef {
  bool parallel = true;
  std::vector<std::size_t> indices;
};

// Endless shuffled pass over [0, n), reshuffled at every wrap.
class IndexCycle {
 public:
  IndexCycle(std::size_t n, std::mt19937_64& rng) : order_(n), rng_(&rng) {
    for (std::size_t i = 0; i < n; ++i) order_[i] = i;
    std::shuffle(order_.begin(), order_.end(), *rng_);
  }

  std::vector<std::size_t> take(std::size_t k) {
    std::vector<std::size_t> out;
    if (order_.empty()) return out;
    k = std::min(k, order_.size());
    while (out.size() < k) {
      if (pos_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), *rng_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  std::mt19937_64* rng_;
  std::size_t pos_ = 0;
};

// `count` homogeneous batches; each is parallel with probability `ratio`.
inline std::vector<BatchRef> mix_batches(std::size_t n_parallel, std::size_t n_pseudo, double ratio,
                                         std::size_t count, std::size_t batch_size, std::mt19937_64& rng) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw Error("mix ratio must be in [0,1]");
  if (ratio < 1.0 && n_pseudo == 0) throw Error("mix_batches: empty pseudo set with ratio < 1");
  if (ratio > 0.0 && n_parallel == 0) throw Error("mix_batches: empty parallel set with ratio > 0");
  IndexCycle par(n_parallel, rng), pse(n_pseudo, rng);
  std::bernoulli_distribution pick(ratio);
  std::vector<BatchRef> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const bool p = pick(rng);
    out.push_back({p, p ? par.take(batch_size) : pse.take(batch_size)});
  }
  return out;
}

// One shuffled epoch over n samples.
inline std::vector<BatchRef> epoch_batches(std::size_t n, std::size_t batch_size, std::mt19937_64& rng,
                                           bool parallel = true) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<BatchRef> out;
  for (std::size_t i = 0; i < n; i += batch_size)
    out.push_back({parallel, {order.begin() + static_cast<std::ptrdiff_t>(i),
                              order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size))}});
  return out;
}

// Repeats `make()` until at least `min_steps` batches are collected.
template <typename Make>
std::vector<BatchRef> fill_epoch(std::size_t min_steps, Make make) {
  auto out = make();
  while (!out.empty() && out.size() < min_steps) {
    auto more = make();
    out.insert(out.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Epoch loops

struct TrainOptions {
  OptimizerConfig optimizer;
  int max_epochs = 50;
  int halve_after = 3;
  int stop_after = 4;
  std::uint64_t seed = 1;
  // Small training sets are cycled until an epoch holds this many steps, so
  // the patience counters see meaningful progress between validations.
  std::size_t min_steps_per_epoch = 1;
  // Stop as soon as the validation score reaches this value.
  double target_score = std::numeric_limits<double>::infinity();
  std::ostream* log = nullptr;       // per-epoch TSV
  std::ostream* warnings = nullptr;  // skipped steps etc.
  std::string tag;                   // prefix for log rows
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_score = 0.0;
  double lr = 0.0;
  Decision decision = Decision::kContinue;
};

struct TrainResult {
  double best_score = -std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  std::vector<EpochRecord> epochs;
  long steps = 0;
  long skipped_steps = 0;
};

inline void write_log_header(std::ostream& os) {
  os << "phase\tepoch\ttrain_loss\tvalid_score\tlr\tdecision\n";
}

inline std::vector<ag::Matrix> snapshot(const std::vector<ag::Parameter*>& params) {
  std::vector<ag::Matrix> out;
  for (const auto* p : params) out.push_back(p->value);
  return out;
}

inline void restore(const std::vector<ag::Parameter*>& params, const std::vector<ag::Matrix>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

// Generic loop: `plan(epoch)` returns that epoch's batches, `loss(batch)`
// builds the loss on a tape, `validate()` scores the current parameters.
// Parameters are restored to the best-scoring epoch at the end.
inline TrainResult run_training(const std::vector<ag::Parameter*>& params, const TrainOptions& opt,
                                const std::function<std::vector<BatchRef>(int)>& plan,
                                const std::function<ag::Var(ag::Tape&, const BatchRef&)>& loss,
                                const std::function<double()>& validate) {
  Adam adam(params, opt.optimizer);
  nn::zero_grads(params);
  ScheduleState sched;
  sched.lr = opt.optimizer.lr;
  sched.halve_after = opt.halve_after;
  sched.stop_after = opt.stop_after;
  TrainResult res;
  auto best = snapshot(params);
  for (int epoch = 1; epoch <= opt.max_epochs; ++epoch) {
    double total = 0.0;
    std::size_t n = 0;
    auto batches = plan(epoch);
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      ag::Tape t;
      ag::Var l = loss(t, batches[bi]);
      t.backward(l);
      const bool ok = adam.step(opt.tag + "e" + std::to_string(epoch) + "b" + std::to_string(bi), opt.warnings);
      if (!ok) {
        ++res.skipped_steps;
        continue;
      }
      total += l.scalar();
      ++n;
    }
    res.steps = adam.steps();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = n ? total / static_cast<double>(n) : 0.0;
    rec.valid_score = validate();
    rec.lr = adam.lr();
    rec.decision = epoch_end(rec.valid_score, sched);
    if (sched.since_improvement == 0) {
      res.best_score = rec.valid_score;
      res.best_epoch = epoch;
      best = snapshot(params);
    }
    if (rec.decision == Decision::kHalveLr) adam.set_lr(sched.lr);
    res.epochs.push_back(rec);
    if (opt.log) {
      *opt.log << (opt.tag.empty() ? "train" : opt.tag) << '\t' << epoch << '\t' << std::setprecision(6)
               << rec.train_loss << '\t' << rec.valid_score << '\t' << rec.lr << '\t' << to_string(rec.decision)
               << '\n';
      opt.log->flush();
    }
    if (rec.decision == Decision::kStop || rec.valid_score >= opt.target_score) break;
  }
  restore(params, best);
  return res;
}

inline std::vector<KeyFactLabels> predict_labels(TaggerModel& model, const std::vector<AnnotatedSample>& data,
                                                 std::size_t batch_size = 64) {
  std::vector<KeyFactLabels> out;
  for (std::size_t i = 0; i < data.size(); i += batch_size) {
    std::vector<const LinearizedTable*> tabs;
    for (std::size_t j = i; j < std::min(data.size(), i + batch_size); ++j) tabs.push_back(&data[j].table);
    for (auto& p : model.predict_batch(tabs)) out.push_back(std::move(p.labels));
  }
  return out;
}

inline PrfScore evaluate_tagger(TaggerModel& model, const std::vector<AnnotatedSample>& data,
                                Averaging avg = Averaging::kMicro) {
  std::vector<KeyFactLabels> gold;
  for (const auto& s : data) gold.push_back(s.labels);
  return evaluate_prf(predict_labels(model, data), gold, avg);
}

// Tagger training; validation score is token F1 on `valid`.
inline TrainResult train_tagger(TaggerModel& model, const std::vector<AnnotatedSample>& train,
                                const std::vector<AnnotatedSample>& valid, const TrainOptions& opt,
                                Averaging avg = Averaging::kMicro) {
  if (train.empty()) throw Error("train_tagger: empty training set");
  std::mt19937_64 order_rng(opt.seed), dropout_rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);
  const auto& eval_set = valid.empty() ? train : valid;
  return run_training(
      model.parameters(), opt,
      [&](int) {
        return fill_epoch(opt.min_steps_per_epoch,
                          [&] { return epoch_batches(train.size(), opt.optimizer.batch_size, order_rng); });
      },
      [&](ag::Tape& t, const BatchRef& b) {
        std::vector<const LinearizedTable*> tabs;
        std::vector<const KeyFactLabels*> gold;
        for (auto i : b.indices) {
          tabs.push_back(&train[i].table);
          gold.push_back(&train[i].labels);
        }
        return model.loss(t, tabs, gold, &dropout_rng);
      },
      [&] { return evaluate_tagger(model, eval_set, avg).f1; });
}

inline std::vector<Tokens> decode_all(Realizer& model, const std::vector<Tokens>& sources,
                                      std::size_t batch_size = 64) {
  std::vector<Tokens> out;
  for (std::size_t i = 0; i < sources.size(); i += batch_size) {
    std::vector<const Tokens*> b;
    for (std::size_t j = i; j < std::min(sources.size(), i + batch_size); ++j) b.push_back(&sources[j]);
    for (auto& r : model.greedy_decode_batch(b)) out.push_back(std::move(r.tokens));
  }
  return out;
}

inline double realizer_bleu(Realizer& model, const std::vector<TrainPair>& data, metrics::BleuOptions bleu = {}) {
  std::vector<Tokens> src, ref;
  for (const auto& p : data) {
    src.push_back(p.source);
    ref.push_back(p.target);
  }
  return metrics::bleu4(decode_all(model, src), ref, bleu);
}

// Realizer training on a parallel set, optionally mixed with pseudo pairs
// (ratio = probability a batch is parallel). Noise is drawn fresh for every
// batch. Validation score is corpus BLEU-4 of greedy decoding on `valid`,
// smoothed by default: unsmoothed BLEU stays at 0 for the first epochs of a
// small model and would trip the patience counters before learning starts.
struct RealizerPhase {
  const std::vector<TrainPair>* parallel = nullptr;
  const std::vector<TrainPair>* pseudo = nullptr;
  double ratio = 1.0;
  const std::vector<TrainPair>* valid = nullptr;
  NoiseConfig noise{0.0, 0.0};
  const std::vector<Tokens>* donors = nullptr;
  metrics::BleuOptions validation{true};
};

inline TrainResult train_realizer(Realizer& model, const RealizerPhase& phase, const TrainOptions& opt) {
  const std::size_t n_par = phase.parallel ? phase.parallel->size() : 0;
  const std::size_t n_pse = phase.pseudo ? phase.pseudo->size() : 0;
  if (n_par + n_pse == 0) throw Error("train_realizer: no training data");
  if (!phase.valid || phase.valid->empty()) throw Error("train_realizer: empty validation set");
  static const std::vector<Tokens> kNoDonors;
  const auto& donors = phase.donors ? *phase.donors : kNoDonors;
  phase.noise.validate(!donors.empty());
  std::mt19937_64 order_rng(opt.seed), dropout_rng(opt.seed ^ 0x9e3779b97f4a7c15ULL),
      noise_rng(phase.noise.seed);
  const double ratio = n_pse == 0 ? 1.0 : (n_par == 0 ? 0.0 : phase.ratio);
  const std::size_t B = opt.optimizer.batch_size;
  return run_training(
      model.parameters(), opt,
      [&](int) {
        if (ratio >= 1.0)
          return fill_epoch(opt.min_steps_per_epoch, [&] { return epoch_batches(n_par, B, order_rng, true); });
        if (ratio <= 0.0)
          return fill_epoch(opt.min_steps_per_epoch, [&] { return epoch_batches(n_pse, B, order_rng, false); });
        return mix_batches(n_par, n_pse, ratio, std::max(opt.min_steps_per_epoch, (n_par + n_pse + B - 1) / B), B,
                           order_rng);
      },
      [&](ag::Tape& t, const BatchRef& b) {
        const auto& set = b.parallel ? *phase.parallel : *phase.pseudo;
        std::vector<TrainPair> batch;
        for (auto i : b.indices) batch.push_back(set[i]);
        if (b.parallel ? phase.noise.on_parallel : phase.noise.on_pseudo)
          batch = augment_batch(std::move(batch), phase.noise, donors, noise_rng);
        std::vector<const Tokens*> src, tgt;
        for (const auto& p : batch) {
          src.push_back(&p.source);
          tgt.push_back(&p.target);
        }
        return model.loss(t, src, tgt, &dropout_rng);
      },
      [&] { return realizer_bleu(model, *phase.valid, phase.validation); });
}

}  // namespace pivotgen
