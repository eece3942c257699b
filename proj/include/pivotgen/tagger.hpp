#pragma once

// Stage 1: Bi-LSTM key-fact tagger over linearized tables.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "pivotgen/autograd.hpp"
#include "pivotgen/corpus.hpp"
#include "pivotgen/keyfact.hpp"
#include "pivotgen/nn.hpp"

namespace pivotgen {

struct TaggerConfig {
  int hidden_dim = 500;
  int word_emb_dim = 400;
  int attr_emb_dim = 50;
  int pos_emb_dim = 5;
  int max_position = 30;  // positions are clipped to this value
  std::size_t word_vocab_cap = 20000;
  std::size_t attr_vocab_cap = 1000;
  double dropout = 0.2;
  std::uint64_t seed = 1;

  int input_dim() const { return word_emb_dim + attr_emb_dim + 2 * pos_emb_dim; }

  void validate() const {
    if (hidden_dim < 1 || word_emb_dim < 1 || attr_emb_dim < 1 || pos_emb_dim < 1 || max_position < 1)
      throw Error("tagger dimensions must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw Error("tagger dropout must be in [0, 1)");
  }
};

struct TaggerPrediction {
  ag::Matrix probs;  // m x 2, columns are p(label=0), p(label=1)
  KeyFactLabels labels;
};

class TaggerModel {
 public:
  TaggerModel() = default;

  TaggerModel(TaggerConfig config, Vocabulary words, Vocabulary attributes)
      : config_(config), words_(std::move(words)), attributes_(std::move(attributes)) {
    config_.validate();
    std::mt19937_64 rng(config_.seed);
    const auto V = static_cast<Eigen::Index>(words_.size());
    const auto A = static_cast<Eigen::Index>(attributes_.size());
    word_emb_ = ag::Parameter("tagger.word_emb", nn::uniform_matrix(V, config_.word_emb_dim, 0.1, rng));
    attr_emb_ = ag::Parameter("tagger.attr_emb", nn::uniform_matrix(A, config_.attr_emb_dim, 0.1, rng));
    pos_emb_ = ag::Parameter("tagger.pos_emb",
                             nn::uniform_matrix(config_.max_position + 1, config_.pos_emb_dim, 0.1, rng));
    encoder_ = nn::BiLstm("tagger.encoder", config_.input_dim(), config_.hidden_dim, rng);
    classifier_ = nn::Linear("tagger.classifier", 2 * config_.hidden_dim, 2, nn::Init::kUniform, rng);
  }

  const TaggerConfig& config() const { return config_; }
  const Vocabulary& words() const { return words_; }
  const Vocabulary& attributes() const { return attributes_; }

  std::vector<ag::Parameter*> parameters() {
    std::vector<ag::Parameter*> out{&word_emb_, &attr_emb_, &pos_emb_};
    encoder_.collect(out);
    classifier_.collect(out);
    return out;
  }

  nn::BiLstm& encoder() { return encoder_; }
  nn::Linear& classifier() { return classifier_; }

  int clip_position(int p) const { return std::clamp(p, 1, config_.max_position); }

  // Feature vectors for one table: m x input_dim.
  ag::Var embed(ag::Tape& t, const LinearizedTable& table) {
    std::vector<int> w, a, pf, pb;
    for (const auto& tok : table.tokens) {
      w.push_back(words_.index(tok.word));
      a.push_back(attributes_.index(tok.attribute));
      pf.push_back(clip_position(tok.pos_fwd));
      pb.push_back(clip_position(tok.pos_bwd));
    }
    return ag::concat_cols({ag::embedding(t, word_emb_, w), ag::embedding(t, attr_emb_, a),
                            ag::embedding(t, pos_emb_, pf), ag::embedding(t, pos_emb_, pb)});
  }

  // Hidden states for one feature sequence (m x input_dim) -> m x 2H.
  ag::Var encode(ag::Tape& t, ag::Var features) {
    const auto m = features.rows();
    if (m == 0) throw Error("encode: empty feature sequence");
    std::vector<ag::Var> steps;
    std::vector<std::vector<double>> mask(static_cast<std::size_t>(m), std::vector<double>{1.0});
    for (Eigen::Index i = 0; i < m; ++i) steps.push_back(ag::slice_rows(features, i, 1));
    auto out = encoder_(t, steps, mask);
    return ag::concat_rows(out.outputs);
  }

  ag::Var classify_logits(ag::Tape& t, ag::Var hidden) { return classifier_(t, hidden); }

  ag::Var classify(ag::Tape& t, ag::Var hidden) { return ag::softmax_rows(classify_logits(t, hidden)); }

  struct BatchForward {
    ag::Var logits;  // (B*L) x 2, row b*L + s
    Eigen::Index batch = 0;
    Eigen::Index length = 0;
    std::vector<double> mask;  // B*L
  };

  // Batched forward over padded tables; dropout only when rng is given.
  BatchForward forward(ag::Tape& t, const std::vector<const LinearizedTable*>& tables,
                       std::mt19937_64* rng = nullptr) {
    const auto B = static_cast<Eigen::Index>(tables.size());
    Eigen::Index L = 0;
    for (const auto* tb : tables) {
      if (tb->empty()) throw Error("tagger: empty table");
      L = std::max<Eigen::Index>(L, static_cast<Eigen::Index>(tb->size()));
    }
    BatchForward out;
    out.batch = B;
    out.length = L;
    out.mask.assign(static_cast<std::size_t>(B * L), 0.0);
    std::vector<ag::Var> inputs;
    std::vector<std::vector<double>> step_mask(static_cast<std::size_t>(L));
    for (Eigen::Index s = 0; s < L; ++s) {
      std::vector<int> w, a, pf, pb;
      auto& sm = step_mask[static_cast<std::size_t>(s)];
      for (Eigen::Index b = 0; b < B; ++b) {
        const auto& tb = *tables[static_cast<std::size_t>(b)];
        if (s < static_cast<Eigen::Index>(tb.size())) {
          const auto& tok = tb.tokens[static_cast<std::size_t>(s)];
          w.push_back(words_.index(tok.word));
          a.push_back(attributes_.index(tok.attribute));
          pf.push_back(clip_position(tok.pos_fwd));
          pb.push_back(clip_position(tok.pos_bwd));
          sm.push_back(1.0);
          out.mask[static_cast<std::size_t>(b * L + s)] = 1.0;
        } else {
          w.push_back(Vocabulary::kPad);
          a.push_back(Vocabulary::kPad);
          pf.push_back(0);
          pb.push_back(0);
          sm.push_back(0.0);
        }
      }
      ag::Var x = ag::concat_cols({ag::embedding(t, word_emb_, w), ag::embedding(t, attr_emb_, a),
                                   ag::embedding(t, pos_emb_, pf), ag::embedding(t, pos_emb_, pb)});
      inputs.push_back(ag::dropout(x, config_.dropout, rng));
    }
    auto enc = encoder_(t, inputs, step_mask);
    ag::Var h = ag::dropout(ag::stack_steps(enc.outputs), config_.dropout, rng);
    out.logits = classifier_(t, h);
    return out;
  }

  // Token-summed cross entropy, averaged over the batch. Padding is masked.
  ag::Var loss(ag::Tape& t, const std::vector<const LinearizedTable*>& tables,
               const std::vector<const KeyFactLabels*>& gold, std::mt19937_64* rng = nullptr) {
    if (tables.size() != gold.size()) throw Error("tagger loss: batch size mismatch");
    auto fw = forward(t, tables, rng);
    std::vector<int> targets(fw.mask.size(), 0);
    std::vector<double> weights(fw.mask.size(), 0.0);
    const double inv_b = 1.0 / static_cast<double>(fw.batch);
    for (Eigen::Index b = 0; b < fw.batch; ++b) {
      const auto& g = *gold[static_cast<std::size_t>(b)];
      if (g.size() != tables[static_cast<std::size_t>(b)]->size())
        throw Error("tagger loss: labels not aligned with table");
      for (std::size_t s = 0; s < g.size(); ++s) {
        const auto r = static_cast<std::size_t>(b * fw.length) + s;
        targets[r] = g[s];
        weights[r] = inv_b;
      }
    }
    return ag::cross_entropy(fw.logits, targets, weights);
  }

  std::vector<TaggerPrediction> predict_batch(const std::vector<const LinearizedTable*>& tables) {
    ag::Tape t;
    auto fw = forward(t, tables, nullptr);
    const ag::Matrix probs = ag::softmax_rows_value(fw.logits.value());
    std::vector<TaggerPrediction> out;
    for (Eigen::Index b = 0; b < fw.batch; ++b) {
      const auto m = static_cast<Eigen::Index>(tables[static_cast<std::size_t>(b)]->size());
      TaggerPrediction p;
      p.probs = probs.middleRows(b * fw.length, m);
      for (Eigen::Index i = 0; i < m; ++i) p.labels.push_back(p.probs(i, 1) >= p.probs(i, 0) ? 1 : 0);
      out.push_back(std::move(p));
    }
    return out;
  }

  TaggerPrediction predict(const LinearizedTable& table) { return predict_batch({&table}).front(); }

 private:
  TaggerConfig config_;
  Vocabulary words_;
  Vocabulary attributes_;
  ag::Parameter word_emb_, attr_emb_, pos_emb_;
  nn::BiLstm encoder_;
  nn::Linear classifier_;
};

// -sum_t log p(gold_t) from per-token probability pairs.
inline double tagger_nll(const ag::Matrix& probs, const KeyFactLabels& gold) {
  if (static_cast<std::size_t>(probs.rows()) != gold.size()) throw Error("tagger_nll: length mismatch");
  double l = 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i) l -= std::log(probs(static_cast<Eigen::Index>(i), gold[i]));
  return l;
}

struct PrfScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline PrfScore prf_from_counts(double tp, double fp, double fn) {
  PrfScore s;
  s.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  s.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

enum class Averaging { kMicro, kMacro };

// Positive-class precision/recall/F1. Micro pools token counts over the
// corpus; macro averages per-sample scores.
inline PrfScore evaluate_prf(const std::vector<KeyFactLabels>& pred, const std::vector<KeyFactLabels>& gold,
                             Averaging avg = Averaging::kMicro) {
  if (pred.size() != gold.size()) throw Error("evaluate_prf: corpus size mismatch");
  double tp = 0, fp = 0, fn = 0;
  PrfScore macro;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    if (pred[s].size() != gold[s].size()) throw Error("evaluate_prf: sample length mismatch");
    double stp = 0, sfp = 0, sfn = 0;
    for (std::size_t i = 0; i < pred[s].size(); ++i) {
      stp += pred[s][i] && gold[s][i];
      sfp += pred[s][i] && !gold[s][i];
      sfn += !pred[s][i] && gold[s][i];
    }
    tp += stp;
    fp += sfp;
    fn += sfn;
    const auto ps = prf_from_counts(stp, sfp, sfn);
    macro.precision += ps.precision;
    macro.recall += ps.recall;
    macro.f1 += ps.f1;
  }
  if (avg == Averaging::kMicro) return prf_from_counts(tp, fp, fn);
  if (pred.empty()) return {};
  const double n = static_cast<double>(pred.size());
  return {macro.precision / n, macro.recall / n, macro.f1 / n};
}

}  // namespace pivotgen
