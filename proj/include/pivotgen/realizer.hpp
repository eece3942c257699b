#pragma once

// Stage 2: surface realization from a key-fact sequence. Two interchangeable
// architectures share one interface: an attention Seq2Seq (Bi-LSTM encoder,
// LSTM decoder, bilinear global attention) and a pre-norm Transformer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pivotgen/autograd.hpp"
#include "pivotgen/corpus.hpp"
#include "pivotgen/nn.hpp"

namespace pivotgen {

enum class RealizerVariant { kVanilla, kTransformer };

inline std::string to_string(RealizerVariant v) {
  return v == RealizerVariant::kVanilla ? "vanilla" : "transformer";
}

inline RealizerVariant parse_variant(const std::string& s) {
  if (s == "vanilla") return RealizerVariant::kVanilla;
  if (s == "transformer") return RealizerVariant::kTransformer;
  throw Error("unknown realizer variant '" + s + "'");
}

struct RealizerConfig {
  RealizerVariant variant = RealizerVariant::kVanilla;
  // Seq2Seq
  int hidden_dim = 500;
  int emb_dim = 400;
  // Transformer
  int model_dim = 512;
  int ff_dim = 2048;
  int heads = 8;
  int blocks = 6;
  // Shared
  double dropout = 0.2;
  int max_decode_length = 60;
  std::size_t vocab_cap = 20000;
  std::uint64_t seed = 1;

  void validate() const {
    if (hidden_dim < 1 || emb_dim < 1 || model_dim < 1 || ff_dim < 1 || heads < 1 || blocks < 1)
      throw Error("realizer dimensions must be >= 1");
    if (model_dim % heads != 0) throw Error("transformer model dim must be divisible by head count");
    if (dropout < 0.0 || dropout >= 1.0) throw Error("realizer dropout must be in [0, 1)");
    if (max_decode_length < 1) throw Error("max decode length must be >= 1");
  }
};

enum class Termination { kEos, kMaxLength };

struct DecodeResult {
  Tokens tokens;
  std::vector<int> ids;
  Termination terminated_by = Termination::kMaxLength;
  std::vector<ag::RowVector> distributions;  // filled on request
};

// Teacher-forcing batch: inputs are BOS-shifted targets.
struct SeqBatch {
  std::vector<std::vector<int>> sources;
  std::vector<std::vector<int>> target_in;
  std::vector<std::vector<int>> target_out;
};

inline std::vector<int> encode_source(const Vocabulary& v, const Tokens& src) {
  if (src.empty()) return {Vocabulary::kUnk};
  return v.encode(src);
}

inline SeqBatch make_batch(const Vocabulary& v, const std::vector<const Tokens*>& sources,
                           const std::vector<const Tokens*>& targets) {
  if (sources.size() != targets.size()) throw Error("make_batch: size mismatch");
  SeqBatch b;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    b.sources.push_back(encode_source(v, *sources[i]));
    std::vector<int> y = v.encode(*targets[i]);
    std::vector<int> in{Vocabulary::kBos};
    in.insert(in.end(), y.begin(), y.end());
    y.push_back(Vocabulary::kEos);
    b.target_in.push_back(std::move(in));
    b.target_out.push_back(std::move(y));
  }
  return b;
}

namespace detail {

inline Eigen::Index max_len(const std::vector<std::vector<int>>& seqs) {
  Eigen::Index L = 0;
  for (const auto& s : seqs) L = std::max<Eigen::Index>(L, static_cast<Eigen::Index>(s.size()));
  return L;
}

inline int argmax(const ag::Matrix& m, Eigen::Index row) {
  Eigen::Index best = 0;
  m.row(row).maxCoeff(&best);
  return static_cast<int>(best);
}

}  // namespace detail

class Realizer {
 public:
  explicit Realizer(RealizerConfig config, Vocabulary vocab)
      : config_(config), vocab_(std::move(vocab)) {
    config_.validate();
  }
  virtual ~Realizer() = default;
  Realizer(const Realizer&) = delete;
  Realizer& operator=(const Realizer&) = delete;

  const RealizerConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  RealizerVariant variant() const { return config_.variant; }

  virtual std::vector<ag::Parameter*> parameters() = 0;

  // Teacher-forced logits, (B*T) x |V| with row b*T + t.
  virtual ag::Var logits(ag::Tape& t, const SeqBatch& batch, std::mt19937_64* rng) = 0;

  // Encoder outputs for one source: one row per source token.
  virtual ag::Var encode(ag::Tape& t, const Tokens& source) = 0;

  virtual std::vector<DecodeResult> greedy_decode_batch(const std::vector<const Tokens*>& sources,
                                                        bool keep_distributions = false) = 0;

  DecodeResult greedy_decode(const Tokens& source, bool keep_distributions = false) {
    return greedy_decode_batch({&source}, keep_distributions).front();
  }

  // Token-summed NLL, averaged over the batch; PAD never contributes.
  ag::Var loss(ag::Tape& t, const SeqBatch& batch, std::mt19937_64* rng) {
    ag::Var lg = logits(t, batch, rng);
    const auto B = static_cast<Eigen::Index>(batch.target_out.size());
    const auto T = detail::max_len(batch.target_out);
    std::vector<int> targets(static_cast<std::size_t>(B * T), 0);
    std::vector<double> weights(static_cast<std::size_t>(B * T), 0.0);
    for (Eigen::Index b = 0; b < B; ++b) {
      const auto& y = batch.target_out[static_cast<std::size_t>(b)];
      for (std::size_t s = 0; s < y.size(); ++s) {
        const auto r = static_cast<std::size_t>(b * T) + s;
        targets[r] = y[s];
        weights[r] = y[s] == Vocabulary::kPad ? 0.0 : 1.0 / static_cast<double>(B);
      }
    }
    return ag::cross_entropy(lg, targets, weights);
  }

  ag::Var loss(ag::Tape& t, const std::vector<const Tokens*>& sources,
               const std::vector<const Tokens*>& targets, std::mt19937_64* rng) {
    return loss(t, make_batch(vocab_, sources, targets), rng);
  }

 protected:
  DecodeResult finish(const std::vector<int>& ids, bool eos, std::vector<ag::RowVector> dists) const {
    DecodeResult r;
    r.ids = ids;
    for (int id : ids) r.tokens.push_back(vocab_.token(id));
    r.terminated_by = eos ? Termination::kEos : Termination::kMaxLength;
    r.distributions = std::move(dists);
    return r;
  }

  RealizerConfig config_;
  Vocabulary vocab_;
};

// ---------------------------------------------------------------------------
// Attention Seq2Seq

class VanillaRealizer : public Realizer {
 public:
  VanillaRealizer(RealizerConfig config, Vocabulary vocab) : Realizer(config, std::move(vocab)) {
    std::mt19937_64 rng(config_.seed);
    const auto V = static_cast<Eigen::Index>(vocab_.size());
    const int H = config_.hidden_dim, E = config_.emb_dim;
    src_emb_ = ag::Parameter("vanilla.src_emb", nn::uniform_matrix(V, E, 0.1, rng));
    tgt_emb_ = ag::Parameter("vanilla.tgt_emb", nn::uniform_matrix(V, E, 0.1, rng));
    encoder_ = nn::BiLstm("vanilla.encoder", E, H, rng);
    bridge_h_ = nn::Linear("vanilla.bridge_h", 2 * H, H, nn::Init::kUniform, rng);
    bridge_c_ = nn::Linear("vanilla.bridge_c", 2 * H, H, nn::Init::kUniform, rng);
    decoder_ = nn::LstmCell("vanilla.decoder", E, H, rng);
    attn_ = ag::Parameter("vanilla.attn", nn::uniform_matrix(2 * H, H, 0.1, rng));
    combine_ = nn::Linear("vanilla.combine", 3 * H, H, nn::Init::kUniform, rng);
    generator_ = nn::Linear("vanilla.generator", H, V, nn::Init::kUniform, rng);
  }

  std::vector<ag::Parameter*> parameters() override {
    std::vector<ag::Parameter*> out{&src_emb_, &tgt_emb_};
    encoder_.collect(out);
    bridge_h_.collect(out);
    bridge_c_.collect(out);
    decoder_.collect(out);
    out.push_back(&attn_);
    combine_.collect(out);
    generator_.collect(out);
    return out;
  }

  nn::Linear& generator() { return generator_; }

  struct Encoded {
    ag::Var memory;  // (B*L) x 2H
    ag::Var keys;    // (B*L) x H, memory projected by the bilinear score matrix
    std::vector<double> mask;
    Eigen::Index length = 0;
    nn::LstmState initial;
  };

  Encoded encode_batch(ag::Tape& t, const std::vector<std::vector<int>>& sources, std::mt19937_64* rng) {
    const auto B = static_cast<Eigen::Index>(sources.size());
    const auto L = detail::max_len(sources);
    Encoded e;
    e.length = L;
    e.mask.assign(static_cast<std::size_t>(B * L), 0.0);
    std::vector<ag::Var> inputs;
    std::vector<std::vector<double>> step_mask(static_cast<std::size_t>(L));
    for (Eigen::Index s = 0; s < L; ++s) {
      std::vector<int> ids;
      for (Eigen::Index b = 0; b < B; ++b) {
        const auto& src = sources[static_cast<std::size_t>(b)];
        const bool real = s < static_cast<Eigen::Index>(src.size());
        ids.push_back(real ? src[static_cast<std::size_t>(s)] : Vocabulary::kPad);
        step_mask[static_cast<std::size_t>(s)].push_back(real ? 1.0 : 0.0);
        if (real) e.mask[static_cast<std::size_t>(b * L + s)] = 1.0;
      }
      inputs.push_back(ag::dropout(ag::embedding(t, src_emb_, ids), config_.dropout, rng));
    }
    auto enc = encoder_(t, inputs, step_mask);
    e.memory = ag::stack_steps(enc.outputs);
    e.keys = ag::matmul(e.memory, t.param(attn_));
    ag::Var hcat = ag::concat_cols({enc.forward_final.h, enc.backward_final.h});
    ag::Var ccat = ag::concat_cols({enc.forward_final.c, enc.backward_final.c});
    e.initial = {bridge_h_(t, hcat), bridge_c_(t, ccat)};
    return e;
  }

  struct Step {
    nn::LstmState state;
    ag::Var output;     // v_t, B x H
    ag::Var attention;  // B x L
    ag::Var logits;     // B x |V|
  };

  // One decoder step: s_t = LSTM(y_{t-1}, s_{t-1}); v_t = tanh(W [c_t; s_t]);
  // logits = W_g v_t + b_g.
  Step decode_step(ag::Tape& t, const Encoded& enc, const std::vector<int>& prev_tokens,
                   const nn::LstmState& prev, const nn::LstmCell::Bound& cell, std::mt19937_64* rng) {
    Step st;
    ag::Var y = ag::dropout(ag::embedding(t, tgt_emb_, prev_tokens), config_.dropout, rng);
    st.state = decoder_.step(cell, y, prev);
    st.attention = ag::attention_weights(st.state.h, enc.keys, enc.length, enc.mask);
    ag::Var ctx = ag::attention_context(st.attention, enc.memory, enc.length);
    st.output = ag::tanh(combine_(t, ag::concat_cols({ctx, st.state.h})));
    st.logits = generator_(t, ag::dropout(st.output, config_.dropout, rng));
    return st;
  }

  nn::LstmCell::Bound bind_decoder(ag::Tape& t) { return decoder_.bind(t); }

  ag::Var logits(ag::Tape& t, const SeqBatch& batch, std::mt19937_64* rng) override {
    const auto B = static_cast<Eigen::Index>(batch.sources.size());
    const auto T = detail::max_len(batch.target_in);
    Encoded enc = encode_batch(t, batch.sources, rng);
    auto cell = decoder_.bind(t);
    nn::LstmState state = enc.initial;
    std::vector<ag::Var> steps;
    for (Eigen::Index s = 0; s < T; ++s) {
      std::vector<int> prev;
      for (Eigen::Index b = 0; b < B; ++b) {
        const auto& in = batch.target_in[static_cast<std::size_t>(b)];
        prev.push_back(s < static_cast<Eigen::Index>(in.size()) ? in[static_cast<std::size_t>(s)]
                                                                : Vocabulary::kPad);
      }
      Step st = decode_step(t, enc, prev, state, cell, rng);
      state = st.state;
      steps.push_back(st.logits);
    }
    return ag::stack_steps(steps);
  }

  ag::Var encode(ag::Tape& t, const Tokens& source) override {
    return encode_batch(t, {encode_source(vocab_, source)}, nullptr).memory;
  }

  std::vector<DecodeResult> greedy_decode_batch(const std::vector<const Tokens*>& sources,
                                                bool keep_distributions = false) override {
    ag::Tape t;
    std::vector<std::vector<int>> src;
    for (const auto* s : sources) src.push_back(encode_source(vocab_, *s));
    const auto B = static_cast<Eigen::Index>(src.size());
    Encoded enc = encode_batch(t, src, nullptr);
    auto cell = decoder_.bind(t);
    nn::LstmState state = enc.initial;
    std::vector<int> prev(static_cast<std::size_t>(B), Vocabulary::kBos);
    std::vector<std::vector<int>> out(static_cast<std::size_t>(B));
    std::vector<std::vector<ag::RowVector>> dists(static_cast<std::size_t>(B));
    std::vector<bool> done(static_cast<std::size_t>(B), false), eos(static_cast<std::size_t>(B), false);
    for (int step = 0; step < config_.max_decode_length; ++step) {
      Step st = decode_step(t, enc, prev, state, cell, nullptr);
      state = st.state;
      const ag::Matrix probs = ag::softmax_rows_value(st.logits.value());
      bool all_done = true;
      for (Eigen::Index b = 0; b < B; ++b) {
        const auto i = static_cast<std::size_t>(b);
        if (done[i]) continue;
        if (keep_distributions) dists[i].push_back(probs.row(b));
        const int next = detail::argmax(probs, b);
        prev[i] = next;
        if (next == Vocabulary::kEos) {
          done[i] = eos[i] = true;
          continue;
        }
        out[i].push_back(next);
        all_done = false;
      }
      if (all_done) break;
    }
    std::vector<DecodeResult> res;
    for (std::size_t i = 0; i < out.size(); ++i) res.push_back(finish(out[i], eos[i], std::move(dists[i])));
    return res;
  }

 private:
  ag::Parameter src_emb_, tgt_emb_;
  nn::BiLstm encoder_;
  nn::Linear bridge_h_, bridge_c_;
  nn::LstmCell decoder_;
  ag::Parameter attn_;
  nn::Linear combine_;
  nn::Linear generator_;
};

// ---------------------------------------------------------------------------
// Transformer

inline ag::Matrix sinusoidal_positions(Eigen::Index length, Eigen::Index dim) {
  ag::Matrix pe(length, dim);
  for (Eigen::Index pos = 0; pos < length; ++pos)
    for (Eigen::Index i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      pe(pos, i) = (i % 2 == 0) ? std::sin(static_cast<double>(pos) / rate)
                                : std::cos(static_cast<double>(pos) / rate);
    }
  return pe;
}

struct MultiHeadAttention {
  nn::Linear query, key, value, output;
  int heads = 1;

  MultiHeadAttention() = default;
  MultiHeadAttention(const std::string& name, int dim, int h, std::mt19937_64& rng)
      : query(name + ".q", dim, dim, nn::Init::kFanIn, rng),
        key(name + ".k", dim, dim, nn::Init::kFanIn, rng),
        value(name + ".v", dim, dim, nn::Init::kFanIn, rng),
        output(name + ".o", dim, dim, nn::Init::kFanIn, rng),
        heads(h) {}

  ag::Var operator()(ag::Tape& t, ag::Var x_query, ag::Var x_memory, ag::AttentionShape shape,
                     const std::vector<double>& key_mask) {
    shape.heads = heads;
    ag::Var ctx = ag::multi_head_attention(query(t, x_query), key(t, x_memory), value(t, x_memory), shape,
                                           key_mask);
    return output(t, ctx);
  }

  void collect(std::vector<ag::Parameter*>& out) {
    query.collect(out);
    key.collect(out);
    value.collect(out);
    output.collect(out);
  }
};

struct FeedForward {
  nn::Linear inner, outer;

  FeedForward() = default;
  FeedForward(const std::string& name, int dim, int ff, std::mt19937_64& rng)
      : inner(name + ".inner", dim, ff, nn::Init::kFanIn, rng),
        outer(name + ".outer", ff, dim, nn::Init::kFanIn, rng) {}

  ag::Var operator()(ag::Tape& t, ag::Var x, double p, std::mt19937_64* rng) {
    return outer(t, ag::dropout(ag::relu(inner(t, x)), p, rng));
  }

  void collect(std::vector<ag::Parameter*>& out) {
    inner.collect(out);
    outer.collect(out);
  }
};

struct EncoderBlock {
  nn::LayerNorm norm_attn, norm_ff;
  MultiHeadAttention attn;
  FeedForward ff;

  EncoderBlock() = default;
  EncoderBlock(const std::string& name, const RealizerConfig& c, std::mt19937_64& rng)
      : norm_attn(name + ".norm_attn", c.model_dim),
        norm_ff(name + ".norm_ff", c.model_dim),
        attn(name + ".attn", c.model_dim, c.heads, rng),
        ff(name + ".ff", c.model_dim, c.ff_dim, rng) {}

  void collect(std::vector<ag::Parameter*>& out) {
    norm_attn.collect(out);
    attn.collect(out);
    norm_ff.collect(out);
    ff.collect(out);
  }
};

struct DecoderBlock {
  nn::LayerNorm norm_self, norm_cross, norm_ff;
  MultiHeadAttention self_attn, cross_attn;
  FeedForward ff;

  DecoderBlock() = default;
  DecoderBlock(const std::string& name, const RealizerConfig& c, std::mt19937_64& rng)
      : norm_self(name + ".norm_self", c.model_dim),
        norm_cross(name + ".norm_cross", c.model_dim),
        norm_ff(name + ".norm_ff", c.model_dim),
        self_attn(name + ".self_attn", c.model_dim, c.heads, rng),
        cross_attn(name + ".cross_attn", c.model_dim, c.heads, rng),
        ff(name + ".ff", c.model_dim, c.ff_dim, rng) {}

  void collect(std::vector<ag::Parameter*>& out) {
    norm_self.collect(out);
    self_attn.collect(out);
    norm_cross.collect(out);
    cross_attn.collect(out);
    norm_ff.collect(out);
    ff.collect(out);
  }
};

class TransformerRealizer : public Realizer {
 public:
  TransformerRealizer(RealizerConfig config, Vocabulary vocab) : Realizer(config, std::move(vocab)) {
    std::mt19937_64 rng(config_.seed);
    const auto V = static_cast<Eigen::Index>(vocab_.size());
    const int D = config_.model_dim;
    const double emb_std = 1.0 / std::sqrt(static_cast<double>(D));
    src_emb_ = ag::Parameter("transformer.src_emb", nn::normal_matrix(V, D, emb_std, rng));
    tgt_emb_ = ag::Parameter("transformer.tgt_emb", nn::normal_matrix(V, D, emb_std, rng));
    for (int i = 0; i < config_.blocks; ++i)
      encoder_.emplace_back("transformer.enc" + std::to_string(i), config_, rng);
    for (int i = 0; i < config_.blocks; ++i)
      decoder_.emplace_back("transformer.dec" + std::to_string(i), config_, rng);
    enc_norm_ = nn::LayerNorm("transformer.enc_norm", D);
    dec_norm_ = nn::LayerNorm("transformer.dec_norm", D);
    generator_ = nn::Linear("transformer.generator", D, V, nn::Init::kFanIn, rng);
  }

  std::vector<ag::Parameter*> parameters() override {
    std::vector<ag::Parameter*> out{&src_emb_, &tgt_emb_};
    for (auto& b : encoder_) b.collect(out);
    enc_norm_.collect(out);
    for (auto& b : decoder_) b.collect(out);
    dec_norm_.collect(out);
    generator_.collect(out);
    return out;
  }

  struct Memory {
    ag::Var states;  // (B*L) x D
    std::vector<double> mask;
    Eigen::Index batch = 0;
    Eigen::Index length = 0;
  };

  Memory encode_batch(ag::Tape& t, const std::vector<std::vector<int>>& sources, std::mt19937_64* rng) {
    Memory m;
    m.batch = static_cast<Eigen::Index>(sources.size());
    m.length = detail::max_len(sources);
    ag::Var x = embed(t, src_emb_, sources, m.length, m.mask, rng);
    ag::AttentionShape shape{m.batch, m.length, m.length, config_.heads, false};
    for (auto& blk : encoder_) {
      ag::Var h = blk.norm_attn(t, x);
      x = ag::add(x, ag::dropout(blk.attn(t, h, h, shape, m.mask), config_.dropout, rng));
      h = blk.norm_ff(t, x);
      x = ag::add(x, ag::dropout(blk.ff(t, h, config_.dropout, rng), config_.dropout, rng));
    }
    m.states = enc_norm_(t, x);
    return m;
  }

  // Decoder outputs v_t for every prefix position: (B*T) x D. Position t only
  // sees targets <= t through the causal mask.
  ag::Var decode_states(ag::Tape& t, const Memory& mem, const std::vector<std::vector<int>>& target_in,
                        std::mt19937_64* rng) {
    const auto T = detail::max_len(target_in);
    std::vector<double> tmask;
    ag::Var x = embed(t, tgt_emb_, target_in, T, tmask, rng);
    ag::AttentionShape self{mem.batch, T, T, config_.heads, true};
    ag::AttentionShape cross{mem.batch, T, mem.length, config_.heads, false};
    for (auto& blk : decoder_) {
      ag::Var h = blk.norm_self(t, x);
      x = ag::add(x, ag::dropout(blk.self_attn(t, h, h, self, tmask), config_.dropout, rng));
      h = blk.norm_cross(t, x);
      x = ag::add(x, ag::dropout(blk.cross_attn(t, h, mem.states, cross, mem.mask), config_.dropout, rng));
      h = blk.norm_ff(t, x);
      x = ag::add(x, ag::dropout(blk.ff(t, h, config_.dropout, rng), config_.dropout, rng));
    }
    return dec_norm_(t, x);
  }

  ag::Var logits(ag::Tape& t, const SeqBatch& batch, std::mt19937_64* rng) override {
    Memory mem = encode_batch(t, batch.sources, rng);
    return generator_(t, ag::dropout(decode_states(t, mem, batch.target_in, rng), config_.dropout, rng));
  }

  // Distribution over the next token after `prefix` (which starts with BOS).
  ag::RowVector next_distribution(const Tokens& source, const std::vector<int>& prefix) {
    ag::Tape t;
    Memory mem = encode_batch(t, {encode_source(vocab_, source)}, nullptr);
    ag::Var lg = generator_(t, decode_states(t, mem, {prefix}, nullptr));
    const ag::Matrix p = ag::softmax_rows_value(lg.value());
    return p.row(p.rows() - 1);
  }

  // Full-sequence distributions, one row per prefix position.
  ag::Matrix prefix_distributions(const Tokens& source, const std::vector<int>& target_in) {
    ag::Tape t;
    Memory mem = encode_batch(t, {encode_source(vocab_, source)}, nullptr);
    ag::Var lg = generator_(t, decode_states(t, mem, {target_in}, nullptr));
    return ag::softmax_rows_value(lg.value());
  }

  ag::Var encode(ag::Tape& t, const Tokens& source) override {
    return encode_batch(t, {encode_source(vocab_, source)}, nullptr).states;
  }

  // Greedy decoding with per-layer key/value caches: each step runs the
  // decoder for the newest position only. Earlier positions are unaffected
  // by later ones under the causal mask, so this equals re-running the
  // decoder over the whole prefix.
  std::vector<DecodeResult> greedy_decode_batch(const std::vector<const Tokens*>& sources,
                                                bool keep_distributions = false) override {
    std::vector<std::vector<int>> src;
    for (const auto* s : sources) src.push_back(encode_source(vocab_, *s));
    const auto B = static_cast<Eigen::Index>(src.size());
    const auto D = static_cast<Eigen::Index>(config_.model_dim);
    const std::size_t n_blocks = decoder_.size();

    ag::Tape enc_tape;
    Memory mem = encode_batch(enc_tape, src, nullptr);
    std::vector<ag::Matrix> cross_k, cross_v;
    for (auto& blk : decoder_) {
      cross_k.push_back(blk.cross_attn.key(enc_tape, mem.states).value());
      cross_v.push_back(blk.cross_attn.value(enc_tape, mem.states).value());
    }
    // self_k[l][b] holds the projected keys of sequence b, one row per position.
    std::vector<std::vector<ag::Matrix>> self_k(n_blocks, std::vector<ag::Matrix>(static_cast<std::size_t>(B))),
        self_v = self_k;
    const ag::Matrix pe = sinusoidal_positions(config_.max_decode_length, D);

    std::vector<int> prev(static_cast<std::size_t>(B), Vocabulary::kBos);
    std::vector<std::vector<int>> out(static_cast<std::size_t>(B));
    std::vector<std::vector<ag::RowVector>> dists(static_cast<std::size_t>(B));
    std::vector<bool> done(static_cast<std::size_t>(B), false), eos(static_cast<std::size_t>(B), false);
    for (int step = 0; step < config_.max_decode_length; ++step) {
      const Eigen::Index len = step + 1;
      ag::Tape t;
      ag::Matrix pos(B, D);
      for (Eigen::Index b = 0; b < B; ++b) pos.row(b) = pe.row(step);
      ag::Var x = ag::add(ag::scale(ag::embedding(t, tgt_emb_, prev), std::sqrt(static_cast<double>(D))),
                          t.constant(std::move(pos)));
      for (std::size_t l = 0; l < n_blocks; ++l) {
        auto& blk = decoder_[l];
        ag::Var h = blk.norm_self(t, x);
        const ag::Matrix k_new = blk.self_attn.key(t, h).value();
        const ag::Matrix v_new = blk.self_attn.value(t, h).value();
        ag::Matrix k_all(B * len, D), v_all(B * len, D);
        for (Eigen::Index b = 0; b < B; ++b) {
          auto& kc = self_k[l][static_cast<std::size_t>(b)];
          auto& vc = self_v[l][static_cast<std::size_t>(b)];
          kc.conservativeResize(len, D);
          vc.conservativeResize(len, D);
          kc.row(len - 1) = k_new.row(b);
          vc.row(len - 1) = v_new.row(b);
          k_all.middleRows(b * len, len) = kc;
          v_all.middleRows(b * len, len) = vc;
        }
        ag::Var ctx = ag::multi_head_attention(blk.self_attn.query(t, h), t.constant(std::move(k_all)),
                                               t.constant(std::move(v_all)), {B, 1, len, config_.heads, false},
                                               std::vector<double>(static_cast<std::size_t>(B * len), 1.0));
        x = ag::add(x, blk.self_attn.output(t, ctx));
        h = blk.norm_cross(t, x);
        ctx = ag::multi_head_attention(blk.cross_attn.query(t, h), t.constant(cross_k[l]), t.constant(cross_v[l]),
                                       {B, 1, mem.length, config_.heads, false}, mem.mask);
        x = ag::add(x, blk.cross_attn.output(t, ctx));
        h = blk.norm_ff(t, x);
        x = ag::add(x, blk.ff(t, h, 0.0, nullptr));
      }
      const ag::Matrix probs = ag::softmax_rows_value(generator_(t, dec_norm_(t, x)).value());
      bool all_done = true;
      for (Eigen::Index b = 0; b < B; ++b) {
        const auto i = static_cast<std::size_t>(b);
        if (done[i]) continue;
        if (keep_distributions) dists[i].push_back(probs.row(b));
        const int next = detail::argmax(probs, b);
        prev[i] = next;
        if (next == Vocabulary::kEos) {
          done[i] = eos[i] = true;
          continue;
        }
        out[i].push_back(next);
        all_done = false;
      }
      if (all_done) break;
    }
    std::vector<DecodeResult> res;
    for (std::size_t i = 0; i < out.size(); ++i) res.push_back(finish(out[i], eos[i], std::move(dists[i])));
    return res;
  }

 private:
  // Scaled token embeddings plus sinusoidal positions, packed (B*L) x D.
  ag::Var embed(ag::Tape& t, ag::Parameter& table, const std::vector<std::vector<int>>& seqs, Eigen::Index L,
                std::vector<double>& mask, std::mt19937_64* rng) {
    const auto B = static_cast<Eigen::Index>(seqs.size());
    const auto D = static_cast<Eigen::Index>(config_.model_dim);
    std::vector<int> ids;
    mask.assign(static_cast<std::size_t>(B * L), 0.0);
    for (Eigen::Index b = 0; b < B; ++b)
      for (Eigen::Index s = 0; s < L; ++s) {
        const auto& seq = seqs[static_cast<std::size_t>(b)];
        const bool real = s < static_cast<Eigen::Index>(seq.size());
        ids.push_back(real ? seq[static_cast<std::size_t>(s)] : Vocabulary::kPad);
        if (real) mask[static_cast<std::size_t>(b * L + s)] = 1.0;
      }
    const ag::Matrix pe = sinusoidal_positions(L, D);
    ag::Matrix pos(B * L, D);
    for (Eigen::Index b = 0; b < B; ++b) pos.middleRows(b * L, L) = pe;
    ag::Var x = ag::add(ag::scale(ag::embedding(t, table, ids), std::sqrt(static_cast<double>(D))),
                        t.constant(std::move(pos)));
    return ag::dropout(x, config_.dropout, rng);
  }

  ag::Parameter src_emb_, tgt_emb_;
  std::vector<EncoderBlock> encoder_;
  std::vector<DecoderBlock> decoder_;
  nn::LayerNorm enc_norm_, dec_norm_;
  nn::Linear generator_;
};

inline std::unique_ptr<Realizer> make_realizer(const RealizerConfig& config, Vocabulary vocab) {
  if (config.variant == RealizerVariant::kVanilla)
    return std::make_unique<VanillaRealizer>(config, std::move(vocab));
  return std::make_unique<TransformerRealizer>(config, std::move(vocab));
}

}  // namespace pivotgen
