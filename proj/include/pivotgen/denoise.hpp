#pragma once

// Drop/insert noise on realizer sources, simulating missed and spurious
// key facts from the first stage.

#include <cstdint>
#include <random>
#include <vector>

#include "pivotgen/corpus.hpp"

namespace pivotgen {

struct NoiseConfig {
  double p_drop = 0.1;
  double p_insert = 0.1;
  std::uint64_t seed = 1;
  // Which training sources get noise.
  bool on_parallel = true;
  bool on_pseudo = true;

  void validate(bool have_donors = true) const {
    if (!(p_drop >= 0.0 && p_drop <= 1.0)) throw Error("noise.p_drop must be in [0,1]");
    if (!(p_insert >= 0.0 && p_insert <= 1.0)) throw Error("noise.p_insert must be in [0,1]");
    if (p_insert > 0.0 && !have_donors) throw Error("noise.p_insert > 0 needs a non-empty donor pool");
  }
  bool active() const { return p_drop > 0.0 || p_insert > 0.0; }
};

template <typename Rng>
Tokens drop_noise(const Tokens& seq, double p_drop, Rng& rng) {
  if (seq.empty()) throw Error("drop_noise: empty sequence");
  if (p_drop <= 0.0) return seq;
  std::bernoulli_distribution drop(p_drop);
  Tokens out;
  for (const auto& w : seq)
    if (!drop(rng)) out.push_back(w);
  if (out.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, seq.size() - 1);
    out.push_back(seq[pick(rng)]);
  }
  return out;
}

template <typename Rng>
Tokens insert_noise(const Tokens& seq, double p_insert, const std::vector<Tokens>& donors, Rng& rng) {
  if (p_insert <= 0.0) return seq;
  if (donors.empty()) throw Error("insert_noise: empty donor pool");
  std::bernoulli_distribution insert(p_insert);
  std::uniform_int_distribution<std::size_t> pick_donor(0, donors.size() - 1);
  Tokens out;
  out.reserve(seq.size() + 2);
  for (std::size_t gap = 0; gap <= seq.size(); ++gap) {
    if (insert(rng)) {
      const Tokens& d = donors[pick_donor(rng)];
      if (!d.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, d.size() - 1);
        out.push_back(d[pick(rng)]);
      }
    }
    if (gap < seq.size()) out.push_back(seq[gap]);
  }
  return out;
}

// A stage-2 training pair (key facts or pseudo source -> text).
struct TrainPair {
  Tokens source;
  Tokens target;

  bool operator==(const TrainPair&) const = default;
};

template <typename Rng>
std::vector<TrainPair> augment_batch(std::vector<TrainPair> batch, const NoiseConfig& config,
                                     const std::vector<Tokens>& donors, Rng& rng) {
  if (!config.active()) return batch;
  for (auto& p : batch) {
    if (p.source.empty()) continue;
    p.source = drop_noise(p.source, config.p_drop, rng);
    p.source = insert_noise(p.source, config.p_insert, donors, rng);
  }
  return batch;
}

}  // namespace pivotgen
