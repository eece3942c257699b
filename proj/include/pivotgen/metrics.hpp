#pragma once

// Corpus-level BLEU-4, NIST-4 and ROUGE-4 (F1). Single reference per segment.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "pivotgen/corpus.hpp"

namespace pivotgen::metrics {

constexpr int kMaxOrder = 4;

using NgramCounts = std::unordered_map<std::string, int>;

namespace detail {

inline std::string ngram_key(const Tokens& toks, std::size_t start, int n) {
  std::string key;
  for (int k = 0; k < n; ++k) {
    if (k) key += '\x1f';
    key += toks[start + k];
  }
  return key;
}

inline NgramCounts count_ngrams(const Tokens& toks, int n) {
  NgramCounts out;
  if (toks.size() < static_cast<std::size_t>(n)) return out;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) ++out[ngram_key(toks, i, n)];
  return out;
}

inline int clipped_matches(const NgramCounts& hyp, const NgramCounts& ref) {
  int m = 0;
  for (const auto& [g, c] : hyp) {
    auto it = ref.find(g);
    if (it != ref.end()) m += std::min(c, it->second);
  }
  return m;
}

inline void check_sizes(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs) {
  if (hyps.size() != refs.size())
    throw Error("segment count mismatch: " + std::to_string(hyps.size()) + " hypotheses vs " +
                std::to_string(refs.size()) + " references");
}

}  // namespace detail

struct BleuOptions {
  // Add-one smoothing of the n>1 precisions; off reproduces plain BLEU.
  bool smooth = false;
};

inline double bleu4(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs,
                    BleuOptions opts = {}) {
  detail::check_sizes(hyps, refs);
  std::array<double, kMaxOrder> match{}, total{};
  double hyp_len = 0, ref_len = 0;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    hyp_len += static_cast<double>(hyps[s].size());
    ref_len += static_cast<double>(refs[s].size());
    for (int n = 1; n <= kMaxOrder; ++n) {
      const auto h = detail::count_ngrams(hyps[s], n);
      const auto r = detail::count_ngrams(refs[s], n);
      match[n - 1] += detail::clipped_matches(h, r);
      const auto len = static_cast<double>(hyps[s].size());
      total[n - 1] += std::max(0.0, len - n + 1);
    }
  }
  if (hyp_len == 0) return 0.0;
  double log_p = 0.0;
  for (int n = 0; n < kMaxOrder; ++n) {
    double m = match[n], t = total[n];
    if (opts.smooth && n > 0) {
      m += 1.0;
      t += 1.0;
    }
    if (m == 0 || t == 0) return 0.0;
    log_p += std::log(m / t);
  }
  const double bp = std::exp(std::min(0.0, 1.0 - ref_len / hyp_len));
  return bp * std::exp(log_p / kMaxOrder);
}

inline double nist4(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs) {
  detail::check_sizes(hyps, refs);
  if (hyps.empty()) return 0.0;

  // Information weights come from n-gram counts over the reference corpus.
  std::array<NgramCounts, kMaxOrder> ref_counts;
  double ref_words = 0;
  for (const auto& r : refs) {
    ref_words += static_cast<double>(r.size());
    for (int n = 1; n <= kMaxOrder; ++n)
      for (const auto& [g, c] : detail::count_ngrams(r, n)) ref_counts[n - 1][g] += c;
  }
  auto info = [&](const std::string& gram, int n) {
    const double count = ref_counts[n - 1].at(gram);
    double prefix = ref_words;
    if (n > 1) prefix = ref_counts[n - 2].at(gram.substr(0, gram.rfind('\x1f')));
    return std::log2(prefix / count);
  };

  double score = 0.0, hyp_words = 0;
  for (const auto& h : hyps) hyp_words += static_cast<double>(h.size());
  for (int n = 1; n <= kMaxOrder; ++n) {
    double num = 0.0, den = 0.0;
    for (std::size_t s = 0; s < hyps.size(); ++s) {
      const auto h = detail::count_ngrams(hyps[s], n);
      const auto r = detail::count_ngrams(refs[s], n);
      for (const auto& [g, c] : h) {
        den += c;
        auto it = r.find(g);
        if (it != r.end()) num += std::min(c, it->second) * info(g, n);
      }
    }
    if (den > 0) score += num / den;
  }
  if (ref_words == 0 || hyp_words == 0) return 0.0;
  // Brevity factor is 0.5 when the hypothesis is 2/3 of the reference length.
  const double beta = std::log(0.5) / std::pow(std::log(1.5), 2);
  const double ratio = std::min(1.0, hyp_words / ref_words);
  return score * std::exp(beta * std::pow(std::log(ratio), 2));
}

// Per-segment 4-gram F1, macro-averaged. Segments where neither side has a
// 4-gram are skipped; a segment where only one side has 4-grams scores 0.
inline double rouge4_f(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs) {
  detail::check_sizes(hyps, refs);
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    const auto h = detail::count_ngrams(hyps[s], 4);
    const auto r = detail::count_ngrams(refs[s], 4);
    if (h.empty() && r.empty()) continue;
    ++counted;
    if (h.empty() || r.empty()) continue;
    const double overlap = detail::clipped_matches(h, r);
    if (overlap == 0) continue;
    const double hyp_total = static_cast<double>(hyps[s].size() - 3);
    const double ref_total = static_cast<double>(refs[s].size() - 3);
    const double p = overlap / hyp_total, rec = overlap / ref_total;
    sum += 2 * p * rec / (p + rec);
  }
  return counted ? sum / static_cast<double>(counted) : 0.0;
}

struct MetricReport {
  double bleu4 = 0.0;
  double nist4 = 0.0;
  double rouge4_f = 0.0;
  std::size_t segments = 0;
};

inline MetricReport evaluate(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs,
                             BleuOptions opts = {}) {
  return {bleu4(hyps, refs, opts), nist4(hyps, refs), rouge4_f(hyps, refs), hyps.size()};
}

}  // namespace pivotgen::metrics
