#pragma once

// Automatic key-fact labeling from table/text co-occurrence.

#include <cstdint>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "pivotgen/corpus.hpp"
#include "pivotgen/stopwords.hpp"

namespace pivotgen {

using KeyFactLabels = std::vector<std::uint8_t>;

enum class AnnotationMode {
  kTwoPass,  // attribute selection is order-independent
  kOnePass,  // literal single sweep: a token is labeled only if its attribute
             // was already selected when the sweep reached it
};

// An attribute is selected when one of its value tokens is a content word
// (not a stop word, not punctuation) that also appears in the text. Every
// token of a selected attribute is labeled 1.
inline KeyFactLabels annotate(const LinearizedTable& table, const Tokens& text,
                              const StopWordList& stops,
                              AnnotationMode mode = AnnotationMode::kTwoPass) {
  const std::unordered_set<std::string> text_set(text.begin(), text.end());
  auto overlaps = [&](const std::string& w) { return text_set.count(w) && stops.is_content(w); };

  KeyFactLabels labels(table.size(), 0);
  std::unordered_set<std::string> selected;
  if (mode == AnnotationMode::kTwoPass) {
    for (const auto& t : table.tokens)
      if (overlaps(t.word)) selected.insert(t.attribute);
    for (std::size_t i = 0; i < table.size(); ++i)
      labels[i] = selected.count(table.tokens[i].attribute) ? 1 : 0;
  } else {
    for (std::size_t i = 0; i < table.size(); ++i) {
      const auto& t = table.tokens[i];
      if (overlaps(t.word)) selected.insert(t.attribute);
      labels[i] = selected.count(t.attribute) ? 1 : 0;
    }
  }
  return labels;
}

// Words with label 1, in table order.
inline Tokens extract(const LinearizedTable& table, const KeyFactLabels& labels) {
  if (labels.size() != table.size())
    throw Error("label sequence length " + std::to_string(labels.size()) +
                " does not match table length " + std::to_string(table.size()));
  Tokens out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i]) out.push_back(table.tokens[i].word);
  return out;
}

// Key facts reordered by first occurrence in the text; facts absent from the
// text keep their table order after the matched ones.
inline Tokens extract_text_order(const LinearizedTable& table, const KeyFactLabels& labels,
                                 const Tokens& text) {
  const Tokens facts = extract(table, labels);
  std::vector<std::pair<std::size_t, std::size_t>> keyed;  // (text position, table rank)
  for (std::size_t i = 0; i < facts.size(); ++i) {
    std::size_t pos = text.size();
    for (std::size_t j = 0; j < text.size(); ++j)
      if (text[j] == facts[i]) {
        pos = j;
        break;
      }
    keyed.emplace_back(pos, i);
  }
  std::stable_sort(keyed.begin(), keyed.end());
  Tokens out;
  for (const auto& [pos, i] : keyed) out.push_back(facts[i]);
  return out;
}

struct AnnotatedSample {
  LinearizedTable table;
  Tokens text;
  KeyFactLabels labels;
};

struct CoverageStats {
  std::size_t samples = 0;
  double mean_selected_tokens = 0.0;
  double mean_selected_attributes = 0.0;
  double zero_fact_fraction = 0.0;
  // Overlap counted per table token (each matching content token counts).
  double mean_overlap_tokens = 0.0;
  // Text tokens that also appear in the table.
  double mean_text_tokens_in_table = 0.0;
};

inline CoverageStats coverage_stats(const std::vector<AnnotatedSample>& data,
                                    const StopWordList& stops) {
  CoverageStats s;
  s.samples = data.size();
  if (data.empty()) return s;
  double tok = 0, attr = 0, zero = 0, overlap = 0, in_table = 0;
  for (const auto& d : data) {
    if (d.labels.size() != d.table.size()) throw Error("labels not aligned with table");
    std::set<std::string> attrs;
    std::size_t n = 0;
    for (std::size_t i = 0; i < d.labels.size(); ++i)
      if (d.labels[i]) {
        ++n;
        attrs.insert(d.table.tokens[i].attribute);
      }
    tok += static_cast<double>(n);
    attr += static_cast<double>(attrs.size());
    zero += n == 0 ? 1.0 : 0.0;
    const std::unordered_set<std::string> text_set(d.text.begin(), d.text.end());
    std::unordered_set<std::string> table_set;
    for (const auto& t : d.table.tokens) {
      table_set.insert(t.word);
      if (text_set.count(t.word) && stops.is_content(t.word)) overlap += 1.0;
    }
    for (const auto& w : d.text) in_table += table_set.count(w) ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(data.size());
  s.mean_selected_tokens = tok / n;
  s.mean_selected_attributes = attr / n;
  s.zero_fact_fraction = zero / n;
  s.mean_overlap_tokens = overlap / n;
  s.mean_text_tokens_in_table = in_table / n;
  return s;
}

}  // namespace pivotgen
