#pragma once

// Pseudo-parallel pairs built from unlabeled text: the source keeps only
// words whose POS tag is in the content tag set, the target is the text.

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "pivotgen/corpus.hpp"
#include "pivotgen/pos.hpp"

namespace pivotgen {

struct ContentTagSet {
  std::set<std::string> tags{"NN", "NNS", "NNP", "NNPS", "JJ", "JJR", "JJS", "CD", "FW"};

  bool contains(const std::string& tag) const { return tags.count(tag) > 0; }
};

struct PseudoPair {
  Tokens source;
  Tokens target;

  bool operator==(const PseudoPair&) const = default;
};

inline Tokens filter_content(const PosTaggedText& tagged, const ContentTagSet& tags = {}) {
  if (tagged.tokens.size() != tagged.tags.size()) throw Error("filter_content: tokens and tags misaligned");
  Tokens out;
  for (std::size_t i = 0; i < tagged.tokens.size(); ++i)
    if (tags.contains(tagged.tags[i])) out.push_back(tagged.tokens[i]);
  return out;
}

struct PseudoOptions {
  ContentTagSet tags;
  std::size_t max_target_length = 60;
};

struct PseudoStats {
  std::size_t input = 0;
  std::size_t kept = 0;
  std::size_t dropped_empty_source = 0;
  std::size_t dropped_too_long = 0;
};

inline std::vector<PseudoPair> build_pseudo_corpus(const std::vector<UnlabeledSample>& unlabeled,
                                                   const PosBackend& backend,
                                                   const PseudoOptions& options = {},
                                                   PseudoStats* stats = nullptr) {
  PseudoStats st;
  std::vector<PseudoPair> out;
  out.reserve(unlabeled.size());
  for (const auto& s : unlabeled) {
    ++st.input;
    if (s.text.size() > options.max_target_length) {
      ++st.dropped_too_long;
      continue;
    }
    Tokens source = filter_content(pos_tag(s.text, backend, s.id), options.tags);
    if (source.empty()) {
      ++st.dropped_empty_source;
      continue;
    }
    out.push_back({std::move(source), s.text});
    ++st.kept;
  }
  if (stats) *stats = st;
  return out;
}

inline bool is_subsequence(const Tokens& sub, const Tokens& seq) {
  std::size_t j = 0;
  for (const auto& w : seq)
    if (j < sub.size() && sub[j] == w) ++j;
  return j == sub.size();
}

inline void save_pseudo(const std::string& path, const std::vector<PseudoPair>& pairs) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  for (const auto& p : pairs) {
    nlohmann::ordered_json j;
    j["source"] = p.source;
    j["target"] = p.target;
    os << j.dump() << '\n';
  }
}

inline std::vector<PseudoPair> load_pseudo(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path + "'");
  std::vector<PseudoPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      PseudoPair p{j.at("source").get<Tokens>(), j.at("target").get<Tokens>()};
      if (p.source.empty() || p.target.empty()) throw ParseError(path, lineno, "empty source or target");
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path, lineno, e.what());
    }
  }
  return out;
}

}  // namespace pivotgen
