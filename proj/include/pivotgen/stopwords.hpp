#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <string>
#include <unordered_set>

#include "pivotgen/error.hpp"

namespace pivotgen {

// Stop words plus a punctuation predicate. The built-in list mirrors
// data/stopwords_en.txt (version 1).
class StopWordList {
 public:
  static constexpr int kBuiltinVersion = 1;

  static StopWordList builtin() {
    static const char* const kWords[] = {
      "a", "about", "above", "after", "again", "against", "all", "am", "an",
      "and", "any", "are", "as", "at", "be", "because", "been", "before",
      "being", "below", "between", "both", "but", "by", "can", "could", "did",
      "do", "does", "doing", "down", "during", "each", "few", "for", "from",
      "further", "had", "has", "have", "having", "he", "her", "here", "hers",
      "herself", "him", "himself", "his", "how", "i", "if", "in", "into", "is",
      "it", "its", "itself", "just", "me", "more", "most", "my", "myself", "no",
      "nor", "not", "now", "of", "off", "on", "once", "only", "or", "other",
      "our", "ours", "ourselves", "out", "over", "own", "same", "she", "should",
      "so", "some", "such", "than", "that", "the", "their", "theirs", "them",
      "themselves", "then", "there", "these", "they", "this", "those", "through",
      "to", "too", "under", "until", "up", "very", "was", "we", "were", "what",
      "when", "where", "which", "while", "who", "whom", "why", "will", "with",
      "would", "you", "your", "yours", "yourself", "yourselves", "also", "may",
      "might", "must", "shall", "upon", "per", "via", "among", "within",
      "without", "'s", "-lrb-", "-rrb-",
    };
    StopWordList s;
    for (const char* w : kWords) s.words_.insert(w);
    return s;
  }

  // One token per line; '#' starts a comment line.
  static StopWordList load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open stop-word list '" + path + "'");
    StopWordList s;
    std::string line;
    while (std::getline(is, line)) {
      while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      s.words_.insert(line);
    }
    return s;
  }

  static bool is_punctuation(const std::string& tok) {
    return !tok.empty() && std::none_of(tok.begin(), tok.end(), [](unsigned char c) {
      return std::isalnum(c) || c >= 0x80;
    });
  }

  static bool is_numeric(const std::string& tok) {
    return std::any_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); }) &&
           std::all_of(tok.begin(), tok.end(), [](unsigned char c) {
             return std::isdigit(c) || c == '.' || c == ',' || c == '-' || c == '/';
           });
  }

  bool is_stop(const std::string& tok) const {
    if (is_numeric(tok)) return false;
    return words_.count(tok) > 0;
  }

  // True when the token may count as a table/text overlap.
  bool is_content(const std::string& tok) const { return !is_stop(tok) && !is_punctuation(tok); }

  const std::unordered_set<std::string>& words() const { return words_; }
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

}  // namespace pivotgen
