#pragma once

// Part-of-speech backends. A backend maps a token sequence to one
// Penn-Treebank-style tag per token.

#include <cctype>
#include <fstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pivotgen/corpus.hpp"
#include "pivotgen/stopwords.hpp"

namespace pivotgen {

using Tags = std::vector<std::string>;

class PosBackend {
 public:
  virtual ~PosBackend() = default;
  // Must be safe to call concurrently.
  virtual Tags tag(const Tokens& tokens) const = 0;
};

// Deterministic lexicon lookup with suffix rules for unknown words. The
// built-in lexicon mirrors data/pos_lexicon.tsv (version 1).
class LexiconTagger : public PosBackend {
 public:
  static constexpr int kBuiltinVersion = 1;

  static LexiconTagger builtin() {
    static const std::pair<const char*, const char*> kEntries[] = {
      {"a", "DT"}, {"an", "DT"}, {"the", "DT"}, {"this", "DT"}, {"that", "DT"}, {"these", "DT"},
      {"those", "DT"}, {"each", "DT"}, {"every", "DT"}, {"some", "DT"}, {"any", "DT"}, {"no", "DT"},
      {"all", "DT"}, {"both", "DT"}, {"another", "DT"}, {"either", "DT"}, {"neither", "DT"},
      {"in", "IN"}, {"on", "IN"}, {"at", "IN"}, {"of", "IN"}, {"for", "IN"}, {"from", "IN"},
      {"by", "IN"}, {"with", "IN"}, {"without", "IN"}, {"about", "IN"}, {"against", "IN"},
      {"between", "IN"}, {"into", "IN"}, {"through", "IN"}, {"during", "IN"}, {"before", "IN"},
      {"after", "IN"}, {"above", "IN"}, {"below", "IN"}, {"under", "IN"}, {"over", "IN"},
      {"since", "IN"}, {"until", "IN"}, {"while", "IN"}, {"as", "IN"}, {"like", "IN"},
      {"among", "IN"}, {"within", "IN"}, {"upon", "IN"}, {"than", "IN"}, {"because", "IN"},
      {"although", "IN"}, {"whether", "IN"}, {"if", "IN"}, {"near", "IN"}, {"across", "IN"},
      {"toward", "IN"}, {"towards", "IN"}, {"via", "IN"}, {"to", "TO"}, {"and", "CC"}, {"or", "CC"},
      {"but", "CC"}, {"nor", "CC"}, {"yet", "CC"}, {"i", "PRP"}, {"you", "PRP"}, {"he", "PRP"},
      {"she", "PRP"}, {"it", "PRP"}, {"we", "PRP"}, {"they", "PRP"}, {"me", "PRP"}, {"him", "PRP"},
      {"her", "PRP$"}, {"us", "PRP"}, {"them", "PRP"}, {"his", "PRP$"}, {"its", "PRP$"},
      {"our", "PRP$"}, {"their", "PRP$"}, {"my", "PRP$"}, {"your", "PRP$"}, {"himself", "PRP"},
      {"herself", "PRP"}, {"itself", "PRP"}, {"themselves", "PRP"}, {"who", "WP"}, {"whom", "WP"},
      {"whose", "WP$"}, {"what", "WP"}, {"which", "WDT"}, {"where", "WRB"}, {"when", "WRB"},
      {"why", "WRB"}, {"how", "WRB"}, {"is", "VBZ"}, {"are", "VBP"}, {"am", "VBP"}, {"was", "VBD"},
      {"were", "VBD"}, {"be", "VB"}, {"been", "VBN"}, {"being", "VBG"}, {"has", "VBZ"},
      {"have", "VBP"}, {"had", "VBD"}, {"having", "VBG"}, {"do", "VBP"}, {"does", "VBZ"},
      {"did", "VBD"}, {"done", "VBN"}, {"will", "MD"}, {"would", "MD"}, {"can", "MD"},
      {"could", "MD"}, {"may", "MD"}, {"might", "MD"}, {"must", "MD"}, {"shall", "MD"},
      {"should", "MD"}, {"not", "RB"}, {"also", "RB"}, {"then", "RB"}, {"now", "RB"},
      {"very", "RB"}, {"too", "RB"}, {"only", "RB"}, {"just", "RB"}, {"still", "RB"},
      {"again", "RB"}, {"later", "RB"}, {"often", "RB"}, {"best", "RBS"}, {"currently", "RB"},
      {"there", "EX"}, {"born", "VBN"}, {"known", "VBN"}, {"married", "VBN"}, {"played", "VBD"},
      {"plays", "VBZ"}, {"served", "VBD"}, {"serves", "VBZ"}, {"works", "VBZ"}, {"worked", "VBD"},
      {"died", "VBD"}, {"became", "VBD"}, {"becomes", "VBZ"}, {"won", "VBD"}, {"wrote", "VBD"},
      {"writes", "VBZ"}, {"runs", "VBZ"}, {"ran", "VBD"}, {"run", "VB"}, {"lives", "VBZ"},
      {"lived", "VBD"}, {"made", "VBD"}, {"makes", "VBZ"}, {"began", "VBD"}, {"started", "VBD"},
      {"joined", "VBD"}, {"retired", "VBD"}, {"represented", "VBD"}, {"represents", "VBZ"},
      {"appeared", "VBD"}, {"moved", "VBD"}, {"raised", "VBN"}, {"educated", "VBN"},
      {"elected", "VBN"}, {"awarded", "VBN"}, {"best-known", "JJ"}, {"former", "JJ"},
      {"professional", "JJ"}, {"famous", "JJ"}, {"notable", "JJ"}, {"january", "NNP"},
      {"february", "NNP"}, {"march", "NNP"}, {"april", "NNP"}, {"june", "NNP"}, {"july", "NNP"},
      {"august", "NNP"}, {"september", "NNP"}, {"october", "NNP"}, {"november", "NNP"},
      {"december", "NNP"}, {"john", "NNP"}, {"mary", "NNP"}, {"james", "NNP"}, {"robert", "NNP"},
      {"michael", "NNP"}, {"william", "NNP"}, {"david", "NNP"}, {"richard", "NNP"},
      {"joseph", "NNP"}, {"thomas", "NNP"}, {"charles", "NNP"}, {"daniel", "NNP"}, {"paul", "NNP"},
      {"mark", "NNP"}, {"george", "NNP"}, {"peter", "NNP"}, {"anna", "NNP"}, {"maria", "NNP"},
      {"elizabeth", "NNP"}, {"susan", "NNP"}, {"sarah", "NNP"}, {"karen", "NNP"}, {"denise", "NNP"},
      {"margaret", "NNP"}, {"scott", "NNP"}, {"lane", "NNP"}, {"-lrb-", "-LRB-"},
      {"-rrb-", "-RRB-"}, {"(", "-LRB-"}, {")", "-RRB-"}, {",", ","}, {".", "."}, {":", ":"},
      {";", ":"}, {"''", "''"}, {"``", "``"}, {"'s", "POS"},
    };
    LexiconTagger t;
    for (const auto& [w, tag] : kEntries) t.lexicon_.emplace(w, tag);
    return t;
  }

  // word<TAB>tag per line; '#' starts a comment line. Duplicate words are an error.
  static LexiconTagger load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open POS lexicon '" + path + "'");
    LexiconTagger t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos || tab == 0 || tab + 1 == line.size())
        throw ParseError(path, lineno, "expected word<TAB>tag");
      if (!t.lexicon_.emplace(line.substr(0, tab), line.substr(tab + 1)).second)
        throw ParseError(path, lineno, "duplicate entry '" + line.substr(0, tab) + "'");
    }
    return t;
  }

  Tags tag(const Tokens& tokens) const override {
    Tags out;
    out.reserve(tokens.size());
    for (const auto& w : tokens) out.push_back(tag_word(w));
    return out;
  }

  std::string tag_word(const std::string& w) const {
    if (auto it = lexicon_.find(w); it != lexicon_.end()) return it->second;
    if (StopWordList::is_numeric(w)) return "CD";
    if (StopWordList::is_punctuation(w)) return "SYM";
    auto ends = [&](std::string_view suf) {
      return w.size() > suf.size() + 1 && w.compare(w.size() - suf.size(), suf.size(), suf) == 0;
    };
    if (ends("ly")) return "RB";
    if (ends("ing")) return "VBG";
    if (ends("ed")) return "VBD";
    for (std::string_view s : {"ous", "ful", "ive", "able", "ible", "ic", "ian", "ese", "ish", "less", "al"})
      if (ends(s)) return "JJ";
    for (std::string_view s : {"ness", "ment", "tion", "sion", "ity", "ship", "ist", "er", "or"})
      if (ends(s)) return "NN";
    if (ends("s") && !ends("ss") && !ends("us")) return "NNS";
    return "NN";
  }

  const std::unordered_map<std::string, std::string>& lexicon() const { return lexicon_; }

 private:
  std::unordered_map<std::string, std::string> lexicon_;
};

// Serves tags produced by an external tagger. tags.tsv holds token<TAB>tag
// lines with a blank line between sentences; sentences are matched by their
// token sequence.
class PreTaggedBackend : public PosBackend {
 public:
  static PreTaggedBackend load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open tagged file '" + path + "'");
    PreTaggedBackend b;
    Tokens toks;
    Tags tags;
    std::string line;
    std::size_t lineno = 0;
    auto flush = [&] {
      if (!toks.empty()) b.sentences_[join(toks, "\x1f")] = tags;
      toks.clear();
      tags.clear();
    };
    while (std::getline(is, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) {
        flush();
        continue;
      }
      const auto tab = line.find('\t');
      if (tab == std::string::npos || tab == 0 || tab + 1 == line.size())
        throw ParseError(path, lineno, "expected token<TAB>tag");
      toks.push_back(to_lower(line.substr(0, tab)));
      tags.push_back(line.substr(tab + 1));
    }
    flush();
    return b;
  }

  void add(const Tokens& tokens, Tags tags) {
    if (tokens.size() != tags.size()) throw Error("pre-tagged sentence has misaligned tags");
    sentences_[join(tokens, "\x1f")] = std::move(tags);
  }

  Tags tag(const Tokens& tokens) const override {
    auto it = sentences_.find(join(tokens, "\x1f"));
    if (it == sentences_.end()) throw Error("sentence not found in pre-tagged file: " + join(tokens));
    return it->second;
  }

  std::size_t size() const { return sentences_.size(); }

 private:
  std::unordered_map<std::string, Tags> sentences_;
};

struct PosTaggedText {
  Tokens tokens;
  Tags tags;
};

// Tags one text. Backend failures are rethrown with the sample id attached.
inline PosTaggedText pos_tag(const Tokens& text, const PosBackend& backend, const std::string& id = "") {
  if (text.empty()) throw Error("pos_tag: empty text" + (id.empty() ? "" : " (sample " + id + ")"));
  Tags tags;
  try {
    tags = backend.tag(text);
  } catch (const std::exception& e) {
    throw Error("POS backend failed on sample " + (id.empty() ? "?" : id) + ": " + e.what());
  }
  if (tags.size() != text.size())
    throw Error("POS backend returned " + std::to_string(tags.size()) + " tags for " +
                std::to_string(text.size()) + " tokens (sample " + id + ")");
  for (const auto& t : tags)
    if (t.empty()) throw Error("POS backend returned an empty tag (sample " + id + ")");
  return {text, std::move(tags)};
}

}  // namespace pivotgen
