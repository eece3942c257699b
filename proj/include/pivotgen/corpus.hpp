#pragma once

// Data model, ingestion, tokenization, vocabulary and table linearization.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "pivotgen/error.hpp"

namespace pivotgen {

using Tokens = std::vector<std::string>;

struct Record {
  std::string attribute;
  Tokens value;

  bool operator==(const Record&) const = default;
};

struct Table {
  std::vector<Record> records;

  bool operator==(const Table&) const = default;
};

struct ParallelSample {
  std::string id;
  Table table;
  Tokens text;

  bool operator==(const ParallelSample&) const = default;
};

struct UnlabeledSample {
  std::string id;
  Tokens text;
};

struct LinearizedToken {
  std::string word;
  std::string attribute;
  int pos_fwd = 1;
  int pos_bwd = 1;

  bool operator==(const LinearizedToken&) const = default;
};

struct LinearizedTable {
  std::vector<LinearizedToken> tokens;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }

  Tokens words() const {
    Tokens out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(t.word);
    return out;
  }
};

// ---------------------------------------------------------------------------
// Tokenization

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline Tokens tokenize(std::string_view raw) {
  Tokens out;
  std::size_t i = 0;
  while (i < raw.size()) {
    while (i < raw.size() && std::isspace(static_cast<unsigned char>(raw[i]))) ++i;
    std::size_t j = i;
    while (j < raw.size() && !std::isspace(static_cast<unsigned char>(raw[j]))) ++j;
    if (j > i) out.push_back(to_lower(raw.substr(i, j - i)));
    i = j;
  }
  return out;
}

inline std::string join(const Tokens& tokens, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Table validation and linearization

inline void validate(const Table& table) {
  if (table.records.empty()) throw Error("table has no records");
  for (const auto& r : table.records) {
    if (r.attribute.empty()) throw Error("record with empty attribute");
    if (r.attribute.find_first_of(" \t\n") != std::string::npos)
      throw Error("attribute '" + r.attribute + "' contains whitespace");
    if (r.value.empty()) throw Error("record '" + r.attribute + "' has an empty value");
  }
}

inline LinearizedTable linearize(const Table& table) {
  LinearizedTable out;
  for (const auto& r : table.records) {
    const int n = static_cast<int>(r.value.size());
    for (int i = 0; i < n; ++i)
      out.tokens.push_back({r.value[i], r.attribute, i + 1, n - i});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kReserved = 4;

  Vocabulary() : itos_{"<pad>", "<unk>", "<bos>", "<eos>"} { reindex(); }

  // Keeps the `cap` most frequent tokens; ties go to the lexicographically
  // smaller token.
  template <typename Sequences>
  static Vocabulary build(const Sequences& corpus, std::size_t cap) {
    if (cap < 1) throw Error("vocabulary cap must be >= 1");
    std::unordered_map<std::string, std::size_t> freq;
    for (const auto& seq : corpus)
      for (const auto& tok : seq) ++freq[tok];
    std::vector<std::pair<std::string, std::size_t>> entries(freq.begin(), freq.end());
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    Vocabulary v;
    for (const auto& [tok, count] : entries) {
      if (v.itos_.size() - kReserved >= cap) break;
      if (is_reserved_token(tok)) continue;
      v.itos_.push_back(tok);
    }
    v.reindex();
    return v;
  }

  static Vocabulary from_tokens(const Tokens& tokens) {
    Vocabulary v;
    if (tokens.size() < kReserved) throw Error("vocabulary list shorter than reserved block");
    for (int i = 0; i < kReserved; ++i)
      if (tokens[i] != v.itos_[i]) throw Error("vocabulary list has wrong reserved symbols");
    v.itos_ = tokens;
    v.reindex();
    if (v.stoi_.size() != v.itos_.size()) throw Error("vocabulary list has duplicates");
    return v;
  }

  int index(const std::string& tok) const {
    auto it = stoi_.find(tok);
    return it == stoi_.end() ? kUnk : it->second;
  }
  const std::string& token(int idx) const { return itos_.at(static_cast<std::size_t>(idx)); }
  bool contains(const std::string& tok) const { return stoi_.count(tok) > 0; }
  std::size_t size() const { return itos_.size(); }
  const Tokens& tokens() const { return itos_; }

  std::vector<int> encode(const Tokens& toks) const {
    std::vector<int> ids;
    ids.reserve(toks.size());
    for (const auto& t : toks) ids.push_back(index(t));
    return ids;
  }

  bool operator==(const Vocabulary& o) const { return itos_ == o.itos_; }

 private:
  static bool is_reserved_token(const std::string& t) {
    return t == "<pad>" || t == "<unk>" || t == "<bos>" || t == "<eos>";
  }
  void reindex() {
    stoi_.clear();
    for (std::size_t i = 0; i < itos_.size(); ++i) stoi_.emplace(itos_[i], static_cast<int>(i));
  }

  Tokens itos_;
  std::unordered_map<std::string, int> stoi_;
};

// ---------------------------------------------------------------------------
// JSONL parallel format

inline nlohmann::json to_json(const ParallelSample& s) {
  nlohmann::json table = nlohmann::json::array();
  for (const auto& r : s.table.records)
    table.push_back({{"attribute", r.attribute}, {"value", join(r.value)}});
  return {{"id", s.id}, {"table", table}, {"text", join(s.text)}};
}

inline std::string serialize_parallel(const std::vector<ParallelSample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    out += to_json(s).dump();
    out += '\n';
  }
  return out;
}

inline void save_parallel(const std::string& path, const std::vector<ParallelSample>& samples) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os << serialize_parallel(samples);
}

namespace detail {

inline ParallelSample parse_jsonl_line(const std::string& path, std::size_t lineno,
                                       const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path, lineno, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(path, lineno, "line is not a JSON object");
  for (const char* key : {"id", "table", "text"})
    if (!j.contains(key)) throw ParseError(path, lineno, std::string("missing \"") + key + "\" key");
  if (!j["id"].is_string()) throw ParseError(path, lineno, "\"id\" must be a string");
  if (!j["text"].is_string()) throw ParseError(path, lineno, "\"text\" must be a string");
  if (!j["table"].is_array()) throw ParseError(path, lineno, "\"table\" must be an array");

  ParallelSample s;
  s.id = j["id"].get<std::string>();
  for (const auto& rec : j["table"]) {
    if (!rec.is_object() || !rec.contains("attribute") || !rec.contains("value") ||
        !rec["attribute"].is_string() || !rec["value"].is_string())
      throw ParseError(path, lineno, "table entry must be {\"attribute\": string, \"value\": string}");
    Record r;
    r.attribute = to_lower(rec["attribute"].get<std::string>());
    r.value = tokenize(rec["value"].get<std::string>());
    s.table.records.push_back(std::move(r));
  }
  s.text = tokenize(j["text"].get<std::string>());
  try {
    validate(s.table);
  } catch (const Error& e) {
    throw ParseError(path, lineno, e.what());
  }
  if (s.text.empty()) throw ParseError(path, lineno, "empty text");
  return s;
}

inline void check_unique_id(std::unordered_set<std::string>& seen, const std::string& id,
                            const std::string& path, std::size_t lineno) {
  if (!seen.insert(id).second) throw ParseError(path, lineno, "duplicate id '" + id + "'");
}

}  // namespace detail

// Infobox importer line: "attr_1:tok attr_2:tok ... <TAB> text".
// Fields whose token is "<none>" are dropped.
inline Table parse_infobox_fields(std::string_view fields) {
  std::vector<std::string> order;
  std::map<std::string, std::map<int, std::string>> values;
  for (const auto& field : tokenize(fields)) {
    const auto colon = field.find(':');
    if (colon == std::string::npos) throw Error("field '" + field + "' has no ':'");
    const std::string key = field.substr(0, colon);
    const std::string tok = field.substr(colon + 1);
    const auto us = key.rfind('_');
    if (us == std::string::npos || us == 0 || us + 1 == key.size())
      throw Error("field '" + field + "' is not attribute_index:token");
    const std::string attr = key.substr(0, us);
    int idx = 0;
    try {
      std::size_t used = 0;
      idx = std::stoi(key.substr(us + 1), &used);
      if (used != key.size() - us - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error("field '" + field + "' has a non-numeric index");
    }
    if (idx < 1) throw Error("field '" + field + "' has index < 1");
    if (tok.empty()) throw Error("field '" + field + "' has an empty token");
    if (tok == "<none>") continue;
    if (!values.count(attr)) order.push_back(attr);
    if (!values[attr].emplace(idx, tok).second)
      throw Error("field '" + field + "' repeats an index");
  }
  Table t;
  for (const auto& attr : order) {
    Record r{attr, {}};
    for (const auto& [idx, tok] : values[attr]) r.value.push_back(tok);
    t.records.push_back(std::move(r));
  }
  return t;
}

enum class ParallelFormat { kJsonl, kInfobox };

inline std::vector<ParallelSample> load_parallel(const std::string& path,
                                                 ParallelFormat format = ParallelFormat::kJsonl) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path + "'");
  std::vector<ParallelSample> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (format == ParallelFormat::kJsonl) {
      out.push_back(detail::parse_jsonl_line(path, lineno, line));
    } else {
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw ParseError(path, lineno, "missing TAB before text");
      ParallelSample s;
      s.id = std::to_string(lineno);
      try {
        s.table = parse_infobox_fields(std::string_view(line).substr(0, tab));
        validate(s.table);
      } catch (const ParseError&) {
        throw;
      } catch (const Error& e) {
        throw ParseError(path, lineno, e.what());
      }
      s.text = tokenize(std::string_view(line).substr(tab + 1));
      if (s.text.empty()) throw ParseError(path, lineno, "empty text");
      out.push_back(std::move(s));
    }
    detail::check_unique_id(seen, out.back().id, path, lineno);
  }
  return out;
}

inline std::vector<UnlabeledSample> load_unlabeled(const std::string& path,
                                                   std::ostream* warn = &std::cerr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path + "'");
  std::vector<UnlabeledSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto toks = tokenize(line);
    if (toks.empty()) {
      if (warn) *warn << "warning: " << path << ":" << lineno << ": blank line skipped\n";
      continue;
    }
    out.push_back({std::to_string(lineno), std::move(toks)});
  }
  return out;
}

inline void save_unlabeled(const std::string& path, const std::vector<UnlabeledSample>& samples) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  for (const auto& s : samples) os << join(s.text) << '\n';
}

// ---------------------------------------------------------------------------
// Splitting

template <typename T>
struct Split {
  std::vector<T> train;
  std::vector<T> valid;
  std::vector<T> test;
};

template <typename T>
Split<T> split_dataset(std::vector<T> samples, std::array<double, 3> fractions, std::uint64_t seed) {
  const double sum = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(sum - 1.0) > 1e-9) throw Error("split fractions must sum to 1");
  for (double f : fractions)
    if (f < 0.0) throw Error("split fractions must be non-negative");
  std::mt19937_64 rng(seed);
  std::shuffle(samples.begin(), samples.end(), rng);
  const std::size_t n = samples.size();
  const auto n_train = std::min(n, static_cast<std::size_t>(std::llround(fractions[0] * n)));
  const auto n_valid =
      std::min(n - n_train, static_cast<std::size_t>(std::llround(fractions[1] * n)));
  Split<T> out;
  auto it = std::make_move_iterator(samples.begin());
  out.train.assign(it, it + n_train);
  out.valid.assign(it + n_train, it + n_train + n_valid);
  out.test.assign(it + n_train + n_valid, std::make_move_iterator(samples.end()));
  return out;
}

}  // namespace pivotgen
