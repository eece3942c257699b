#pragma once

// Run settings and the key = value config file that overrides them.
//
//   # comment
//   optimizer.lr = 0.001
//   noise.p_drop = 0.1
//
// Unknown keys and malformed values are errors. `canonical()` renders every
// setting in a fixed order; its FNV-1a hash identifies a configuration.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>

#include "pivotgen/denoise.hpp"
#include "pivotgen/keyfact.hpp"
#include "pivotgen/realizer.hpp"
#include "pivotgen/tagger.hpp"
#include "pivotgen/training.hpp"

namespace pivotgen {

enum class TrainMode { kTwoPhase, kJoint, kParallelOnly };

inline std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::kTwoPhase: return "two_phase";
    case TrainMode::kJoint: return "joint";
    case TrainMode::kParallelOnly: return "parallel_only";
  }
  return "?";
}

enum class FactOrder { kTable, kText };

struct Settings {
  std::uint64_t seed = 1;
  OptimizerConfig optimizer;
  TaggerConfig tagger;
  RealizerConfig realizer;
  NoiseConfig noise;

  int tagger_max_epochs = 50;
  int realizer_max_epochs = 50;
  int pretrain_max_epochs = 30;
  TrainMode mode = TrainMode::kTwoPhase;
  double mix_ratio = 0.5;
  std::size_t min_steps_per_epoch = 50;
  // Fraction of pseudo pairs held out to early-stop pretraining (capped).
  double pseudo_valid_fraction = 0.05;
  std::size_t pseudo_valid_max = 200;
  std::size_t pseudo_max_target_length = 60;
  // Also turn the parallel texts into pseudo pairs.
  bool pseudo_include_parallel_text = false;

  AnnotationMode annotation = AnnotationMode::kTwoPass;
  FactOrder fact_order = FactOrder::kTable;
  Averaging f1_averaging = Averaging::kMicro;
  bool bleu_smoothing = false;

  // Scaled-down dimensions used for the synthetic benchmark on one CPU core.
  static Settings desk() {
    Settings s;
    s.tagger.hidden_dim = 64;
    s.tagger.word_emb_dim = 32;
    s.tagger.attr_emb_dim = 16;
    s.tagger.pos_emb_dim = 5;
    s.realizer.hidden_dim = 64;
    s.realizer.emb_dim = 48;
    s.realizer.model_dim = 64;
    s.realizer.ff_dim = 128;
    s.realizer.heads = 4;
    s.realizer.blocks = 2;
    return s;
  }

  void validate() const {
    optimizer.validate();
    tagger.validate();
    realizer.validate();
    noise.validate(true);
    if (tagger_max_epochs < 1 || realizer_max_epochs < 1 || pretrain_max_epochs < 1)
      throw Error("epoch limits must be >= 1");
    if (min_steps_per_epoch < 1) throw Error("train.min_steps_per_epoch must be >= 1");
    if (!(mix_ratio >= 0.0 && mix_ratio <= 1.0)) throw Error("train.mix_ratio must be in [0,1]");
    if (!(pseudo_valid_fraction > 0.0 && pseudo_valid_fraction < 1.0))
      throw Error("pseudo.valid_fraction must be in (0,1)");
  }

  // Applies one key/value pair. Returns false for an unknown key.
  bool set(const std::string& key, const std::string& value) {
    auto d = [&](double& x) { x = parse_double(key, value); };
    auto i = [&](int& x) { x = static_cast<int>(parse_int(key, value)); };
    auto z = [&](std::size_t& x) { x = static_cast<std::size_t>(parse_int(key, value)); };
    auto u = [&](std::uint64_t& x) { x = static_cast<std::uint64_t>(parse_int(key, value)); };
    auto b = [&](bool& x) { x = parse_bool(key, value); };
    if (key == "seed") {
      u(seed);
      tagger.seed = realizer.seed = seed;
    } else if (key == "optimizer.lr") d(optimizer.lr);
    else if (key == "optimizer.beta1") d(optimizer.beta1);
    else if (key == "optimizer.beta2") d(optimizer.beta2);
    else if (key == "optimizer.eps") d(optimizer.eps);
    else if (key == "optimizer.clip_norm") d(optimizer.clip_norm);
    else if (key == "optimizer.batch_size") z(optimizer.batch_size);
    else if (key == "tagger.hidden_dim") i(tagger.hidden_dim);
    else if (key == "tagger.word_emb_dim") i(tagger.word_emb_dim);
    else if (key == "tagger.attr_emb_dim") i(tagger.attr_emb_dim);
    else if (key == "tagger.pos_emb_dim") i(tagger.pos_emb_dim);
    else if (key == "tagger.max_position") i(tagger.max_position);
    else if (key == "tagger.word_vocab_cap") z(tagger.word_vocab_cap);
    else if (key == "tagger.attr_vocab_cap") z(tagger.attr_vocab_cap);
    else if (key == "tagger.dropout") d(tagger.dropout);
    else if (key == "tagger.max_epochs") i(tagger_max_epochs);
    else if (key == "realizer.variant") realizer.variant = parse_variant(value);
    else if (key == "realizer.hidden_dim") i(realizer.hidden_dim);
    else if (key == "realizer.emb_dim") i(realizer.emb_dim);
    else if (key == "realizer.model_dim") i(realizer.model_dim);
    else if (key == "realizer.ff_dim") i(realizer.ff_dim);
    else if (key == "realizer.heads") i(realizer.heads);
    else if (key == "realizer.blocks") i(realizer.blocks);
    else if (key == "realizer.dropout") d(realizer.dropout);
    else if (key == "realizer.max_decode_length") i(realizer.max_decode_length);
    else if (key == "realizer.vocab_cap") z(realizer.vocab_cap);
    else if (key == "realizer.max_epochs") i(realizer_max_epochs);
    else if (key == "realizer.pretrain_max_epochs") i(pretrain_max_epochs);
    else if (key == "train.mode") {
      if (value == "two_phase") mode = TrainMode::kTwoPhase;
      else if (value == "joint") mode = TrainMode::kJoint;
      else if (value == "parallel_only") mode = TrainMode::kParallelOnly;
      else throw Error("train.mode: expected two_phase, joint or parallel_only, got '" + value + "'");
    } else if (key == "train.mix_ratio") d(mix_ratio);
    else if (key == "train.min_steps_per_epoch") z(min_steps_per_epoch);
    else if (key == "noise.p_drop") d(noise.p_drop);
    else if (key == "noise.p_insert") d(noise.p_insert);
    else if (key == "noise.seed") u(noise.seed);
    else if (key == "noise.apply_to") {
      if (value == "both") noise.on_parallel = noise.on_pseudo = true;
      else if (value == "parallel") noise.on_parallel = true, noise.on_pseudo = false;
      else if (value == "pseudo") noise.on_parallel = false, noise.on_pseudo = true;
      else throw Error("noise.apply_to: expected both, parallel or pseudo");
    } else if (key == "pseudo.valid_fraction") d(pseudo_valid_fraction);
    else if (key == "pseudo.valid_max") z(pseudo_valid_max);
    else if (key == "pseudo.max_target_length") z(pseudo_max_target_length);
    else if (key == "pseudo.include_parallel_text") b(pseudo_include_parallel_text);
    else if (key == "annotate.mode") {
      if (value == "two_pass") annotation = AnnotationMode::kTwoPass;
      else if (value == "one_pass") annotation = AnnotationMode::kOnePass;
      else throw Error("annotate.mode: expected two_pass or one_pass");
    } else if (key == "keyfact.order") {
      if (value == "table") fact_order = FactOrder::kTable;
      else if (value == "text") fact_order = FactOrder::kText;
      else throw Error("keyfact.order: expected table or text");
    } else if (key == "eval.f1_averaging") {
      if (value == "micro") f1_averaging = Averaging::kMicro;
      else if (value == "macro") f1_averaging = Averaging::kMacro;
      else throw Error("eval.f1_averaging: expected micro or macro");
    } else if (key == "eval.bleu_smoothing") b(bleu_smoothing);
    else return false;
    return true;
  }

  std::string canonical() const {
    std::ostringstream os;
    os << std::setprecision(17);
    auto kv = [&](const char* k, const auto& v) { os << k << '=' << v << '\n'; };
    kv("seed", seed);
    kv("optimizer.lr", optimizer.lr);
    kv("optimizer.beta1", optimizer.beta1);
    kv("optimizer.beta2", optimizer.beta2);
    kv("optimizer.eps", optimizer.eps);
    kv("optimizer.clip_norm", optimizer.clip_norm);
    kv("optimizer.batch_size", optimizer.batch_size);
    kv("tagger.hidden_dim", tagger.hidden_dim);
    kv("tagger.word_emb_dim", tagger.word_emb_dim);
    kv("tagger.attr_emb_dim", tagger.attr_emb_dim);
    kv("tagger.pos_emb_dim", tagger.pos_emb_dim);
    kv("tagger.max_position", tagger.max_position);
    kv("tagger.word_vocab_cap", tagger.word_vocab_cap);
    kv("tagger.attr_vocab_cap", tagger.attr_vocab_cap);
    kv("tagger.dropout", tagger.dropout);
    kv("tagger.max_epochs", tagger_max_epochs);
    kv("realizer.variant", to_string(realizer.variant));
    kv("realizer.hidden_dim", realizer.hidden_dim);
    kv("realizer.emb_dim", realizer.emb_dim);
    kv("realizer.model_dim", realizer.model_dim);
    kv("realizer.ff_dim", realizer.ff_dim);
    kv("realizer.heads", realizer.heads);
    kv("realizer.blocks", realizer.blocks);
    kv("realizer.dropout", realizer.dropout);
    kv("realizer.max_decode_length", realizer.max_decode_length);
    kv("realizer.vocab_cap", realizer.vocab_cap);
    kv("realizer.max_epochs", realizer_max_epochs);
    kv("realizer.pretrain_max_epochs", pretrain_max_epochs);
    kv("train.mode", to_string(mode));
    kv("train.mix_ratio", mix_ratio);
    kv("train.min_steps_per_epoch", min_steps_per_epoch);
    kv("noise.p_drop", noise.p_drop);
    kv("noise.p_insert", noise.p_insert);
    kv("noise.seed", noise.seed);
    kv("noise.apply_to", noise.on_parallel && noise.on_pseudo ? "both" : noise.on_parallel ? "parallel" : "pseudo");
    kv("pseudo.valid_fraction", pseudo_valid_fraction);
    kv("pseudo.valid_max", pseudo_valid_max);
    kv("pseudo.max_target_length", pseudo_max_target_length);
    kv("pseudo.include_parallel_text", pseudo_include_parallel_text ? "true" : "false");
    kv("annotate.mode", annotation == AnnotationMode::kTwoPass ? "two_pass" : "one_pass");
    kv("keyfact.order", fact_order == FactOrder::kTable ? "table" : "text");
    kv("eval.f1_averaging", f1_averaging == Averaging::kMicro ? "micro" : "macro");
    kv("eval.bleu_smoothing", bleu_smoothing ? "true" : "false");
    return os.str();
  }

  static double parse_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double x = 0;
    try {
      x = std::stod(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != v.size()) throw Error(key + ": expected a number, got '" + v + "'");
    return x;
  }

  static long long parse_int(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    long long x = 0;
    try {
      x = std::stoll(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != v.size() || x < 0) throw Error(key + ": expected a non-negative integer, got '" + v + "'");
    return x;
  }

  static bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw Error(key + ": expected true or false, got '" + v + "'");
  }
};

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string config_hash(const Settings& s) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(s.canonical());
  return os.str();
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline void apply_config_text(Settings& s, const std::string& text, const std::string& origin = "<config>") {
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(origin, lineno, "expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    try {
      if (!s.set(key, value)) throw Error("unknown key '" + key + "'");
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(origin, lineno, e.what());
    }
  }
}

inline void apply_config_file(Settings& s, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  apply_config_text(s, ss.str(), path);
}

}  // namespace pivotgen
