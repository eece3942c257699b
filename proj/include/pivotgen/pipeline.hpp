#pragma once

// End-to-end orchestration: annotation, stage training, two-step
// generation, and the low-resource experiment harness.

#include <algorithm>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pivotgen/checkpoint.hpp"
#include "pivotgen/config.hpp"
#include "pivotgen/denoise.hpp"
#include "pivotgen/keyfact.hpp"
#include "pivotgen/metrics.hpp"
#include "pivotgen/pos.hpp"
#include "pivotgen/pseudo.hpp"
#include "pivotgen/realizer.hpp"
#include "pivotgen/tagger.hpp"
#include "pivotgen/training.hpp"

namespace pivotgen {

inline std::vector<AnnotatedSample> annotate_corpus(const std::vector<ParallelSample>& data,
                                                    const StopWordList& stops,
                                                    AnnotationMode mode = AnnotationMode::kTwoPass) {
  std::vector<AnnotatedSample> out;
  out.reserve(data.size());
  for (const auto& s : data) {
    AnnotatedSample a{linearize(s.table), s.text, {}};
    a.labels = annotate(a.table, a.text, stops, mode);
    out.push_back(std::move(a));
  }
  return out;
}

inline Tokens key_facts(const AnnotatedSample& s, FactOrder order) {
  return order == FactOrder::kTable ? extract(s.table, s.labels) : extract_text_order(s.table, s.labels, s.text);
}

inline std::vector<TrainPair> keyfact_pairs(const std::vector<AnnotatedSample>& data, FactOrder order) {
  std::vector<TrainPair> out;
  for (const auto& s : data) out.push_back({key_facts(s, order), s.text});
  return out;
}

// End-to-end baseline input: every value token of the linearized table.
inline std::vector<TrainPair> table_pairs(const std::vector<ParallelSample>& data) {
  std::vector<TrainPair> out;
  for (const auto& s : data) out.push_back({linearize(s.table).words(), s.text});
  return out;
}

inline std::vector<TrainPair> to_train_pairs(const std::vector<PseudoPair>& pairs) {
  std::vector<TrainPair> out;
  for (const auto& p : pairs) out.push_back({p.source, p.target});
  return out;
}

inline TrainOptions make_options(const Settings& s, int max_epochs, std::uint64_t seed, std::ostream* log,
                                 const std::string& tag) {
  TrainOptions o;
  o.optimizer = s.optimizer;
  o.max_epochs = max_epochs;
  o.seed = seed;
  o.min_steps_per_epoch = s.min_steps_per_epoch;
  o.log = log;
  o.tag = tag;
  return o;
}

// ---------------------------------------------------------------------------
// Stage 1

inline TaggerModel make_tagger(const Settings& s, const std::vector<AnnotatedSample>& train) {
  std::vector<Tokens> words, attrs;
  for (const auto& a : train) {
    words.push_back(a.table.words());
    Tokens at;
    for (const auto& t : a.table.tokens) at.push_back(t.attribute);
    attrs.push_back(std::move(at));
  }
  TaggerConfig c = s.tagger;
  c.seed = s.seed;
  return TaggerModel(c, Vocabulary::build(words, c.word_vocab_cap), Vocabulary::build(attrs, c.attr_vocab_cap));
}

inline TaggerModel fit_tagger(const Settings& s, const std::vector<AnnotatedSample>& train,
                              const std::vector<AnnotatedSample>& valid, std::ostream* log = nullptr,
                              const std::string& tag = "tagger", TrainResult* result = nullptr) {
  TaggerModel model = make_tagger(s, train);
  auto r = train_tagger(model, train, valid, make_options(s, s.tagger_max_epochs, s.seed, log, tag), s.f1_averaging);
  if (result) *result = r;
  return model;
}

// ---------------------------------------------------------------------------
// Stage 2

inline Vocabulary realizer_vocab(const Settings& s, const std::vector<TrainPair>& parallel,
                                 const std::vector<TrainPair>* pseudo) {
  std::vector<Tokens> corpus;
  for (const auto* set : {&parallel, pseudo}) {
    if (!set) continue;
    for (const auto& p : *set) {
      corpus.push_back(p.source);
      corpus.push_back(p.target);
    }
  }
  return Vocabulary::build(corpus, s.realizer.vocab_cap);
}

struct RealizerFit {
  std::unique_ptr<Realizer> model;
  TrainResult pretrain;
  TrainResult finetune;
};

// Trains a realizer according to `s.mode`. Without pseudo pairs every mode
// reduces to parallel-only training.
inline RealizerFit fit_realizer(const Settings& s, const std::vector<TrainPair>& parallel,
                                const std::vector<TrainPair>* pseudo, const std::vector<TrainPair>& valid,
                                std::ostream* log = nullptr, const std::string& tag = "realizer") {
  if (pseudo && pseudo->empty()) pseudo = nullptr;
  if (s.mode == TrainMode::kParallelOnly) pseudo = nullptr;
  RealizerConfig c = s.realizer;
  c.seed = s.seed;
  RealizerFit fit;
  fit.model = make_realizer(c, realizer_vocab(s, parallel, pseudo));

  std::vector<Tokens> donors;
  for (const auto& p : parallel) donors.push_back(p.source);
  if (pseudo)
    for (const auto& p : *pseudo) donors.push_back(p.source);

  RealizerPhase phase;
  phase.noise = s.noise;
  phase.donors = &donors;

  if (pseudo && s.mode == TrainMode::kTwoPhase) {
    auto split = split_dataset(*pseudo, {0.0, 0.0, 1.0}, s.seed);  // deterministic shuffle only
    std::vector<TrainPair> shuffled = std::move(split.test);
    std::size_t n_valid = std::max<std::size_t>(
        1, std::min(s.pseudo_valid_max,
                    static_cast<std::size_t>(s.pseudo_valid_fraction * static_cast<double>(shuffled.size()))));
    if (shuffled.size() < 2) n_valid = 0;
    std::vector<TrainPair> p_valid(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_valid));
    std::vector<TrainPair> p_train(shuffled.begin() + static_cast<std::ptrdiff_t>(n_valid), shuffled.end());
    if (p_valid.empty()) p_valid = p_train;
    phase.pseudo = &p_train;
    phase.ratio = 0.0;
    phase.valid = &p_valid;
    fit.pretrain = train_realizer(*fit.model, phase,
                                  make_options(s, s.pretrain_max_epochs, s.seed + 1, log, tag + ".pretrain"));
    phase.pseudo = nullptr;
    phase.parallel = &parallel;
    phase.ratio = 1.0;
    phase.valid = &valid;
    fit.finetune =
        train_realizer(*fit.model, phase, make_options(s, s.realizer_max_epochs, s.seed + 2, log, tag + ".finetune"));
    return fit;
  }
  phase.parallel = &parallel;
  phase.pseudo = pseudo;
  phase.ratio = pseudo ? s.mix_ratio : 1.0;
  phase.valid = &valid;
  fit.finetune = train_realizer(*fit.model, phase, make_options(s, s.realizer_max_epochs, s.seed + 2, log, tag));
  return fit;
}

// ---------------------------------------------------------------------------
// Two-step decoding

struct GenerationOutput {
  std::vector<Tokens> hypotheses;
  std::vector<KeyFactLabels> predicted;
  std::vector<Tokens> facts;
  std::size_t fallbacks = 0;       // empty key-fact predictions
  std::size_t empty_decodes = 0;   // realizer produced nothing; facts emitted instead
};

// Tokens the tagger could emit that the realizer has never seen. An empty
// intersection means the two checkpoints were built from unrelated data.
inline void check_vocab_compatibility(const TaggerModel& tagger, const Realizer& realizer) {
  const auto& words = tagger.words().tokens();
  std::size_t shared = 0;
  for (std::size_t i = Vocabulary::kReserved; i < words.size(); ++i) shared += realizer.vocab().contains(words[i]);
  if (words.size() > Vocabulary::kReserved && shared == 0)
    throw Error("vocabulary mismatch: the tagger and realizer checkpoints share no tokens");
}

inline GenerationOutput two_step_generate(TaggerModel& tagger, Realizer& realizer,
                                          const std::vector<const Table*>& tables, std::size_t batch_size = 64) {
  check_vocab_compatibility(tagger, realizer);
  GenerationOutput out;
  std::vector<LinearizedTable> lin;
  lin.reserve(tables.size());
  for (const auto* t : tables) lin.push_back(linearize(*t));
  for (std::size_t i = 0; i < lin.size(); i += batch_size) {
    std::vector<const LinearizedTable*> b;
    for (std::size_t j = i; j < std::min(lin.size(), i + batch_size); ++j) b.push_back(&lin[j]);
    auto preds = tagger.predict_batch(b);
    for (std::size_t k = 0; k < preds.size(); ++k) {
      auto& p = preds[k];
      if (std::find(p.labels.begin(), p.labels.end(), 1) == p.labels.end()) {
        Eigen::Index best = 0;
        p.probs.col(1).maxCoeff(&best);
        p.labels[static_cast<std::size_t>(best)] = 1;
        ++out.fallbacks;
      }
      out.facts.push_back(extract(*b[k], p.labels));
      out.predicted.push_back(std::move(p.labels));
    }
  }
  out.hypotheses = decode_all(realizer, out.facts, batch_size);
  for (std::size_t i = 0; i < out.hypotheses.size(); ++i)
    if (out.hypotheses[i].empty()) {
      out.hypotheses[i] = out.facts[i];
      ++out.empty_decodes;
    }
  return out;
}

inline GenerationOutput two_step_generate(TaggerModel& tagger, Realizer& realizer,
                                          const std::vector<ParallelSample>& data) {
  std::vector<const Table*> tables;
  for (const auto& s : data) tables.push_back(&s.table);
  return two_step_generate(tagger, realizer, tables);
}

// Realizes each source directly; empty outputs fall back to the source.
inline std::vector<Tokens> realize_all(Realizer& realizer, const std::vector<Tokens>& sources) {
  auto out = decode_all(realizer, sources);
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out[i].empty()) out[i] = sources[i].empty() ? Tokens{"<unk>"} : sources[i];
  return out;
}

inline std::vector<Tokens> references(const std::vector<ParallelSample>& data) {
  std::vector<Tokens> out;
  for (const auto& s : data) out.push_back(s.text);
  return out;
}

// ---------------------------------------------------------------------------
// Experiment harness

struct ExperimentSpec {
  std::vector<std::size_t> sizes{100, 300, 1000, 3000};
  std::vector<RealizerVariant> variants{RealizerVariant::kVanilla, RealizerVariant::kTransformer};
  std::vector<std::uint64_t> seeds{1};
  bool pivot = true;
  bool ablate_pseudo = true;    // also train the pivot realizer without pseudo pairs
  bool ablate_denoise = false;  // also train the pivot realizer without noise
  bool end_to_end = true;       // realizer fed the whole table
  bool copy_baseline = true;    // emit the predicted key facts as the text
  bool tagger_only = false;

  void validate(std::size_t available) const {
    if (sizes.empty()) throw Error("experiment: no parallel sizes");
    if (!std::is_sorted(sizes.begin(), sizes.end())) throw Error("experiment: sizes must be ascending");
    if (sizes.back() > available)
      throw Error("experiment: K = " + std::to_string(sizes.back()) + " exceeds the " + std::to_string(available) +
                  " available parallel samples");
    if (sizes.front() < 1) throw Error("experiment: K must be >= 1");
  }
};

struct ExperimentData {
  std::vector<ParallelSample> parallel;  // pool the first K samples are drawn from
  std::vector<UnlabeledSample> unlabeled;
  std::vector<ParallelSample> valid;
  std::vector<ParallelSample> test;
};

struct ExperimentRow {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::string system;
  std::string variant;
  metrics::MetricReport report;
  double tagger_f1 = 0.0;
  std::string config_hash;
};

inline void write_experiment_header(std::ostream& os) {
  os << "k\tseed\tsystem\tvariant\tbleu\tnist\trouge4_f\ttagger_f1\tconfig_hash\n";
}

inline void write_experiment_row(std::ostream& os, const ExperimentRow& r) {
  os << r.k << '\t' << r.seed << '\t' << r.system << '\t' << r.variant << '\t' << std::fixed << std::setprecision(2)
     << 100 * r.report.bleu4 << '\t' << r.report.nist4 << '\t' << 100 * r.report.rouge4_f << '\t'
     << 100 * r.tagger_f1 << '\t' << r.config_hash << '\n'
     << std::defaultfloat;
  os.flush();
}

struct ExperimentHooks {
  std::ostream* train_log = nullptr;
  std::ostream* results = nullptr;  // rows are streamed as they finish
  std::ostream* progress = nullptr;
  std::string checkpoint_dir;  // when set, every trained model is saved here
};

inline std::vector<ExperimentRow> run_experiment(const ExperimentSpec& spec, const Settings& base,
                                                 const ExperimentData& data, const PosBackend& pos,
                                                 const StopWordList& stops, const ExperimentHooks& hooks = {}) {
  spec.validate(data.parallel.size());
  if (data.valid.empty() || data.test.empty()) throw Error("experiment: empty validation or test set");
  std::vector<ExperimentRow> rows;
  const auto valid_ann = annotate_corpus(data.valid, stops, base.annotation);
  const auto test_ann = annotate_corpus(data.test, stops, base.annotation);
  std::vector<KeyFactLabels> test_gold;
  for (const auto& a : test_ann) test_gold.push_back(a.labels);
  const auto refs = references(data.test);
  auto emit = [&](ExperimentRow r) {
    if (hooks.results) write_experiment_row(*hooks.results, r);
    rows.push_back(std::move(r));
  };
  auto note = [&](const std::string& msg) {
    if (hooks.progress) *hooks.progress << msg << std::endl;
  };

  for (auto seed : spec.seeds) {
    Settings s = base;
    s.seed = s.tagger.seed = s.realizer.seed = seed;
    const std::string hash = config_hash(s);
    // One shuffle per seed; the first K samples form the parallel set and the
    // rest lose their tables and join the unlabeled pool.
    auto shuffled = split_dataset(data.parallel, {0.0, 0.0, 1.0}, seed).test;
    for (auto k : spec.sizes) {
      const std::string at = "k" + std::to_string(k) + ".s" + std::to_string(seed);
      std::vector<ParallelSample> train(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(k));
      std::vector<UnlabeledSample> unlabeled = data.unlabeled;
      for (std::size_t i = k; i < shuffled.size(); ++i) unlabeled.push_back({shuffled[i].id, shuffled[i].text});
      if (s.pseudo_include_parallel_text)
        for (const auto& p : train) unlabeled.push_back({p.id, p.text});

      const auto train_ann = annotate_corpus(train, stops, s.annotation);
      note(at + ": training tagger on " + std::to_string(k) + " pairs");
      TaggerModel tagger = fit_tagger(s, train_ann, valid_ann, hooks.train_log, at + ".tagger");
      if (!hooks.checkpoint_dir.empty()) save_tagger(hooks.checkpoint_dir + "/" + at + ".tagger.ckpt", tagger);
      auto keep = [&](Realizer& m, const std::string& name) {
        if (!hooks.checkpoint_dir.empty()) save_realizer(hooks.checkpoint_dir + "/" + at + "." + name + ".ckpt", m);
      };
      const double f1 = evaluate_tagger(tagger, test_ann, s.f1_averaging).f1;
      if (spec.tagger_only) {
        emit({k, seed, "tagger", "-", {}, f1, hash});
        continue;
      }

      GenerationOutput facts_only;
      if (spec.copy_baseline || spec.pivot) {
        std::vector<const Table*> tables;
        for (const auto& t : data.test) tables.push_back(&t.table);
        auto lin_preds = predict_labels(tagger, test_ann);
        for (std::size_t i = 0; i < test_ann.size(); ++i) {
          auto labels = lin_preds[i];
          if (std::find(labels.begin(), labels.end(), 1) == labels.end()) {
            auto p = tagger.predict(test_ann[i].table);
            Eigen::Index best = 0;
            p.probs.col(1).maxCoeff(&best);
            labels[static_cast<std::size_t>(best)] = 1;
          }
          facts_only.facts.push_back(extract(test_ann[i].table, labels));
        }
      }
      if (spec.copy_baseline)
        emit({k, seed, "copy-facts", "-", metrics::evaluate(facts_only.facts, refs, {s.bleu_smoothing}), f1, hash});

      const auto parallel_pairs = keyfact_pairs(train_ann, s.fact_order);
      const auto valid_pairs = keyfact_pairs(valid_ann, FactOrder::kTable);
      std::vector<TrainPair> pseudo;
      if (spec.pivot) {
        PseudoOptions po;
        po.max_target_length = s.pseudo_max_target_length;
        PseudoStats st;
        pseudo = to_train_pairs(build_pseudo_corpus(unlabeled, pos, po, &st));
        note(at + ": " + std::to_string(st.kept) + " pseudo pairs (" + std::to_string(st.dropped_empty_source) +
             " empty, " + std::to_string(st.dropped_too_long) + " too long)");
      }

      for (auto variant : spec.variants) {
        Settings sv = s;
        sv.realizer.variant = variant;
        const std::string vname = to_string(variant);
        const std::string vhash = config_hash(sv);
        auto pivot_row = [&](const std::string& system, const Settings& cfg, const std::vector<TrainPair>* pse) {
          note(at + ": training " + system + "-" + vname);
          auto fit = fit_realizer(cfg, parallel_pairs, pse, valid_pairs, hooks.train_log, at + "." + system + "-" + vname);
          keep(*fit.model, system + "-" + vname);
          auto hyps = realize_all(*fit.model, facts_only.facts);
          emit({k, seed, system, vname, metrics::evaluate(hyps, refs, {cfg.bleu_smoothing}), f1, vhash});
        };
        if (spec.pivot) pivot_row("pivot", sv, &pseudo);
        if (spec.pivot && spec.ablate_pseudo) pivot_row("pivot-no-pseudo", sv, nullptr);
        if (spec.pivot && spec.ablate_denoise) {
          Settings quiet = sv;
          quiet.noise.p_drop = quiet.noise.p_insert = 0.0;
          pivot_row("pivot-no-denoise", quiet, &pseudo);
        }
        if (spec.end_to_end) {
          note(at + ": training e2e-" + vname);
          const auto e2e_train = table_pairs(train);
          const auto e2e_valid = table_pairs(data.valid);
          Settings plain = sv;
          auto fit = fit_realizer(plain, e2e_train, nullptr, e2e_valid, hooks.train_log, at + ".e2e-" + vname);
          keep(*fit.model, "e2e-" + vname);
          std::vector<Tokens> sources;
          for (const auto& t : data.test) sources.push_back(linearize(t.table).words());
          auto hyps = realize_all(*fit.model, sources);
          emit({k, seed, "e2e", vname, metrics::evaluate(hyps, refs, {plain.bleu_smoothing}), f1, vhash});
        }
      }
    }
  }
  return rows;
}

}  // namespace pivotgen
