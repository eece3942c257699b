// Command-line front end. Every failure prints one line
//   error<TAB><kind><TAB><message>
// on stderr and exits nonzero.

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pivotgen/pipeline.hpp"
#include "pivotgen/synth.hpp"

using namespace pivotgen;

namespace {

struct Global {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::vector<std::string> overrides;
};

Settings load_settings(const Global& g) {
  Settings s;
  if (!g.config.empty()) apply_config_file(s, g.config);
  for (const auto& kv : g.overrides) apply_config_text(s, kv, "--set");
  if (g.seed) apply_config_text(s, "seed = " + std::to_string(*g.seed), "--seed");
  s.validate();
  return s;
}

std::unique_ptr<std::ofstream> open_out(const std::string& path) {
  if (path.empty()) return nullptr;
  auto os = std::make_unique<std::ofstream>(path, std::ios::binary);
  if (!*os) throw Error("cannot open '" + path + "' for writing");
  return os;
}

std::vector<ParallelSample> read_parallel(const std::string& path, const std::string& format) {
  if (format == "jsonl") return load_parallel(path, ParallelFormat::kJsonl);
  if (format == "infobox") return load_parallel(path, ParallelFormat::kInfobox);
  throw Error("--format: expected jsonl or infobox");
}

std::unique_ptr<PosBackend> pos_backend(const std::string& tags) {
  if (tags.empty()) return std::make_unique<LexiconTagger>(LexiconTagger::builtin());
  return std::make_unique<PreTaggedBackend>(PreTaggedBackend::load(tags));
}

void write_lines(const std::string& path, const std::vector<Tokens>& lines) {
  auto os = open_out(path);
  for (const auto& l : lines) *os << join(l) << '\n';
}

std::vector<Tokens> read_lines(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path + "'");
  std::vector<Tokens> out;
  std::string line;
  while (std::getline(is, line)) out.push_back(tokenize(line));
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& csv) {
  std::vector<std::size_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(static_cast<std::size_t>(Settings::parse_int("--sizes", trim(item))));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Table-to-text generation through a key-fact pivot"};
  app.require_subcommand(1);
  Global g;
  app.add_option("--seed", g.seed, "Random seed (overrides the config file)");
  app.add_option("--config", g.config, "key = value configuration file");
  app.add_option("--set", g.overrides, "Extra key=value setting, applied after --config");
  std::string format = "jsonl";
  std::function<void()> run;

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic biography corpus");
  SynthSpec spec;
  std::string synth_parallel, synth_unlabeled, synth_gold;
  synth->add_option("--samples", spec.samples)->check(CLI::PositiveNumber);
  synth->add_option("--unlabeled-fraction", spec.unlabeled_fraction)->check(CLI::Range(0.0, 1.0));
  synth->add_option("--parallel", synth_parallel, "Output JSONL for table/text pairs")->required();
  synth->add_option("--unlabeled", synth_unlabeled, "Output text file for the text-only part");
  synth->add_option("--gold", synth_gold, "Output JSONL of generator key-fact labels");
  synth->callback([&] {
    run = [&] {
      spec.seed = load_settings(g).seed;
      SynthGenerator gen(spec);
      const auto c = gen.corpus();
      save_parallel(synth_parallel, c.parallel);
      if (!synth_unlabeled.empty()) save_unlabeled(synth_unlabeled, c.unlabeled);
      else if (!c.unlabeled.empty()) throw Error("--unlabeled is required when --unlabeled-fraction > 0");
      if (!synth_gold.empty()) {
        auto os = open_out(synth_gold);
        for (std::size_t i = 0; i < c.parallel.size(); ++i)
          *os << nlohmann::json{{"id", c.parallel[i].id}, {"labels", c.gold[i]}}.dump() << '\n';
      }
      std::cerr << c.parallel.size() << " parallel, " << c.unlabeled.size() << " unlabeled\n";
    };
  });

  // annotate
  auto* annot = app.add_subcommand("annotate", "Label table tokens that appear in the text");
  std::string annot_in, annot_out;
  annot->add_option("--in", annot_in)->required();
  annot->add_option("--out", annot_out, "Output JSONL with labels and key facts")->required();
  annot->add_option("--format", format, "jsonl or infobox");
  annot->callback([&] {
    run = [&] {
      const auto s = load_settings(g);
      const auto stops = StopWordList::builtin();
      const auto ann = annotate_corpus(read_parallel(annot_in, format), stops, s.annotation);
      auto os = open_out(annot_out);
      for (const auto& a : ann)
        *os << nlohmann::json{{"labels", a.labels}, {"key_facts", key_facts(a, s.fact_order)}}.dump() << '\n';
      const auto st = coverage_stats(ann, stops);
      std::cout << "samples\tmean_key_fact_tokens\tmean_key_fact_attributes\tzero_fact_fraction\n"
                << st.samples << '\t' << st.mean_selected_tokens << '\t' << st.mean_selected_attributes << '\t'
                << st.zero_fact_fraction << '\n';
    };
  });

  // pseudo
  auto* pseudo = app.add_subcommand("pseudo", "Build pseudo parallel pairs from unlabeled text");
  std::string pseudo_in, pseudo_out, pseudo_tags;
  pseudo->add_option("--in", pseudo_in)->required();
  pseudo->add_option("--out", pseudo_out)->required();
  pseudo->add_option("--pos-tags", pseudo_tags, "Pre-tagged TSV instead of the built-in lexicon tagger");
  pseudo->callback([&] {
    run = [&] {
      const auto s = load_settings(g);
      PseudoOptions po;
      po.max_target_length = s.pseudo_max_target_length;
      PseudoStats st;
      const auto pairs = build_pseudo_corpus(load_unlabeled(pseudo_in), *pos_backend(pseudo_tags), po, &st);
      save_pseudo(pseudo_out, pairs);
      std::cerr << st.kept << " of " << st.input << " kept (" << st.dropped_empty_source << " without content words, "
                << st.dropped_too_long << " too long)\n";
    };
  });

  // train-tagger
  auto* ttag = app.add_subcommand("train-tagger", "Train the key-fact tagger");
  std::string tt_train, tt_valid, tt_out, tt_log;
  ttag->add_option("--train", tt_train)->required();
  ttag->add_option("--valid", tt_valid)->required();
  ttag->add_option("--out", tt_out, "Checkpoint path")->required();
  ttag->add_option("--log", tt_log, "Per-epoch TSV log");
  ttag->add_option("--format", format);
  ttag->callback([&] {
    run = [&] {
      const auto s = load_settings(g);
      const auto stops = StopWordList::builtin();
      const auto train = annotate_corpus(read_parallel(tt_train, format), stops, s.annotation);
      const auto valid = annotate_corpus(read_parallel(tt_valid, format), stops, s.annotation);
      auto log = open_out(tt_log);
      if (log) write_log_header(*log);
      TrainResult r;
      auto model = fit_tagger(s, train, valid, log.get(), "tagger", &r);
      save_tagger(tt_out, model);
      std::cerr << "best valid F1 " << r.best_score << " at epoch " << r.best_epoch << ", config "
                << config_hash(s) << '\n';
    };
  });

  // train-realizer
  auto* treal = app.add_subcommand("train-realizer", "Train the surface realizer");
  std::string tr_train, tr_valid, tr_pseudo, tr_out, tr_log;
  bool tr_e2e = false;
  treal->add_option("--train", tr_train)->required();
  treal->add_option("--valid", tr_valid)->required();
  treal->add_option("--pseudo", tr_pseudo, "Pseudo pairs JSONL from the pseudo command");
  treal->add_option("--out", tr_out)->required();
  treal->add_option("--log", tr_log);
  treal->add_option("--format", format);
  treal->add_flag("--end-to-end", tr_e2e, "Feed the whole table instead of the key facts");
  treal->callback([&] {
    run = [&] {
      const auto s = load_settings(g);
      const auto stops = StopWordList::builtin();
      const auto train = read_parallel(tr_train, format), valid = read_parallel(tr_valid, format);
      std::vector<TrainPair> tp, vp, pp;
      if (tr_e2e) {
        if (!tr_pseudo.empty()) throw Error("--pseudo cannot be combined with --end-to-end");
        tp = table_pairs(train);
        vp = table_pairs(valid);
      } else {
        tp = keyfact_pairs(annotate_corpus(train, stops, s.annotation), s.fact_order);
        vp = keyfact_pairs(annotate_corpus(valid, stops, s.annotation), FactOrder::kTable);
        if (!tr_pseudo.empty()) pp = to_train_pairs(load_pseudo(tr_pseudo));
      }
      auto log = open_out(tr_log);
      if (log) write_log_header(*log);
      auto fit = fit_realizer(s, tp, pp.empty() ? nullptr : &pp, vp, log.get());
      save_realizer(tr_out, *fit.model);
      std::cerr << "best valid BLEU " << fit.finetune.best_score << " at epoch " << fit.finetune.best_epoch
                << ", config " << config_hash(s) << '\n';
    };
  });

  // generate
  auto* gen = app.add_subcommand("generate", "Generate text for tables");
  std::string gen_tagger, gen_realizer, gen_in, gen_out, gen_facts;
  gen->add_option("--tagger", gen_tagger, "Tagger checkpoint (omit for an end-to-end realizer)");
  gen->add_option("--realizer", gen_realizer)->required();
  gen->add_option("--in", gen_in, "Tables (parallel JSONL; texts are ignored)")->required();
  gen->add_option("--out", gen_out, "One hypothesis per line")->required();
  gen->add_option("--facts-out", gen_facts, "Also write the predicted key facts");
  gen->add_option("--format", format);
  gen->callback([&] {
    run = [&] {
      const auto data = read_parallel(gen_in, format);
      auto realizer = load_realizer(gen_realizer);
      if (gen_tagger.empty()) {
        std::vector<Tokens> sources;
        for (const auto& d : data) sources.push_back(linearize(d.table).words());
        write_lines(gen_out, realize_all(*realizer, sources));
        return;
      }
      auto tagger = load_tagger(gen_tagger);
      auto out = two_step_generate(tagger, *realizer, data);
      write_lines(gen_out, out.hypotheses);
      if (!gen_facts.empty()) write_lines(gen_facts, out.facts);
      if (out.fallbacks)
        std::cerr << "warning: " << out.fallbacks << " tables had no predicted key fact; used the top token\n";
      if (out.empty_decodes)
        std::cerr << "warning: " << out.empty_decodes << " empty decodes replaced by their key facts\n";
    };
  });

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Score hypotheses against references");
  std::string ev_hyp, ev_ref;
  eval->add_option("--hyp", ev_hyp, "One hypothesis per line")->required();
  eval->add_option("--ref", ev_ref, "Parallel JSONL, or plain text with one reference per line")->required();
  eval->add_option("--format", format, "Format of --ref: jsonl, infobox or text");
  eval->callback([&] {
    run = [&] {
      const auto s = load_settings(g);
      const auto hyps = read_lines(ev_hyp);
      const auto refs = format == "text" ? read_lines(ev_ref) : references(read_parallel(ev_ref, format));
      const auto r = metrics::evaluate(hyps, refs, {s.bleu_smoothing});
      std::cout << "bleu4\tnist4\trouge4_f\n"
                << std::fixed << std::setprecision(2) << 100 * r.bleu4 << '\t' << r.nist4 << '\t'
                << 100 * r.rouge4_f << '\n';
    };
  });

  // experiment
  auto* exp = app.add_subcommand("experiment", "Sweep the number of parallel pairs");
  std::string ex_parallel, ex_unlabeled, ex_valid, ex_test, ex_out, ex_log, ex_sizes = "100,300,1000,3000",
                                                                             ex_variants = "vanilla,transformer";
  std::vector<std::uint64_t> ex_seeds;
  ExperimentSpec ex;
  bool no_e2e = false, no_ablate_pseudo = false;
  exp->add_option("--parallel", ex_parallel, "Pool the first K training pairs are drawn from")->required();
  exp->add_option("--unlabeled", ex_unlabeled, "Extra text-only data");
  exp->add_option("--valid", ex_valid)->required();
  exp->add_option("--test", ex_test)->required();
  exp->add_option("--out", ex_out, "Results TSV (default stdout)");
  exp->add_option("--log", ex_log, "Per-epoch training log");
  exp->add_option("--sizes", ex_sizes, "Comma-separated K values");
  exp->add_option("--variants", ex_variants, "Comma-separated realizer variants");
  exp->add_option("--seeds", ex_seeds, "Seeds to repeat the sweep with (default: --seed)");
  exp->add_option("--format", format);
  exp->add_flag("--ablate-denoise", ex.ablate_denoise, "Also train without noise");
  exp->add_flag("--no-ablate-pseudo", no_ablate_pseudo, "Skip the run without pseudo pairs");
  exp->add_flag("--no-end-to-end", no_e2e, "Skip the whole-table baseline");
  exp->add_flag("--tagger-only", ex.tagger_only, "Only train and score taggers");
  exp->callback([&] {
    run = [&] {
      const auto s = load_settings(g);
      ex.sizes = parse_sizes(ex_sizes);
      ex.variants.clear();
      std::stringstream vs(ex_variants);
      for (std::string v; std::getline(vs, v, ',');) ex.variants.push_back(parse_variant(trim(v)));
      ex.seeds = ex_seeds.empty() ? std::vector<std::uint64_t>{s.seed} : ex_seeds;
      ex.end_to_end = !no_e2e;
      ex.ablate_pseudo = !no_ablate_pseudo;
      ExperimentData data;
      data.parallel = read_parallel(ex_parallel, format);
      if (!ex_unlabeled.empty()) data.unlabeled = load_unlabeled(ex_unlabeled);
      data.valid = read_parallel(ex_valid, format);
      data.test = read_parallel(ex_test, format);
      auto out = open_out(ex_out);
      auto log = open_out(ex_log);
      if (log) write_log_header(*log);
      std::ostream& res = out ? *out : std::cout;
      write_experiment_header(res);
      run_experiment(ex, s, data, LexiconTagger::builtin(), StopWordList::builtin(),
                     {log.get(), &res, &std::cerr, ""});
    };
  });

  try {
    app.parse(argc, argv);
    run();
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error\tusage\t" << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error\tparse\t" << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << "error\tinput\t" << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error\tinternal\t" << e.what() << '\n';
    return 1;
  }
  return 0;
}
