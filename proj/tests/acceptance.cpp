// Acceptance checks. Prints one PASS/FAIL line per criterion on stdout and
// exits nonzero if any criterion fails. Progress goes to stderr.
//
//   acceptance [--only 1,2,9] [--work DIR] [--report FILE]

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pivotgen/pipeline.hpp"
#include "pivotgen/synth.hpp"

#include "annotate_oracle.hpp"
#include "gradcheck.hpp"

using namespace pivotgen;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double x, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << x;
  return os.str();
}

std::string read_bytes(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> read_dir(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = read_bytes(e.path());
  return out;
}

fs::path fresh_dir(const fs::path& p) {
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::ofstream report_file;

void report(int id, const std::string& name, const Verdict& v) {
  std::ostringstream line;
  line << (v.pass ? "PASS" : "FAIL") << "  criterion " << std::setw(2) << id << "  " << name << ": " << v.detail;
  std::cout << line.str() << std::endl;
  if (report_file.is_open()) report_file << line.str() << std::endl;
}

// A run whose metrics and checkpoint bytes are compared across repeats.
struct RunRecord {
  std::vector<double> metrics;
  std::map<std::string, std::string> checkpoints;
  double seconds = 0.0;
};

std::string compare_runs(const RunRecord& a, const RunRecord& b, bool& ok) {
  double worst = 0.0;
  ok = a.metrics.size() == b.metrics.size() && a.checkpoints.size() == b.checkpoints.size() && !a.checkpoints.empty();
  for (std::size_t i = 0; ok && i < a.metrics.size(); ++i) worst = std::max(worst, std::abs(a.metrics[i] - b.metrics[i]));
  std::size_t same = 0;
  for (const auto& [name, bytes] : a.checkpoints) {
    auto it = b.checkpoints.find(name);
    same += it != b.checkpoints.end() && it->second == bytes;
  }
  ok = ok && worst <= 1e-6 && same == a.checkpoints.size();
  return "max metric diff " + fmt(worst, 9) + ", " + std::to_string(same) + "/" +
         std::to_string(a.checkpoints.size()) + " checkpoints identical";
}

// ---------------------------------------------------------------------------

Verdict annotation_oracle() {
  const auto t0 = Clock::now();
  const auto stops = StopWordList::builtin();
  std::mt19937_64 rng(2024);
  const Tokens pool{"the", "a", ",", ".", "(", "of", "in", "is", "x1", "x2", "x3", "x4", "x5", "x6", "x7",
                    "1990", "24", "y1", "y2", "-", "born", "an", "and"};
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::uniform_int_distribution<int> n_rec(1, 6), n_tok(1, 4), n_text(0, 15);
  std::size_t mismatches = 0, tokens = 0, selected = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Table t;
    for (int r = 0, k = n_rec(rng); r < k; ++r) {
      Record rec{"attr" + std::to_string(r), {}};
      for (int i = 0, n = n_tok(rng); i < n; ++i) rec.value.push_back(pool[pick(rng)]);
      t.records.push_back(rec);
    }
    Tokens text;
    for (int i = 0, n = n_text(rng); i < n; ++i) text.push_back(pool[pick(rng)]);
    const auto lin = linearize(t);
    const auto got = annotate(lin, text, stops);
    const auto want = check::annotate_oracle(lin, text, stops);
    for (std::size_t i = 0; i < want.size(); ++i) {
      mismatches += i >= got.size() || got[i] != want[i];
      selected += want[i];
    }
    mismatches += got.size() > want.size() ? got.size() - want.size() : 0;
    tokens += want.size();
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 10.0, std::to_string(mismatches) + " mismatches over 1000 pairs (" +
                                               std::to_string(tokens) + " tokens, " + std::to_string(selected) +
                                               " selected), " + fmt(secs, 2) + " s"};
}

Verdict metric_fixtures() {
  using namespace metrics;
  const auto t0 = Clock::now();
  auto seg = [](std::initializer_list<const char*> lines) {
    std::vector<Tokens> out;
    for (const char* l : lines) out.push_back(tokenize(l));
    return out;
  };
  // Frozen from tests/oracles/metric_oracle.py.
  const double want_bleu = 0.7788007830714049, want_rouge = 2.0 / 3.0, want_nist = 2.8019980774979842;
  const auto refs = seg({"the cat sat on the mat", "a b c d e f"});
  const double identity = bleu4(refs, refs);
  const double b = bleu4(seg({"a b c d"}), seg({"a b c d e"}));
  const double r = rouge4_f(seg({"a b c d e"}), seg({"a b c d"}));
  const double n = nist4(seg({"the cat sat on the mat", "a dog ran in the park today"}),
                         seg({"the cat sat on a mat", "the dog ran in the park"}));
  const double secs = seconds_since(t0);
  const bool ok = identity == 1.0 && std::abs(b - want_bleu) <= 1e-4 && std::abs(r - want_rouge) <= 1e-4 &&
                  std::abs(n - want_nist) <= 1e-4 && secs < 1.0;
  return {ok, "identity " + fmt(identity) + ", bleu " + fmt(b) + " (want " + fmt(want_bleu) + "), rouge4 " + fmt(r) +
                  " (want " + fmt(want_rouge) + "), nist " + fmt(n) + " (want " + fmt(want_nist) + "), " +
                  fmt(secs, 3) + " s"};
}

// Tagger overfit on 64 synthetic samples.
RunRecord tagger_overfit(const fs::path& dir) {
  const auto t0 = Clock::now();
  SynthSpec spec;
  spec.seed = 31;
  SynthGenerator gen(spec);
  std::vector<AnnotatedSample> data;
  for (auto& s : gen.generate(64)) data.push_back({linearize(s.sample.table), s.sample.text, s.gold});
  Settings s = Settings::desk();
  s.tagger.dropout = 0.0;
  TaggerModel model = make_tagger(s, data);
  TrainOptions opt;
  opt.optimizer.batch_size = 8;
  opt.max_epochs = 200;
  opt.halve_after = opt.stop_after = 1000;  // capacity check, not model selection
  opt.target_score = 0.99;
  opt.seed = 31;
  auto r = train_tagger(model, data, data, opt);
  RunRecord rec;
  rec.metrics = {evaluate_tagger(model, data).f1, static_cast<double>(r.epochs.size())};
  save_tagger((fresh_dir(dir) / "tagger.ckpt").string(), model);
  rec.checkpoints = read_dir(dir);
  rec.seconds = seconds_since(t0);
  return rec;
}

// Realizer memorization of 32 key-fact/text pairs.
RunRecord realizer_memorize(RealizerVariant variant, const fs::path& dir) {
  const auto t0 = Clock::now();
  SynthSpec spec;
  spec.seed = 32;
  SynthGenerator gen(spec);
  std::vector<TrainPair> data;
  for (auto& s : gen.generate(32)) data.push_back({extract(linearize(s.sample.table), s.gold), s.sample.text});
  Settings s = Settings::desk();
  s.realizer.variant = variant;
  s.realizer.dropout = 0.0;
  s.realizer.seed = 32;
  auto model = make_realizer(s.realizer, realizer_vocab(s, data, nullptr));
  TrainOptions opt;
  opt.optimizer.batch_size = 8;
  opt.max_epochs = 300;
  opt.halve_after = opt.stop_after = 1000;
  opt.target_score = 1.0;
  opt.seed = 32;
  RealizerPhase phase;
  phase.parallel = &data;
  phase.valid = &data;
  phase.validation = {false};
  auto r = train_realizer(*model, phase, opt);
  RunRecord rec;
  rec.metrics = {realizer_bleu(*model, data), static_cast<double>(r.epochs.size())};
  save_realizer((fresh_dir(dir) / "realizer.ckpt").string(), *model);
  rec.checkpoints = read_dir(dir);
  rec.seconds = seconds_since(t0);
  return rec;
}

Verdict gradient_sanity() {
  SynthSpec spec;
  spec.seed = 5;
  SynthGenerator gen(spec);
  auto samples = gen.generate(3);
  std::vector<AnnotatedSample> tagged;
  std::vector<TrainPair> pairs;
  for (auto& s : samples) {
    tagged.push_back({linearize(s.sample.table), s.sample.text, s.gold});
    pairs.push_back({extract(tagged.back().table, s.gold), s.sample.text});
  }
  Settings s = Settings::desk();
  std::ostringstream detail;
  bool ok = true;

  auto tagger = make_tagger(s, tagged);
  std::vector<const LinearizedTable*> tabs;
  std::vector<const KeyFactLabels*> gold;
  for (const auto& t : tagged) {
    tabs.push_back(&t.table);
    gold.push_back(&t.labels);
  }
  auto tr = check::grad_check(tagger.parameters(), [&](ag::Tape& t) { return tagger.loss(t, tabs, gold); }, 0.01, 3);
  ok = ok && tr.max_rel_error <= 1e-3;
  detail << "tagger " << std::scientific << std::setprecision(2) << tr.max_rel_error << " (" << tr.checked << ")";

  for (auto v : {RealizerVariant::kVanilla, RealizerVariant::kTransformer}) {
    s.realizer.variant = v;
    auto model = make_realizer(s.realizer, realizer_vocab(s, pairs, nullptr));
    std::vector<const Tokens*> src, tgt;
    for (const auto& p : pairs) {
      src.push_back(&p.source);
      tgt.push_back(&p.target);
    }
    auto rr = check::grad_check(model->parameters(), [&](ag::Tape& t) { return model->loss(t, src, tgt, nullptr); },
                                0.01, 3);
    ok = ok && rr.max_rel_error <= 1e-3;
    detail << ", " << to_string(v) << " " << rr.max_rel_error << " (" << rr.checked << ")";
  }
  return {ok, "max relative error " + detail.str() + " sampled entries"};
}

Verdict noise_expectations() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(6);
  const Tokens ten{"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"}, four{"a", "b", "c", "d"};
  const std::vector<Tokens> donors{{"x", "y"}, {"z"}, {"u", "v", "w"}};
  double kept = 0, len = 0;
  for (int i = 0; i < 10000; ++i) kept += static_cast<double>(drop_noise(ten, 0.1, rng).size());
  for (int i = 0; i < 10000; ++i) len += static_cast<double>(insert_noise(four, 0.2, donors, rng).size());
  kept /= 10000;
  len /= 10000;
  const double secs = seconds_since(t0);
  return {std::abs(kept - 9.0) <= 0.1 && std::abs(len - 5.0) <= 0.05 && secs < 5.0,
          "drop mean " + fmt(kept) + " (9.0 +- 0.1), insert mean " + fmt(len) + " (5.0 +- 0.05), " + fmt(secs, 2) +
              " s"};
}

// Synthetic low-resource benchmark: 5,000 samples (100 parallel, 4,900
// unlabeled) plus held-out validation and test tables from the same stream.
RunRecord low_resource(const fs::path& dir, std::vector<ExperimentRow>* rows_out) {
  const auto t0 = Clock::now();
  SynthSpec spec;
  spec.seed = 1;
  SynthGenerator gen(spec);
  auto all = gen.generate(5500);
  ExperimentData d;
  for (std::size_t i = 0; i < 100; ++i) d.parallel.push_back(all[i].sample);
  for (std::size_t i = 100; i < 5000; ++i) d.unlabeled.push_back({all[i].sample.id, all[i].sample.text});
  for (std::size_t i = 5000; i < 5200; ++i) d.valid.push_back(all[i].sample);
  for (std::size_t i = 5200; i < 5500; ++i) d.test.push_back(all[i].sample);
  ExperimentSpec ex;
  ex.sizes = {100};
  ex.variants = {RealizerVariant::kVanilla};
  ex.copy_baseline = false;
  ExperimentHooks hooks;
  hooks.progress = &std::cerr;
  hooks.checkpoint_dir = fresh_dir(dir).string();
  auto rows = run_experiment(ex, Settings::desk(), d, LexiconTagger::builtin(), StopWordList::builtin(), hooks);
  RunRecord rec;
  for (const auto& r : rows) rec.metrics.insert(rec.metrics.end(), {r.report.bleu4, r.report.nist4, r.report.rouge4_f, r.tagger_f1});
  rec.checkpoints = read_dir(dir);
  rec.seconds = seconds_since(t0);
  if (rows_out) *rows_out = rows;
  return rec;
}

Verdict tagger_curve() {
  const auto t0 = Clock::now();
  SynthSpec spec;
  spec.seed = 8;
  SynthGenerator gen(spec);
  auto all = gen.generate(3800);
  ExperimentData d;
  for (std::size_t i = 0; i < 3000; ++i) d.parallel.push_back(all[i].sample);
  for (std::size_t i = 3000; i < 3300; ++i) d.valid.push_back(all[i].sample);
  for (std::size_t i = 3300; i < 3800; ++i) d.test.push_back(all[i].sample);
  ExperimentSpec ex;
  ex.sizes = {100, 3000};
  ex.tagger_only = true;
  ExperimentHooks hooks;
  hooks.progress = &std::cerr;
  auto rows = run_experiment(ex, Settings::desk(), d, LexiconTagger::builtin(), StopWordList::builtin(), hooks);
  const double f100 = rows.at(0).tagger_f1, f3000 = rows.at(1).tagger_f1;
  return {std::abs(f100 - f3000) <= 0.05, "F1 " + fmt(100 * f100, 2) + " at K=100, " + fmt(100 * f3000, 2) +
                                              " at K=3000 (limit 5 points), " + fmt(seconds_since(t0), 1) + " s"};
}

Verdict schedule_conformance() {
  auto trace = [](std::vector<double> scores) {
    ScheduleState s;
    s.lr = 1e-3;
    std::vector<Decision> out;
    for (double x : scores) {
      out.push_back(epoch_end(x, s));
      if (out.back() == Decision::kStop) break;
    }
    return std::make_pair(out, s.lr);
  };
  using D = Decision;
  const auto [halve, lr_h] = trace({10, 9, 9, 9});
  const auto [stop, lr_s] = trace({10, 9, 9, 9, 9, 9});
  const auto [reset, lr_r] = trace({10, 9, 9, 11, 9, 9, 9, 9});
  const bool ok = halve == std::vector<D>{D::kContinue, D::kContinue, D::kContinue, D::kHalveLr} && lr_h == 5e-4 &&
                  stop == std::vector<D>{D::kContinue, D::kContinue, D::kContinue, D::kHalveLr, D::kStop} &&
                  lr_s == 5e-4 &&
                  reset == std::vector<D>{D::kContinue, D::kContinue, D::kContinue, D::kContinue, D::kContinue,
                                          D::kContinue, D::kHalveLr, D::kStop};
  auto show = [](const std::vector<D>& ds) {
    std::string s;
    for (auto d : ds) s += std::string(s.empty() ? "" : ",") + to_string(d);
    return s;
  };
  return {ok, "10,9,9,9 -> " + show(halve) + "; 10,9,9,9,9 -> " + show(stop) + "; reset trace -> " + show(reset)};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  fs::path work = fs::temp_directory_path() / "pivotgen_acceptance";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string x; std::getline(ss, x, ',');) only.insert(std::stoi(x));
    } else if (a == "--work" && i + 1 < argc) {
      work = argv[++i];
    } else if (a == "--report" && i + 1 < argc) {
      report_file.open(argv[++i]);
    } else {
      std::cerr << "usage: acceptance [--only 1,2,...] [--work DIR] [--report FILE]\n";
      return 2;
    }
  }
  auto want = [&](int id) { return only.empty() || only.count(id); };
  bool all_ok = true;
  auto run = [&](int id, const std::string& name, const std::function<Verdict()>& f) {
    if (!want(id)) return;
    std::cerr << "criterion " << id << ": " << name << std::endl;
    Verdict v;
    try {
      v = f();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    all_ok = all_ok && v.pass;
    report(id, name, v);
  };

  RunRecord c3, c4v, c4t, c7;
  std::vector<ExperimentRow> rows7;

  run(1, "annotation oracle equivalence", annotation_oracle);
  run(2, "metric fixtures", metric_fixtures);
  {
    run(3, "tagger overfit", [&] {
      c3 = tagger_overfit(work / "c3a");
      return Verdict{c3.metrics[0] >= 0.99 && c3.metrics[1] <= 200 && c3.seconds < 300,
                     "train F1 " + fmt(c3.metrics[0]) + " after " + fmt(c3.metrics[1], 0) + " epochs, " +
                         fmt(c3.seconds, 1) + " s"};
    });
  }
  {
    run(4, "realizer memorization", [&] {
      c4v = realizer_memorize(RealizerVariant::kVanilla, work / "c4va");
      c4t = realizer_memorize(RealizerVariant::kTransformer, work / "c4ta");
      const bool ok = c4v.metrics[0] >= 0.95 && c4t.metrics[0] >= 0.95 && c4v.seconds < 600 && c4t.seconds < 600;
      return Verdict{ok, "vanilla BLEU " + fmt(c4v.metrics[0]) + " (" + fmt(c4v.metrics[1], 0) + " epochs, " +
                             fmt(c4v.seconds, 1) + " s), transformer BLEU " + fmt(c4t.metrics[0]) + " (" +
                             fmt(c4t.metrics[1], 0) + " epochs, " + fmt(c4t.seconds, 1) + " s)"};
    });
  }
  run(5, "gradient sanity", gradient_sanity);
  run(6, "noise expectations", noise_expectations);
  {
    run(7, "low-resource ordering", [&] {
      c7 = low_resource(work / "c7a", &rows7);
      std::map<std::string, double> bleu;
      for (const auto& r : rows7) bleu[r.system] = r.report.bleu4;
      const double pivot = bleu.at("pivot"), e2e = bleu.at("e2e"), nopseudo = bleu.at("pivot-no-pseudo");
      return Verdict{pivot > e2e && pivot > nopseudo && c7.seconds < 45 * 60,
                     "BLEU pivot+pseudo " + fmt(100 * pivot, 2) + " > end-to-end " + fmt(100 * e2e, 2) +
                         ", > pivot w/o pseudo " + fmt(100 * nopseudo, 2) + "; " + fmt(c7.seconds / 60, 1) + " min"};
    });
  }
  run(8, "flat tagger curve", tagger_curve);
  run(9, "schedule conformance", schedule_conformance);
  run(10, "determinism", [&] {
    bool ok3 = false, ok4v = false, ok4t = false, ok7 = false;
    // First runs are missing when only criterion 10 was requested.
    if (c3.checkpoints.empty()) c3 = tagger_overfit(work / "c3a");
    if (c4v.checkpoints.empty()) c4v = realizer_memorize(RealizerVariant::kVanilla, work / "c4va");
    if (c4t.checkpoints.empty()) c4t = realizer_memorize(RealizerVariant::kTransformer, work / "c4ta");
    if (c7.checkpoints.empty()) c7 = low_resource(work / "c7a", nullptr);
    const auto d3 = compare_runs(c3, tagger_overfit(work / "c3b"), ok3);
    const auto d4v = compare_runs(c4v, realizer_memorize(RealizerVariant::kVanilla, work / "c4vb"), ok4v);
    const auto d4t = compare_runs(c4t, realizer_memorize(RealizerVariant::kTransformer, work / "c4tb"), ok4t);
    const auto d7 = compare_runs(c7, low_resource(work / "c7b", nullptr), ok7);
    return Verdict{ok3 && ok4v && ok4t && ok7,
                   "tagger overfit: " + d3 + "; vanilla: " + d4v + "; transformer: " + d4t + "; low-resource: " + d7};
  });
  return all_ok ? 0 : 1;
}
