#include "pivotgen/synth.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "pivotgen/keyfact.hpp"
#include "pivotgen/pos.hpp"
#include "pivotgen/pseudo.hpp"
#include "pivotgen/stopwords.hpp"

using namespace pivotgen;

namespace {

std::string read_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Synth, SamplesAreWellFormed) {
  SynthGenerator g(SynthSpec{});
  const std::set<std::string> attrs{"name",     "birth_date", "birth_place", "death_date", "nationality", "occupation",
                                    "known_for", "spouse",     "image",       "website",    "signature"};
  for (const auto& s : g.generate(10)) {
    ASSERT_FALSE(s.sample.text.empty());
    ASSERT_FALSE(s.sample.table.records.empty());
    EXPECT_EQ(s.sample.table.records.front().attribute, "name");
    for (const auto& r : s.sample.table.records) {
      EXPECT_TRUE(attrs.count(r.attribute)) << r.attribute;
      EXPECT_FALSE(r.value.empty());
    }
    EXPECT_EQ(s.gold.size(), linearize(s.sample.table).size());
    EXPECT_NO_THROW(validate(s.sample.table));
  }
}

TEST(Synth, SameSeedSameFiles) {
  SynthSpec spec;
  spec.samples = 50;
  spec.unlabeled_fraction = 0.4;
  auto dir = std::filesystem::temp_directory_path();
  std::vector<std::string> bytes;
  for (int run = 0; run < 2; ++run) {
    auto c = SynthGenerator(spec).corpus();
    EXPECT_EQ(c.parallel.size(), 30u);
    EXPECT_EQ(c.unlabeled.size(), 20u);
    const auto p = (dir / ("pivotgen_synth_" + std::to_string(run) + ".jsonl")).string();
    const auto u = (dir / ("pivotgen_synth_" + std::to_string(run) + ".txt")).string();
    save_parallel(p, c.parallel);
    save_unlabeled(u, c.unlabeled);
    bytes.push_back(read_bytes(p) + read_bytes(u));
  }
  EXPECT_EQ(bytes[0], bytes[1]);
  spec.seed = 2;
  EXPECT_NE(SynthGenerator(spec).corpus().parallel, SynthGenerator(SynthSpec{.samples = 50}).corpus().parallel);
}

TEST(Synth, AnnotatorRecoversGoldLabels) {
  SynthGenerator g(SynthSpec{});
  const auto stops = StopWordList::builtin();
  std::size_t agree = 0, total = 0;
  for (const auto& s : g.generate(500)) {
    const auto got = annotate(linearize(s.sample.table), s.sample.text, stops);
    for (std::size_t i = 0; i < got.size(); ++i) agree += got[i] == s.gold[i], ++total;
  }
  EXPECT_GE(static_cast<double>(agree) / static_cast<double>(total), 0.99);
}

TEST(Synth, PseudoSourcesAreShorterThanTexts) {
  SynthGenerator g(SynthSpec{});
  std::vector<UnlabeledSample> texts;
  for (const auto& s : g.generate(300)) texts.push_back({s.sample.id, s.sample.text});
  const auto pairs = build_pseudo_corpus(texts, LexiconTagger::builtin());
  ASSERT_EQ(pairs.size(), texts.size());
  double src = 0, tgt = 0;
  for (const auto& p : pairs) {
    src += static_cast<double>(p.source.size());
    tgt += static_cast<double>(p.target.size());
    EXPECT_TRUE(is_subsequence(p.source, p.target));
  }
  const double ratio = src / tgt;
  EXPECT_GT(ratio, 0.0);
  EXPECT_LT(ratio, 1.0);
}
