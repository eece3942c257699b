#include "pivotgen/pseudo.hpp"

#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

using namespace pivotgen;

namespace {

std::string temp_file(const std::string& name, const std::string& content) {
  auto path = std::filesystem::temp_directory_path() / ("pivotgen_pseudo_" + name);
  std::ofstream(path, std::ios::binary) << content;
  return path.string();
}

}  // namespace

TEST(LexiconTagger, BuiltinMatchesShippedFile) {
  auto builtin = LexiconTagger::builtin();
  auto file = LexiconTagger::load(std::string(PIVOTGEN_DATA_DIR) + "/pos_lexicon.tsv");
  EXPECT_EQ(builtin.lexicon(), file.lexicon());
}

TEST(LexiconTagger, LexiconAndSuffixRules) {
  auto t = LexiconTagger::builtin();
  EXPECT_EQ(t.tag({"john", "runs"}), (Tags{"NNP", "VBZ"}));
  EXPECT_EQ(t.tag_word("1955"), "CD");
  EXPECT_EQ(t.tag_word("quickly"), "RB");
  EXPECT_EQ(t.tag_word("singing"), "VBG");
  EXPECT_EQ(t.tag_word("famous"), "JJ");
  EXPECT_EQ(t.tag_word("happiness"), "NN");
  EXPECT_EQ(t.tag_word("dogs"), "NNS");
  EXPECT_EQ(t.tag_word("glass"), "NN");
  EXPECT_EQ(t.tag_word("zork"), "NN");
  EXPECT_EQ(t.tag_word(","), ",");
}

TEST(PosTag, ErrorsAndAlignment) {
  auto t = LexiconTagger::builtin();
  EXPECT_THROW(pos_tag({}, t), Error);
  Tokens text = tokenize("the quick brown fox was born in 1990 .");
  EXPECT_EQ(pos_tag(text, t).tags.size(), text.size());
}

TEST(PreTagged, ReadsSentencesAndNamesMissingSample) {
  auto path = temp_file("tags.tsv", "John\tNNP\nruns\tVBZ\n\nit\tPRP\nrains\tVBZ\n");
  auto b = PreTaggedBackend::load(path);
  EXPECT_EQ(b.size(), 2u);
  EXPECT_EQ(b.tag({"john", "runs"}), (Tags{"NNP", "VBZ"}));
  try {
    pos_tag({"unknown", "sentence"}, b, "s42");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("s42"), std::string::npos);
  }
}

TEST(FilterContent, DefaultTagSet) {
  PosTaggedText t{{"denise", "is", "an", "australian", "comedian"}, {"NNP", "VBZ", "DT", "JJ", "NN"}};
  EXPECT_EQ(filter_content(t), (Tokens{"denise", "australian", "comedian"}));
  PosTaggedText all{{"a", "b"}, {"NN", "CD"}};
  EXPECT_EQ(filter_content(all), all.tokens);
  PosTaggedText none{{"is", "the"}, {"VBZ", "DT"}};
  EXPECT_TRUE(filter_content(none).empty());
}

TEST(BuildPseudo, DropsDegenerateAndKeepsSubsequence) {
  auto tagger = LexiconTagger::builtin();
  std::vector<UnlabeledSample> texts;
  std::mt19937_64 rng(3);
  const Tokens pool{"john", "smith", "is", "an", "american", "painter", "born", "in", "1950", ",", "the", "."};
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (int i = 0; i < 100; ++i) {
    Tokens t{"john"};
    for (int k = 0; k < 8; ++k) t.push_back(pool[pick(rng)]);
    texts.push_back({std::to_string(i), t});
  }
  PseudoStats st;
  auto pairs = build_pseudo_corpus(texts, tagger, {}, &st);
  EXPECT_EQ(pairs.size(), 100u);
  double ratio = 0;
  for (const auto& p : pairs) {
    EXPECT_TRUE(is_subsequence(p.source, p.target));
    auto tagged = pos_tag(p.target, tagger);
    // Closure: kept tokens are exactly the content-tagged ones.
    EXPECT_EQ(filter_content(tagged), p.source);
    ratio += static_cast<double>(p.source.size()) / p.target.size();
  }
  ratio /= pairs.size();
  EXPECT_GT(ratio, 0.0);
  EXPECT_LT(ratio, 1.0);

  texts.push_back({"fn", {"the", "of", "is", "."}});
  texts.push_back({"long", Tokens(100, "john")});
  pairs = build_pseudo_corpus(texts, tagger, {}, &st);
  EXPECT_EQ(pairs.size(), 100u);
  EXPECT_EQ(st.dropped_empty_source, 1u);
  EXPECT_EQ(st.dropped_too_long, 1u);
  EXPECT_EQ(build_pseudo_corpus(texts, tagger), pairs);
}

TEST(PseudoFile, RoundTrip) {
  std::vector<PseudoPair> pairs{{{"a", "b"}, {"a", "x", "b"}}, {{"\"q\""}, {"\"q\"", "."}}};
  auto path = (std::filesystem::temp_directory_path() / "pivotgen_pseudo_rt.jsonl").string();
  save_pseudo(path, pairs);
  EXPECT_EQ(load_pseudo(path), pairs);
  EXPECT_THROW(load_pseudo(temp_file("bad.jsonl", "{\"source\":[]}\n")), ParseError);
}
