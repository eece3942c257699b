#pragma once

// Synthetic biography corpus. Each sample is an infobox-like table and a
// one- or two-sentence text rendered from it. Core slots (name, nationality,
// occupation) are always mentioned, optional slots only sometimes, and
// distractor slots (image, website, signature) never, so the key facts are a
// proper subset of the table. The generator records which slots it realized,
// giving gold key-fact labels.

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "pivotgen/corpus.hpp"
#include "pivotgen/keyfact.hpp"
#include "pivotgen/pos.hpp"
#include "pivotgen/pseudo.hpp"
#include "pivotgen/stopwords.hpp"

namespace pivotgen {

struct SynthSpec {
  std::size_t samples = 1000;
  // Fraction of samples whose table is dropped (text-only).
  double unlabeled_fraction = 0.0;
  std::uint64_t seed = 1;

  std::size_t first_names = 150;
  std::size_t last_names = 250;
  std::size_t cities = 60;
  std::size_t nationalities = 30;
  std::size_t title_words = 120;
  std::size_t distractor_words = 200;

  // Presence of optional slots in the table.
  double p_birth_date = 0.9;
  double p_death_date = 0.3;
  double p_birth_place = 0.8;
  double p_known_for = 0.5;
  double p_spouse = 0.4;
  // Probability that a present slot is mentioned in the text.
  double p_say_birth_place = 0.7;
  double p_say_known_for = 0.6;
  double p_say_spouse = 0.5;
  // Sentence style weights.
  std::array<double, 3> style_weights{0.5, 0.3, 0.2};

  void validate() const {
    if (!(unlabeled_fraction >= 0.0 && unlabeled_fraction <= 1.0))
      throw Error("synth: unlabeled fraction must be in [0,1]");
    if (first_names < 2 || last_names < 2 || cities < 1 || nationalities < 1 || title_words < 2 ||
        distractor_words < 1)
      throw Error("synth: pool sizes too small");
  }
};

struct SynthSample {
  ParallelSample sample;
  KeyFactLabels gold;  // aligned with linearize(sample.table)
  int style = 0;
};

struct SynthCorpus {
  std::vector<ParallelSample> parallel;
  std::vector<KeyFactLabels> gold;
  std::vector<UnlabeledSample> unlabeled;
};

class SynthGenerator {
 public:
  explicit SynthGenerator(SynthSpec spec) : spec_(spec), rng_(spec.seed) {
    spec_.validate();
    build_pools();
  }

  const SynthSpec& spec() const { return spec_; }

  SynthSample next(const std::string& id) {
    Person p = sample_person();
    SynthSample s;
    s.sample.id = id;
    s.style = pick_style();
    s.sample.text = render(p, s.style);

    auto add = [&](const std::string& attr, const Tokens& value, bool said) {
      if (value.empty()) return;
      s.sample.table.records.push_back({attr, value});
      s.gold.insert(s.gold.end(), value.size(), said ? 1 : 0);
    };
    add("name", p.name, true);
    add("birth_date", p.birth_date, true);
    add("birth_place", p.birth_place, p.say_birth_place);
    add("death_date", p.death_date, true);
    add("nationality", {p.nationality}, true);
    add("occupation", {p.occupation}, true);
    add("known_for", p.known_for, p.say_known_for);
    add("spouse", p.spouse, p.say_spouse);
    add("image", p.image, false);
    add("website", p.website, false);
    add("signature", p.signature, false);
    return s;
  }

  std::vector<SynthSample> generate(std::size_t n, const std::string& id_prefix = "s") {
    std::vector<SynthSample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(next(id_prefix + std::to_string(i)));
    return out;
  }

  // Splits `spec.samples` generated samples into parallel and text-only parts.
  SynthCorpus corpus() {
    SynthCorpus c;
    const auto n_unlabeled =
        static_cast<std::size_t>(std::llround(spec_.unlabeled_fraction * static_cast<double>(spec_.samples)));
    const std::size_t n_parallel = spec_.samples - n_unlabeled;
    auto all = generate(spec_.samples);
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (i < n_parallel) {
        c.parallel.push_back(std::move(all[i].sample));
        c.gold.push_back(std::move(all[i].gold));
      } else {
        c.unlabeled.push_back({all[i].sample.id, std::move(all[i].sample.text)});
      }
    }
    return c;
  }

  const Tokens& first_name_pool() const { return first_; }

 private:
  struct Person {
    Tokens name, birth_date, birth_place, death_date, known_for, spouse, image, website, signature;
    std::string nationality, occupation;
    bool say_birth_place = false, say_known_for = false, say_spouse = false;
  };

  static const std::vector<std::string>& occupations() {
    static const std::vector<std::string> kOcc{
        "painter",   "singer",   "actor",      "writer",    "poet",     "architect", "composer",
        "engineer",  "journalist", "footballer", "cricketer", "novelist", "photographer", "sculptor",
        "director",  "producer", "dancer",     "chemist",   "physicist", "economist", "lawyer",
        "diplomat",  "cyclist",  "boxer",      "drummer",   "guitarist", "pianist",   "teacher",
        "historian", "botanist"};
    return kOcc;
  }

  static const std::vector<std::string>& months() {
    static const std::vector<std::string> kMonths{"january", "february", "march",     "april",   "may",      "june",
                                                  "july",    "august",   "september", "october", "november", "december"};
    return kMonths;
  }

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
    return v[d(rng_)];
  }

  bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }

  int pick_style() {
    std::discrete_distribution<int> d(spec_.style_weights.begin(), spec_.style_weights.end());
    return d(rng_);
  }

  std::string syllables(int lo, int hi) {
    static const std::vector<std::string> kOnset{"b", "d", "f", "g", "k", "l",  "m",  "n",  "p",  "r",
                                                 "t", "v", "z", "br", "dr", "kr", "tr", "gr", "st", "sh"};
    static const std::vector<std::string> kVowel{"a", "e", "i", "o", "u", "ai", "ei", "ou"};
    static const std::vector<std::string> kCoda{"", "", "n", "r", "l", "m", "k", "th"};
    std::uniform_int_distribution<int> n(lo, hi);
    std::string w;
    for (int i = 0, k = n(rng_); i < k; ++i) w += pick(kOnset) + pick(kVowel) + (i + 1 == k ? pick(kCoda) : "");
    return w;
  }

  // Draws `n` distinct words that are not used by any other pool, are not
  // stop words or lexicon entries, and get a content tag from the built-in
  // POS tagger (so pseudo sources keep them).
  Tokens make_pool(std::size_t n, const std::function<std::string()>& make) {
    static const auto stops = StopWordList::builtin();
    static const auto tagger = LexiconTagger::builtin();
    static const ContentTagSet content;
    Tokens out;
    std::size_t attempts = 0;
    while (out.size() < n) {
      if (++attempts > 100 * n + 1000) throw Error("synth: cannot fill word pool; reduce pool sizes");
      std::string w = make();
      if (used_.count(w) || stops.is_stop(w) || tagger.lexicon().count(w) || !content.contains(tagger.tag_word(w)))
        continue;
      used_.insert(w);
      out.push_back(w);
    }
    return out;
  }

  void build_pools() {
    for (const auto& w : occupations()) used_.insert(w);
    for (const auto& w : months()) used_.insert(w);
    first_ = make_pool(spec_.first_names, [&] { return syllables(2, 2); });
    last_ = make_pool(spec_.last_names, [&] { return syllables(2, 3); });
    cities_ = make_pool(spec_.cities, [&] {
      static const std::vector<std::string> kEnd{"ton", "burg", "vale", "port", "field", "ford"};
      return syllables(1, 2) + pick(kEnd);
    });
    nations_ = make_pool(spec_.nationalities, [&] {
      static const std::vector<std::string> kEnd{"ian", "ese", "ic"};
      return syllables(1, 2) + pick(kEnd);
    });
    titles_ = make_pool(spec_.title_words, [&] { return syllables(1, 2); });
    for (std::size_t i = 0; i < spec_.distractor_words; ++i) distract_.push_back(syllables(2, 3));
  }

  Tokens date(int year) {
    std::uniform_int_distribution<int> day(1, 28);
    return {std::to_string(day(rng_)), pick(months()), std::to_string(year)};
  }

  Person sample_person() {
    Person p;
    p.name = {pick(first_), pick(last_)};
    std::uniform_int_distribution<int> birth_year(1900, 1990);
    const int born = birth_year(rng_);
    if (coin(spec_.p_birth_date)) p.birth_date = date(born);
    if (coin(spec_.p_death_date)) {
      std::uniform_int_distribution<int> age(40, 90);
      p.death_date = date(std::min(2015, born + age(rng_)));
    }
    if (coin(spec_.p_birth_place)) {
      p.birth_place = {pick(cities_)};
      p.say_birth_place = coin(spec_.p_say_birth_place);
    }
    p.nationality = pick(nations_);
    p.occupation = pick(occupations());
    if (coin(spec_.p_known_for)) {
      p.known_for = {"the", pick(titles_), pick(titles_)};
      while (p.known_for[2] == p.known_for[1]) p.known_for[2] = pick(titles_);
      p.say_known_for = coin(spec_.p_say_known_for);
    }
    if (coin(spec_.p_spouse)) {
      do {
        p.spouse = {pick(first_), pick(last_)};
      } while (p.spouse[0] == p.name[0] || p.spouse[1] == p.name[1]);
      p.say_spouse = coin(spec_.p_say_spouse);
    }
    if (coin(0.9)) p.image = {pick(distract_) + ".jpg"};
    if (coin(0.5)) p.website = {"www." + pick(distract_) + ".com"};
    if (coin(0.3)) p.signature = {pick(distract_) + "_signature.png"};
    return p;
  }

  static void append(Tokens& out, const Tokens& more) { out.insert(out.end(), more.begin(), more.end()); }

  static std::string article(const std::string& next) {
    return std::string("aeiou").find(next.front()) != std::string::npos ? "an" : "a";
  }

  Tokens render(const Person& p, int style) const {
    const bool dead = !p.death_date.empty();
    const bool bd = !p.birth_date.empty();
    const Tokens verb{dead ? "was" : "is"};
    const Tokens desc{article(p.nationality), p.nationality, p.occupation};
    Tokens t;
    if (style == 0) {
      append(t, p.name);
      bool place_done = false;
      if (bd && dead) {
        append(t, {"("});
        append(t, p.birth_date);
        append(t, {"-"});
        append(t, p.death_date);
        append(t, {")"});
      } else if (bd) {
        append(t, {"(", "born"});
        append(t, p.birth_date);
        if (p.say_birth_place) {
          append(t, {"in"});
          append(t, p.birth_place);
          place_done = true;
        }
        append(t, {")"});
      } else if (dead) {
        append(t, {"(", "died"});
        append(t, p.death_date);
        append(t, {")"});
      }
      append(t, verb);
      append(t, desc);
      if (p.say_birth_place && !place_done) {
        append(t, {"from"});
        append(t, p.birth_place);
      }
      if (p.say_known_for) {
        append(t, {",", "best", "known", "for"});
        append(t, p.known_for);
      }
      if (p.say_spouse) {
        append(t, {",", "married", "to"});
        append(t, p.spouse);
      }
      append(t, {"."});
    } else if (style == 1) {
      append(t, p.name);
      append(t, verb);
      append(t, desc);
      if (p.say_known_for) {
        append(t, {"known", "for"});
        append(t, p.known_for);
      }
      append(t, {"."});
      if (bd) {
        append(t, {"born", "on"});
        append(t, p.birth_date);
        if (p.say_birth_place) {
          append(t, {"in"});
          append(t, p.birth_place);
        }
        if (dead) {
          append(t, {",", "died", "on"});
          append(t, p.death_date);
        }
        append(t, {"."});
      } else {
        if (p.say_birth_place) {
          append(t, {"born", "in"});
          append(t, p.birth_place);
          append(t, {"."});
        }
        if (dead) {
          append(t, {"died", "on"});
          append(t, p.death_date);
          append(t, {"."});
        }
      }
      if (p.say_spouse) {
        append(t, {"married", "to"});
        append(t, p.spouse);
        append(t, {"."});
      }
    } else {
      if (p.say_birth_place) {
        append(t, {"born", "in"});
        append(t, p.birth_place);
        append(t, {","});
      }
      append(t, p.name);
      if (bd || dead) {
        append(t, {"("});
        if (bd) append(t, p.birth_date);
        if (bd && dead) append(t, {"-"});
        if (!bd) append(t, {"died"});
        if (dead) append(t, p.death_date);
        append(t, {")"});
      }
      append(t, verb);
      append(t, desc);
      if (p.say_spouse) {
        append(t, {",", "married", "to"});
        append(t, p.spouse);
      }
      if (p.say_known_for) {
        append(t, {",", "known", "for"});
        append(t, p.known_for);
      }
      append(t, {"."});
    }
    return t;
  }

  SynthSpec spec_;
  std::mt19937_64 rng_;
  std::unordered_set<std::string> used_;
  Tokens first_, last_, cities_, nations_, titles_, distract_;
};

}  // namespace pivotgen
