// Copyright 2026 The noisyner Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "noisyner/synthetic.hpp"

#include <array>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "noisyner/rng.hpp"

namespace noisyner {
namespace {

constexpr std::array kOnsets{"b", "d", "k", "l", "m", "n", "r", "s", "t", "v", "z", "br", "gr", "st"};
constexpr std::array kVowels{"a", "e", "i", "o", "u", "ai", "ou"};

std::string syllables(Rng& rng, std::size_t count) {
  std::string out;
  for (std::size_t i = 0; i < count; ++i) {
    out += kOnsets[rng.uniform_index(kOnsets.size())];
    out += kVowels[rng.uniform_index(kVowels.size())];
  }
  return out;
}

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

std::string upper(std::string s) {
  for (char& c : s) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  }
  return s;
}

template <std::size_t N>
const char* pick(Rng& rng, const std::array<const char*, N>& xs) {
  return xs[rng.uniform_index(N)];
}

// One entity name as a token list, shaped by its type.
std::vector<std::string> make_name(Rng& rng, std::size_t type) {
  static constexpr std::array kPerEnd{"son", "ski", "ez", "ova"};
  static constexpr std::array kLocEnd{"burg", "ville", "stad", "ia", "port"};
  static constexpr std::array kOrgEnd{"Corp", "Group", "Bank", "Inc"};
  switch (type) {
    case 0:  // PER
      if (rng.uniform01() < 0.6) {
        return {capitalize(syllables(rng, 2)), capitalize(syllables(rng, 1) + pick(rng, kPerEnd))};
      }
      return {capitalize(syllables(rng, 2) + pick(rng, kPerEnd))};
    case 1:  // LOC
      if (rng.uniform01() < 0.2) return {"New", capitalize(syllables(rng, 2) + pick(rng, kLocEnd))};
      return {capitalize(syllables(rng, 1 + rng.uniform_index(2)) + pick(rng, kLocEnd))};
    case 2:  // ORG
      if (rng.uniform01() < 0.3) return {upper(syllables(rng, 1) + "x")};
      return {capitalize(syllables(rng, 2)), pick(rng, kOrgEnd)};
    default: {
      const std::string mark = "q" + std::to_string(type);
      return {capitalize(syllables(rng, 2) + mark)};
    }
  }
}

std::string type_name(std::size_t type) {
  static constexpr std::array kNames{"PER", "LOC", "ORG"};
  return type < kNames.size() ? kNames[type] : "T" + std::to_string(type);
}

// Templates: plain words, or "#k" for an entity of type k (k < 3), or "#*"
// for an entity of any generic type beyond the first three.
constexpr std::array kTemplates{
    "#0 said on Monday that the deal was done .",
    "officials in #1 reported strong growth this year .",
    "shares of #2 rose 3 percent in early trading .",
    "#0 , who works for #2 , visited #1 last week .",
    "the minister met #0 in #1 on Tuesday .",
    "#2 announced a new plant near #1 .",
    "according to #0 , the market in #1 is stable .",
    "analysts expect #2 to report higher profits .",
    "Police said the incident happened in #1 .",
    "It was not clear whether #0 would attend .",
    "The company said sales fell sharply .",
    "Prices were mostly unchanged on Friday .",
    "#0 told reporters the talks with #2 went well .",
    "a spokesman for #2 declined to comment .",
    "He said the #* report was published in #1 .",
    "#* officials will travel to #1 next month .",
};

}  // namespace

Corpus generate_synthetic(const SyntheticConfig& config) {
  if (config.num_types == 0) throw ConfigError("synthetic corpus needs at least one type");
  Rng rng = Rng::stream(config.seed, "synthetic");

  Corpus corpus;
  std::vector<std::vector<std::vector<std::string>>> names(config.num_types);
  for (std::size_t t = 0; t < config.num_types; ++t) {
    corpus.tagset.add_type(type_name(t));
    std::set<std::vector<std::string>> seen;
    while (names[t].size() < config.identities_per_type) {
      auto name = make_name(rng, t);
      if (seen.insert(name).second) names[t].push_back(std::move(name));
    }
  }

  auto draw_entity = [&](std::size_t type) {
    // Skewed frequency: low indices recur far more often.
    const double u = rng.uniform01();
    const auto idx = static_cast<std::size_t>(std::floor(u * u * names[type].size()));
    return names[type][idx];
  };

  while (corpus.sentences.size() < config.sentences) {
    const std::string tmpl = kTemplates[rng.uniform_index(kTemplates.size())];
    std::istringstream words(tmpl);
    Sentence s;
    s.id = corpus.sentences.size();
    bool usable = true;
    for (std::string w; words >> w;) {
      if (w.size() == 2 && w[0] == '#') {
        std::size_t type = 0;
        if (w[1] == '*') {
          if (config.num_types <= 3) {
            type = rng.uniform_index(config.num_types);
          } else {
            type = 3 + rng.uniform_index(config.num_types - 3);
          }
        } else {
          type = static_cast<std::size_t>(w[1] - '0');
        }
        if (type >= config.num_types) {
          usable = false;
          break;
        }
        const auto name = draw_entity(type);
        for (std::size_t i = 0; i < name.size(); ++i) {
          const Position pos = i == 0 ? Position::Begin : Position::Inside;
          const LabelId id = corpus.tagset.id(pos, type_name(type));
          s.tokens.push_back(Token{name[i], id, id});
        }
      } else {
        s.tokens.push_back(Token{w, TagSet::kOutside, TagSet::kOutside});
      }
    }
    if (!usable) continue;
    if (!s.tokens.empty()) s.tokens[0].surface = capitalize(s.tokens[0].surface);
    corpus.sentences.push_back(std::move(s));
  }
  return corpus;
}

}  // namespace noisyner
