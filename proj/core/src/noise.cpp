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

#include "noisyner/noise.hpp"

#include <fstream>
#include <map>
#include <string>
#include <utility>

namespace noisyner {

void PerturbationConfig::validate() const {
  if (!(target_recall > 0.0 && target_recall <= 1.0)) {
    throw ConfigError("target_recall must lie in (0, 1]");
  }
  if (!(target_precision > 0.0 && target_precision <= 1.0)) {
    throw ConfigError("target_precision must lie in (0, 1]");
  }
  if (max_spurious_span_len == 0) throw ConfigError("max_spurious_span_len must be >= 1");
}

void NoiseLedger::refresh_flags(const Corpus& corpus) {
  sentence_ids.clear();
  flags.clear();
  for (const Sentence& s : corpus.sentences) {
    sentence_ids.push_back(s.id);
    std::vector<TokenFlags> row(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      const Token& t = s.tokens[i];
      if (!t.gold || t.observed == *t.gold) continue;
      if (corpus.tagset.is_positive(t.observed)) {
        row[i].noisy_positive = true;
      } else {
        row[i].noisy_negative = true;
      }
    }
    flags.push_back(std::move(row));
  }
}

std::set<TokenRef> NoiseLedger::noisy_tokens() const {
  std::set<TokenRef> out;
  for (std::size_t s = 0; s < flags.size(); ++s) {
    for (std::size_t i = 0; i < flags[s].size(); ++i) {
      if (flags[s][i].noisy()) out.insert(TokenRef{sentence_ids[s], i});
    }
  }
  return out;
}

std::size_t NoiseLedger::num_noisy_positive() const {
  std::size_t n = 0;
  for (const auto& row : flags) {
    for (const TokenFlags& f : row) n += f.noisy_positive ? 1 : 0;
  }
  return n;
}

std::size_t NoiseLedger::num_noisy_negative() const {
  std::size_t n = 0;
  for (const auto& row : flags) {
    for (const TokenFlags& f : row) n += f.noisy_negative ? 1 : 0;
  }
  return n;
}

namespace {

void require_gold(const Corpus& corpus) {
  if (!corpus.has_gold()) throw DataError("perturbation requires gold tags on every token");
}

struct SpanCounts {
  std::size_t matched = 0;
  std::size_t observed = 0;
  std::size_t gold = 0;
};

SpanCounts count_spans(const Sentence& s, const TagSet& tagset) {
  const auto obs = s.observed_tags();
  const auto gold = s.gold_tags();
  const auto obs_spans = extract_spans(obs, tagset, s.id);
  const auto gold_spans = extract_spans(gold, tagset, s.id);
  const std::set<EntitySpan> gold_set(gold_spans.begin(), gold_spans.end());
  SpanCounts c;
  c.observed = obs_spans.size();
  c.gold = gold_spans.size();
  for (const EntitySpan& sp : obs_spans) c.matched += gold_set.count(sp);
  return c;
}

SpanCounts count_spans(const Corpus& corpus) {
  SpanCounts total;
  for (const Sentence& s : corpus.sentences) {
    const SpanCounts c = count_spans(s, corpus.tagset);
    total.matched += c.matched;
    total.observed += c.observed;
    total.gold += c.gold;
  }
  return total;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::string surface_of(const Sentence& s, const EntitySpan& span) {
  std::string out;
  for (std::size_t i = span.start; i < span.end; ++i) {
    if (i > span.start) out += ' ';
    out += s.tokens[i].surface;
  }
  return out;
}

}  // namespace

double entity_recall(const Corpus& corpus) {
  require_gold(corpus);
  const SpanCounts c = count_spans(corpus);
  return ratio(c.matched, c.gold);
}

double entity_precision(const Corpus& corpus) {
  require_gold(corpus);
  const SpanCounts c = count_spans(corpus);
  return ratio(c.matched, c.observed);
}

PerturbResult lower_recall(const Corpus& corpus, double target, Rng& rng, RemovalUnit unit) {
  if (!(target > 0.0 && target <= 1.0)) throw ConfigError("target recall must lie in (0, 1]");
  require_gold(corpus);

  PerturbResult result;
  result.corpus = corpus;
  Corpus& out = result.corpus;

  // Removal units in order of first appearance. Each holds the gold spans it
  // covers, keyed by sentence position.
  using Occurrence = std::pair<std::size_t, EntitySpan>;
  std::vector<std::vector<Occurrence>> units;
  std::map<std::pair<std::string, std::string>, std::size_t> identity_index;
  std::vector<SpanCounts> per_sentence(out.sentences.size());
  std::size_t matched = 0;
  std::size_t gold_total = 0;
  for (std::size_t p = 0; p < out.sentences.size(); ++p) {
    const Sentence& s = out.sentences[p];
    per_sentence[p] = count_spans(s, out.tagset);
    matched += per_sentence[p].matched;
    gold_total += per_sentence[p].gold;
    for (const EntitySpan& span : extract_spans(s.gold_tags(), out.tagset, s.id)) {
      if (unit == RemovalUnit::Occurrence) {
        units.push_back({{p, span}});
        continue;
      }
      auto key = std::make_pair(surface_of(s, span), span.type);
      auto [it, inserted] = identity_index.emplace(std::move(key), units.size());
      if (inserted) units.emplace_back();
      units[it->second].emplace_back(p, span);
    }
  }

  while (ratio(matched, gold_total) > target && !units.empty()) {
    const std::size_t pick = rng.uniform_index(units.size());
    std::vector<Occurrence> chosen = std::move(units[pick]);
    units.erase(units.begin() + static_cast<std::ptrdiff_t>(pick));

    std::set<std::size_t> touched;
    for (const auto& [p, span] : chosen) {
      Sentence& s = out.sentences[p];
      for (std::size_t i = span.start; i < span.end; ++i) s.tokens[i].observed = TagSet::kOutside;
      result.ledger.removed_entities.push_back(span);
      touched.insert(p);
    }
    for (std::size_t p : touched) {
      Sentence& s = out.sentences[p];
      auto tags = s.observed_tags();
      normalize_bio2(tags, out.tagset);
      for (std::size_t i = 0; i < tags.size(); ++i) s.tokens[i].observed = tags[i];
      matched -= per_sentence[p].matched;
      per_sentence[p] = count_spans(s, out.tagset);
      matched += per_sentence[p].matched;
    }
  }

  result.ledger.refresh_flags(out);
  const SpanCounts final_counts = count_spans(out);
  result.recall = ratio(final_counts.matched, final_counts.gold);
  result.precision = ratio(final_counts.matched, final_counts.observed);
  return result;
}

PerturbResult lower_precision(const Corpus& corpus, double target, Rng& rng,
                              std::size_t max_span_len) {
  if (!(target > 0.0 && target <= 1.0)) {
    throw ConfigError("target precision must lie in (0, 1]");
  }
  if (max_span_len == 0) throw ConfigError("max_span_len must be >= 1");
  require_gold(corpus);

  PerturbResult result;
  result.corpus = corpus;
  Corpus& out = result.corpus;
  const SpanCounts initial = count_spans(out);
  const std::size_t matched = initial.matched;
  std::size_t observed = initial.observed;

  auto eligible = [&](const Sentence& s, std::size_t start, std::size_t len) {
    if (start + len > s.size()) return false;
    for (std::size_t i = start; i < start + len; ++i) {
      if (s.tokens[i].observed != TagSet::kOutside || *s.tokens[i].gold != TagSet::kOutside) {
        return false;
      }
    }
    if (start > 0 && s.tokens[start - 1].observed != TagSet::kOutside) return false;
    if (start + len < s.size() && s.tokens[start + len].observed != TagSet::kOutside) {
      return false;
    }
    return true;
  };

  while (ratio(matched, observed) > target) {
    if (out.tagset.types().empty()) throw DataError("tag set has no entity types");
    // Candidate (sentence position, start) pairs per span length.
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> candidates(max_span_len);
    for (std::size_t p = 0; p < out.sentences.size(); ++p) {
      const Sentence& s = out.sentences[p];
      for (std::size_t start = 0; start < s.size(); ++start) {
        for (std::size_t len = 1; len <= max_span_len; ++len) {
          if (!eligible(s, start, len)) break;
          candidates[len - 1].emplace_back(p, start);
        }
      }
    }
    std::vector<std::size_t> lengths;
    for (std::size_t len = 1; len <= max_span_len; ++len) {
      if (!candidates[len - 1].empty()) lengths.push_back(len);
    }
    if (lengths.empty()) {
      throw DataError("no O run left for a spurious span; achieved precision " +
                      std::to_string(ratio(matched, observed)));
    }
    const std::size_t len = lengths[rng.uniform_index(lengths.size())];
    const auto [p, start] = candidates[len - 1][rng.uniform_index(candidates[len - 1].size())];
    const std::string& type = out.tagset.types()[rng.uniform_index(out.tagset.types().size())];

    Sentence& s = out.sentences[p];
    s.tokens[start].observed = out.tagset.id(Position::Begin, type);
    for (std::size_t i = start + 1; i < start + len; ++i) {
      s.tokens[i].observed = out.tagset.id(Position::Inside, type);
    }
    result.ledger.spurious_spans.push_back(EntitySpan{s.id, start, start + len, type});
    ++observed;
  }

  result.ledger.refresh_flags(out);
  const SpanCounts final_counts = count_spans(out);
  result.recall = ratio(final_counts.matched, final_counts.gold);
  result.precision = ratio(final_counts.matched, final_counts.observed);
  return result;
}

PerturbResult perturb(const Corpus& corpus, const PerturbationConfig& config) {
  config.validate();
  Rng rng = Rng::stream(config.seed, "perturb");
  PerturbResult recall_step = lower_recall(corpus, config.target_recall, rng, config.removal_unit);
  PerturbResult result = lower_precision(recall_step.corpus, config.target_precision, rng,
                                         config.max_spurious_span_len);
  result.ledger.removed_entities = std::move(recall_step.ledger.removed_entities);
  return result;
}

PrfScore score_noise_detection(const std::set<TokenRef>& flagged, const NoiseLedger& ledger) {
  const std::set<TokenRef> truth = ledger.noisy_tokens();
  std::size_t matched = 0;
  for (const TokenRef& t : flagged) matched += truth.count(t);
  return make_prf(matched, flagged.size(), truth.size());
}

namespace {

nlohmann::json spans_to_json(const std::vector<EntitySpan>& spans) {
  nlohmann::json arr = nlohmann::json::array();
  for (const EntitySpan& s : spans) {
    arr.push_back({{"sentence", s.sentence_id}, {"start", s.start}, {"end", s.end},
                   {"type", s.type}});
  }
  return arr;
}

std::vector<EntitySpan> spans_from_json(const nlohmann::json& arr) {
  std::vector<EntitySpan> out;
  for (const auto& j : arr) {
    out.push_back(EntitySpan{j.at("sentence").get<std::size_t>(), j.at("start").get<std::size_t>(),
                             j.at("end").get<std::size_t>(), j.at("type").get<std::string>()});
  }
  return out;
}

}  // namespace

// Per-token flags are stored as one string per sentence: '.' clean,
// 'P' noisy positive, 'N' noisy negative.
nlohmann::json to_json(const NoiseLedger& ledger) {
  nlohmann::json tokens = nlohmann::json::array();
  for (std::size_t s = 0; s < ledger.flags.size(); ++s) {
    std::string row;
    for (const TokenFlags& f : ledger.flags[s]) {
      row += f.noisy_positive ? 'P' : (f.noisy_negative ? 'N' : '.');
    }
    tokens.push_back({{"sentence", ledger.sentence_ids[s]}, {"flags", row}});
  }
  return {{"format", "noisyner-ledger"},
          {"version", 1},
          {"removed_entities", spans_to_json(ledger.removed_entities)},
          {"spurious_spans", spans_to_json(ledger.spurious_spans)},
          {"tokens", tokens}};
}

NoiseLedger ledger_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "noisyner-ledger") throw DataError("not a noise ledger");
  if (j.value("version", 0) != 1) throw DataError("unsupported ledger version");
  NoiseLedger ledger;
  ledger.removed_entities = spans_from_json(j.at("removed_entities"));
  ledger.spurious_spans = spans_from_json(j.at("spurious_spans"));
  for (const auto& t : j.at("tokens")) {
    ledger.sentence_ids.push_back(t.at("sentence").get<std::size_t>());
    std::vector<TokenFlags> row;
    for (char c : t.at("flags").get<std::string>()) {
      if (c != '.' && c != 'P' && c != 'N') throw DataError("bad ledger flag character");
      row.push_back(TokenFlags{c == 'P', c == 'N'});
    }
    ledger.flags.push_back(std::move(row));
  }
  return ledger;
}

void write_ledger(const std::filesystem::path& path, const NoiseLedger& ledger) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_json(ledger).dump(1) << '\n';
}

NoiseLedger read_ledger(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return ledger_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace noisyner
