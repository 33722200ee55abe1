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

#include "noisyner/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace noisyner {

TagSet::TagSet() { labels_.push_back(Label{Position::Outside, ""}); }

LabelId TagSet::add_type(std::string_view type) {
  if (type.empty()) throw DataError("entity type must be non-empty");
  if (auto b = find(Position::Begin, type)) return *b;
  types_.emplace_back(type);
  labels_.push_back(Label{Position::Begin, std::string(type)});
  labels_.push_back(Label{Position::Inside, std::string(type)});
  return static_cast<LabelId>(labels_.size() - 2);
}

std::optional<LabelId> TagSet::find(Position position, std::string_view type) const {
  if (position == Position::Outside) return kOutside;
  for (std::size_t k = 1; k < labels_.size(); ++k) {
    if (labels_[k].position == position && labels_[k].type == type) {
      return static_cast<LabelId>(k);
    }
  }
  return std::nullopt;
}

LabelId TagSet::id(Position position, std::string_view type) const {
  if (auto found = find(position, type)) return *found;
  throw DataError("unknown entity type '" + std::string(type) + "'");
}

LabelId TagSet::intern(std::string_view tag) {
  const Label parsed = parse_tag(tag);
  if (parsed.position == Position::Outside) return kOutside;
  add_type(parsed.type);
  return id(parsed.position, parsed.type);
}

LabelId TagSet::lookup(std::string_view tag) const {
  const Label parsed = parse_tag(tag);
  return id(parsed.position, parsed.type);
}

std::string TagSet::name(LabelId id) const {
  const Label& l = label(id);
  switch (l.position) {
    case Position::Outside:
      return "O";
    case Position::Begin:
      return "B-" + l.type;
    case Position::Inside:
      return "I-" + l.type;
  }
  return "O";
}

std::vector<LabelId> TagSet::same_position(LabelId id) const {
  std::vector<LabelId> out;
  const Position p = position(id);
  for (std::size_t k = 1; k < labels_.size(); ++k) {
    if (labels_[k].position == p) out.push_back(static_cast<LabelId>(k));
  }
  return out;
}

std::vector<LabelId> TagSet::same_type(LabelId id) const {
  std::vector<LabelId> out;
  const std::string& t = type(id);
  for (std::size_t k = 1; k < labels_.size(); ++k) {
    if (labels_[k].type == t) out.push_back(static_cast<LabelId>(k));
  }
  return out;
}

Label parse_tag(std::string_view tag) {
  if (tag == "O") return Label{Position::Outside, ""};
  if (tag.size() > 2 && tag[1] == '-') {
    if (tag[0] == 'B') return Label{Position::Begin, std::string(tag.substr(2))};
    if (tag[0] == 'I') return Label{Position::Inside, std::string(tag.substr(2))};
  }
  throw DataError("unknown tag '" + std::string(tag) + "'");
}

std::vector<LabelId> Sentence::observed_tags() const {
  std::vector<LabelId> out;
  out.reserve(tokens.size());
  for (const Token& t : tokens) out.push_back(t.observed);
  return out;
}

std::vector<LabelId> Sentence::gold_tags() const {
  std::vector<LabelId> out;
  out.reserve(tokens.size());
  for (const Token& t : tokens) {
    if (!t.gold) throw DataError("sentence " + std::to_string(id) + " has no gold tags");
    out.push_back(*t.gold);
  }
  return out;
}

std::size_t Corpus::num_tokens() const {
  std::size_t n = 0;
  for (const Sentence& s : sentences) n += s.size();
  return n;
}

bool Corpus::has_gold() const {
  return std::all_of(sentences.begin(), sentences.end(), [](const Sentence& s) {
    return std::all_of(s.tokens.begin(), s.tokens.end(),
                       [](const Token& t) { return t.gold.has_value(); });
  });
}

std::vector<std::vector<LabelId>> Corpus::observed_tags() const {
  std::vector<std::vector<LabelId>> out;
  out.reserve(sentences.size());
  for (const Sentence& s : sentences) out.push_back(s.observed_tags());
  return out;
}

std::vector<std::vector<LabelId>> Corpus::gold_tags() const {
  std::vector<std::vector<LabelId>> out;
  out.reserve(sentences.size());
  for (const Sentence& s : sentences) out.push_back(s.gold_tags());
  return out;
}

Corpus with_gold_from_observed(Corpus corpus) {
  for (Sentence& s : corpus.sentences) {
    for (Token& t : s.tokens) t.gold = t.observed;
  }
  return corpus;
}

Corpus strip_gold(Corpus corpus) {
  for (Sentence& s : corpus.sentences) {
    for (Token& t : s.tokens) t.gold.reset();
  }
  return corpus;
}

Corpus subset(const Corpus& corpus, std::span<const std::size_t> positions) {
  Corpus out;
  out.tagset = corpus.tagset;
  out.sentences.reserve(positions.size());
  for (std::size_t p : positions) out.sentences.push_back(corpus.sentences.at(p));
  return out;
}

void normalize_bio2(std::span<LabelId> tags, const TagSet& tagset) {
  LabelId prev = TagSet::kOutside;
  for (LabelId& tag : tags) {
    if (tagset.position(tag) == Position::Inside) {
      const bool continues = prev != TagSet::kOutside && tagset.type(prev) == tagset.type(tag);
      if (!continues) tag = tagset.id(Position::Begin, tagset.type(tag));
    }
    prev = tag;
  }
}

namespace {

std::vector<std::string_view> split_columns(std::string_view line) {
  std::vector<std::string_view> cols;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    cols.push_back(line.substr(i, j - i));
    i = j;
  }
  return cols;
}

struct PendingSentence {
  std::vector<Token> tokens;
  std::vector<LabelId> observed;
  std::vector<LabelId> gold;
};

}  // namespace

Corpus parse_conll(std::string_view text, const ConllOptions& options, TagSet tagset) {
  Corpus corpus;
  corpus.tagset = std::move(tagset);
  const std::size_t needed =
      std::max({options.token_column, options.tag_column, options.gold_column.value_or(0)}) + 1;

  std::optional<std::size_t> expected_columns;
  PendingSentence pending;
  auto flush = [&] {
    if (pending.tokens.empty()) return;
    normalize_bio2(pending.observed, corpus.tagset);
    if (options.gold_column) normalize_bio2(pending.gold, corpus.tagset);
    Sentence s;
    s.id = corpus.sentences.size();
    s.tokens = std::move(pending.tokens);
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      s.tokens[i].observed = pending.observed[i];
      if (options.gold_column) s.tokens[i].gold = pending.gold[i];
    }
    corpus.sentences.push_back(std::move(s));
    pending = PendingSentence{};
  };

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    const auto cols = split_columns(line);
    if (cols.empty()) {
      flush();
      if (eol == text.size()) break;
      continue;
    }
    if (cols.size() < needed) {
      throw ParseError(line_no, "expected at least " + std::to_string(needed) +
                                    " columns, found " + std::to_string(cols.size()));
    }
    if (expected_columns && cols.size() != *expected_columns) {
      throw ParseError(line_no, "expected " + std::to_string(*expected_columns) +
                                    " columns, found " + std::to_string(cols.size()));
    }
    expected_columns = cols.size();
    if (cols[options.token_column] == "-DOCSTART-") continue;

    try {
      pending.observed.push_back(corpus.tagset.intern(cols[options.tag_column]));
      if (options.gold_column) {
        pending.gold.push_back(corpus.tagset.intern(cols[*options.gold_column]));
      }
    } catch (const DataError& e) {
      throw ParseError(line_no, e.what());
    }
    pending.tokens.push_back(Token{std::string(cols[options.token_column]), 0, std::nullopt});
    if (eol == text.size()) break;
  }
  flush();
  return corpus;
}

Corpus read_conll(const std::filesystem::path& path, const ConllOptions& options,
                  TagSet tagset) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_conll(buf.str(), options, std::move(tagset));
}

std::string to_conll(const Corpus& corpus, bool include_gold) {
  std::string out;
  for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
    if (s > 0) out += '\n';
    for (const Token& t : corpus.sentences[s].tokens) {
      out += t.surface;
      out += ' ';
      out += corpus.tagset.name(t.observed);
      if (include_gold) {
        out += ' ';
        out += t.gold ? corpus.tagset.name(*t.gold) : "O";
      }
      out += '\n';
    }
  }
  return out;
}

void write_conll(const std::filesystem::path& path, const Corpus& corpus, bool include_gold) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_conll(corpus, include_gold);
}

std::vector<EntitySpan> extract_spans(std::span<const LabelId> tags, const TagSet& tagset,
                                      std::size_t sentence_id) {
  std::vector<EntitySpan> spans;
  std::optional<EntitySpan> open;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const Label& l = tagset.label(tags[i]);
    const bool continues =
        l.position == Position::Inside && open.has_value() && open->type == l.type;
    if (continues) continue;
    if (open) {
      open->end = i;
      spans.push_back(*open);
      open.reset();
    }
    if (l.position != Position::Outside) open = EntitySpan{sentence_id, i, 0, l.type};
  }
  if (open) {
    open->end = tags.size();
    spans.push_back(*open);
  }
  return spans;
}

std::vector<LabelId> tags_of_spans(std::span<const EntitySpan> spans, std::size_t length,
                                   const TagSet& tagset) {
  std::vector<LabelId> tags(length, TagSet::kOutside);
  for (const EntitySpan& span : spans) {
    if (span.start >= span.end || span.end > length) throw DataError("span out of range");
    tags[span.start] = tagset.id(Position::Begin, span.type);
    for (std::size_t i = span.start + 1; i < span.end; ++i) {
      tags[i] = tagset.id(Position::Inside, span.type);
    }
  }
  return tags;
}

PrfScore make_prf(std::size_t matched, std::size_t predicted, std::size_t reference) {
  PrfScore s;
  s.matched = matched;
  s.predicted = predicted;
  s.reference = reference;
  s.precision = predicted == 0 ? 1.0 : static_cast<double>(matched) / predicted;
  s.recall = reference == 0 ? 1.0 : static_cast<double>(matched) / reference;
  const double denom = s.precision + s.recall;
  s.f1 = denom == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / denom;
  return s;
}

EntityReport entity_prf(std::span<const std::vector<LabelId>> predicted,
                        std::span<const std::vector<LabelId>> gold, const TagSet& tagset) {
  if (predicted.size() != gold.size()) {
    throw DataError("prediction has " + std::to_string(predicted.size()) +
                    " sentences, gold has " + std::to_string(gold.size()));
  }
  struct Counts {
    std::size_t matched = 0, predicted = 0, reference = 0;
  };
  std::map<std::string, Counts> per_type;
  for (const std::string& t : tagset.types()) per_type[t];
  Counts total;

  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (predicted[s].size() != gold[s].size()) {
      throw DataError("sentence " + std::to_string(s) + ": prediction length " +
                      std::to_string(predicted[s].size()) + " != gold length " +
                      std::to_string(gold[s].size()));
    }
    const auto pred_spans = extract_spans(predicted[s], tagset, s);
    const auto gold_spans = extract_spans(gold[s], tagset, s);
    const std::set<EntitySpan> gold_set(gold_spans.begin(), gold_spans.end());
    for (const EntitySpan& p : pred_spans) {
      ++per_type[p.type].predicted;
      ++total.predicted;
      if (gold_set.count(p)) {
        ++per_type[p.type].matched;
        ++total.matched;
      }
    }
    for (const EntitySpan& g : gold_spans) {
      ++per_type[g.type].reference;
      ++total.reference;
    }
  }

  EntityReport report;
  report.overall = make_prf(total.matched, total.predicted, total.reference);
  for (const auto& [type, c] : per_type) {
    report.per_type[type] = make_prf(c.matched, c.predicted, c.reference);
  }
  return report;
}

}  // namespace noisyner
