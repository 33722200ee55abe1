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

#ifndef NOISYNER_CORPUS_HPP_
#define NOISYNER_CORPUS_HPP_

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "noisyner/common.hpp"

namespace noisyner {

enum class Position : std::uint8_t { Outside, Begin, Inside };

struct Label {
  Position position = Position::Outside;
  std::string type;  // empty for O

  bool operator==(const Label&) const = default;
};

/// Label alphabet: O followed by a (B-T, I-T) pair per entity type, in the
/// order the types were first added. O always has id 0.
class TagSet {
 public:
  static constexpr LabelId kOutside = 0;

  TagSet();

  /// Adds B-type and I-type if absent. Returns the B- label id.
  LabelId add_type(std::string_view type);

  std::optional<LabelId> find(Position position, std::string_view type) const;
  LabelId id(Position position, std::string_view type) const;

  /// Looks up a tag string such as "B-LOC" or "O", adding its type if new.
  LabelId intern(std::string_view tag);
  /// Looks up a tag string; throws DataError for types outside the set.
  LabelId lookup(std::string_view tag) const;

  std::string name(LabelId id) const;
  const Label& label(LabelId id) const { return labels_.at(static_cast<std::size_t>(id)); }
  bool is_positive(LabelId id) const { return id != kOutside; }
  Position position(LabelId id) const { return label(id).position; }
  const std::string& type(LabelId id) const { return label(id).type; }

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& types() const { return types_; }
  const std::vector<Label>& labels() const { return labels_; }

  /// Positive labels whose position part equals that of \p id.
  std::vector<LabelId> same_position(LabelId id) const;
  /// Positive labels whose type part equals that of \p id.
  std::vector<LabelId> same_type(LabelId id) const;

  bool operator==(const TagSet& other) const { return labels_ == other.labels_; }

 private:
  std::vector<Label> labels_;
  std::vector<std::string> types_;
};

/// Splits "B-LOC" into (Begin, "LOC"). Throws DataError on unknown prefixes.
Label parse_tag(std::string_view tag);

struct Token {
  std::string surface;
  LabelId observed = TagSet::kOutside;
  std::optional<LabelId> gold;
};

struct Sentence {
  std::size_t id = 0;
  std::vector<Token> tokens;

  std::size_t size() const { return tokens.size(); }
  std::vector<LabelId> observed_tags() const;
  /// Throws DataError if any token lacks a gold tag.
  std::vector<LabelId> gold_tags() const;
};

struct Corpus {
  TagSet tagset;
  std::vector<Sentence> sentences;

  bool empty() const { return sentences.empty(); }
  std::size_t size() const { return sentences.size(); }
  std::size_t num_tokens() const;
  /// True when every token carries a gold tag.
  bool has_gold() const;
  std::vector<std::vector<LabelId>> observed_tags() const;
  std::vector<std::vector<LabelId>> gold_tags() const;
};

/// Copies observed tags into the gold slot (a clean corpus is its own gold).
Corpus with_gold_from_observed(Corpus corpus);
/// Drops every gold tag.
Corpus strip_gold(Corpus corpus);
/// Sentences at the given positions; the result shares the tag set.
Corpus subset(const Corpus& corpus, std::span<const std::size_t> positions);

struct ConllOptions {
  std::size_t token_column = 0;
  std::size_t tag_column = 1;
  std::optional<std::size_t> gold_column;
};

/// Reads whitespace-separated columns with blank-line sentence breaks.
/// IOB1 and BIO2 tags are both normalised to BIO2. Lines whose token is
/// "-DOCSTART-" are skipped. Entity types extend \p tagset in order of first
/// appearance.
Corpus parse_conll(std::string_view text, const ConllOptions& options = {},
                   TagSet tagset = {});
Corpus read_conll(const std::filesystem::path& path, const ConllOptions& options = {},
                  TagSet tagset = {});

/// "token tag" per line; with \p include_gold a third gold column is added.
std::string to_conll(const Corpus& corpus, bool include_gold = false);
void write_conll(const std::filesystem::path& path, const Corpus& corpus,
                 bool include_gold = false);

/// Rewrites every I-X that does not continue a B-X/I-X chunk into B-X.
void normalize_bio2(std::span<LabelId> tags, const TagSet& tagset);

struct EntitySpan {
  std::size_t sentence_id = 0;
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive
  std::string type;

  auto operator<=>(const EntitySpan&) const = default;
};

/// Maximal BIO chunks. An I-X that does not continue an X chunk opens a new
/// chunk, so any label sequence decodes.
std::vector<EntitySpan> extract_spans(std::span<const LabelId> tags, const TagSet& tagset,
                                      std::size_t sentence_id = 0);

/// Inverse of extract_spans for non-overlapping spans inside [0, length).
std::vector<LabelId> tags_of_spans(std::span<const EntitySpan> spans, std::size_t length,
                                   const TagSet& tagset);

struct PrfScore {
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 1.0;
  std::size_t matched = 0;
  std::size_t predicted = 0;
  std::size_t reference = 0;
};

/// P/R/F1 from counts. 0/0 is 1.0 for P and R; F1 is 0 when P+R is 0.
PrfScore make_prf(std::size_t matched, std::size_t predicted, std::size_t reference);

struct EntityReport {
  PrfScore overall;
  std::map<std::string, PrfScore> per_type;
};

/// Exact-match entity scoring: a predicted span counts iff its boundaries
/// and type equal a gold span's.
EntityReport entity_prf(std::span<const std::vector<LabelId>> predicted,
                        std::span<const std::vector<LabelId>> gold, const TagSet& tagset);

}  // namespace noisyner

#endif  // NOISYNER_CORPUS_HPP_
