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

#ifndef NOISYNER_NOISE_HPP_
#define NOISYNER_NOISE_HPP_

#include <compare>
#include <cstdint>
#include <filesystem>
#include <set>
#include <vector>

#include <nlohmann/json.hpp>

#include "noisyner/corpus.hpp"
#include "noisyner/rng.hpp"

namespace noisyner {

/// What a recall-lowering step removes: every occurrence of one distinct
/// (surface, type) entity, or a single occurrence.
enum class RemovalUnit { Identity, Occurrence };

struct PerturbationConfig {
  double target_recall = 0.5;
  double target_precision = 0.9;
  std::uint64_t seed = 0;
  std::size_t max_spurious_span_len = 3;
  RemovalUnit removal_unit = RemovalUnit::Identity;

  void validate() const;
};

/// (sentence id, token index)
struct TokenRef {
  std::size_t sentence_id = 0;
  std::size_t token = 0;

  auto operator<=>(const TokenRef&) const = default;
};

struct TokenFlags {
  bool noisy_positive = false;  // observed entity label differs from gold
  bool noisy_negative = false;  // observed O where gold is an entity

  bool noisy() const { return noisy_positive || noisy_negative; }
  bool operator==(const TokenFlags&) const = default;
};

/// Ground truth of a perturbation run.
struct NoiseLedger {
  std::vector<EntitySpan> removed_entities;
  std::vector<EntitySpan> spurious_spans;
  std::vector<std::size_t> sentence_ids;        // aligned with flags
  std::vector<std::vector<TokenFlags>> flags;  // per sentence, per token

  /// Recomputes the per-token flags from observed vs gold tags.
  void refresh_flags(const Corpus& corpus);
  std::set<TokenRef> noisy_tokens() const;
  std::size_t num_noisy_positive() const;
  std::size_t num_noisy_negative() const;
};

struct PerturbResult {
  Corpus corpus;
  NoiseLedger ledger;
  double recall = 1.0;
  double precision = 1.0;
};

/// Entity recall of observed against gold: surviving gold spans / gold spans.
double entity_recall(const Corpus& corpus);
/// Entity precision of observed against gold: true observed spans / observed spans.
double entity_precision(const Corpus& corpus);

/// Retags randomly drawn gold entities to O until recall <= target.
PerturbResult lower_recall(const Corpus& corpus, double target, Rng& rng,
                           RemovalUnit unit = RemovalUnit::Identity);

/// Tags random all-O runs as entities until precision <= target. A run is
/// eligible only when all its tokens are O in both observed and gold tags and
/// its neighbours are observed O, so no existing chunk is touched.
PerturbResult lower_precision(const Corpus& corpus, double target, Rng& rng,
                              std::size_t max_span_len = 3);

/// Recall lowering followed by precision lowering, with a merged ledger.
PerturbResult perturb(const Corpus& corpus, const PerturbationConfig& config);

/// Token-level P/R/F1 of flagged tokens against the ledger's noisy tokens.
PrfScore score_noise_detection(const std::set<TokenRef>& flagged, const NoiseLedger& ledger);

nlohmann::json to_json(const NoiseLedger& ledger);
NoiseLedger ledger_from_json(const nlohmann::json& j);
void write_ledger(const std::filesystem::path& path, const NoiseLedger& ledger);
NoiseLedger read_ledger(const std::filesystem::path& path);

}  // namespace noisyner

#endif  // NOISYNER_NOISE_HPP_
