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

#ifndef NOISYNER_MODEL_HPP_
#define NOISYNER_MODEL_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "noisyner/corpus.hpp"
#include "noisyner/emission.hpp"
#include "noisyner/lattice.hpp"

namespace noisyner {

/// Linear-chain CRF: a linear emission scorer plus a transition table over
/// one tag set.
class CrfModel {
 public:
  CrfModel() = default;
  CrfModel(TagSet tagset, FeatureDictionary dict);

  /// Zero-initialised model whose features come from \p corpus.
  static CrfModel initialize(const Corpus& corpus, bool bio_constraints = false);

  const TagSet& tagset() const { return tagset_; }
  std::size_t num_labels() const { return tagset_.size(); }
  LinearEmissionModel& emission() { return emission_; }
  const LinearEmissionModel& emission() const { return emission_; }
  TransitionModel& transitions() { return transitions_; }
  const TransitionModel& transitions() const { return transitions_; }

  /// Emission weights followed by transition weights.
  std::size_t num_parameters() const;

  SentenceFeatures encode(const Sentence& sentence) const { return emission_.encode(sentence); }
  std::vector<SentenceFeatures> encode(const Corpus& corpus) const;

  Lattice lattice(const Sentence& sentence) const;
  Lattice lattice(const SentenceFeatures& features) const;

  std::vector<LabelId> predict(const Sentence& sentence) const;
  std::vector<std::vector<LabelId>> predict(const Corpus& corpus) const;
  /// Copy of \p corpus with observed tags replaced by Viterbi output. Gold
  /// tags are kept.
  Corpus annotate(const Corpus& corpus) const;

  bool operator==(const CrfModel& other) const;

 private:
  TagSet tagset_;
  LinearEmissionModel emission_;
  TransitionModel transitions_;
};

/// Entity scores of \p model on \p corpus, against gold tags when every token
/// has one and against observed tags otherwise.
EntityReport evaluate(const CrfModel& model, const Corpus& corpus);

/// Reference tags for scoring: gold when present, observed otherwise.
std::vector<std::vector<LabelId>> reference_tags(const Corpus& corpus);

struct Checkpoint {
  CrfModel model;
  nlohmann::json config;  // resolved training configuration
  std::string config_fingerprint;
  int round = 0;
  int epoch = 0;
};

/// 16 hex digits of FNV-1a over the compact dump of \p j.
std::string fingerprint(const nlohmann::json& j);

nlohmann::json to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace noisyner

#endif  // NOISYNER_MODEL_HPP_
