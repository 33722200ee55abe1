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

#ifndef NOISYNER_EMISSION_HPP_
#define NOISYNER_EMISSION_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "noisyner/common.hpp"
#include "noisyner/corpus.hpp"

namespace noisyner {

struct FeatureValue {
  std::uint32_t id = 0;
  double value = 1.0;

  bool operator==(const FeatureValue&) const = default;
};

/// Sparse features of one token. Ids are unique within a vector.
using FeatureVector = std::vector<FeatureValue>;
using SentenceFeatures = std::vector<FeatureVector>;

/// Character classes per code point: upper X, lower x, digit d, others kept.
std::string word_shape(std::string_view word);

/// Named binary features of token \p i: bias, lowercased word, shape,
/// 1-3 character prefixes and suffixes, capitalisation flags, digit flag and
/// the neighbouring lowercased words (with <s>/</s> at the boundaries).
std::vector<std::string> token_features(const Sentence& sentence, std::size_t i);

class FeatureDictionary {
 public:
  /// Returns the id of \p name, adding it unless the dictionary is frozen.
  std::optional<std::uint32_t> intern(std::string_view name);
  std::optional<std::uint32_t> find(std::string_view name) const;

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }
  std::size_t size() const { return names_.size(); }
  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  const std::vector<std::string>& names() const { return names_; }

  /// Interns every token feature of the corpus, then freezes.
  static FeatureDictionary build(const Corpus& corpus);
  static FeatureDictionary from_names(std::vector<std::string> names);

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
  bool frozen_ = false;
};

/// Features of token \p i mapped through \p dict. Unknown names are dropped,
/// which is the same as a zero-weight null feature.
FeatureVector featurize(const Sentence& sentence, std::size_t i, const FeatureDictionary& dict);
SentenceFeatures featurize_sentence(const Sentence& sentence, const FeatureDictionary& dict);

/// Source of per-token, per-label log-potentials. Anything that can score a
/// sentence and push a gradient back into a flat parameter vector fits.
class EmissionScorer {
 public:
  virtual ~EmissionScorer() = default;

  virtual std::size_t num_labels() const = 0;
  /// [n x num_labels] log-potentials.
  virtual Matrix score(const Sentence& sentence) const = 0;
  /// acc += d(score)/d(params)^T * grad, with grad shaped like score().
  virtual void accumulate_gradient(const Sentence& sentence, const Matrix& grad,
                                   std::span<double> acc) const = 0;
  virtual std::span<double> parameters() = 0;
  virtual std::span<const double> parameters() const = 0;
};

/// Linear scorer: row i of the score table is features(i) . W.
class LinearEmissionModel final : public EmissionScorer {
 public:
  LinearEmissionModel() = default;
  LinearEmissionModel(FeatureDictionary dict, std::size_t num_labels);

  std::size_t num_labels() const override { return num_labels_; }
  std::size_t num_features() const { return dict_.size(); }
  const FeatureDictionary& dictionary() const { return dict_; }

  Matrix score(const Sentence& sentence) const override;
  Matrix score(const SentenceFeatures& features) const;

  void accumulate_gradient(const Sentence& sentence, const Matrix& grad,
                           std::span<double> acc) const override;
  void accumulate_gradient(const SentenceFeatures& features, const Matrix& grad,
                           std::span<double> acc) const;

  std::span<double> parameters() override { return weights_; }
  std::span<const double> parameters() const override { return weights_; }

  double& weight(std::uint32_t feature, LabelId label) {
    return weights_[feature * num_labels_ + static_cast<std::size_t>(label)];
  }
  double weight(std::uint32_t feature, LabelId label) const {
    return weights_[feature * num_labels_ + static_cast<std::size_t>(label)];
  }

  SentenceFeatures encode(const Sentence& sentence) const {
    return featurize_sentence(sentence, dict_);
  }

 private:
  FeatureDictionary dict_;
  std::size_t num_labels_ = 0;
  std::vector<double> weights_;  // [num_features x num_labels], row-major
};

}  // namespace noisyner

#endif  // NOISYNER_EMISSION_HPP_
