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

#include "noisyner/emission.hpp"

#include <algorithm>

namespace noisyner {
namespace {

// Splits UTF-8 into code points; invalid bytes become single units.
std::vector<std::string_view> code_points(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (c >= 0xF0) {
      len = 4;
    } else if (c >= 0xE0) {
      len = 3;
    } else if (c >= 0xC0) {
      len = 2;
    }
    if (i + len > s.size()) len = 1;
    out.push_back(s.substr(i, len));
    i += len;
  }
  return out;
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string join(const std::vector<std::string_view>& parts, std::size_t from, std::size_t to) {
  std::string out;
  for (std::size_t i = from; i < to; ++i) out += parts[i];
  return out;
}

}  // namespace

std::string word_shape(std::string_view word) {
  std::string out;
  for (std::string_view cp : code_points(word)) {
    if (cp.size() == 1 && is_upper(cp[0])) {
      out += 'X';
    } else if (cp.size() == 1 && is_lower(cp[0])) {
      out += 'x';
    } else if (cp.size() == 1 && is_digit(cp[0])) {
      out += 'd';
    } else {
      out += cp;
    }
  }
  return out;
}

std::vector<std::string> token_features(const Sentence& sentence, std::size_t i) {
  const std::string& word = sentence.tokens.at(i).surface;
  const std::string lower = lower_ascii(word);
  const auto cps = code_points(lower);

  std::vector<std::string> f;
  f.reserve(16);
  f.emplace_back("bias");
  f.push_back("word=" + lower);
  f.push_back("shape=" + word_shape(word));
  for (std::size_t k = 1; k <= 3 && k <= cps.size(); ++k) {
    f.push_back("prefix" + std::to_string(k) + "=" + join(cps, 0, k));
    f.push_back("suffix" + std::to_string(k) + "=" + join(cps, cps.size() - k, cps.size()));
  }
  if (!word.empty() && is_upper(word[0])) f.emplace_back("cap=true");
  const bool has_alpha = std::any_of(word.begin(), word.end(),
                                     [](char c) { return is_upper(c) || is_lower(c); });
  if (has_alpha && std::none_of(word.begin(), word.end(), is_lower)) f.emplace_back("allcaps=true");
  if (std::any_of(word.begin(), word.end(), is_digit)) f.emplace_back("digit=true");
  f.push_back("prev=" + (i == 0 ? std::string("<s>") : lower_ascii(sentence.tokens[i - 1].surface)));
  f.push_back("next=" + (i + 1 == sentence.size() ? std::string("</s>")
                                                  : lower_ascii(sentence.tokens[i + 1].surface)));
  return f;
}

std::optional<std::uint32_t> FeatureDictionary::intern(std::string_view name) {
  if (auto id = find(name)) return id;
  if (frozen_) return std::nullopt;
  const auto id = static_cast<std::uint32_t>(names_.size());
  names_.emplace_back(name);
  index_.emplace(names_.back(), id);
  return id;
}

std::optional<std::uint32_t> FeatureDictionary::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

FeatureDictionary FeatureDictionary::build(const Corpus& corpus) {
  FeatureDictionary dict;
  for (const Sentence& s : corpus.sentences) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (const std::string& name : token_features(s, i)) dict.intern(name);
    }
  }
  dict.freeze();
  return dict;
}

FeatureDictionary FeatureDictionary::from_names(std::vector<std::string> names) {
  FeatureDictionary dict;
  for (const std::string& n : names) {
    if (dict.find(n)) throw DataError("duplicate feature name '" + n + "'");
    dict.intern(n);
  }
  dict.freeze();
  return dict;
}

FeatureVector featurize(const Sentence& sentence, std::size_t i, const FeatureDictionary& dict) {
  FeatureVector fv;
  for (const std::string& name : token_features(sentence, i)) {
    if (auto id = dict.find(name)) fv.push_back(FeatureValue{*id, 1.0});
  }
  std::sort(fv.begin(), fv.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  fv.erase(std::unique(fv.begin(), fv.end(),
                       [](const auto& a, const auto& b) { return a.id == b.id; }),
           fv.end());
  return fv;
}

SentenceFeatures featurize_sentence(const Sentence& sentence, const FeatureDictionary& dict) {
  SentenceFeatures out;
  out.reserve(sentence.size());
  for (std::size_t i = 0; i < sentence.size(); ++i) out.push_back(featurize(sentence, i, dict));
  return out;
}

LinearEmissionModel::LinearEmissionModel(FeatureDictionary dict, std::size_t num_labels)
    : dict_(std::move(dict)), num_labels_(num_labels), weights_(dict_.size() * num_labels, 0.0) {}

Matrix LinearEmissionModel::score(const Sentence& sentence) const {
  return score(encode(sentence));
}

Matrix LinearEmissionModel::score(const SentenceFeatures& features) const {
  Matrix out(features.size(), num_labels_);
  for (std::size_t i = 0; i < features.size(); ++i) {
    auto row = out.row(i);
    for (const FeatureValue& f : features[i]) {
      const double* w = weights_.data() + static_cast<std::size_t>(f.id) * num_labels_;
      for (std::size_t k = 0; k < num_labels_; ++k) row[k] += f.value * w[k];
    }
  }
  return out;
}

void LinearEmissionModel::accumulate_gradient(const Sentence& sentence, const Matrix& grad,
                                              std::span<double> acc) const {
  accumulate_gradient(encode(sentence), grad, acc);
}

void LinearEmissionModel::accumulate_gradient(const SentenceFeatures& features,
                                              const Matrix& grad, std::span<double> acc) const {
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto g = grad.row(i);
    for (const FeatureValue& f : features[i]) {
      double* a = acc.data() + static_cast<std::size_t>(f.id) * num_labels_;
      for (std::size_t k = 0; k < num_labels_; ++k) a[k] += f.value * g[k];
    }
  }
}

}  // namespace noisyner
