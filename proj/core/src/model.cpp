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

#include "noisyner/model.hpp"

#include <cstdio>
#include <fstream>

namespace noisyner {

CrfModel::CrfModel(TagSet tagset, FeatureDictionary dict)
    : tagset_(std::move(tagset)),
      emission_(std::move(dict), tagset_.size()),
      transitions_(tagset_.size()) {}

CrfModel CrfModel::initialize(const Corpus& corpus, bool bio_constraints) {
  CrfModel model(corpus.tagset, FeatureDictionary::build(corpus));
  if (bio_constraints) model.transitions_.restrict_to_bio(model.tagset_);
  return model;
}

std::size_t CrfModel::num_parameters() const {
  return emission_.parameters().size() + transitions_.parameters().size();
}

std::vector<SentenceFeatures> CrfModel::encode(const Corpus& corpus) const {
  std::vector<SentenceFeatures> out;
  out.reserve(corpus.size());
  for (const Sentence& s : corpus.sentences) out.push_back(encode(s));
  return out;
}

Lattice CrfModel::lattice(const Sentence& sentence) const { return lattice(encode(sentence)); }

Lattice CrfModel::lattice(const SentenceFeatures& features) const {
  return make_lattice(emission_.score(features), transitions_);
}

std::vector<LabelId> CrfModel::predict(const Sentence& sentence) const {
  return viterbi(lattice(sentence)).tags;
}

std::vector<std::vector<LabelId>> CrfModel::predict(const Corpus& corpus) const {
  std::vector<std::vector<LabelId>> out;
  out.reserve(corpus.size());
  for (const Sentence& s : corpus.sentences) out.push_back(predict(s));
  return out;
}

Corpus CrfModel::annotate(const Corpus& corpus) const {
  Corpus out = corpus;
  for (Sentence& s : out.sentences) {
    const auto tags = predict(s);
    for (std::size_t i = 0; i < tags.size(); ++i) s.tokens[i].observed = tags[i];
  }
  return out;
}

bool CrfModel::operator==(const CrfModel& other) const {
  const auto same = [](std::span<const double> a, std::span<const double> b) {
    return std::equal(a.begin(), a.end(), b.begin(), b.end());
  };
  return tagset_ == other.tagset_ &&
         emission_.dictionary().names() == other.emission_.dictionary().names() &&
         same(emission_.parameters(), other.emission_.parameters()) &&
         same(transitions_.parameters(), other.transitions_.parameters()) &&
         transitions_.allowed_mask() == other.transitions_.allowed_mask();
}

std::vector<std::vector<LabelId>> reference_tags(const Corpus& corpus) {
  return corpus.has_gold() ? corpus.gold_tags() : corpus.observed_tags();
}

EntityReport evaluate(const CrfModel& model, const Corpus& corpus) {
  const auto predicted = model.predict(corpus);
  const auto reference = reference_tags(corpus);
  return entity_prf(predicted, reference, corpus.tagset);
}

std::string fingerprint(const nlohmann::json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json to_json(const Checkpoint& checkpoint) {
  const CrfModel& m = checkpoint.model;
  nlohmann::json labels = nlohmann::json::array();
  for (std::size_t k = 0; k < m.tagset().size(); ++k) {
    labels.push_back(m.tagset().name(static_cast<LabelId>(k)));
  }
  const auto ew = m.emission().parameters();
  const auto tw = m.transitions().parameters();
  return {{"format", "noisyner-checkpoint"},
          {"version", 1},
          {"labels", labels},
          {"features", m.emission().dictionary().names()},
          {"emission_weights", std::vector<double>(ew.begin(), ew.end())},
          {"transition_weights", std::vector<double>(tw.begin(), tw.end())},
          {"transition_allowed", m.transitions().allowed_mask()},
          {"config", checkpoint.config},
          {"config_fingerprint", checkpoint.config_fingerprint},
          {"round", checkpoint.round},
          {"epoch", checkpoint.epoch}};
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "noisyner-checkpoint") throw DataError("not a checkpoint");
  if (j.value("version", 0) != 1) throw DataError("unsupported checkpoint version");

  TagSet tagset;
  const auto labels = j.at("labels").get<std::vector<std::string>>();
  if (labels.empty() || labels[0] != "O") throw DataError("checkpoint tag set must start with O");
  for (const std::string& l : labels) tagset.intern(l);
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (tagset.name(static_cast<LabelId>(k)) != labels[k]) {
      throw DataError("checkpoint labels are not in canonical order");
    }
  }

  Checkpoint c;
  c.model = CrfModel(tagset,
                     FeatureDictionary::from_names(j.at("features").get<std::vector<std::string>>()));
  const auto ew = j.at("emission_weights").get<std::vector<double>>();
  const auto tw = j.at("transition_weights").get<std::vector<double>>();
  auto ep = c.model.emission().parameters();
  auto tp = c.model.transitions().parameters();
  if (ew.size() != ep.size() || tw.size() != tp.size()) {
    throw DataError("checkpoint weight counts do not match its tag set and features");
  }
  std::copy(ew.begin(), ew.end(), ep.begin());
  std::copy(tw.begin(), tw.end(), tp.begin());
  c.model.transitions().set_allowed_mask(j.at("transition_allowed").get<std::vector<std::uint8_t>>());
  c.config = j.value("config", nlohmann::json::object());
  c.config_fingerprint = j.value("config_fingerprint", "");
  c.round = j.value("round", 0);
  c.epoch = j.value("epoch", 0);
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_json(checkpoint).dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return checkpoint_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace noisyner
