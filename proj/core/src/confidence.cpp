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

#include "noisyner/confidence.hpp"

#include <algorithm>
#include <numeric>

namespace noisyner {

std::string_view to_string(Strategy s) { return s == Strategy::Local ? "local" : "global"; }

Strategy strategy_from_string(std::string_view s) {
  if (s == "local") return Strategy::Local;
  if (s == "global") return Strategy::Global;
  throw ConfigError("unknown strategy '" + std::string(s) + "' (expected local or global)");
}

void ScheduleConfig::validate() const {
  if (!(tau_p >= 0.0 && tau_p <= 1.0)) throw ConfigError("tau_p must lie in [0, 1]");
  if (!(tau_n >= 0.0 && tau_n <= 1.0)) throw ConfigError("tau_n must lie in [0, 1]");
  if (warmup_epochs < 1) throw ConfigError("warm-up epochs must be >= 1");
}

Matrix label_distribution(const Lattice& lattice, Strategy strategy) {
  if (strategy == Strategy::Global) return marginals(forward_backward(lattice));
  Matrix p(lattice.length(), lattice.num_labels());
  for (std::size_t i = 0; i < lattice.length(); ++i) {
    const auto row = softmax(lattice.emissions.row(i));
    std::copy(row.begin(), row.end(), p.row(i).begin());
  }
  return p;
}

std::vector<double> score_tokens(const Lattice& lattice, std::span<const LabelId> observed,
                                 Strategy strategy) {
  if (observed.size() != lattice.length()) throw DataError("tag sequence length mismatch");
  const Matrix p = label_distribution(lattice, strategy);
  std::vector<double> s(observed.size());
  for (std::size_t i = 0; i < observed.size(); ++i) {
    s[i] = std::clamp(p(i, static_cast<std::size_t>(observed[i])), 0.0, 1.0);
  }
  return s;
}

double keep_ratio(int epoch, const ScheduleConfig& config, Group group) {
  const double tau = config.tau(group);
  return 1.0 - std::min(static_cast<double>(epoch) / config.warmup_epochs * tau, tau);
}

std::size_t keep_count(double ratio, std::size_t total) {
  const double exact = ratio * static_cast<double>(total);
  return std::min(total, static_cast<std::size_t>(std::floor(exact + 1e-9)));
}

SplitCounts split_trusted(std::span<ConfidenceRecord> records, int epoch,
                          const ScheduleConfig& config) {
  SplitCounts counts;
  for (Group g : {Group::Positive, Group::Negative}) {
    std::vector<std::size_t> idx;
    for (std::size_t r = 0; r < records.size(); ++r) {
      if (records[r].group == g) idx.push_back(r);
    }
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      const ConfidenceRecord& x = records[a];
      const ConfidenceRecord& y = records[b];
      if (x.score != y.score) return x.score > y.score;
      if (x.sentence_id != y.sentence_id) return x.sentence_id < y.sentence_id;
      return x.token_index < y.token_index;
    });
    const std::size_t keep = keep_count(keep_ratio(epoch, config, g), idx.size());
    for (std::size_t rank = 0; rank < idx.size(); ++rank) {
      ConfidenceRecord& rec = records[idx[rank]];
      rec.verdict = rank < keep ? Verdict::Trusted : Verdict::Untrusted;
      if (rec.verdict == Verdict::Trusted) rec.calibration.reset();
    }
    if (g == Group::Positive) {
      counts.trusted_p = keep;
      counts.total_p = idx.size();
    } else {
      counts.trusted_n = keep;
      counts.total_n = idx.size();
    }
  }
  return counts;
}

Calibration calibrate(LabelId observed, std::span<const double> distribution,
                      const TagSet& tagset) {
  if (!tagset.is_positive(observed)) throw DataError("calibration needs an entity label");
  if (distribution.size() != tagset.size()) throw DataError("distribution size mismatch");
  auto mean_over = [&](const std::vector<LabelId>& labels) {
    double s = 0.0;
    for (LabelId k : labels) s += distribution[static_cast<std::size_t>(k)];
    return s / static_cast<double>(labels.size());
  };
  Calibration c;
  c.position_score = mean_over(tagset.same_position(observed));
  c.type_score = mean_over(tagset.same_type(observed));
  c.kept = c.type_score > c.position_score ? KeptPart::Type : KeptPart::Position;
  return c;
}

ConstraintMask build_mask(std::size_t length, std::span<const ConfidenceRecord> records,
                          const TagSet& tagset) {
  if (records.size() != length) throw DataError("one confidence record per token is required");
  ConstraintMask mask(length, tagset.size(), false);
  for (const ConfidenceRecord& rec : records) {
    const std::size_t i = rec.token_index;
    if (i >= length) throw DataError("record token index out of range");
    if (rec.verdict == Verdict::Trusted) {
      mask.set(i, static_cast<std::size_t>(rec.observed));
    } else if (!tagset.is_positive(rec.observed) || !rec.calibration) {
      mask.allow_all(i);
    } else {
      auto allowed = rec.calibration->kept == KeptPart::Position ? tagset.same_position(rec.observed)
                                                                 : tagset.same_type(rec.observed);
      allowed.push_back(TagSet::kOutside);
      mask.allow_only(i, allowed);
    }
  }
  for (std::size_t i = 0; i < length; ++i) {
    if (mask.count(i) == 0) throw DataError("token " + std::to_string(i) + " has no record");
  }
  return mask;
}

std::vector<ConfidenceRecord> make_records(const Sentence& sentence, std::span<const double> scores,
                                           const TagSet& tagset) {
  std::vector<ConfidenceRecord> out(sentence.size());
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    ConfidenceRecord& r = out[i];
    r.sentence_id = sentence.id;
    r.token_index = i;
    r.observed = sentence.tokens[i].observed;
    r.score = scores[i];
    r.group = tagset.is_positive(r.observed) ? Group::Positive : Group::Negative;
  }
  return out;
}

nlohmann::json to_json(const ConfidenceRecord& record, const TagSet& tagset) {
  nlohmann::json j{{"sentence", record.sentence_id},
                   {"token", record.token_index},
                   {"label", tagset.name(record.observed)},
                   {"score", record.score},
                   {"group", record.group == Group::Positive ? "p" : "n"},
                   {"verdict", record.verdict == Verdict::Trusted ? "trusted" : "untrusted"}};
  if (record.calibration) {
    j["calibration"] = {{"s_p", record.calibration->position_score},
                        {"s_t", record.calibration->type_score},
                        {"kept", record.calibration->kept == KeptPart::Position ? "position" : "type"}};
  }
  return j;
}

}  // namespace noisyner
