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

#ifndef NOISYNER_CONFIDENCE_HPP_
#define NOISYNER_CONFIDENCE_HPP_

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "noisyner/corpus.hpp"
#include "noisyner/lattice.hpp"

namespace noisyner {

/// Global scores read CRF marginals; Local scores read a softmax over the
/// emission row alone.
enum class Strategy { Local, Global };

enum class Group : std::uint8_t { Positive, Negative };
enum class Verdict : std::uint8_t { Trusted, Untrusted };
enum class KeptPart : std::uint8_t { Position, Type };

std::string_view to_string(Strategy s);
Strategy strategy_from_string(std::string_view s);

struct Calibration {
  double position_score = 0.0;
  double type_score = 0.0;
  KeptPart kept = KeptPart::Position;
};

struct ConfidenceRecord {
  std::size_t sentence_id = 0;
  std::size_t token_index = 0;
  LabelId observed = TagSet::kOutside;
  double score = 0.0;
  Group group = Group::Negative;
  Verdict verdict = Verdict::Trusted;
  std::optional<Calibration> calibration;  // untrusted positives only
};

/// Noise rates per group and the number of warm-up epochs K.
struct ScheduleConfig {
  double tau_p = 0.0;
  double tau_n = 0.0;
  int warmup_epochs = 5;

  void validate() const;
  double tau(Group g) const { return g == Group::Positive ? tau_p : tau_n; }
};

/// p(y_i | x) for every token and label under \p strategy.
Matrix label_distribution(const Lattice& lattice, Strategy strategy);

/// s_i = p(observed_i | x).
std::vector<double> score_tokens(const Lattice& lattice, std::span<const LabelId> observed,
                                 Strategy strategy);

/// r(e) = 1 - min(e / K * tau, tau).
double keep_ratio(int epoch, const ScheduleConfig& config, Group group);

/// floor(ratio * total), guarded against ratios a hair below an integer
/// product.
std::size_t keep_count(double ratio, std::size_t total);

struct SplitCounts {
  std::size_t trusted_p = 0;
  std::size_t trusted_n = 0;
  std::size_t total_p = 0;
  std::size_t total_n = 0;
};

/// Ranks each group by score (descending; ties by sentence then token
/// ascending) and trusts the top keep_count(r(e), |group|).
SplitCounts split_trusted(std::span<ConfidenceRecord> records, int epoch,
                          const ScheduleConfig& config);

/// Position-part and type-part scores of an observed entity label: the mean
/// probability over the entity labels sharing each part.
Calibration calibrate(LabelId observed, std::span<const double> distribution,
                      const TagSet& tagset);

/// Allowed labels per token. Trusted: the observed label. Untrusted O: all
/// labels. Untrusted entity: labels sharing the kept part, plus O (without a
/// calibration, all labels).
ConstraintMask build_mask(std::size_t length, std::span<const ConfidenceRecord> records,
                          const TagSet& tagset);

/// Records for one sentence, verdicts unset (trusted).
std::vector<ConfidenceRecord> make_records(const Sentence& sentence, std::span<const double> scores,
                                           const TagSet& tagset);

nlohmann::json to_json(const ConfidenceRecord& record, const TagSet& tagset);

}  // namespace noisyner

#endif  // NOISYNER_CONFIDENCE_HPP_
