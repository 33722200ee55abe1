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

#ifndef NOISYNER_TRAINER_HPP_
#define NOISYNER_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "noisyner/confidence.hpp"
#include "noisyner/model.hpp"
#include "noisyner/noise.hpp"

namespace noisyner {

/// Whether records are ranked over the whole epoch or within each batch.
enum class Pooling { Epoch, Batch };

struct TrainConfig {
  int epochs = 10;
  double learning_rate = 0.01;
  double l2_penalty = 1e-4;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  Strategy strategy = Strategy::Global;
  ScheduleConfig schedule;
  bool calibration_enabled = true;
  /// Distribution used for calibration; the scoring strategy when unset.
  std::optional<Strategy> calibration_strategy;
  bool shuffle = true;
  Pooling pooling = Pooling::Epoch;
  bool bio_constraints = false;
  /// Added to the epoch index when evaluating the keep-ratio schedule.
  int epoch_offset = 0;

  void validate() const;
  nlohmann::json to_json() const;
};

struct EpochMetrics {
  int round = 0;
  int epoch = 0;
  double loss = 0.0;
  double keep_p = 1.0;
  double keep_n = 1.0;
  SplitCounts counts;
  std::optional<PrfScore> dev;
  std::optional<PrfScore> noise_detection;

  nlohmann::json to_json() const;
};

struct FitOptions {
  const Corpus* dev = nullptr;
  /// Ledger of the training corpus; enables noise-detection scores.
  const NoiseLedger* ledger = nullptr;
  int round = 0;
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct FitResult {
  CrfModel model;
  std::vector<EpochMetrics> epochs;
  /// Confidence records of the last epoch, in corpus order.
  std::vector<ConfidenceRecord> records;
};

/// Scores every token of \p corpus with \p model. Entity tokens also get a
/// calibration from \p calibration_strategy's distribution. Verdicts are all
/// trusted until split_trusted runs.
std::vector<ConfidenceRecord> score_corpus(const CrfModel& model, const Corpus& corpus,
                                           std::span<const SentenceFeatures> features,
                                           Strategy strategy,
                                           std::optional<Strategy> calibration_strategy);

/// Masks for every sentence from split records (in corpus order).
std::vector<ConstraintMask> build_masks(const Corpus& corpus,
                                        std::span<const ConfidenceRecord> records,
                                        bool calibration_enabled);

/// One pass of mini-batch SGD on -sum log p~ + (l2/2)|theta|^2, where each
/// batch carries its |B|/N share of the penalty. Returns the mean -log p~.
/// Throws NumericalError naming the sentence when a loss is not finite.
double train_epoch(CrfModel& model, const Corpus& corpus, std::span<const ConstraintMask> masks,
                   const TrainConfig& config, int epoch);
double train_epoch(CrfModel& model, const Corpus& corpus,
                   std::span<const SentenceFeatures> features,
                   std::span<const ConstraintMask> masks, const TrainConfig& config, int epoch);

/// Confidence-aware training: each epoch scores tokens, splits them with the
/// keep-ratio schedule, calibrates untrusted entity labels and trains on the
/// resulting masks. Gold tags of \p train are never read.
FitResult fit(const Corpus& train, const TrainConfig& config, const FitOptions& options = {});

/// Flagged tokens (untrusted verdicts) of a record list.
std::set<TokenRef> untrusted_tokens(std::span<const ConfidenceRecord> records);

/// Noise rates implied by a ledger: noisy entity tokens over entity tokens
/// and noisy O tokens over O tokens.
std::pair<double, double> oracle_tau(const Corpus& corpus, const NoiseLedger& ledger);

struct TauGrid {
  double min = 0.0;
  double max = 0.2;
  double step = 0.01;

  std::vector<double> values() const;
};

struct TauTrial {
  double tau_p = 0.0;
  double tau_n = 0.0;
  double dev_f1 = 0.0;
};

struct TauSearchResult {
  double tau_p = 0.0;
  double tau_n = 0.0;
  std::size_t fits = 0;
  std::vector<TauTrial> trials;
};

/// Coordinate search: sweep tau_n with tau_p fixed at \p initial_tau_p, then
/// sweep tau_p with the best tau_n. Highest dev F1 wins; ties keep the
/// smaller tau.
TauSearchResult grid_search_tau(const Corpus& train, const Corpus& dev, const TauGrid& grid,
                                const TrainConfig& config, double initial_tau_p = 0.005);

enum class TauMode { Explicit, Oracle, Searched };

std::string_view to_string(TauMode mode);
TauMode tau_mode_from_string(std::string_view s);

struct SelfTrainConfig {
  int rounds = 3;
  TauMode first_round = TauMode::Explicit;
  double first_tau_p = 0.0;  // Explicit mode
  double first_tau_n = 0.0;
  double later_tau_p = 0.005;
  double later_tau_n = 0.15;
  std::uint64_t split_seed = 0;
  bool reset_epoch_counter = true;
  TauGrid grid;
  double search_initial_tau_p = 0.005;

  void validate() const;
  nlohmann::json to_json() const;
};

struct SelfTrainOptions {
  const Corpus* dev = nullptr;       // required for Searched
  const Corpus* eval = nullptr;      // scored after each round
  const NoiseLedger* ledger = nullptr;  // required for Oracle
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct RoundMetrics {
  int round = 0;
  double tau_p = 0.0;
  double tau_n = 0.0;
  std::size_t relabeled_tokens = 0;
  std::optional<PrfScore> eval;
  /// Training labels against gold, when the corpus has gold tags.
  std::optional<PrfScore> label_quality;
  std::optional<TauSearchResult> search;

  nlohmann::json to_json() const;
};

struct SelfTrainResult {
  CrfModel model;
  Corpus corpus;  // re-annotated training set after the last round
  std::vector<RoundMetrics> rounds;
};

/// Halves for one self-training round: a seeded shuffle split so that
/// ||A| - |B|| <= 1. Positions are sorted ascending within each half.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_halves(std::size_t n,
                                                                           std::uint64_t seed,
                                                                           int round);

/// Cross-validated self-training. Each round fits on half A and re-annotates
/// half B with Viterbi, then fits on B and re-annotates A, then fits on the
/// whole updated set; that model is the round's result.
SelfTrainResult self_train(const Corpus& corpus, const SelfTrainConfig& self_config,
                           const TrainConfig& train_config, const SelfTrainOptions& options = {});

}  // namespace noisyner

#endif  // NOISYNER_TRAINER_HPP_
