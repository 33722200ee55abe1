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

#include "noisyner/trainer.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace noisyner {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (!(l2_penalty >= 0.0)) throw ConfigError("l2 penalty must be >= 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (epoch_offset < 0) throw ConfigError("epoch offset must be >= 0");
  schedule.validate();
}

namespace {

std::string_view to_string(Pooling p) { return p == Pooling::Epoch ? "epoch" : "batch"; }

nlohmann::json prf_json(const PrfScore& s) {
  return {{"p", s.precision}, {"r", s.recall}, {"f1", s.f1}};
}

}  // namespace

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"learning_rate", learning_rate},
          {"l2_penalty", l2_penalty},
          {"batch_size", batch_size},
          {"seed", seed},
          {"strategy", noisyner::to_string(strategy)},
          {"tau_p", schedule.tau_p},
          {"tau_n", schedule.tau_n},
          {"warmup_epochs", schedule.warmup_epochs},
          {"calibration", calibration_enabled},
          {"calibration_strategy",
           noisyner::to_string(calibration_strategy.value_or(strategy))},
          {"shuffle", shuffle},
          {"pooling", to_string(pooling)},
          {"bio_constraints", bio_constraints},
          {"epoch_offset", epoch_offset}};
}

nlohmann::json EpochMetrics::to_json() const {
  nlohmann::json j{{"round", round},     {"epoch", epoch},
                   {"loss", loss},       {"keep_p", keep_p},
                   {"keep_n", keep_n},   {"trusted_p", counts.trusted_p},
                   {"trusted_n", counts.trusted_n}, {"total_p", counts.total_p},
                   {"total_n", counts.total_n}};
  if (dev) {
    j["dev_p"] = dev->precision;
    j["dev_r"] = dev->recall;
    j["dev_f1"] = dev->f1;
  }
  if (noise_detection) j["noise_detection_f1"] = noise_detection->f1;
  return j;
}

std::vector<ConfidenceRecord> score_corpus(const CrfModel& model, const Corpus& corpus,
                                           std::span<const SentenceFeatures> features,
                                           Strategy strategy,
                                           std::optional<Strategy> calibration_strategy) {
  std::vector<ConfidenceRecord> records;
  records.reserve(corpus.num_tokens());
  for (std::size_t p = 0; p < corpus.size(); ++p) {
    const Sentence& s = corpus.sentences[p];
    const Lattice lat = model.lattice(features[p]);
    const Matrix dist = label_distribution(lat, strategy);
    std::vector<double> scores(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      scores[i] = std::clamp(dist(i, static_cast<std::size_t>(s.tokens[i].observed)), 0.0, 1.0);
    }
    auto sentence_records = make_records(s, scores, corpus.tagset);
    if (calibration_strategy) {
      const Matrix cal_dist =
          *calibration_strategy == strategy ? dist : label_distribution(lat, *calibration_strategy);
      for (ConfidenceRecord& r : sentence_records) {
        if (r.group != Group::Positive) continue;
        r.calibration = calibrate(r.observed, cal_dist.row(r.token_index), corpus.tagset);
      }
    }
    records.insert(records.end(), sentence_records.begin(), sentence_records.end());
  }
  return records;
}

std::vector<ConstraintMask> build_masks(const Corpus& corpus,
                                        std::span<const ConfidenceRecord> records,
                                        bool calibration_enabled) {
  std::vector<ConstraintMask> masks;
  masks.reserve(corpus.size());
  std::size_t offset = 0;
  for (const Sentence& s : corpus.sentences) {
    if (offset + s.size() > records.size()) throw DataError("fewer records than tokens");
    std::vector<ConfidenceRecord> rs(records.begin() + static_cast<std::ptrdiff_t>(offset),
                                     records.begin() + static_cast<std::ptrdiff_t>(offset + s.size()));
    if (!calibration_enabled) {
      for (ConfidenceRecord& r : rs) r.calibration.reset();
    }
    masks.push_back(build_mask(s.size(), rs, corpus.tagset));
    offset += s.size();
  }
  return masks;
}

namespace {

using MaskProvider =
    std::function<std::vector<ConstraintMask>(std::span<const std::size_t> batch)>;

double run_epoch(CrfModel& model, const Corpus& corpus, std::span<const SentenceFeatures> features,
                 const TrainConfig& config, int epoch, const MaskProvider& masks_for) {
  const std::size_t n = corpus.size();
  if (n == 0) return 0.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (config.shuffle) {
    Rng rng(Rng::derive_seed(config.seed, "epoch-" + std::to_string(epoch)));
    rng.shuffle(std::span<std::size_t>(order));
  }

  auto emission_params = model.emission().parameters();
  auto transition_params = model.transitions().parameters();
  std::vector<double> emission_grad(emission_params.size());
  std::vector<double> transition_grad(transition_params.size());
  double total_loss = 0.0;

  for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
    const std::size_t end = std::min(n, begin + config.batch_size);
    const std::span<const std::size_t> batch(order.data() + begin, end - begin);
    const std::vector<ConstraintMask> masks = masks_for(batch);
    std::fill(emission_grad.begin(), emission_grad.end(), 0.0);
    std::fill(transition_grad.begin(), transition_grad.end(), 0.0);

    for (std::size_t b = 0; b < batch.size(); ++b) {
      const std::size_t p = batch[b];
      PartialMarginal pm;
      try {
        pm = partial_marginal(model.lattice(features[p]), masks[b]);
      } catch (const NumericalError& e) {
        throw NumericalError("sentence " + std::to_string(corpus.sentences[p].id) + ": " +
                             e.what());
      }
      const double loss = -pm.log_marginal;
      if (!std::isfinite(loss)) {
        throw NumericalError("non-finite loss on sentence " +
                             std::to_string(corpus.sentences[p].id));
      }
      total_loss += loss;
      // d(-log p~) = -(d log p~)
      for (double& g : pm.gradients.emissions.values()) g = -g;
      model.emission().accumulate_gradient(features[p], pm.gradients.emissions, emission_grad);
      const auto tg = pm.gradients.transitions.values();
      for (std::size_t x = 0; x < tg.size(); ++x) transition_grad[x] -= tg[x];
    }

    const double decay =
        config.l2_penalty * static_cast<double>(batch.size()) / static_cast<double>(n);
    for (std::size_t x = 0; x < emission_params.size(); ++x) {
      emission_params[x] -= config.learning_rate * (emission_grad[x] + decay * emission_params[x]);
    }
    for (std::size_t x = 0; x < transition_params.size(); ++x) {
      transition_params[x] -=
          config.learning_rate * (transition_grad[x] + decay * transition_params[x]);
    }
  }
  return total_loss / static_cast<double>(n);
}

}  // namespace

double train_epoch(CrfModel& model, const Corpus& corpus, std::span<const ConstraintMask> masks,
                   const TrainConfig& config, int epoch) {
  const auto features = model.encode(corpus);
  return train_epoch(model, corpus, features, masks, config, epoch);
}

double train_epoch(CrfModel& model, const Corpus& corpus,
                   std::span<const SentenceFeatures> features,
                   std::span<const ConstraintMask> masks, const TrainConfig& config, int epoch) {
  config.validate();
  if (masks.size() != corpus.size() || features.size() != corpus.size()) {
    throw DataError("one mask and one feature table per sentence is required");
  }
  return run_epoch(model, corpus, features, config, epoch,
                   [&](std::span<const std::size_t> batch) {
                     std::vector<ConstraintMask> out;
                     out.reserve(batch.size());
                     for (std::size_t p : batch) out.push_back(masks[p]);
                     return out;
                   });
}

std::set<TokenRef> untrusted_tokens(std::span<const ConfidenceRecord> records) {
  std::set<TokenRef> out;
  for (const ConfidenceRecord& r : records) {
    if (r.verdict == Verdict::Untrusted) out.insert(TokenRef{r.sentence_id, r.token_index});
  }
  return out;
}

FitResult fit(const Corpus& train, const TrainConfig& config, const FitOptions& options) {
  config.validate();
  if (train.empty()) throw DataError("training corpus is empty");
  if (train.tagset.types().empty()) throw DataError("tag set has no entity labels");

  FitResult result;
  result.model = CrfModel::initialize(train, config.bio_constraints);
  CrfModel& model = result.model;
  const std::vector<SentenceFeatures> features = model.encode(train);
  const std::optional<Strategy> calibration_strategy =
      config.calibration_enabled
          ? std::optional<Strategy>(config.calibration_strategy.value_or(config.strategy))
          : std::nullopt;

  for (int e = 0; e < config.epochs; ++e) {
    const int schedule_epoch = e + config.epoch_offset;
    EpochMetrics m;
    m.round = options.round;
    m.epoch = e;
    m.keep_p = keep_ratio(schedule_epoch, config.schedule, Group::Positive);
    m.keep_n = keep_ratio(schedule_epoch, config.schedule, Group::Negative);

    std::vector<ConfidenceRecord> records;
    if (config.pooling == Pooling::Epoch) {
      records = score_corpus(model, train, features, config.strategy, calibration_strategy);
      m.counts = split_trusted(records, schedule_epoch, config.schedule);
      const auto masks = build_masks(train, records, config.calibration_enabled);
      m.loss = train_epoch(model, train, features, masks, config, e);
    } else {
      std::vector<std::vector<ConfidenceRecord>> by_sentence(train.size());
      m.loss = run_epoch(model, train, features, config, e, [&](std::span<const std::size_t> batch) {
        const Corpus part = subset(train, batch);
        std::vector<SentenceFeatures> part_features;
        for (std::size_t p : batch) part_features.push_back(features[p]);
        auto batch_records =
            score_corpus(model, part, part_features, config.strategy, calibration_strategy);
        const SplitCounts c = split_trusted(batch_records, schedule_epoch, config.schedule);
        m.counts.trusted_p += c.trusted_p;
        m.counts.trusted_n += c.trusted_n;
        m.counts.total_p += c.total_p;
        m.counts.total_n += c.total_n;
        std::size_t offset = 0;
        for (std::size_t b = 0; b < batch.size(); ++b) {
          const std::size_t len = train.sentences[batch[b]].size();
          by_sentence[batch[b]].assign(batch_records.begin() + static_cast<std::ptrdiff_t>(offset),
                                       batch_records.begin() +
                                           static_cast<std::ptrdiff_t>(offset + len));
          offset += len;
        }
        return build_masks(part, batch_records, config.calibration_enabled);
      });
      for (auto& rs : by_sentence) records.insert(records.end(), rs.begin(), rs.end());
    }

    if (options.dev) m.dev = evaluate(model, *options.dev).overall;
    if (options.ledger) m.noise_detection = score_noise_detection(untrusted_tokens(records), *options.ledger);
    if (options.on_epoch) options.on_epoch(m);
    result.epochs.push_back(m);
    result.records = std::move(records);
  }
  return result;
}

std::pair<double, double> oracle_tau(const Corpus& corpus, const NoiseLedger& ledger) {
  std::size_t positives = 0;
  std::size_t negatives = 0;
  for (const Sentence& s : corpus.sentences) {
    for (const Token& t : s.tokens) {
      (corpus.tagset.is_positive(t.observed) ? positives : negatives) += 1;
    }
  }
  const auto rate = [](std::size_t noisy, std::size_t total) {
    return total == 0 ? 0.0 : static_cast<double>(noisy) / static_cast<double>(total);
  };
  return {rate(ledger.num_noisy_positive(), positives), rate(ledger.num_noisy_negative(), negatives)};
}

std::vector<double> TauGrid::values() const {
  if (!(step > 0.0) || max < min) throw ConfigError("tau grid needs step > 0 and max >= min");
  const auto count = static_cast<std::size_t>(std::llround((max - min) / step)) + 1;
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(std::round((min + static_cast<double>(i) * step) * 1e12) / 1e12);
  }
  return out;
}

TauSearchResult grid_search_tau(const Corpus& train, const Corpus& dev, const TauGrid& grid,
                                const TrainConfig& config, double initial_tau_p) {
  const std::vector<double> values = grid.values();
  TauSearchResult result;

  auto trial = [&](double tau_p, double tau_n) {
    TrainConfig c = config;
    c.schedule.tau_p = tau_p;
    c.schedule.tau_n = tau_n;
    const FitResult f = fit(train, c);
    ++result.fits;
    const double f1 = evaluate(f.model, dev).overall.f1;
    result.trials.push_back(TauTrial{tau_p, tau_n, f1});
    return f1;
  };

  double best = -1.0;
  result.tau_p = initial_tau_p;
  for (double tau_n : values) {
    const double f1 = trial(initial_tau_p, tau_n);
    if (f1 > best) {
      best = f1;
      result.tau_n = tau_n;
    }
  }
  best = -1.0;
  for (double tau_p : values) {
    const double f1 = trial(tau_p, result.tau_n);
    if (f1 > best) {
      best = f1;
      result.tau_p = tau_p;
    }
  }
  return result;
}

std::string_view to_string(TauMode mode) {
  switch (mode) {
    case TauMode::Explicit:
      return "explicit";
    case TauMode::Oracle:
      return "oracle";
    case TauMode::Searched:
      return "searched";
  }
  return "explicit";
}

TauMode tau_mode_from_string(std::string_view s) {
  if (s == "explicit") return TauMode::Explicit;
  if (s == "oracle") return TauMode::Oracle;
  if (s == "searched") return TauMode::Searched;
  throw ConfigError("unknown tau mode '" + std::string(s) + "'");
}

void SelfTrainConfig::validate() const {
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  for (double t : {first_tau_p, first_tau_n, later_tau_p, later_tau_n, search_initial_tau_p}) {
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("noise rates must lie in [0, 1]");
  }
  grid.values();
}

nlohmann::json SelfTrainConfig::to_json() const {
  return {{"rounds", rounds},
          {"first_round", noisyner::to_string(first_round)},
          {"first_tau_p", first_tau_p},
          {"first_tau_n", first_tau_n},
          {"later_tau_p", later_tau_p},
          {"later_tau_n", later_tau_n},
          {"split_seed", split_seed},
          {"reset_epoch_counter", reset_epoch_counter},
          {"grid", {{"min", grid.min}, {"max", grid.max}, {"step", grid.step}}},
          {"search_initial_tau_p", search_initial_tau_p}};
}

nlohmann::json RoundMetrics::to_json() const {
  nlohmann::json j{{"round", round},
                   {"tau_p", tau_p},
                   {"tau_n", tau_n},
                   {"relabeled_tokens", relabeled_tokens}};
  if (eval) j["eval"] = prf_json(*eval);
  if (label_quality) j["label_quality"] = prf_json(*label_quality);
  if (search) j["search_fits"] = search->fits;
  return j;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_halves(std::size_t n,
                                                                           std::uint64_t seed,
                                                                           int round) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(Rng::derive_seed(seed, "split-round-" + std::to_string(round)));
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::size_t> a(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n / 2));
  std::vector<std::size_t> b(order.begin() + static_cast<std::ptrdiff_t>(n / 2), order.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return {std::move(a), std::move(b)};
}

namespace {

void relabel(Corpus& corpus, std::span<const std::size_t> positions, const CrfModel& model) {
  for (std::size_t p : positions) {
    Sentence& s = corpus.sentences[p];
    const auto tags = model.predict(s);
    for (std::size_t i = 0; i < tags.size(); ++i) s.tokens[i].observed = tags[i];
  }
}

}  // namespace

SelfTrainResult self_train(const Corpus& corpus, const SelfTrainConfig& self_config,
                           const TrainConfig& train_config, const SelfTrainOptions& options) {
  self_config.validate();
  train_config.validate();
  if (corpus.size() < 2) throw DataError("self-training needs at least two sentences");

  SelfTrainResult result;
  result.corpus = corpus;
  Corpus& current = result.corpus;

  std::optional<TauSearchResult> search;
  double first_p = self_config.first_tau_p;
  double first_n = self_config.first_tau_n;
  if (self_config.first_round == TauMode::Oracle) {
    if (!options.ledger) throw ConfigError("oracle noise rates need a ledger");
    std::tie(first_p, first_n) = oracle_tau(corpus, *options.ledger);
  } else if (self_config.first_round == TauMode::Searched) {
    if (!options.dev) throw ConfigError("searched noise rates need a dev corpus");
    search = grid_search_tau(corpus, *options.dev, self_config.grid, train_config,
                             self_config.search_initial_tau_p);
    first_p = search->tau_p;
    first_n = search->tau_n;
  }

  for (int r = 1; r <= self_config.rounds; ++r) {
    RoundMetrics metrics;
    metrics.round = r;
    metrics.tau_p = r == 1 ? first_p : self_config.later_tau_p;
    metrics.tau_n = r == 1 ? first_n : self_config.later_tau_n;
    if (r == 1) metrics.search = search;

    TrainConfig cfg = train_config;
    cfg.schedule.tau_p = metrics.tau_p;
    cfg.schedule.tau_n = metrics.tau_n;
    if (!self_config.reset_epoch_counter) {
      cfg.epoch_offset = train_config.epoch_offset + (r - 1) * train_config.epochs;
    }
    FitOptions fit_options;
    fit_options.round = r;
    fit_options.on_epoch = options.on_epoch;

    const auto before = current.observed_tags();
    const auto [half_a, half_b] = split_halves(current.size(), self_config.split_seed, r);
    const FitResult on_a = fit(subset(current, half_a), cfg, fit_options);
    relabel(current, half_b, on_a.model);
    const FitResult on_b = fit(subset(current, half_b), cfg, fit_options);
    relabel(current, half_a, on_b.model);

    FitResult full = fit(current, cfg, fit_options);
    for (std::size_t p = 0; p < current.size(); ++p) {
      for (std::size_t i = 0; i < current.sentences[p].size(); ++i) {
        metrics.relabeled_tokens += current.sentences[p].tokens[i].observed != before[p][i];
      }
    }
    if (options.eval) metrics.eval = evaluate(full.model, *options.eval).overall;
    if (current.has_gold()) {
      metrics.label_quality =
          entity_prf(current.observed_tags(), current.gold_tags(), current.tagset).overall;
    }
    result.model = std::move(full.model);
    result.rounds.push_back(std::move(metrics));
  }
  return result;
}

}  // namespace noisyner
