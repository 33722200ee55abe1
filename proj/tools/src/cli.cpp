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

#include "noisyner/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "noisyner/synthetic.hpp"
#include "noisyner/trainer.hpp"

namespace noisyner::cli {

namespace fs = std::filesystem;
using nlohmann::json;

json default_config() {
  return json{
      {"seed", nullptr},
      {"data.train", ""},
      {"data.dev", ""},
      {"data.test", ""},
      {"data.input", ""},
      {"data.ledger", ""},
      {"data.model", ""},
      {"data.flags", ""},
      {"data.output", ""},
      {"data.output_dir", "."},
      {"perturb.target_recall", 0.5},
      {"perturb.target_precision", 0.9},
      {"perturb.max_span_len", 3},
      {"perturb.removal_unit", "identity"},
      {"perturb.sweep", false},
      {"synth.sentences", 500},
      {"synth.types", 3},
      {"synth.identities_per_type", 120},
      {"train.epochs", 10},
      {"train.learning_rate", 0.01},
      {"train.l2_penalty", 1e-4},
      {"train.batch_size", 8},
      {"train.strategy", "global"},
      {"train.calibration", true},
      {"train.calibration_strategy", ""},
      {"train.shuffle", true},
      {"train.pooling", "epoch"},
      {"train.bio_constraints", false},
      {"train.warmup_epochs", 5},
      {"tau.mode", "explicit"},
      {"tau.p", 0.0},
      {"tau.n", 0.0},
      {"tau.grid_min", 0.0},
      {"tau.grid_max", 0.2},
      {"tau.grid_step", 0.01},
      {"tau.initial_p", 0.005},
      {"selftrain.rounds", 3},
      {"selftrain.later_tau_p", 0.005},
      {"selftrain.later_tau_n", 0.15},
      {"selftrain.reset_epoch_counter", true},
      {"detect.epoch", -1},
  };
}

namespace {

json convert(const std::string& key, const json& like, const json& value) {
  if (!value.is_string() || like.is_string()) {
    const bool same = (like.is_null() && value.is_number_integer()) ||
                      (like.is_boolean() && value.is_boolean()) ||
                      (like.is_number_integer() && value.is_number_integer()) ||
                      (like.is_number_float() && value.is_number()) ||
                      (like.is_string() && value.is_string());
    if (!same) throw ConfigError("config key '" + key + "' has the wrong type");
    return like.is_number_float() ? json(value.get<double>()) : value;
  }
  const auto text = value.get<std::string>();
  try {
    std::size_t used = 0;
    if (like.is_boolean()) {
      if (text == "true" || text == "on" || text == "1") return true;
      if (text == "false" || text == "off" || text == "0") return false;
    } else if (like.is_number_float()) {
      const double v = std::stod(text, &used);
      if (used == text.size()) return v;
    } else if (like.is_null() || like.is_number_integer()) {
      const long long v = std::stoll(text, &used);
      if (used == text.size()) return v;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "': cannot read '" + text + "'");
}

}  // namespace

json merge_config(json base, const json& overrides) {
  if (!overrides.is_object()) throw ConfigError("config must be a JSON object");
  const json defaults = default_config();
  for (const auto& [key, value] : overrides.items()) {
    if (!defaults.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    base[key] = convert(key, defaults.at(key), value);
  }
  return base;
}

namespace {

// ---- config access ------------------------------------------------------

struct Settings {
  json values;

  std::string str(const std::string& key) const { return values.at(key).get<std::string>(); }
  double num(const std::string& key) const { return values.at(key).get<double>(); }
  long long integer(const std::string& key) const { return values.at(key).get<long long>(); }
  bool flag(const std::string& key) const { return values.at(key).get<bool>(); }

  std::uint64_t seed() const {
    if (values.at("seed").is_null()) throw ConfigError("a seed is required (--seed or config 'seed')");
    return static_cast<std::uint64_t>(values.at("seed").get<long long>());
  }

  fs::path input_path(const std::string& key) const {
    const std::string p = str(key);
    if (p.empty()) throw ConfigError("missing required path '" + key + "'");
    if (!fs::exists(p)) throw ConfigError("'" + key + "' does not exist: " + p);
    return p;
  }

  std::optional<fs::path> optional_input(const std::string& key) const {
    if (str(key).empty()) return std::nullopt;
    return input_path(key);
  }

  fs::path output_path(const std::string& key, const std::string& fallback) const {
    fs::path p = str(key).empty() ? fs::path(str("data.output_dir")) / fallback : fs::path(str(key));
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    return p;
  }
};

std::size_t positive_count(const Settings& s, const std::string& key) {
  const long long v = s.integer(key);
  if (v < 1) throw ConfigError("'" + key + "' must be >= 1");
  return static_cast<std::size_t>(v);
}

TrainConfig train_config(const Settings& s) {
  TrainConfig cfg;
  cfg.epochs = static_cast<int>(s.integer("train.epochs"));
  cfg.learning_rate = s.num("train.learning_rate");
  cfg.l2_penalty = s.num("train.l2_penalty");
  cfg.batch_size = positive_count(s, "train.batch_size");
  cfg.seed = Rng::derive_seed(s.seed(), "shuffle");
  cfg.strategy = strategy_from_string(s.str("train.strategy"));
  cfg.calibration_enabled = s.flag("train.calibration");
  if (!s.str("train.calibration_strategy").empty()) {
    cfg.calibration_strategy = strategy_from_string(s.str("train.calibration_strategy"));
  }
  cfg.shuffle = s.flag("train.shuffle");
  const std::string pooling = s.str("train.pooling");
  if (pooling != "epoch" && pooling != "batch") throw ConfigError("train.pooling must be epoch or batch");
  cfg.pooling = pooling == "epoch" ? Pooling::Epoch : Pooling::Batch;
  cfg.bio_constraints = s.flag("train.bio_constraints");
  cfg.schedule.tau_p = s.num("tau.p");
  cfg.schedule.tau_n = s.num("tau.n");
  cfg.schedule.warmup_epochs = static_cast<int>(s.integer("train.warmup_epochs"));
  cfg.validate();
  return cfg;
}

TauGrid tau_grid(const Settings& s) {
  return TauGrid{s.num("tau.grid_min"), s.num("tau.grid_max"), s.num("tau.grid_step")};
}

// ---- corpus I/O ---------------------------------------------------------

// A third column, when present, holds gold tags.
Corpus load_corpus(const fs::path& path, TagSet base = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  ConllOptions opts;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    std::istringstream fields(line);
    std::vector<std::string> cols;
    for (std::string f; fields >> f;) cols.push_back(f);
    if (cols.empty() || cols[0] == "-DOCSTART-") continue;
    if (cols.size() >= 3) opts.gold_column = 2;
    break;
  }
  try {
    return parse_conll(text, opts, std::move(base));
  } catch (const ParseError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

// ---- output -------------------------------------------------------------

json prf(const PrfScore& s) {
  return json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1},
              {"matched", s.matched}, {"predicted", s.predicted}, {"reference", s.reference}};
}

json report(const EntityReport& r) {
  json per_type = json::object();
  for (const auto& [type, score] : r.per_type) per_type[type] = prf(score);
  return json{{"overall", prf(r.overall)}, {"per_type", per_type}};
}

void emit(std::ostream& out, const std::string& event, json body) {
  body["event"] = event;
  out << body.dump() << '\n';
}

Checkpoint make_checkpoint(CrfModel model, const Settings& s, int round, int epoch) {
  Checkpoint ck;
  ck.model = std::move(model);
  ck.config = s.values;
  ck.config_fingerprint = fingerprint(s.values);
  ck.round = round;
  ck.epoch = epoch;
  return ck;
}

std::function<void(const EpochMetrics&)> epoch_printer(std::ostream& out) {
  return [&out](const EpochMetrics& m) { emit(out, "epoch", m.to_json()); };
}

// ---- subcommands --------------------------------------------------------

void cmd_synth(const Settings& s, std::ostream& out) {
  SyntheticConfig cfg;
  cfg.sentences = positive_count(s, "synth.sentences");
  cfg.num_types = positive_count(s, "synth.types");
  cfg.identities_per_type = positive_count(s, "synth.identities_per_type");
  cfg.seed = s.seed();
  const Corpus corpus = generate_synthetic(cfg);
  const fs::path path = s.output_path("data.output", "synthetic.conll");
  write_conll(path, corpus);
  emit(out, "summary", {{"corpus", path.string()}, {"sentences", corpus.size()},
                        {"tokens", corpus.num_tokens()}});
}

void cmd_perturb(const Settings& s, std::ostream& out) {
  Corpus clean = load_corpus(s.input_path("data.input"));
  if (!clean.has_gold()) clean = with_gold_from_observed(std::move(clean));

  PerturbationConfig cfg;
  cfg.target_recall = s.num("perturb.target_recall");
  cfg.target_precision = s.num("perturb.target_precision");
  cfg.seed = s.seed();
  cfg.max_spurious_span_len = positive_count(s, "perturb.max_span_len");
  const std::string unit = s.str("perturb.removal_unit");
  if (unit != "identity" && unit != "occurrence") {
    throw ConfigError("perturb.removal_unit must be identity or occurrence");
  }
  cfg.removal_unit = unit == "identity" ? RemovalUnit::Identity : RemovalUnit::Occurrence;

  std::vector<double> levels{cfg.target_recall};
  if (s.flag("perturb.sweep")) levels = {0.3, 0.4, 0.5, 0.6, 0.7};
  for (double level : levels) {
    cfg.target_recall = level;
    cfg.validate();
    const PerturbResult result = perturb(clean, cfg);
    std::string stem = "perturbed";
    if (s.flag("perturb.sweep")) {
      std::ostringstream name;
      name << "perturbed-r" << std::fixed << std::setprecision(1) << level;
      stem = name.str();
    }
    const fs::path corpus_path = s.output_path("data.output", stem + ".conll");
    fs::path ledger_path = corpus_path;
    ledger_path.replace_extension(".ledger.json");
    if (s.flag("perturb.sweep") && !s.str("data.output").empty()) {
      throw ConfigError("data.output names one file; use data.output_dir with the sweep");
    }
    write_conll(corpus_path, result.corpus, true);
    write_ledger(ledger_path, result.ledger);
    emit(out, "perturbed",
         {{"target_recall", level}, {"target_precision", cfg.target_precision},
          {"recall", result.recall}, {"precision", result.precision},
          {"removed_entities", result.ledger.removed_entities.size()},
          {"spurious_spans", result.ledger.spurious_spans.size()},
          {"noisy_positive", result.ledger.num_noisy_positive()},
          {"noisy_negative", result.ledger.num_noisy_negative()},
          {"corpus", corpus_path.string()}, {"ledger", ledger_path.string()}});
  }
}

struct TrainingData {
  Corpus train;
  std::optional<Corpus> dev;
  std::optional<Corpus> test;
  std::optional<NoiseLedger> ledger;
};

TrainingData load_training_data(const Settings& s) {
  TrainingData d;
  d.train = load_corpus(s.input_path("data.train"));
  if (auto p = s.optional_input("data.dev")) d.dev = load_corpus(*p, d.train.tagset);
  if (auto p = s.optional_input("data.test")) d.test = load_corpus(*p, d.train.tagset);
  if (auto p = s.optional_input("data.ledger")) d.ledger = read_ledger(*p);
  return d;
}

TauMode tau_mode(const Settings& s) { return tau_mode_from_string(s.str("tau.mode")); }

void cmd_train(const Settings& s, std::ostream& out) {
  const TrainingData d = load_training_data(s);
  TrainConfig cfg = train_config(s);
  json tau{{"mode", s.str("tau.mode")}};
  switch (tau_mode(s)) {
    case TauMode::Explicit:
      break;
    case TauMode::Oracle: {
      if (!d.ledger) throw ConfigError("oracle noise rates need data.ledger");
      std::tie(cfg.schedule.tau_p, cfg.schedule.tau_n) = oracle_tau(d.train, *d.ledger);
      break;
    }
    case TauMode::Searched: {
      if (!d.dev) throw ConfigError("searched noise rates need data.dev");
      const TauSearchResult r = grid_search_tau(d.train, *d.dev, tau_grid(s), cfg, s.num("tau.initial_p"));
      cfg.schedule.tau_p = r.tau_p;
      cfg.schedule.tau_n = r.tau_n;
      tau["fits"] = r.fits;
      break;
    }
  }
  tau["tau_p"] = cfg.schedule.tau_p;
  tau["tau_n"] = cfg.schedule.tau_n;
  emit(out, "tau", tau);

  FitOptions opts;
  if (d.dev) opts.dev = &*d.dev;
  if (d.ledger) opts.ledger = &*d.ledger;
  opts.on_epoch = epoch_printer(out);
  FitResult result = fit(d.train, cfg, opts);

  json summary{{"tau_p", cfg.schedule.tau_p}, {"tau_n", cfg.schedule.tau_n}};
  if (d.test) summary["test"] = report(evaluate(result.model, *d.test));
  const fs::path model_path = s.output_path("data.model", "model.json");
  save_checkpoint(model_path, make_checkpoint(std::move(result.model), s, 0, cfg.epochs));
  summary["model"] = model_path.string();
  emit(out, "summary", summary);
}

void cmd_selftrain(const Settings& s, std::ostream& out) {
  const TrainingData d = load_training_data(s);
  const TrainConfig cfg = train_config(s);
  SelfTrainConfig sc;
  sc.rounds = static_cast<int>(s.integer("selftrain.rounds"));
  sc.first_round = tau_mode(s);
  sc.first_tau_p = s.num("tau.p");
  sc.first_tau_n = s.num("tau.n");
  sc.later_tau_p = s.num("selftrain.later_tau_p");
  sc.later_tau_n = s.num("selftrain.later_tau_n");
  sc.split_seed = Rng::derive_seed(s.seed(), "split");
  sc.reset_epoch_counter = s.flag("selftrain.reset_epoch_counter");
  sc.grid = tau_grid(s);
  sc.search_initial_tau_p = s.num("tau.initial_p");

  SelfTrainOptions opts;
  if (d.dev) opts.dev = &*d.dev;
  if (d.test) opts.eval = &*d.test;
  if (d.ledger) opts.ledger = &*d.ledger;
  opts.on_epoch = epoch_printer(out);
  SelfTrainResult result = self_train(d.train, sc, cfg, opts);
  for (const RoundMetrics& r : result.rounds) emit(out, "round", r.to_json());

  const fs::path model_path = s.output_path("data.model", "model.json");
  save_checkpoint(model_path, make_checkpoint(std::move(result.model), s, sc.rounds, cfg.epochs));
  const fs::path relabeled = s.output_path("data.output", "relabeled.conll");
  write_conll(relabeled, result.corpus, result.corpus.has_gold());
  emit(out, "summary", {{"model", model_path.string()}, {"relabeled", relabeled.string()},
                        {"rounds", result.rounds.size()}});
}

Checkpoint load_model(const Settings& s) { return load_checkpoint(s.input_path("data.model")); }

void cmd_predict(const Settings& s, std::ostream& out) {
  const Checkpoint ck = load_model(s);
  const Corpus input = load_corpus(s.input_path("data.input"), ck.model.tagset());
  const Corpus predicted = ck.model.annotate(input);
  const fs::path path = s.output_path("data.output", "predictions.conll");
  write_conll(path, predicted);
  emit(out, "summary", {{"predictions", path.string()}, {"sentences", predicted.size()},
                        {"tokens", predicted.num_tokens()}});
}

void cmd_eval(const Settings& s, std::ostream& out) {
  const Checkpoint ck = load_model(s);
  const Corpus input = load_corpus(s.input_path("data.input"), ck.model.tagset());
  json body = report(evaluate(ck.model, input));
  body["reference"] = input.has_gold() ? "gold" : "observed";
  emit(out, "summary", body);
}

std::set<TokenRef> read_flags(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::set<TokenRef> flags;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      if (j.contains("verdict") && j.at("verdict") != "untrusted") continue;
      flags.insert(TokenRef{j.at("sentence").get<std::size_t>(), j.at("token").get<std::size_t>()});
    } catch (const json::exception& e) {
      throw ParseError(line_no, path.string() + ": " + e.what());
    }
  }
  return flags;
}

void cmd_detect_noise(const Settings& s, std::ostream& out) {
  std::optional<NoiseLedger> ledger;
  if (auto p = s.optional_input("data.ledger")) ledger = read_ledger(*p);

  if (auto flags_path = s.optional_input("data.flags")) {
    if (!ledger) throw ConfigError("scoring flags needs data.ledger");
    const auto flags = read_flags(*flags_path);
    emit(out, "summary", {{"flagged", flags.size()}, {"noise_detection", prf(score_noise_detection(flags, *ledger))}});
    return;
  }

  const Checkpoint ck = load_model(s);
  const Corpus corpus = load_corpus(s.input_path("data.input"), ck.model.tagset());
  ScheduleConfig schedule{s.num("tau.p"), s.num("tau.n"), static_cast<int>(s.integer("train.warmup_epochs"))};
  switch (tau_mode(s)) {
    case TauMode::Explicit:
      break;
    case TauMode::Oracle:
      if (!ledger) throw ConfigError("oracle noise rates need data.ledger");
      std::tie(schedule.tau_p, schedule.tau_n) = oracle_tau(corpus, *ledger);
      break;
    case TauMode::Searched:
      throw ConfigError("detect-noise takes explicit or oracle noise rates");
  }
  schedule.validate();
  const long long e = s.integer("detect.epoch");
  const int epoch = e < 0 ? schedule.warmup_epochs : static_cast<int>(e);

  const Strategy strategy = strategy_from_string(s.str("train.strategy"));
  std::optional<Strategy> calibration;
  if (s.flag("train.calibration")) {
    calibration = s.str("train.calibration_strategy").empty()
                      ? strategy
                      : strategy_from_string(s.str("train.calibration_strategy"));
  }
  const auto features = ck.model.encode(corpus);
  std::vector<ConfidenceRecord> records = score_corpus(ck.model, corpus, features, strategy, calibration);
  const SplitCounts counts = split_trusted(records, epoch, schedule);

  std::ostringstream dump;
  for (const ConfidenceRecord& r : records) dump << to_json(r, corpus.tagset).dump() << '\n';
  const fs::path path = s.output_path("data.output", "records.jsonl");
  write_text(path, dump.str());

  json summary{{"records", path.string()}, {"epoch", epoch}, {"tau_p", schedule.tau_p},
               {"tau_n", schedule.tau_n}, {"trusted_p", counts.trusted_p},
               {"trusted_n", counts.trusted_n}, {"total_p", counts.total_p},
               {"total_n", counts.total_n}, {"flagged", untrusted_tokens(records).size()}};
  if (ledger) summary["noise_detection"] = prf(score_noise_detection(untrusted_tokens(records), *ledger));
  emit(out, "summary", summary);
}

void cmd_search_tau(const Settings& s, std::ostream& out) {
  const Corpus train = load_corpus(s.input_path("data.train"));
  const Corpus dev = load_corpus(s.input_path("data.dev"), train.tagset);
  const TauSearchResult r = grid_search_tau(train, dev, tau_grid(s), train_config(s), s.num("tau.initial_p"));
  for (const TauTrial& t : r.trials) {
    emit(out, "trial", {{"tau_p", t.tau_p}, {"tau_n", t.tau_n}, {"dev_f1", t.dev_f1}});
  }
  emit(out, "summary", {{"tau_p", r.tau_p}, {"tau_n", r.tau_n}, {"fits", r.fits}});
}

// ---- command line -------------------------------------------------------

struct FlagSpec {
  const char* name;
  const char* key;
  const char* help;
};

const std::vector<FlagSpec>& flag_specs() {
  static const std::vector<FlagSpec> specs{
      {"--seed", "seed", "top-level random seed"},
      {"--train", "data.train", "training corpus (CoNLL)"},
      {"--dev", "data.dev", "development corpus"},
      {"--test", "data.test", "test corpus"},
      {"--input", "data.input", "input corpus"},
      {"--ledger", "data.ledger", "noise ledger (JSON)"},
      {"--model", "data.model", "checkpoint path"},
      {"--flags", "data.flags", "JSON lines of flagged tokens to score"},
      {"--output,-o", "data.output", "output file"},
      {"--output-dir", "data.output_dir", "output directory"},
      {"--recall", "perturb.target_recall", "target entity recall"},
      {"--precision", "perturb.target_precision", "target entity precision"},
      {"--removal-unit", "perturb.removal_unit", "identity or occurrence"},
      {"--sentences", "synth.sentences", "number of synthetic sentences"},
      {"--epochs", "train.epochs", "training epochs"},
      {"--lr", "train.learning_rate", "SGD learning rate"},
      {"--l2", "train.l2_penalty", "L2 penalty"},
      {"--batch-size", "train.batch_size", "sentences per batch"},
      {"--strategy", "train.strategy", "confidence strategy: local or global"},
      {"--calibration", "train.calibration", "on or off"},
      {"--pooling", "train.pooling", "epoch or batch"},
      {"--warmup", "train.warmup_epochs", "epochs until the full noise rate applies"},
      {"--rounds", "selftrain.rounds", "self-training rounds"},
      {"--epoch", "detect.epoch", "schedule epoch for detect-noise (-1: end of warm-up)"},
  };
  return specs;
}

json load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Named-entity tagging with noisy annotations", "noisyner"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");

  std::string config_path;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> overrides;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"synth", "generate a synthetic tagged corpus"},
      {"perturb", "lower entity recall and precision of a clean corpus"},
      {"train", "confidence-aware CRF training"},
      {"selftrain", "cross-validated self-training"},
      {"predict", "tag a corpus with a checkpoint"},
      {"eval", "entity-level P/R/F1 of a checkpoint"},
      {"detect-noise", "flag likely annotation errors, or score given flags"},
      {"search-tau", "grid search of the noise rates on a dev set"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON config with flat dotted keys");
    sub->add_option("--set", sets, "override one config key: key=value");
    for (const FlagSpec& spec : flag_specs()) {
      const std::string key = spec.key;
      sub->add_option_function<std::string>(
          spec.name, [&overrides, key](const std::string& v) { overrides.emplace_back(key, v); },
          spec.help);
    }
    sub->add_option_function<std::string>(
        "--tau",
        [&overrides](const std::string& v) {
          if (v == "oracle" || v == "searched" || v == "explicit") {
            overrides.emplace_back("tau.mode", v);
            return;
          }
          const auto comma = v.find(',');
          if (comma == std::string::npos) throw CLI::ValidationError("--tau", "expected P,N, oracle or searched");
          overrides.emplace_back("tau.mode", "explicit");
          overrides.emplace_back("tau.p", v.substr(0, comma));
          overrides.emplace_back("tau.n", v.substr(comma + 1));
        },
        "noise rates: P,N | oracle | searched");
    sub->add_flag_callback("--sweep", [&overrides] { overrides.emplace_back("perturb.sweep", "true"); },
                           "perturb at recall 0.3 to 0.7");
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    json values = default_config();
    if (config_path.empty()) {
      if (const char* env = std::getenv("NOISYNER_CONFIG"); env && *env) config_path = env;
    }
    if (!config_path.empty()) values = merge_config(std::move(values), load_config_file(config_path));
    json flat = json::object();
    for (const std::string& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      flat[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    for (const auto& [k, v] : overrides) flat[k] = v;
    values = merge_config(std::move(values), flat);

    const Settings settings{values};
    emit(out, "config", {{"command", command}, {"config", values}});
    if (command == "synth") cmd_synth(settings, out);
    else if (command == "perturb") cmd_perturb(settings, out);
    else if (command == "train") cmd_train(settings, out);
    else if (command == "selftrain") cmd_selftrain(settings, out);
    else if (command == "predict") cmd_predict(settings, out);
    else if (command == "eval") cmd_eval(settings, out);
    else if (command == "detect-noise") cmd_detect_noise(settings, out);
    else cmd_search_tau(settings, out);
    return kOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
}

}  // namespace noisyner::cli
