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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "noisyner/cli.hpp"
#include "noisyner/synthetic.hpp"
#include "noisyner/trainer.hpp"

using namespace noisyner;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = 0;
  std::vector<json> lines;
  std::string err;

  const json& config() const { return lines.at(0).at("config"); }
  const json& last() const { return lines.back(); }
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(args, out, err);
  std::istringstream in(out.str());
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line[0] == '{') r.lines.push_back(json::parse(line));
  }
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Fresh directory per test case holding a small synthetic corpus set.
struct Workspace {
  fs::path dir;

  Workspace() {
    dir = fs::temp_directory_path() / ("noisyner_cli_" + std::to_string(counter()++));
    fs::remove_all(dir);
    fs::create_directories(dir);
    write("clean.conll", 120, 1);
    write("dev.conll", 40, 2);
    write("test.conll", 40, 3);
  }
  ~Workspace() { fs::remove_all(dir); }

  std::string operator/(const std::string& name) const { return (dir / name).string(); }

 private:
  static int& counter() {
    static int n = 0;
    return n;
  }
  void write(const std::string& name, std::size_t sentences, std::uint64_t seed) {
    SyntheticConfig cfg;
    cfg.sentences = sentences;
    cfg.seed = seed;
    cfg.identities_per_type = 30;
    write_conll(dir / name, generate_synthetic(cfg));
  }
};

std::string tag_columns(const std::string& conll) {
  std::istringstream in(conll);
  std::string out;
  for (std::string line; std::getline(in, line);) {
    std::istringstream fields(line);
    std::string token, tag;
    fields >> token >> tag;
    out += token + " " + tag + "\n";
  }
  return out;
}

}  // namespace

TEST_CASE("config merging") {
  const json defaults = cli::default_config();
  CHECK(defaults.at("train.learning_rate") == 0.01);
  CHECK(defaults.at("perturb.target_recall") == 0.5);
  CHECK(defaults.at("selftrain.later_tau_n") == 0.15);

  const json merged = cli::merge_config(defaults, json{{"train.epochs", "4"}, {"train.calibration", "off"},
                                                       {"tau.p", 0.1}, {"seed", 9}});
  CHECK(merged.at("train.epochs") == 4);
  CHECK(merged.at("train.calibration") == false);
  CHECK(merged.at("tau.p") == 0.1);
  CHECK(merged.at("seed") == 9);
  CHECK_THROWS_AS(cli::merge_config(defaults, json{{"train.nope", 1}}), ConfigError);
  CHECK_THROWS_AS(cli::merge_config(defaults, json{{"train.epochs", "many"}}), ConfigError);
  CHECK_THROWS_AS(cli::merge_config(defaults, json{{"train.epochs", 1.5}}), ConfigError);
  CHECK_THROWS_AS(cli::merge_config(defaults, json::array()), ConfigError);
}

TEST_CASE("usage errors exit with 1") {
  Workspace ws;
  CHECK(run({}).code == cli::kConfigError);
  CHECK(run({"frobnicate"}).code == cli::kConfigError);
  CHECK(run({"train", "--bogus"}).code == cli::kConfigError);
  CHECK(run({"train", "--train", ws / "missing.conll", "--seed", "1"}).code == cli::kConfigError);
  const Run no_seed = run({"train", "--train", ws / "clean.conll"});
  CHECK(no_seed.code == cli::kConfigError);
  CHECK(no_seed.err.find("seed") != std::string::npos);
  CHECK(run({"train", "--train", ws / "clean.conll", "--seed", "1", "--tau", "oracle"}).code ==
        cli::kConfigError);
  CHECK(run({"train", "--train", ws / "clean.conll", "--seed", "1", "--strategy", "psychic"}).code ==
        cli::kConfigError);
  CHECK(run({"--help"}).code == cli::kOk);
}

TEST_CASE("data and numerical errors") {
  Workspace ws;
  std::ofstream(ws / "bad.conll") << "a B-PER\nb\n";
  const Run bad = run({"train", "--train", ws / "bad.conll", "--seed", "1"});
  CHECK(bad.code == cli::kDataError);
  CHECK(bad.err.find("line 2") != std::string::npos);

  const Run blowup = run({"train", "--train", ws / "clean.conll", "--seed", "1", "--lr", "1e305",
                          "--epochs", "4", "--output-dir", ws / "out"});
  CHECK(blowup.code == cli::kNumericalError);
}

TEST_CASE("every command echoes its resolved config first") {
  Workspace ws;
  const Run r = run({"synth", "--seed", "4", "--sentences", "7", "-o", ws / "s.conll"});
  REQUIRE(r.code == 0);
  CHECK(r.lines.at(0).at("event") == "config");
  CHECK(r.lines.at(0).at("command") == "synth");
  CHECK(r.config().size() == cli::default_config().size());
  CHECK(r.config().at("synth.sentences") == 7);
  CHECK(r.config().at("train.epochs") == 10);
  CHECK(parse_conll(slurp(ws / "s.conll")).size() == 7);
}

TEST_CASE("config file, environment and flag precedence") {
  Workspace ws;
  std::ofstream(ws / "cfg.json") << R"({"seed": 3, "synth.sentences": 5, "synth.types": 2})";
  std::ofstream(ws / "env.json") << R"({"seed": 8, "synth.sentences": 6})";

  CHECK(run({"synth", "--config", ws / "cfg.json", "-o", ws / "a.conll"}).config().at("synth.sentences") == 5);
  const Run flags = run({"synth", "--config", ws / "cfg.json", "--sentences", "9", "--set", "synth.types=1",
                         "-o", ws / "a.conll"});
  CHECK(flags.config().at("synth.sentences") == 9);
  CHECK(flags.config().at("synth.types") == 1);

  ::setenv("NOISYNER_CONFIG", (ws / "env.json").c_str(), 1);
  const Run env = run({"synth", "-o", ws / "b.conll"});
  const Run explicit_file = run({"synth", "--config", ws / "cfg.json", "-o", ws / "b.conll"});
  ::unsetenv("NOISYNER_CONFIG");
  CHECK(env.config().at("seed") == 8);
  CHECK(env.config().at("synth.sentences") == 6);
  CHECK(explicit_file.config().at("seed") == 3);

  std::ofstream(ws / "broken.json") << "{";
  CHECK(run({"synth", "--config", ws / "broken.json"}).code == cli::kConfigError);
  CHECK(run({"synth", "--seed", "1", "--set", "noequals"}).code == cli::kConfigError);
}

TEST_CASE("perturb") {
  Workspace ws;
  SUBCASE("targets of one copy the tags") {
    const Run r = run({"perturb", "--seed", "1", "--input", ws / "clean.conll", "--recall", "1", "--precision",
                       "1", "-o", ws / "copy.conll"});
    REQUIRE(r.code == 0);
    CHECK(tag_columns(slurp(ws / "copy.conll")) == tag_columns(slurp(ws / "clean.conll")));
    CHECK(read_ledger(ws / "copy.ledger.json").noisy_tokens().empty());
  }
  SUBCASE("defaults reach the targets and are reproducible") {
    const Run a = run({"perturb", "--seed", "5", "--input", ws / "clean.conll", "--output-dir", ws / "a"});
    const Run b = run({"perturb", "--seed", "5", "--input", ws / "clean.conll", "--output-dir", ws / "b"});
    REQUIRE(a.code == 0);
    CHECK(a.last().at("recall").get<double>() <= 0.5);
    CHECK(a.last().at("precision").get<double>() <= 0.9);
    CHECK(slurp(ws / "a/perturbed.conll") == slurp(ws / "b/perturbed.conll"));
    CHECK(slurp(ws / "a/perturbed.ledger.json") == slurp(ws / "b/perturbed.ledger.json"));
    const Corpus noisy = parse_conll(slurp(ws / "a/perturbed.conll"), ConllOptions{0, 1, 2});
    CHECK(entity_recall(noisy) == doctest::Approx(a.last().at("recall").get<double>()));
  }
  SUBCASE("recall sweep") {
    const Run r = run({"perturb", "--seed", "5", "--input", ws / "clean.conll", "--sweep", "--output-dir",
                       ws / "sweep"});
    REQUIRE(r.code == 0);
    REQUIRE(r.lines.size() == 6);
    const double levels[] = {0.3, 0.4, 0.5, 0.6, 0.7};
    for (std::size_t k = 0; k < 5; ++k) {
      const json& line = r.lines[k + 1];
      CHECK(line.at("target_recall") == levels[k]);
      CHECK(line.at("recall").get<double>() <= levels[k]);
      CHECK(fs::exists(line.at("corpus").get<std::string>()));
      CHECK(fs::exists(line.at("ledger").get<std::string>()));
    }
  }
}

TEST_CASE("train, predict, eval") {
  Workspace ws;
  REQUIRE(run({"perturb", "--seed", "2", "--input", ws / "clean.conll", "--output-dir", ws / "p"}).code == 0);
  const std::vector<std::string> common{"train", "--seed", "11", "--train", ws / "p/perturbed.conll",
                                        "--epochs", "3", "--test", ws / "test.conll"};

  SUBCASE("zero noise rates give the plain CRF") {
    auto args = common;
    for (const std::string& a : std::vector<std::string>{"--tau", "0,0", "--model", ws / "m.json"}) args.push_back(a);
    const Run r = run(args);
    REQUIRE(r.code == 0);
    CHECK(r.lines.size() == 1 + 1 + 3 + 1);  // config, tau, epochs, summary
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.seed = Rng::derive_seed(11, "shuffle");
    const Corpus train = parse_conll(slurp(ws / "p/perturbed.conll"), ConllOptions{0, 1, 2});
    const CrfModel expected = fit(train, cfg).model;
    const Checkpoint ck = load_checkpoint(ws / "m.json");
    CHECK(ck.model == expected);
    CHECK(ck.config == r.config());
    CHECK(ck.config_fingerprint == fingerprint(r.config()));

    const Run ev = run({"eval", "--model", ws / "m.json", "--input", ws / "test.conll"});
    REQUIRE(ev.code == 0);
    const Corpus test = parse_conll(slurp(ws / "test.conll"), {}, expected.tagset());
    CHECK(ev.last().at("overall").at("f1") == evaluate(expected, test).overall.f1);
    CHECK(ev.last().at("per_type").size() == 3);

    REQUIRE(run({"predict", "--model", ws / "m.json", "--input", ws / "test.conll", "-o", ws / "pred.conll"}).code == 0);
    const Corpus predicted = parse_conll(slurp(ws / "pred.conll"), {}, expected.tagset());
    CHECK(predicted.observed_tags() == expected.predict(test));
  }
  SUBCASE("identical configs give identical checkpoints") {
    auto a = common, b = common;
    for (const std::string& x : std::vector<std::string>{"--tau", "0.05,0.1", "--model", ws / "a.json"}) a.push_back(x);
    for (const std::string& x : std::vector<std::string>{"--tau", "0.05,0.1", "--model", ws / "b.json"}) b.push_back(x);
    REQUIRE(run(a).code == 0);
    REQUIRE(run(b).code == 0);
    CHECK(load_checkpoint(ws / "a.json").model == load_checkpoint(ws / "b.json").model);
  }
  SUBCASE("searched noise rates with local scores and no calibration") {
    auto args = common;
    for (const std::string& x : std::vector<std::string>{"--tau", "searched", "--dev", ws / "dev.conll", "--strategy", "local",
                          "--calibration", "off", "--set", "tau.grid_max=0.02", "--model", ws / "s.json"}) {
      args.push_back(x);
    }
    const Run r = run(args);
    REQUIRE(r.code == 0);
    CHECK(r.lines.at(1).at("fits") == 6);
    CHECK(r.config().at("train.strategy") == "local");
    CHECK(r.config().at("train.calibration") == false);
    CHECK(r.last().contains("test"));
  }
}

TEST_CASE("detect-noise") {
  Workspace ws;
  REQUIRE(run({"perturb", "--seed", "3", "--input", ws / "clean.conll", "--output-dir", ws / "p"}).code == 0);
  const std::string ledger = ws / "p/perturbed.ledger.json";
  const NoiseLedger truth = read_ledger(ledger);

  SUBCASE("scoring given flags") {
    {
      std::ofstream perfect(ws / "perfect.jsonl");
      for (const TokenRef& t : truth.noisy_tokens()) {
        perfect << json{{"sentence", t.sentence_id}, {"token", t.token}}.dump() << '\n';
      }
      std::ofstream(ws / "empty.jsonl") << "";
    }
    const Run p = run({"detect-noise", "--flags", ws / "perfect.jsonl", "--ledger", ledger});
    CHECK(p.last().at("noise_detection").at("f1") == 1.0);
    const Run e = run({"detect-noise", "--flags", ws / "empty.jsonl", "--ledger", ledger});
    CHECK(e.last().at("noise_detection").at("f1") == 0.0);
  }
  SUBCASE("a trained model beats a random flagger") {
    REQUIRE(run({"train", "--seed", "1", "--train", ws / "p/perturbed.conll", "--ledger", ledger, "--tau",
                 "oracle", "--model", ws / "m.json"}).code == 0);
    const Run r = run({"detect-noise", "--model", ws / "m.json", "--input", ws / "p/perturbed.conll",
                       "--ledger", ledger, "--tau", "oracle", "-o", ws / "records.jsonl"});
    REQUIRE(r.code == 0);
    const double f1 = r.last().at("noise_detection").at("f1").get<double>();

    // Same budget per group, drawn at random from the dumped records.
    std::vector<TokenRef> pos, neg;
    std::size_t flagged_p = 0, flagged_n = 0;
    std::ifstream in(ws / "records.jsonl");
    for (std::string line; std::getline(in, line);) {
      const json j = json::parse(line);
      const TokenRef ref{j.at("sentence"), j.at("token")};
      const bool flagged = j.at("verdict") == "untrusted";
      if (j.at("group") == "p") {
        pos.push_back(ref);
        flagged_p += flagged;
      } else {
        neg.push_back(ref);
        flagged_n += flagged;
      }
    }
    CHECK(flagged_p + flagged_n == r.last().at("flagged"));
    Rng rng(5);
    double baseline = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      rng.shuffle(std::span<TokenRef>(pos));
      rng.shuffle(std::span<TokenRef>(neg));
      std::set<TokenRef> flags(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(flagged_p));
      flags.insert(neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(flagged_n));
      baseline += score_noise_detection(flags, truth).f1 / 10.0;
    }
    MESSAGE("detect-noise F1 " << f1 << " vs random " << baseline);
    CHECK(f1 > baseline);

    // The dumped records score the same through the flag path.
    const Run again = run({"detect-noise", "--flags", ws / "records.jsonl", "--ledger", ledger});
    CHECK(again.last().at("noise_detection").at("f1") == f1);
  }
}

TEST_CASE("search-tau and selftrain") {
  Workspace ws;
  REQUIRE(run({"perturb", "--seed", "4", "--input", ws / "clean.conll", "--output-dir", ws / "p"}).code == 0);
  const Run s = run({"search-tau", "--seed", "1", "--train", ws / "p/perturbed.conll", "--dev", ws / "dev.conll",
                     "--epochs", "2", "--set", "tau.grid_max=0.03"});
  REQUIRE(s.code == 0);
  CHECK(s.last().at("fits") == 8);
  CHECK(s.lines.size() == 1 + 8 + 1);

  const Run st = run({"selftrain", "--seed", "1", "--train", ws / "p/perturbed.conll", "--test", ws / "test.conll",
                      "--epochs", "2", "--rounds", "2", "--tau", "0.01,0.02", "--output-dir", ws / "st"});
  REQUIRE(st.code == 0);
  std::vector<json> rounds;
  for (const json& l : st.lines) {
    if (l.at("event") == "round") rounds.push_back(l);
  }
  REQUIRE(rounds.size() == 2);
  CHECK(rounds[0].at("tau_p") == 0.01);
  CHECK(rounds[1].at("tau_p") == 0.005);
  CHECK(rounds[1].at("tau_n") == 0.15);
  CHECK(rounds[1].contains("eval"));
  CHECK(fs::exists(ws / "st/model.json"));
  CHECK(fs::exists(ws / "st/relabeled.conll"));
}
