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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "noisyner/cli.hpp"
#include "noisyner/synthetic.hpp"
#include "noisyner/trainer.hpp"
#include "oracle/brute_force.hpp"

using namespace noisyner;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = "failed: " + what;
    pass = pass && ok;
  }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

bool close_log(double a, double b, double tol) {
  if (a == b) return true;
  return std::abs(a - b) <= tol * std::max(1.0, std::abs(b));
}

// ---- 1 ------------------------------------------------------------------

Outcome lattice_oracle() {
  Outcome out;
  Rng rng(1001);
  std::size_t lattices = 0;
  for (; lattices < 240; ++lattices) {
    const std::size_t n = 1 + rng.uniform_index(6);
    const std::size_t labels = 1 + rng.uniform_index(5);
    const Lattice lat = oracle::random_lattice(rng, n, labels);
    const std::string where = "lattice " + std::to_string(lattices);

    const double log_z = oracle::log_partition(lat);
    out.require(close_log(forward_backward(lat).log_z, log_z, 1e-8), where + " partition");

    for (int k = 0; k < 3; ++k) {
      std::vector<LabelId> path(n);
      for (LabelId& y : path) y = static_cast<LabelId>(rng.uniform_index(labels));
      out.require(close_log(sequence_log_prob(lat, path), oracle::score(lat, path) - log_z, 1e-8),
                  where + " sequence probability");
    }

    const Matrix p = marginals(forward_backward(lat));
    const Matrix q = oracle::marginals(lat);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < labels; ++k) {
        out.require(std::abs(p(i, k) - q(i, k)) <= 1e-8, where + " marginal");
      }
    }

    const ConstraintMask mask = oracle::random_mask(rng, n, labels);
    out.require(close_log(constrained_log_marginal(lat, mask), oracle::log_partition(lat, &mask) - log_z, 1e-8),
                where + " constrained marginal");

    double best = 0.0;
    const auto expected = oracle::argmax(lat, &best);
    const ViterbiResult v = viterbi(lat);
    out.require(v.tags == expected, where + " viterbi path");
    out.require(close_log(v.score, best, 1e-8), where + " viterbi score");
  }
  out.detail = out.pass ? std::to_string(lattices) + " lattices (n<=6, L<=5) agree with enumeration" : out.detail;
  return out;
}

// ---- 2 ------------------------------------------------------------------

Outcome gradients() {
  Outcome out;
  Rng rng(2002);
  double worst = 0.0;
  std::size_t pairs = 0;
  for (; pairs < 60; ++pairs) {
    const std::size_t n = 1 + rng.uniform_index(6);
    const std::size_t labels = 1 + rng.uniform_index(5);
    Lattice lat = oracle::random_lattice(rng, n, labels);
    const ConstraintMask mask = oracle::random_mask(rng, n, labels);
    const LatticeGradients g = partial_marginal_gradients(lat, mask);
    const auto loss = [&] { return -constrained_log_marginal(lat, mask); };
    const Matrix fd_e = oracle::finite_difference(lat.emissions, loss, 1e-5);
    const Matrix fd_t = oracle::finite_difference(lat.transitions, loss, 1e-5);
    // g holds the gradient of log p~; the loss is its negation.
    for (std::size_t x = 0; x < fd_e.values().size(); ++x) {
      worst = std::max(worst, std::abs(-g.emissions.values()[x] - fd_e.values()[x]));
    }
    for (std::size_t x = 0; x < fd_t.values().size(); ++x) {
      worst = std::max(worst, std::abs(-g.transitions.values()[x] - fd_t.values()[x]));
    }
  }
  out.require(worst <= 1e-4, "max abs difference " + std::to_string(worst));
  if (out.pass) out.detail = std::to_string(pairs) + " (lattice, mask) pairs, max |analytic - FD| = " + fmt("%.2e", worst);
  return out;
}

// ---- 3 ------------------------------------------------------------------

Outcome schedule() {
  Outcome out;
  std::size_t points = 0;
  for (double tau : {0.005, 0.15}) {
    for (int k : {1, 2, 3, 5, 7, 10}) {
      for (int e = 0; e <= 3 * k + 2; ++e) {
        const double expected = e >= k ? 1.0 - tau : 1.0 - (static_cast<double>(e) / k) * tau;
        const double got = keep_ratio(e, ScheduleConfig{tau, tau, k}, Group::Negative);
        out.require(got == expected, fmt("e=%g K=%g tau=%g", e, k, tau));
        out.require(keep_ratio(e, ScheduleConfig{tau, 0.0, k}, Group::Positive) == expected, "positive group");
        ++points;
      }
    }
    out.require(keep_ratio(0, ScheduleConfig{tau, tau, 5}, Group::Negative) == 1.0, "e=0");
    out.require(keep_ratio(5, ScheduleConfig{tau, tau, 5}, Group::Negative) == 1.0 - tau, "e=K");
    out.require(keep_ratio(50, ScheduleConfig{tau, tau, 5}, Group::Negative) == 1.0 - tau, "e>K");
  }
  if (out.pass) out.detail = std::to_string(points) + " (e, K, tau) points bit-exact";
  return out;
}

// ---- 4 ------------------------------------------------------------------

Outcome figure_fixture() {
  Outcome out;
  TagSet ts;
  ts.add_type("PER");
  ts.add_type("LOC");
  const auto id = [&](const char* t) { return ts.lookup(t); };
  // "They visited Brooklyn , New York": Brooklyn tagged B-PER, New missed,
  // York tagged B-LOC.
  const std::vector<LabelId> obs{id("O"), id("O"), id("B-PER"), id("O"), id("O"), id("B-LOC")};
  const auto peaked = [&](const char* label) {
    std::vector<double> d(ts.size(), 0.025);
    d[static_cast<std::size_t>(id(label))] = 0.9;
    return d;
  };
  std::vector<ConfidenceRecord> records;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    ConfidenceRecord r;
    r.token_index = i;
    r.observed = obs[i];
    r.group = ts.is_positive(obs[i]) ? Group::Positive : Group::Negative;
    records.push_back(r);
  }
  records[4].verdict = Verdict::Untrusted;
  records[2].verdict = Verdict::Untrusted;
  records[2].calibration = calibrate(obs[2], peaked("B-LOC"), ts);
  records[5].verdict = Verdict::Untrusted;
  records[5].calibration = calibrate(obs[5], peaked("I-LOC"), ts);
  out.require(records[2].calibration->kept == KeptPart::Position, "Brooklyn keeps its position part");
  out.require(records[5].calibration->kept == KeptPart::Type, "York keeps its type part");
  const ConstraintMask mask = build_mask(obs.size(), records, ts);

  // The compatible set, written out by hand.
  std::vector<std::vector<LabelId>> allowed(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) allowed[i] = {obs[i]};
  allowed[4] = {id("O"), id("B-PER"), id("I-PER"), id("B-LOC"), id("I-LOC")};
  allowed[2] = {id("B-PER"), id("B-LOC"), id("O")};
  allowed[5] = {id("B-LOC"), id("I-LOC"), id("O")};
  for (std::size_t i = 0; i < obs.size(); ++i) {
    out.require(mask.count(i) == allowed[i].size(), "mask size at token " + std::to_string(i));
    for (LabelId y : allowed[i]) out.require(mask.allowed(i, static_cast<std::size_t>(y)), "mask content");
  }

  Rng rng(4004);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Lattice lat = oracle::random_lattice(rng, obs.size(), ts.size());
    std::vector<double> scores;
    for (LabelId brooklyn : allowed[2]) {
      for (LabelId news : allowed[4]) {
        for (LabelId york : allowed[5]) {
          std::vector<LabelId> path = obs;
          path[2] = brooklyn;
          path[4] = news;
          path[5] = york;
          scores.push_back(oracle::score(lat, path));
        }
      }
    }
    const double m = *std::max_element(scores.begin(), scores.end());
    double total = 0.0;
    for (double s : scores) total += std::exp(s - m);
    const double expected = m + std::log(total) - oracle::log_partition(lat);
    const double got = constrained_log_marginal(lat, mask);
    worst = std::max(worst, std::abs(got - expected));
    out.require(std::abs(got - expected) <= 1e-8, "constrained marginal vs 45-path sum");
  }
  if (out.pass) out.detail = "45 compatible paths, 20 lattices, max error " + fmt("%.2e", worst);
  return out;
}

// ---- 5 ------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome perturbation(const fs::path& work) {
  Outcome out;
  write_conll(work / "clean.conll", generate_synthetic(SyntheticConfig{1000, 3, 120, 55}));
  std::ostringstream sink, err;
  const auto perturb_into = [&](const std::string& dir) {
    return cli::run({"perturb", "--seed", "9", "--input", (work / "clean.conll").string(), "--recall", "0.5",
                     "--precision", "0.9", "--output-dir", (work / dir).string()},
                    sink, err);
  };
  out.require(perturb_into("a") == 0, "perturb command failed: " + err.str());
  out.require(perturb_into("b") == 0, "second perturb command failed");
  if (!out.pass) return out;
  out.require(slurp(work / "a/perturbed.conll") == slurp(work / "b/perturbed.conll"), "corpus differs between runs");
  out.require(slurp(work / "a/perturbed.ledger.json") == slurp(work / "b/perturbed.ledger.json"),
              "ledger differs between runs");

  const Corpus clean = parse_conll(slurp(work / "clean.conll"));
  const Corpus noisy = parse_conll(slurp(work / "a/perturbed.conll"), ConllOptions{0, 1, 2});
  const NoiseLedger ledger = read_ledger(work / "a/perturbed.ledger.json");
  const double recall = entity_recall(noisy);
  const double precision = entity_precision(noisy);
  out.require(recall <= 0.5, "recall above target");
  out.require(precision <= 0.9, "precision above target");

  // One identity fewer: restore the trailing run of removed spans that share
  // the last removed surface and type.
  const auto surface = [&](const EntitySpan& s) {
    std::string text;
    for (std::size_t i = s.start; i < s.end; ++i) text += clean.sentences[s.sentence_id].tokens[i].surface + " ";
    return text + s.type;
  };
  Corpus undo_recall = noisy;
  const std::string last = surface(ledger.removed_entities.back());
  for (auto it = ledger.removed_entities.rbegin(); it != ledger.removed_entities.rend() && surface(*it) == last; ++it) {
    for (std::size_t i = it->start; i < it->end; ++i) {
      Token& t = undo_recall.sentences[it->sentence_id].tokens[i];
      t.observed = *t.gold;
    }
  }
  const double recall_before = entity_recall(undo_recall);
  out.require(recall_before > 0.5, "recall was already at target one identity earlier");

  Corpus undo_precision = noisy;
  const EntitySpan& spurious = ledger.spurious_spans.back();
  for (std::size_t i = spurious.start; i < spurious.end; ++i) {
    undo_precision.sentences[spurious.sentence_id].tokens[i].observed = TagSet::kOutside;
  }
  const double precision_before = entity_precision(undo_precision);
  out.require(precision_before > 0.9, "precision was already at target one insertion earlier");
  if (out.pass) {
    out.detail = fmt("recall %.4f (%.4f before last removal), precision %.4f (%.4f before last insertion)",
                     recall, recall_before, precision, precision_before);
  }
  return out;
}

// ---- 6 ------------------------------------------------------------------

Outcome reductions() {
  Outcome out;
  const Corpus c = generate_synthetic(SyntheticConfig{60, 3, 30, 66});
  TrainConfig cfg;
  cfg.seed = 6;
  cfg.epochs = 6;
  std::vector<ConstraintMask> singles;
  for (const Sentence& s : c.sentences) singles.push_back(ConstraintMask::singleton(s.observed_tags(), c.tagset.size()));

  CrfModel plain = CrfModel::initialize(c);
  for (int e = 0; e < cfg.epochs; ++e) {
    const double loss = train_epoch(plain, c, singles, cfg, e);
    TrainConfig prefix = cfg;
    prefix.epochs = e + 1;
    const FitResult confident = fit(c, prefix);
    out.require(confident.model == plain, "weights diverge at epoch " + std::to_string(e));
    out.require(confident.epochs.back().loss == loss, "loss diverges at epoch " + std::to_string(e));
  }

  Rng rng(6006);
  double worst = 0.0;
  for (int trial = 0; trial < 300; ++trial) {
    Lattice lat = oracle::random_lattice(rng, 1 + rng.uniform_index(8), 1 + rng.uniform_index(6));
    lat.transitions.fill(0.0);
    std::vector<LabelId> observed(lat.length());
    for (LabelId& y : observed) y = static_cast<LabelId>(rng.uniform_index(lat.num_labels()));
    const auto local = score_tokens(lat, observed, Strategy::Local);
    const auto global = score_tokens(lat, observed, Strategy::Global);
    for (std::size_t i = 0; i < observed.size(); ++i) worst = std::max(worst, std::abs(local[i] - global[i]));
  }
  out.require(worst <= 1e-12, "local vs global differ by " + fmt("%.2e", worst));
  if (out.pass) {
    out.detail = "6-epoch trajectory bit-identical; zero-transition local/global max diff " + fmt("%.1e", worst);
  }
  return out;
}

// ---- 7 and 8 ------------------------------------------------------------

struct Experiment {
  Corpus train;  // noisy
  Corpus dev;
  Corpus test;
  NoiseLedger ledger;
};

Experiment make_experiment(std::uint64_t seed) {
  const Corpus all = generate_synthetic(SyntheticConfig{1000, 3, 120, seed});
  std::vector<std::size_t> train, dev, test;
  for (std::size_t i = 0; i < all.size(); ++i) (i < 500 ? train : i < 750 ? dev : test).push_back(i);
  PerturbationConfig pc;
  pc.seed = seed;
  PerturbResult noisy = perturb(subset(all, train), pc);
  return Experiment{std::move(noisy.corpus), subset(all, dev), subset(all, test), std::move(noisy.ledger)};
}

double random_flagger_f1(std::span<const ConfidenceRecord> records, const NoiseLedger& ledger, std::uint64_t seed) {
  std::vector<TokenRef> pos, neg;
  std::size_t budget_p = 0, budget_n = 0;
  for (const ConfidenceRecord& r : records) {
    const bool flagged = r.verdict == Verdict::Untrusted;
    if (r.group == Group::Positive) {
      pos.push_back({r.sentence_id, r.token_index});
      budget_p += flagged;
    } else {
      neg.push_back({r.sentence_id, r.token_index});
      budget_n += flagged;
    }
  }
  Rng rng(seed);
  constexpr int kDraws = 50;
  double mean = 0.0;
  for (int d = 0; d < kDraws; ++d) {
    rng.shuffle(std::span<TokenRef>(pos));
    rng.shuffle(std::span<TokenRef>(neg));
    std::set<TokenRef> flags(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(budget_p));
    flags.insert(neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(budget_n));
    mean += score_noise_detection(flags, ledger).f1 / kDraws;
  }
  return mean;
}

Outcome end_to_end() {
  Outcome out;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const Experiment x = make_experiment(seed);
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.strategy = Strategy::Global;

    const double plain_f1 = evaluate(fit(x.train, cfg).model, x.test).overall.f1;

    const TauSearchResult search = grid_search_tau(x.train, x.dev, TauGrid{}, cfg);
    TrainConfig confident = cfg;
    confident.schedule.tau_p = search.tau_p;
    confident.schedule.tau_n = search.tau_n;
    FitOptions opts;
    opts.ledger = &x.ledger;
    const FitResult r = fit(x.train, confident, opts);
    const double f1 = evaluate(r.model, x.test).overall.f1;
    const double detect = r.epochs.back().noise_detection->f1;
    const double baseline = random_flagger_f1(r.records, x.ledger, 700 + seed);

    out.require(detect - baseline >= 0.2, "seed " + std::to_string(seed) + " detection margin below 0.2");
    out.require(f1 >= plain_f1, "seed " + std::to_string(seed) + " confidence-aware F1 below plain CRF");
    detail += fmt("seed %g: detect %.3f vs random %.3f, ", static_cast<double>(seed), detect, baseline) +
              fmt("test F1 %.3f vs plain %.3f; ", f1, plain_f1);
  }
  if (out.pass) out.detail = detail;
  else out.detail += " | " + detail;
  return out;
}

Outcome self_training() {
  Outcome out;
  const Experiment x = make_experiment(1);
  TrainConfig cfg;
  cfg.seed = 1;

  SelfTrainConfig confident;
  confident.rounds = 3;
  confident.first_round = TauMode::Searched;
  confident.split_seed = 81;
  SelfTrainOptions opts;
  opts.dev = &x.dev;
  opts.eval = &x.test;
  const SelfTrainResult a = self_train(x.train, confident, cfg, opts);
  const SelfTrainResult b = self_train(x.train, confident, cfg, opts);
  out.require(a.model == b.model, "models differ between identical runs");
  out.require(a.corpus.observed_tags() == b.corpus.observed_tags(), "relabeled corpora differ between runs");
  out.require(a.rounds.size() == 3, "three rounds expected");

  SelfTrainConfig baseline = confident;
  baseline.first_round = TauMode::Explicit;
  baseline.first_tau_p = baseline.first_tau_n = 0.0;
  baseline.later_tau_p = baseline.later_tau_n = 0.0;
  const SelfTrainResult plain = self_train(x.train, baseline, cfg, opts);

  const double ours = a.rounds[0].eval->f1;
  const double theirs = plain.rounds[0].eval->f1;
  out.require(ours >= theirs, "round-1 F1 below the zero-noise-rate baseline");
  std::string trace;
  for (std::size_t k = 0; k < a.rounds.size(); ++k) {
    trace += fmt(" %.3f/%.3f", a.rounds[k].eval->f1, plain.rounds[k].eval->f1);
  }
  const std::string detail = "round F1 ours/baseline:" + trace;
  out.detail = out.pass ? detail : out.detail + " |" + detail;
  return out;
}

// ---- 9 ------------------------------------------------------------------

Outcome tau_search() {
  Outcome out;
  const Corpus all = generate_synthetic(SyntheticConfig{300, 3, 60, 99});
  std::vector<std::size_t> train, dev;
  for (std::size_t i = 0; i < all.size(); ++i) (i < 200 ? train : dev).push_back(i);
  PerturbationConfig pc;
  pc.seed = 3;
  const Corpus noisy = perturb(subset(all, train), pc).corpus;
  const Corpus dev_set = subset(all, dev);
  TrainConfig cfg;
  cfg.seed = 9;
  cfg.epochs = 5;

  const auto grid = TauGrid{}.values();
  out.require(grid.size() == 21 && grid.front() == 0.0 && std::abs(grid.back() - 0.2) < 1e-12, "grid shape");
  const TauSearchResult a = grid_search_tau(noisy, dev_set, TauGrid{}, cfg);
  const TauSearchResult b = grid_search_tau(noisy, dev_set, TauGrid{}, cfg);
  out.require(a.fits == 42 && a.trials.size() == 42, "expected 21+21 fits, got " + std::to_string(a.fits));
  out.require(a.tau_p == b.tau_p && a.tau_n == b.tau_n, "search result not deterministic");
  for (std::size_t k = 0; k < a.trials.size() && k < b.trials.size(); ++k) {
    out.require(a.trials[k].dev_f1 == b.trials[k].dev_f1, "trial scores not deterministic");
  }
  if (out.pass) out.detail = fmt("42 fits, tau_p %.2f tau_n %.2f, identical on rerun", a.tau_p, a.tau_n);
  return out;
}

struct Criterion {
  int number;
  const char* name;
  double limit_seconds;  // 0: no runtime bound
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const fs::path work = fs::temp_directory_path() / "noisyner_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  const std::vector<Criterion> criteria{
      {1, "lattice oracle suite", 10.0, lattice_oracle},
      {2, "gradient suite", 30.0, gradients},
      {3, "schedule exactness", 0.0, schedule},
      {4, "crossed-out label fixture", 0.0, figure_fixture},
      {5, "perturbation contract", 5.0, [&] { return perturbation(work); }},
      {6, "reduction tests", 0.0, reductions},
      {7, "desk-scale end-to-end", 300.0, end_to_end},
      {8, "self-training sanity", 0.0, self_training},
      {9, "tau search", 0.0, tau_search},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.limit_seconds > 0.0 && seconds >= c.limit_seconds) {
      o.pass = false;
      o.detail += fmt(" (runtime %.1f s exceeds %.0f s)", seconds, c.limit_seconds);
    }
    failures += !o.pass;
    std::printf("%s  [%d] %-28s %7.2f s  %s\n", o.pass ? "PASS" : "FAIL", c.number, c.name, seconds, o.detail.c_str());
    std::fflush(stdout);
  }
  fs::remove_all(work);
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
