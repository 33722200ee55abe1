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

#include "noisyner/lattice.hpp"

#include <string>

namespace noisyner {

TransitionModel::TransitionModel(std::size_t num_labels)
    : labels_(num_labels),
      weights_(num_labels + 2, num_labels + 2, 0.0),
      allowed_((num_labels + 2) * (num_labels + 2), 1) {}

Matrix TransitionModel::scores() const {
  Matrix out(num_states(), num_states());
  for (std::size_t a = 0; a < num_states(); ++a) {
    for (std::size_t b = 0; b < num_states(); ++b) out(a, b) = score(a, b);
  }
  return out;
}

void TransitionModel::set_allowed_mask(std::vector<std::uint8_t> mask) {
  if (mask.size() != allowed_.size()) throw DataError("transition mask has the wrong size");
  allowed_ = std::move(mask);
}

void TransitionModel::restrict_to_bio(const TagSet& tagset) {
  if (tagset.size() != labels_) throw DataError("tag set does not match transition model");
  for (std::size_t to = 0; to < labels_; ++to) {
    const Label& l = tagset.label(static_cast<LabelId>(to));
    if (l.position != Position::Inside) continue;
    allowed_[bos() * num_states() + to] = 0;
    for (std::size_t from = 0; from < labels_; ++from) {
      const Label& prev = tagset.label(static_cast<LabelId>(from));
      if (prev.position == Position::Outside || prev.type != l.type) {
        allowed_[from * num_states() + to] = 0;
      }
    }
  }
}

void TransitionModel::clear_restrictions() { std::fill(allowed_.begin(), allowed_.end(), 1); }

Lattice make_lattice(Matrix emissions, const TransitionModel& transitions) {
  if (emissions.cols() != transitions.num_labels()) {
    throw DataError("emission and transition label counts differ");
  }
  return Lattice{std::move(emissions), transitions.scores()};
}

Lattice make_lattice(Matrix emissions) {
  const std::size_t states = emissions.cols() + 2;
  return Lattice{std::move(emissions), Matrix(states, states, 0.0)};
}

ConstraintMask::ConstraintMask(std::size_t length, std::size_t num_labels, bool value)
    : length_(length), labels_(num_labels), bits_(length * num_labels, value ? 1 : 0) {}

ConstraintMask ConstraintMask::full(std::size_t length, std::size_t num_labels) {
  return ConstraintMask(length, num_labels, true);
}

ConstraintMask ConstraintMask::singleton(std::span<const LabelId> tags, std::size_t num_labels) {
  ConstraintMask mask(tags.size(), num_labels, false);
  for (std::size_t i = 0; i < tags.size(); ++i) mask.set(i, static_cast<std::size_t>(tags[i]));
  return mask;
}

void ConstraintMask::allow_only(std::size_t i, std::span<const LabelId> labels) {
  for (std::size_t k = 0; k < labels_; ++k) set(i, k, false);
  for (LabelId k : labels) set(i, static_cast<std::size_t>(k));
}

void ConstraintMask::allow_all(std::size_t i) {
  for (std::size_t k = 0; k < labels_; ++k) set(i, k);
}

std::size_t ConstraintMask::count(std::size_t i) const {
  std::size_t c = 0;
  for (std::size_t k = 0; k < labels_; ++k) c += bits_[i * labels_ + k];
  return c;
}

bool ConstraintMask::is_full() const {
  return std::all_of(bits_.begin(), bits_.end(), [](std::uint8_t b) { return b != 0; });
}

namespace {

void check_shape(const Lattice& lattice, const ConstraintMask* mask) {
  if (lattice.length() == 0) throw DataError("lattice has no tokens");
  const std::size_t states = lattice.num_labels() + 2;
  if (lattice.transitions.rows() != states || lattice.transitions.cols() != states) {
    throw DataError("transition table does not match the label count");
  }
  if (mask && (mask->length() != lattice.length() || mask->num_labels() != lattice.num_labels())) {
    throw DataError("constraint mask does not match the lattice");
  }
}

[[noreturn]] void empty_column(std::size_t i) {
  throw NumericalError("empty lattice column at token " + std::to_string(i));
}

ForwardBackwardTables run_forward_backward(const Lattice& lattice, const ConstraintMask* mask) {
  check_shape(lattice, mask);
  const std::size_t n = lattice.length();
  const std::size_t L = lattice.num_labels();
  const Matrix& E = lattice.emissions;
  const Matrix& T = lattice.transitions;
  auto open = [&](std::size_t i, std::size_t k) { return mask == nullptr || mask->allowed(i, k); };

  ForwardBackwardTables t{Matrix(n, L, kNegInf), Matrix(n, L, kNegInf), kNegInf};
  std::vector<double> terms(L);

  for (std::size_t k = 0; k < L; ++k) {
    if (open(0, k)) t.log_alpha(0, k) = T(lattice.bos(), k) + E(0, k);
  }
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t k = 0; k < L; ++k) {
      if (!open(i, k)) continue;
      for (std::size_t j = 0; j < L; ++j) terms[j] = t.log_alpha(i - 1, j) + T(j, k);
      t.log_alpha(i, k) = log_sum_exp(terms) + E(i, k);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    bool any = false;
    for (std::size_t k = 0; k < L && !any; ++k) any = t.log_alpha(i, k) != kNegInf;
    if (!any) empty_column(i);
  }

  for (std::size_t k = 0; k < L; ++k) {
    if (open(n - 1, k)) t.log_beta(n - 1, k) = T(k, lattice.eos());
  }
  for (std::size_t i = n - 1; i-- > 0;) {
    for (std::size_t k = 0; k < L; ++k) {
      if (!open(i, k)) continue;
      for (std::size_t j = 0; j < L; ++j) terms[j] = T(k, j) + E(i + 1, j) + t.log_beta(i + 1, j);
      t.log_beta(i, k) = log_sum_exp(terms);
    }
  }

  for (std::size_t k = 0; k < L; ++k) terms[k] = t.log_alpha(n - 1, k) + t.log_beta(n - 1, k);
  t.log_z = log_sum_exp(terms);
  if (t.log_z == kNegInf) empty_column(n - 1);
  if (!std::isfinite(t.log_z)) throw NumericalError("non-finite partition function");
  return t;
}

}  // namespace

ForwardBackwardTables forward_backward(const Lattice& lattice) {
  return run_forward_backward(lattice, nullptr);
}

ForwardBackwardTables forward_backward(const Lattice& lattice, const ConstraintMask& mask) {
  return run_forward_backward(lattice, &mask);
}

Matrix marginals(const ForwardBackwardTables& tables) {
  const std::size_t n = tables.log_alpha.rows();
  const std::size_t L = tables.log_alpha.cols();
  Matrix p(n, L, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < L; ++k) {
      const double a = tables.log_alpha(i, k);
      const double b = tables.log_beta(i, k);
      if (a == kNegInf || b == kNegInf) continue;
      p(i, k) = std::exp(a + b - tables.log_z);
    }
  }
  return p;
}

double path_score(const Lattice& lattice, std::span<const LabelId> tags) {
  if (tags.size() != lattice.length()) throw DataError("tag sequence length mismatch");
  check_shape(lattice, nullptr);
  const Matrix& T = lattice.transitions;
  std::size_t prev = lattice.bos();
  double s = 0.0;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const auto k = static_cast<std::size_t>(tags[i]);
    if (k >= lattice.num_labels()) throw DataError("label id out of range");
    s += T(prev, k) + lattice.emissions(i, k);
    prev = k;
  }
  return s + T(prev, lattice.eos());
}

double sequence_log_prob(const Lattice& lattice, std::span<const LabelId> tags) {
  return path_score(lattice, tags) - forward_backward(lattice).log_z;
}

double constrained_log_marginal(const Lattice& lattice, const ConstraintMask& mask) {
  if (mask.is_full()) {
    check_shape(lattice, &mask);
    return 0.0;
  }
  const double constrained = forward_backward(lattice, mask).log_z;
  return constrained - forward_backward(lattice).log_z;
}

ViterbiResult viterbi(const Lattice& lattice) {
  check_shape(lattice, nullptr);
  const std::size_t n = lattice.length();
  const std::size_t L = lattice.num_labels();
  const Matrix& E = lattice.emissions;
  const Matrix& T = lattice.transitions;

  Matrix delta(n, L, kNegInf);
  std::vector<std::size_t> back(n * L, 0);
  for (std::size_t k = 0; k < L; ++k) delta(0, k) = T(lattice.bos(), k) + E(0, k);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t k = 0; k < L; ++k) {
      double best = kNegInf;
      std::size_t arg = 0;
      for (std::size_t j = 0; j < L; ++j) {
        const double v = delta(i - 1, j) + T(j, k);
        if (v > best) {
          best = v;
          arg = j;
        }
      }
      delta(i, k) = best + E(i, k);
      back[i * L + k] = arg;
    }
  }

  ViterbiResult result;
  std::size_t last = 0;
  for (std::size_t k = 0; k < L; ++k) {
    const double v = delta(n - 1, k) + T(k, lattice.eos());
    if (v > result.score) {
      result.score = v;
      last = k;
    }
  }
  if (result.score == kNegInf) throw NumericalError("no feasible path in lattice");

  result.tags.assign(n, 0);
  result.tags[n - 1] = static_cast<LabelId>(last);
  for (std::size_t i = n - 1; i > 0; --i) {
    last = back[i * L + last];
    result.tags[i - 1] = static_cast<LabelId>(last);
  }
  return result;
}

LatticeGradients expected_counts(const Lattice& lattice, const ForwardBackwardTables& tables) {
  const std::size_t n = lattice.length();
  const std::size_t L = lattice.num_labels();
  const Matrix& E = lattice.emissions;
  const Matrix& T = lattice.transitions;

  LatticeGradients g{marginals(tables), Matrix(L + 2, L + 2, 0.0)};
  for (std::size_t k = 0; k < L; ++k) {
    g.transitions(lattice.bos(), k) += g.emissions(0, k);
    g.transitions(k, lattice.eos()) += g.emissions(n - 1, k);
  }
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = 0; j < L; ++j) {
      const double a = tables.log_alpha(i - 1, j);
      if (a == kNegInf) continue;
      for (std::size_t k = 0; k < L; ++k) {
        const double b = tables.log_beta(i, k);
        if (b == kNegInf || T(j, k) == kNegInf) continue;
        g.transitions(j, k) += std::exp(a + T(j, k) + E(i, k) + b - tables.log_z);
      }
    }
  }
  return g;
}

PartialMarginal partial_marginal(const Lattice& lattice, const ConstraintMask& mask) {
  const ForwardBackwardTables free = forward_backward(lattice);
  const ForwardBackwardTables constrained = forward_backward(lattice, mask);

  PartialMarginal out;
  out.log_marginal = mask.is_full() ? 0.0 : constrained.log_z - free.log_z;
  out.gradients = expected_counts(lattice, constrained);
  const LatticeGradients expected = expected_counts(lattice, free);
  auto ge = out.gradients.emissions.values();
  auto fe = expected.emissions.values();
  for (std::size_t x = 0; x < ge.size(); ++x) ge[x] -= fe[x];
  auto gt = out.gradients.transitions.values();
  auto ft = expected.transitions.values();
  for (std::size_t x = 0; x < gt.size(); ++x) gt[x] -= ft[x];
  return out;
}

LatticeGradients partial_marginal_gradients(const Lattice& lattice, const ConstraintMask& mask) {
  return partial_marginal(lattice, mask).gradients;
}

}  // namespace noisyner
