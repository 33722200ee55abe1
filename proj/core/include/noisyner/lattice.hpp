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

#ifndef NOISYNER_LATTICE_HPP_
#define NOISYNER_LATTICE_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "noisyner/common.hpp"
#include "noisyner/corpus.hpp"

namespace noisyner {

/// Label-to-label log-scores with two virtual states: index L is BOS and
/// L + 1 is EOS. Only BOS->label, label->label and label->EOS are used.
class TransitionModel {
 public:
  TransitionModel() = default;
  explicit TransitionModel(std::size_t num_labels);

  std::size_t num_labels() const { return labels_; }
  std::size_t num_states() const { return labels_ + 2; }
  std::size_t bos() const { return labels_; }
  std::size_t eos() const { return labels_ + 1; }

  double& weight(std::size_t from, std::size_t to) { return weights_(from, to); }
  double weight(std::size_t from, std::size_t to) const { return weights_(from, to); }
  bool allowed(std::size_t from, std::size_t to) const {
    return allowed_[from * num_states() + to] != 0;
  }

  /// Effective score: the weight, or -inf when the transition is masked.
  double score(std::size_t from, std::size_t to) const {
    return allowed(from, to) ? weights_(from, to) : kNegInf;
  }
  /// Dense [(L+2) x (L+2)] table of score().
  Matrix scores() const;

  std::span<double> parameters() { return weights_.values(); }
  std::span<const double> parameters() const { return weights_.values(); }
  const std::vector<std::uint8_t>& allowed_mask() const { return allowed_; }
  void set_allowed_mask(std::vector<std::uint8_t> mask);

  /// Masks BIO-invalid moves: O->I-X, B-X->I-Y, I-X->I-Y (X != Y), BOS->I-X.
  void restrict_to_bio(const TagSet& tagset);
  void clear_restrictions();

 private:
  std::size_t labels_ = 0;
  Matrix weights_;
  std::vector<std::uint8_t> allowed_;
};

/// Potential table of one sentence: emissions [n x L] and transitions
/// [(L+2) x (L+2)] in the TransitionModel state layout, both log-space.
struct Lattice {
  Matrix emissions;
  Matrix transitions;

  std::size_t length() const { return emissions.rows(); }
  std::size_t num_labels() const { return emissions.cols(); }
  std::size_t bos() const { return emissions.cols(); }
  std::size_t eos() const { return emissions.cols() + 1; }
};

Lattice make_lattice(Matrix emissions, const TransitionModel& transitions);
/// Lattice with zero transitions.
Lattice make_lattice(Matrix emissions);

/// Per-token allowed label sets.
class ConstraintMask {
 public:
  ConstraintMask() = default;
  ConstraintMask(std::size_t length, std::size_t num_labels, bool value = false);

  static ConstraintMask full(std::size_t length, std::size_t num_labels);
  static ConstraintMask singleton(std::span<const LabelId> tags, std::size_t num_labels);

  std::size_t length() const { return length_; }
  std::size_t num_labels() const { return labels_; }

  bool allowed(std::size_t i, std::size_t k) const { return bits_[i * labels_ + k] != 0; }
  void set(std::size_t i, std::size_t k, bool value = true) {
    bits_[i * labels_ + k] = value ? 1 : 0;
  }
  void allow_only(std::size_t i, std::span<const LabelId> labels);
  void allow_all(std::size_t i);
  std::size_t count(std::size_t i) const;
  bool is_full() const;

  bool operator==(const ConstraintMask&) const = default;

 private:
  std::size_t length_ = 0;
  std::size_t labels_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct ForwardBackwardTables {
  Matrix log_alpha;  // includes the emission at i
  Matrix log_beta;   // excludes the emission at i
  double log_z = kNegInf;
};

/// Log-space forward and backward recursions, optionally restricted to the
/// labels in \p mask. Throws NumericalError("empty lattice column") when some
/// position has no reachable label.
ForwardBackwardTables forward_backward(const Lattice& lattice);
ForwardBackwardTables forward_backward(const Lattice& lattice, const ConstraintMask& mask);

/// Per-token posteriors exp(alpha + beta - log Z).
Matrix marginals(const ForwardBackwardTables& tables);

/// Log-potential of one complete path, BOS and EOS transitions included.
double path_score(const Lattice& lattice, std::span<const LabelId> tags);
double sequence_log_prob(const Lattice& lattice, std::span<const LabelId> tags);

/// log of the probability mass of every path allowed by \p mask.
double constrained_log_marginal(const Lattice& lattice, const ConstraintMask& mask);

struct ViterbiResult {
  std::vector<LabelId> tags;
  double score = kNegInf;
};

/// Best path. Ties go to the lower label id.
ViterbiResult viterbi(const Lattice& lattice);

/// Tables shaped like a lattice's emissions and transitions.
struct LatticeGradients {
  Matrix emissions;
  Matrix transitions;
};

/// Expected emission-cell and transition indicator counts under the
/// distribution the tables were computed for.
LatticeGradients expected_counts(const Lattice& lattice, const ForwardBackwardTables& tables);

struct PartialMarginal {
  double log_marginal = 0.0;
  LatticeGradients gradients;  // d log_marginal / d potentials
};

/// log p~ under \p mask together with its gradient, which is the constrained
/// expectation minus the unconstrained one for every potential.
PartialMarginal partial_marginal(const Lattice& lattice, const ConstraintMask& mask);
LatticeGradients partial_marginal_gradients(const Lattice& lattice, const ConstraintMask& mask);

}  // namespace noisyner

#endif  // NOISYNER_LATTICE_HPP_
