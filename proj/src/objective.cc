// Copyright 2026 The slucr Authors.
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

#include "slucr/objective.h"

#include <algorithm>
#include <cmath>

namespace slucr {

namespace {

double safe_log(double p) { return std::log(std::max(p, kProbFloor)); }

void check_same_length(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw DataError("distribution length mismatch: " + std::to_string(p.size()) +
                    " vs " + std::to_string(q.size()));
  }
}

}  // namespace

CrossEntropy cross_entropy(std::span<const double> dist, int label) {
  if (label < 0 || label >= static_cast<int>(dist.size())) {
    throw DataError("label " + std::to_string(label) + " out of range for " +
                    std::to_string(dist.size()) + " classes");
  }
  CrossEntropy ce;
  ce.loss = -safe_log(dist[label]);
  ce.grad_logits.assign(dist.begin(), dist.end());
  ce.grad_logits[label] -= 1.0;
  return ce;
}

double kl_div(std::span<const double> p, std::span<const double> q) {
  check_same_length(p, q);
  double kl = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] > 0.0) kl += p[k] * (std::log(p[k]) - safe_log(q[k]));
  }
  return kl;
}

SymmetricKl symmetric_kl_stopgrad(std::span<const double> p,
                                  std::span<const double> q) {
  check_same_length(p, q);
  SymmetricKl s;
  s.value = kl_div(p, q) + kl_div(q, p);
  s.grad_p.resize(p.size());
  s.grad_q.resize(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    s.grad_p[k] = p[k] - q[k];
    s.grad_q[k] = q[k] - p[k];
  }
  return s;
}

const char* kind_name(AugmentKind kind) {
  return kind == AugmentKind::kSubwordSampling ? "subword_sampling"
                                               : "machine_translation";
}

namespace {

LogitGrads zero_grads(const SluDistributions& d) {
  const int n_slots = d.slots.empty() ? 0 : static_cast<int>(d.slots[0].size());
  return {Matrix::Zero(1, static_cast<Eigen::Index>(d.intent.size())),
          Matrix::Zero(d.word_count(), n_slots)};
}

void add_row(Matrix& m, Eigen::Index row, std::span<const double> g, double scale) {
  for (std::size_t k = 0; k < g.size(); ++k) {
    m(row, static_cast<Eigen::Index>(k)) += scale * g[k];
  }
}

// Mean per-word CE over one view; accumulates scaled gradients.
double slot_loss(const SluDistributions& d, std::span<const int> labels,
                 double grad_scale, Matrix& grad) {
  if (static_cast<int>(labels.size()) != d.word_count()) {
    throw DataError("slot label count does not match word count");
  }
  const double n = static_cast<double>(labels.size());
  double loss = 0.0;
  for (int w = 0; w < d.word_count(); ++w) {
    const auto ce = cross_entropy(d.slots[w], labels[w]);
    loss += ce.loss;
    add_row(grad, w, ce.grad_logits, grad_scale / n);
  }
  return loss / n;
}

}  // namespace

LossResult total_loss(const SluDistributions& original, int intent,
                      std::span<const int> slots,
                      const std::optional<AugmentedInput>& augmented,
                      const LossWeights& weights, bool task_loss_on_augmented) {
  if (!(weights.lambda1 >= 0.0 && weights.lambda2 >= 0.0 &&
        weights.lambda3 >= 0.0) ||
      !std::isfinite(weights.lambda1 + weights.lambda2 + weights.lambda3)) {
    throw UsageError("loss weights must be finite and non-negative");
  }
  LossResult res;
  LossBreakdown& b = res.breakdown;
  res.original = zero_grads(original);
  const SluDistributions* aug = augmented ? augmented->dists : nullptr;
  if (augmented && !aug) throw UsageError("augmented view without distributions");
  if (aug) res.augmented = zero_grads(*aug);
  b.has_augmented = aug != nullptr;

  const bool aug_intent =
      aug && task_loss_on_augmented && augmented->labels.intent.has_value();
  const bool aug_slots =
      aug && task_loss_on_augmented && augmented->labels.slots.has_value();

  // Intent task loss.
  {
    const double views = aug_intent ? 2.0 : 1.0;
    const auto ce = cross_entropy(original.intent, intent);
    b.l_intent = ce.loss;
    add_row(res.original.intent, 0, ce.grad_logits, 1.0 / views);
    if (aug_intent) {
      const auto ce_aug = cross_entropy(aug->intent, *augmented->labels.intent);
      b.l_intent = 0.5 * (b.l_intent + ce_aug.loss);
      add_row(res.augmented.intent, 0, ce_aug.grad_logits, 1.0 / views);
    }
  }

  // Slot task loss.
  {
    const double views = aug_slots ? 2.0 : 1.0;
    const double scale = weights.lambda1 / views;
    b.l_slot = slot_loss(original, slots, scale, res.original.slots);
    if (aug_slots) {
      const double l_aug =
          slot_loss(*aug, *augmented->labels.slots, scale, res.augmented.slots);
      b.l_slot = 0.5 * (b.l_slot + l_aug);
    }
  }

  if (aug) {
    const auto s = symmetric_kl_stopgrad(original.intent, aug->intent);
    b.r_intent = s.value;
    b.r_intent_active = true;
    add_row(res.original.intent, 0, s.grad_p, weights.lambda2);
    add_row(res.augmented.intent, 0, s.grad_q, weights.lambda2);
  }

  if (aug && augmented->align_slots &&
      augmented->kind == AugmentKind::kSubwordSampling) {
    if (aug->word_count() != original.word_count()) {
      throw DataError("subword-sampling view has " +
                      std::to_string(aug->word_count()) + " words, original has " +
                      std::to_string(original.word_count()));
    }
    const double n = static_cast<double>(original.word_count());
    double r = 0.0;
    for (int w = 0; w < original.word_count(); ++w) {
      const auto s = symmetric_kl_stopgrad(original.slots[w], aug->slots[w]);
      r += s.value;
      add_row(res.original.slots, w, s.grad_p, weights.lambda3 / n);
      add_row(res.augmented.slots, w, s.grad_q, weights.lambda3 / n);
    }
    b.r_slot = r / n;
    b.r_slot_active = true;
  }

  b.total = b.l_intent + weights.lambda1 * b.l_slot +
            weights.lambda2 * b.r_intent + weights.lambda3 * b.r_slot;
  return res;
}

}  // namespace slucr
