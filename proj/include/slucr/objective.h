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

#ifndef SLUCR_OBJECTIVE_H_
#define SLUCR_OBJECTIVE_H_

#include <optional>
#include <span>
#include <vector>

#include "slucr/model.h"

namespace slucr {

// Probabilities are floored at this value inside logarithms.
inline constexpr double kProbFloor = 1e-12;

struct CrossEntropy {
  double loss = 0.0;
  std::vector<double> grad_logits;  // dist - onehot(label)
};

CrossEntropy cross_entropy(std::span<const double> dist, int label);

// KL(p || q) with 0 log 0 = 0.
double kl_div(std::span<const double> p, std::span<const double> q);

// KL(sg(p) || q) + KL(sg(q) || p). Each side's logit gradient treats the
// other distribution as a constant target: grad_p = p - q, grad_q = q - p.
struct SymmetricKl {
  double value = 0.0;
  std::vector<double> grad_p;
  std::vector<double> grad_q;
};

SymmetricKl symmetric_kl_stopgrad(std::span<const double> p,
                                  std::span<const double> q);

enum class AugmentKind { kSubwordSampling, kMachineTranslation };

const char* kind_name(AugmentKind kind);

struct LossWeights {
  double lambda1 = 2.0;  // slot task loss
  double lambda2 = 3.0;  // intent consistency
  double lambda3 = 3.0;  // slot consistency
};

struct LossBreakdown {
  double l_intent = 0.0;
  double l_slot = 0.0;
  double r_intent = 0.0;
  double r_slot = 0.0;
  double total = 0.0;
  bool has_augmented = false;
  bool r_intent_active = false;
  bool r_slot_active = false;
};

// Gradients on logits for one view; shapes follow the model outputs.
struct LogitGrads {
  Matrix intent;  // 1 x intents
  Matrix slots;   // words x slots
};

struct ViewLabels {
  std::optional<int> intent;
  std::optional<std::vector<int>> slots;
};

struct AugmentedInput {
  const SluDistributions* dists = nullptr;
  AugmentKind kind = AugmentKind::kSubwordSampling;
  // Gates R_S; only subword-sampling views keep word-level correspondence.
  bool align_slots = false;
  ViewLabels labels;
};

struct LossResult {
  LossBreakdown breakdown;
  LogitGrads original;
  LogitGrads augmented;  // empty when no augmented view
};

// L = L_I + lambda1 L_S + lambda2 R_I + lambda3 R_S. Slot CE and R_S are means
// over words. With task_loss_on_augmented, a labeled augmented view's task
// losses are averaged with the original's. Throws DataError when an
// aligned view's word count differs from the original's.
LossResult total_loss(const SluDistributions& original, int intent,
                      std::span<const int> slots,
                      const std::optional<AugmentedInput>& augmented,
                      const LossWeights& weights, bool task_loss_on_augmented);

}  // namespace slucr

#endif  // SLUCR_OBJECTIVE_H_
