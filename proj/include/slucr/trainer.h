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

#ifndef SLUCR_TRAINER_H_
#define SLUCR_TRAINER_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "slucr/augment.h"
#include "slucr/corpus.h"
#include "slucr/metrics.h"
#include "slucr/model.h"
#include "slucr/objective.h"
#include "slucr/subword.h"

namespace slucr {

struct TrainConfig {
  int batch_size = 32;
  int epochs = 10;
  double learning_rate = 1e-3;
  double dropout_rate = 0.1;
  double lambda1 = 2.0;
  double lambda2 = 3.0;
  double lambda3 = 3.0;
  double alpha = 0.2;  // subword sampling temperature
  StrategyDistribution strategy_distribution;
  std::uint64_t seed = 1;
  double grad_clip_norm = 1.0;
  bool task_loss_on_augmented = true;
  int d_model = 32;
  int blocks = 2;
  int max_len = 64;
  int eval_every = 50;  // steps

  void validate() const;
  LossWeights weights() const { return {lambda1, lambda2, lambda3}; }

  // JSON object with exactly these keys; missing keys keep their defaults,
  // unknown keys are rejected (DataError).
  static TrainConfig from_json(const std::string& text);
  static TrainConfig load(const std::string& path);
  std::string to_json() const;
};

struct OptimizerState {
  ParamGrads first_moment;
  ParamGrads second_moment;
  long step = 0;

  static OptimizerState zeros(const ModelConfig& config);
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// Adam with bias correction over flat buffers. `step` is the 1-based step
// after incrementing; `grad_scale` multiplies gradients before the moments.
void adam_update(std::span<double> params, std::span<const double> grads,
                 std::span<double> m, std::span<double> v, long step, double lr,
                 double grad_scale);

// Global-norm clipping at clip_norm, then the Adam update; increments the
// step counter. Returns the pre-clipping gradient norm. Throws
// NumericalError on a non-finite gradient.
double adam_step(ModelParams& params, const ParamGrads& grads,
                 OptimizerState& state, double lr, double clip_norm);

// Batch means of the per-example loss terms.
struct StepRecord {
  long step = 0;
  int epoch = 0;
  int examples = 0;
  int subword_views = 0;
  int translation_views = 0;
  double l_intent = 0.0;
  double l_slot = 0.0;
  double r_intent = 0.0;  // mean over examples with an augmented view
  double r_slot = 0.0;    // mean over subword-sampling examples
  double total = 0.0;
  double r_slot_translation = 0.0;  // summed R_S over translation views
  double grad_norm = 0.0;
};

struct EvalRecord {
  long step = 0;
  MetricsReport dev;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<EvalRecord> evals;
  int best_eval = -1;
  long skipped_examples = 0;
};

// Index of the maximal dev EMA, earliest on ties. Throws UsageError when
// the history is empty.
int select_best(std::span<const double> dev_ema);
int select_best(const TrainLog& log);

struct TrainData {
  std::span<const Example> train;
  std::span<const Example> dev;
  const SubwordModel* subword = nullptr;
  const TranslationPool* translations = nullptr;  // may be empty or null
  LabelSpace labels;
};

struct TrainResult {
  Checkpoint best;
  TrainLog log;
};

// The fine-tuning loop. Per-example work within a batch is split across
// `threads` workers; results are merged in example order.
TrainResult train(const TrainConfig& config, const TrainData& data,
                  int threads = 1);

// JSONL: one {"type":"step",...} per step, {"type":"eval",...} per
// evaluation, then one {"type":"best",...}.
void write_train_log(std::ostream& out, const TrainLog& log);

}  // namespace slucr

#endif  // SLUCR_TRAINER_H_
