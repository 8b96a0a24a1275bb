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

#ifndef SLUCR_EVALUATE_H_
#define SLUCR_EVALUATE_H_

#include <map>
#include <span>
#include <string>
#include <vector>

#include "slucr/corpus.h"
#include "slucr/metrics.h"
#include "slucr/model.h"
#include "slucr/subword.h"

namespace slucr {

struct Predictions {
  std::vector<Example> labeled;       // argmax intent and per-word slots
  std::vector<std::size_t> source_index;  // position of each in the input
  long skipped = 0;                   // longer than the model's max_len
};

// Viterbi segmentation, eval-mode forward, argmax decoding. The only
// decoding path; `evaluate` and the CLI's predict both go through it.
Predictions predict(const ModelParams& params, const SubwordModel& subword,
                    const LabelSpace& labels, std::span<const Example> inputs);

MetricsReport evaluate(const ModelParams& params, const SubwordModel& subword,
                       const LabelSpace& labels, std::span<const Example> data);

// One report per locale, in locale order.
std::map<std::string, MetricsReport> evaluate_per_locale(
    const ModelParams& params, const SubwordModel& subword,
    const LabelSpace& labels, std::span<const Example> data);

}  // namespace slucr

#endif  // SLUCR_EVALUATE_H_
