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

#ifndef SLUCR_METRICS_H_
#define SLUCR_METRICS_H_

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "slucr/corpus.h"

namespace slucr {

// Half-open word range [start, end) carrying one slot type.
struct SlotSpan {
  int start = 0;
  int end = 0;
  std::string type;

  auto operator<=>(const SlotSpan&) const = default;
};

// Maximal runs of one identical non-"O" label.
std::vector<SlotSpan> extract_spans(std::span<const std::string> labels);

struct MetricsCounts {
  long utterances = 0;
  long gold_spans = 0;
  long predicted_spans = 0;
  long matched_spans = 0;
  long skipped = 0;  // examples excluded (sequence too long for the model)
};

struct MetricsReport {
  double intent_acc = 0.0;
  double slot_f1 = 0.0;
  double ema = 0.0;
  MetricsCounts counts;
};

// Predictions and golds are aligned 1:1 by position; only `intent` and
// `slots` are compared. All of these throw DataError on misaligned input or
// on an empty dataset.
double intent_accuracy(std::span<const Example> predictions,
                       std::span<const Example> golds);
double slot_micro_f1(std::span<const Example> predictions,
                     std::span<const Example> golds);
double exact_match_accuracy(std::span<const Example> predictions,
                            std::span<const Example> golds);

MetricsReport score(std::span<const Example> predictions,
                    std::span<const Example> golds);

// Writes {"intent_acc", "slot_f1", "ema", "counts"} with values rounded to six
// decimals. Per-locale reports, when given, go under "per_locale".
void write_report(std::ostream& out, const MetricsReport& pooled,
                  const std::map<std::string, MetricsReport>& per_locale = {});

}  // namespace slucr

#endif  // SLUCR_METRICS_H_
