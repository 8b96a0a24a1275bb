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

#include "slucr/metrics.h"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <json.hpp>

#include "slucr/common.h"

namespace slucr {

std::vector<SlotSpan> extract_spans(std::span<const std::string> labels) {
  std::vector<SlotSpan> spans;
  const int n = static_cast<int>(labels.size());
  int i = 0;
  while (i < n) {
    if (labels[i] == kOutsideLabel) {
      ++i;
      continue;
    }
    int j = i + 1;
    while (j < n && labels[j] == labels[i]) ++j;
    spans.push_back({i, j, labels[i]});
    i = j;
  }
  return spans;
}

namespace {

void check_aligned(std::span<const Example> predictions,
                   std::span<const Example> golds, bool need_slots) {
  if (predictions.size() != golds.size()) {
    throw DataError("metrics: " + std::to_string(predictions.size()) +
                    " predictions for " + std::to_string(golds.size()) +
                    " golds");
  }
  if (golds.empty()) throw DataError("metrics: empty dataset");
  if (!need_slots) return;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (predictions[i].slots.size() != golds[i].slots.size()) {
      throw DataError("metrics: word count mismatch at utterance " +
                      std::to_string(i));
    }
  }
}

}  // namespace

double intent_accuracy(std::span<const Example> predictions,
                       std::span<const Example> golds) {
  return score(predictions, golds).intent_acc;
}

double slot_micro_f1(std::span<const Example> predictions,
                     std::span<const Example> golds) {
  return score(predictions, golds).slot_f1;
}

double exact_match_accuracy(std::span<const Example> predictions,
                            std::span<const Example> golds) {
  return score(predictions, golds).ema;
}

MetricsReport score(std::span<const Example> predictions,
                    std::span<const Example> golds) {
  check_aligned(predictions, golds, true);
  MetricsReport r;
  long intent_ok = 0;
  long exact = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const auto gold = extract_spans(golds[i].slots);
    const auto pred = extract_spans(predictions[i].slots);
    r.counts.gold_spans += static_cast<long>(gold.size());
    r.counts.predicted_spans += static_cast<long>(pred.size());
    // Both lists are sorted by start and non-overlapping.
    std::size_t a = 0, b = 0;
    while (a < gold.size() && b < pred.size()) {
      if (gold[a] == pred[b]) {
        ++r.counts.matched_spans;
        ++a;
        ++b;
      } else if (gold[a] < pred[b]) {
        ++a;
      } else {
        ++b;
      }
    }
    const bool intent_match = predictions[i].intent == golds[i].intent;
    intent_ok += intent_match;
    exact += intent_match && predictions[i].slots == golds[i].slots;
  }
  r.counts.utterances = static_cast<long>(golds.size());
  const double n = static_cast<double>(golds.size());
  r.intent_acc = intent_ok / n;
  r.ema = exact / n;
  const long denom = r.counts.gold_spans + r.counts.predicted_spans;
  r.slot_f1 = denom == 0 ? 1.0 : 2.0 * r.counts.matched_spans / denom;
  return r;
}

namespace {

nlohmann::json report_json(const MetricsReport& r) {
  auto round6 = [](double x) { return std::round(x * 1e6) / 1e6; };
  nlohmann::json j;
  j["intent_acc"] = round6(r.intent_acc);
  j["slot_f1"] = round6(r.slot_f1);
  j["ema"] = round6(r.ema);
  j["counts"] = {{"utterances", r.counts.utterances},
                 {"gold_spans", r.counts.gold_spans},
                 {"predicted_spans", r.counts.predicted_spans},
                 {"matched_spans", r.counts.matched_spans},
                 {"skipped", r.counts.skipped}};
  return j;
}

}  // namespace

void write_report(std::ostream& out, const MetricsReport& pooled,
                  const std::map<std::string, MetricsReport>& per_locale) {
  auto j = report_json(pooled);
  if (!per_locale.empty()) {
    auto& pl = j["per_locale"];
    pl = nlohmann::json::object();
    for (const auto& [locale, r] : per_locale) pl[locale] = report_json(r);
  }
  out << j.dump(2) << '\n';
}

}  // namespace slucr
