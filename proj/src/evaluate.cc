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

#include "slucr/evaluate.h"

#include <algorithm>

namespace slucr {

namespace {

int argmax(std::span<const double> v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

Predictions predict(const ModelParams& params, const SubwordModel& subword,
                    const LabelSpace& labels, std::span<const Example> inputs) {
  if (labels.intents.size() != params.config.num_intents ||
      labels.slots.size() != params.config.num_slots) {
    throw DataError("label inventories do not match the model heads");
  }
  Predictions out;
  Rng no_dropout(0);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Example& ex = inputs[i];
    std::vector<Segmentation> segs;
    std::size_t n_pieces = 1;
    for (const auto& w : ex.words) {
      segs.push_back(viterbi_segment(subword, w));
      n_pieces += segs.back().pieces.size();
    }
    if (n_pieces > static_cast<std::size_t>(params.config.max_len)) {
      ++out.skipped;
      continue;
    }
    const auto encoded = encode_input(segs, params.config.max_len);
    const auto fwd = forward(params, encoded, /*train_mode=*/false, 0.0, no_dropout);
    Example pred;
    pred.id = ex.id;
    pred.locale = ex.locale;
    pred.words = ex.words;
    pred.intent = labels.intents.label(argmax(fwd.dists.intent));
    for (const auto& row : fwd.dists.slots) {
      pred.slots.push_back(labels.slots.label(argmax(row)));
    }
    out.labeled.push_back(std::move(pred));
    out.source_index.push_back(i);
  }
  return out;
}

MetricsReport evaluate(const ModelParams& params, const SubwordModel& subword,
                       const LabelSpace& labels, std::span<const Example> data) {
  const auto preds = predict(params, subword, labels, data);
  std::vector<Example> golds;
  golds.reserve(preds.source_index.size());
  for (std::size_t i : preds.source_index) golds.push_back(data[i]);
  MetricsReport r;
  if (!golds.empty()) r = score(preds.labeled, golds);
  r.counts.skipped = preds.skipped;
  return r;
}

std::map<std::string, MetricsReport> evaluate_per_locale(
    const ModelParams& params, const SubwordModel& subword,
    const LabelSpace& labels, std::span<const Example> data) {
  std::map<std::string, std::vector<Example>> by_locale;
  for (const auto& ex : data) by_locale[ex.locale].push_back(ex);
  std::map<std::string, MetricsReport> out;
  for (const auto& [locale, exs] : by_locale) {
    out[locale] = evaluate(params, subword, labels, exs);
  }
  return out;
}

}  // namespace slucr
