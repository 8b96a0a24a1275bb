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

#include "slucr/augment.h"

#include <cmath>

namespace slucr {

void StrategyDistribution::validate() const {
  if (!(machine_translation >= 0.0 && subword_sampling >= 0.0) ||
      std::abs(machine_translation + subword_sampling - 1.0) > 1e-12) {
    throw UsageError("strategy distribution must be non-negative and sum to 1");
  }
}

ViewLabels label_indices(const LabelSpace& labels, const std::string& intent,
                         const std::vector<std::string>* slots) {
  ViewLabels out;
  const int i = labels.intents.index_of(intent);
  if (i < 0) throw DataError("intent '" + intent + "' not in inventory");
  out.intent = i;
  if (slots) {
    std::vector<int> idx;
    idx.reserve(slots->size());
    for (const auto& s : *slots) {
      const int k = labels.slots.index_of(s);
      if (k < 0) throw DataError("slot label '" + s + "' not in inventory");
      idx.push_back(k);
    }
    out.slots = std::move(idx);
  }
  return out;
}

AugmentedView subword_augment(const Example& example, const LabelSpace& labels,
                              const SubwordModel& subword, double alpha,
                              Rng& rng, int max_len) {
  std::vector<Segmentation> segs;
  segs.reserve(example.words.size());
  for (const auto& w : example.words) {
    segs.push_back(sample_segmentation(subword, w, alpha, rng));
  }
  AugmentedView view;
  view.kind = AugmentKind::kSubwordSampling;
  view.encoded = encode_input(segs, max_len);
  view.labels = label_indices(labels, example.intent, &example.slots);
  view.align_slots = true;
  return view;
}

void TranslationPool::add(std::int64_t id, TranslationPartner partner) {
  auto& group = by_id_[id];
  auto it = group.find(partner.locale);
  if (it == group.end()) {
    group.emplace(partner.locale, std::move(partner));
  } else if (partner.slots && !it->second.slots) {
    it->second = std::move(partner);
  }
}

void TranslationPool::add_parallel(const ParallelIndex& index) {
  for (const auto& [id, group] : index.groups()) {
    for (const auto& [locale, ex] : group) add_example(ex);
  }
}

void TranslationPool::add_example(const Example& ex) {
  add(ex.id, {ex.locale, ex.words, ex.intent, ex.slots});
}

void TranslationPool::add_intent_only(const IntentOnlyRecord& rec,
                                      Tokenizer tokenizer) {
  auto words = tokenize_words(rec.text, tokenizer);
  if (words.empty()) return;
  add(rec.id, {rec.locale, std::move(words), rec.intent, std::nullopt});
}

std::vector<const TranslationPartner*> TranslationPool::candidates(
    std::int64_t id, const std::string& locale) const {
  std::vector<const TranslationPartner*> out;
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return out;
  for (const auto& [loc, partner] : it->second) {
    if (loc != locale) out.push_back(&partner);
  }
  return out;
}

std::size_t TranslationPool::size() const {
  std::size_t n = 0;
  for (const auto& [id, group] : by_id_) n += group.size();
  return n;
}

std::optional<AugmentedView> mt_augment(const Example& example,
                                        const TranslationPool& pool,
                                        const LabelSpace& labels,
                                        const SubwordModel& subword, Rng& rng,
                                        int max_len) {
  const auto cands = pool.candidates(example.id, example.locale);
  if (cands.empty()) return std::nullopt;
  const TranslationPartner& p = *cands[rng.below(cands.size())];
  AugmentedView view;
  view.kind = AugmentKind::kMachineTranslation;
  view.encoded = encode_viterbi(subword, p.words, max_len);
  view.labels = label_indices(labels, p.intent, p.slots ? &*p.slots : nullptr);
  view.align_slots = false;
  return view;
}

AugmentKind sample_strategy(const StrategyDistribution& dist, bool mt_available,
                            Rng& rng) {
  const bool mt = rng.uniform() < dist.machine_translation;
  return mt && mt_available ? AugmentKind::kMachineTranslation
                            : AugmentKind::kSubwordSampling;
}

}  // namespace slucr
