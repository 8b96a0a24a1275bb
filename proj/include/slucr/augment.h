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

#ifndef SLUCR_AUGMENT_H_
#define SLUCR_AUGMENT_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slucr/align.h"
#include "slucr/corpus.h"
#include "slucr/model.h"
#include "slucr/objective.h"
#include "slucr/subword.h"

namespace slucr {

struct AugmentedView {
  AugmentKind kind = AugmentKind::kSubwordSampling;
  EncodedInput encoded;
  ViewLabels labels;
  bool align_slots = false;  // true only for subword sampling
};

struct StrategyDistribution {
  double machine_translation = 0.5;
  double subword_sampling = 0.5;

  // Throws UsageError unless both are non-negative and sum to 1 (1e-12).
  void validate() const;
};

// Maps labels to indices in `labels`; throws DataError for unknown labels.
ViewLabels label_indices(const LabelSpace& labels, const std::string& intent,
                         const std::vector<std::string>* slots);

// Each word independently resampled; labels carried over unchanged.
AugmentedView subword_augment(const Example& example, const LabelSpace& labels,
                              const SubwordModel& subword, double alpha,
                              Rng& rng, int max_len);

// A translation of some example, in another locale.
struct TranslationPartner {
  std::string locale;
  std::vector<std::string> words;
  std::string intent;
  std::optional<std::vector<std::string>> slots;  // when slot-aligned
};

// Translation counterparts grouped by id: other-locale examples sharing the
// id (full-dataset mode) and translated records (zero-shot mode). One
// partner per (id, locale); a slot-aligned record replaces an intent-only
// one.
class TranslationPool {
 public:
  void add_parallel(const ParallelIndex& index);
  void add_example(const Example& ex);
  void add_intent_only(const IntentOnlyRecord& rec,
                       Tokenizer tokenizer = Tokenizer::kAuto);

  // Partners of `id` whose locale differs from `locale`, in locale order.
  std::vector<const TranslationPartner*> candidates(std::int64_t id,
                                                    const std::string& locale) const;
  bool has_partner(std::int64_t id, const std::string& locale) const {
    return !candidates(id, locale).empty();
  }
  std::size_t size() const;

 private:
  void add(std::int64_t id, TranslationPartner partner);

  std::map<std::int64_t, std::map<std::string, TranslationPartner>> by_id_;
};

// Uniformly picks a counterpart in another locale and Viterbi-encodes it.
// Intent label always attached; slot labels only for slot-aligned partners;
// align_slots always false. Returns nullopt when there is no counterpart.
std::optional<AugmentedView> mt_augment(const Example& example,
                                        const TranslationPool& pool,
                                        const LabelSpace& labels,
                                        const SubwordModel& subword, Rng& rng,
                                        int max_len);

// Draws z; machine translation falls back to subword sampling when no
// counterpart is available. Always consumes exactly one draw.
AugmentKind sample_strategy(const StrategyDistribution& dist, bool mt_available,
                            Rng& rng);

}  // namespace slucr

#endif  // SLUCR_AUGMENT_H_
