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

#ifndef SLUCR_ALIGN_H_
#define SLUCR_ALIGN_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "slucr/corpus.h"

namespace slucr {

// A machine translation of one source example.
struct TranslationRecord {
  std::int64_t id = 0;
  std::string locale;
  std::string plain_text;
  // Translation of the source with each slot value wrapped in [ ].
  std::optional<std::string> bracketed_text;
  // One translated value per source slot span, in source order.
  std::vector<std::string> slot_translations;
};

std::vector<TranslationRecord> read_translations(std::istream& in,
                                                 const std::string& source = "<stream>");
std::vector<TranslationRecord> load_translations(const std::string& path);

// How target text is split into words.
enum class Tokenizer {
  kAuto,        // whitespace if the text contains an ASCII space, else per character
  kWhitespace,
  kCharacter,
};

// A word of a target text with its code-point range.
struct TargetWord {
  std::string text;
  int start = 0;
  int end = 0;
};

std::vector<TargetWord> tokenize(const std::u32string& text, Tokenizer policy);
std::vector<std::string> tokenize_words(const std::string& utf8_text,
                                        Tokenizer policy = Tokenizer::kAuto);

enum class AlignStatus { kAlignedPlain, kAlignedBracketed, kIntentOnly };

const char* status_name(AlignStatus status);

// A translated utterance usable only for intent supervision.
struct IntentOnlyRecord {
  std::int64_t id = 0;
  std::string locale;
  std::string text;
  std::string intent;

  bool operator==(const IntentOnlyRecord&) const = default;
};

void write_intent_only(std::ostream& out, const IntentOnlyRecord& rec);
std::vector<IntentOnlyRecord> read_intent_only(std::istream& in,
                                               const std::string& source = "<stream>");
std::vector<IntentOnlyRecord> load_intent_only(const std::string& path);

// Matched slot span in the (bracket-stripped) target text, in code points.
struct CharSpan {
  int start = 0;
  int end = 0;
  std::string type;

  bool operator==(const CharSpan&) const = default;
};

struct AlignmentOutcome {
  AlignStatus status = AlignStatus::kIntentOnly;
  std::optional<Example> example;  // set when aligned
  IntentOnlyRecord intent_only;    // always filled; the fallback payload
  std::vector<CharSpan> spans;     // target order

  bool aligned() const { return status != AlignStatus::kIntentOnly; }
};

AlignmentOutcome align_plain(const Example& source, const TranslationRecord& rec,
                             Tokenizer tokenizer = Tokenizer::kAuto);

// Throws DataError on unbalanced or nested brackets.
AlignmentOutcome align_bracketed(const Example& source,
                                 const TranslationRecord& rec,
                                 Tokenizer tokenizer = Tokenizer::kAuto);

// Plain-text alignment first, bracketed as fallback, else intent-only.
AlignmentOutcome project_slots(const Example& source, const TranslationRecord& rec,
                               Tokenizer tokenizer = Tokenizer::kAuto);

}  // namespace slucr

#endif  // SLUCR_ALIGN_H_
