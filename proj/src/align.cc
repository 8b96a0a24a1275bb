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

#include "slucr/align.h"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>

#include <json.hpp>

#include "slucr/common.h"
#include "slucr/metrics.h"
#include "slucr/utf8.h"

namespace slucr {

using json = nlohmann::json;

namespace {

template <typename T, typename Parse>
std::vector<T> read_jsonl(std::istream& in, const std::string& source,
                          Parse parse) {
  std::vector<T> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse(json::parse(line)));
    } catch (const json::exception& e) {
      throw DataError(source + ":" + std::to_string(lineno) +
                      ": malformed JSON: " + e.what());
    } catch (const DataError& e) {
      throw DataError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void require_keys(const json& j, std::initializer_list<const char*> keys) {
  for (const char* key : keys) {
    if (!j.contains(key)) throw DataError(std::string("missing key '") + key + "'");
  }
}

}  // namespace

std::vector<TranslationRecord> read_translations(std::istream& in,
                                                 const std::string& source) {
  return read_jsonl<TranslationRecord>(in, source, [](const json& j) {
    require_keys(j, {"id", "locale", "plain_text", "slot_translations"});
    TranslationRecord rec;
    rec.id = j.at("id").get<std::int64_t>();
    rec.locale = j.at("locale").get<std::string>();
    rec.plain_text = j.at("plain_text").get<std::string>();
    if (j.contains("bracketed_text") && !j.at("bracketed_text").is_null()) {
      rec.bracketed_text = j.at("bracketed_text").get<std::string>();
    }
    rec.slot_translations =
        j.at("slot_translations").get<std::vector<std::string>>();
    return rec;
  });
}

std::vector<TranslationRecord> load_translations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_translations(in, path);
}

void write_intent_only(std::ostream& out, const IntentOnlyRecord& rec) {
  json j;
  j["id"] = rec.id;
  j["locale"] = rec.locale;
  j["text"] = rec.text;
  j["intent"] = rec.intent;
  out << j.dump() << '\n';
}

std::vector<IntentOnlyRecord> read_intent_only(std::istream& in,
                                               const std::string& source) {
  return read_jsonl<IntentOnlyRecord>(in, source, [](const json& j) {
    require_keys(j, {"id", "locale", "text", "intent"});
    IntentOnlyRecord rec{j.at("id").get<std::int64_t>(),
                         j.at("locale").get<std::string>(),
                         j.at("text").get<std::string>(),
                         j.at("intent").get<std::string>()};
    if (rec.intent.empty()) throw DataError("empty intent label");
    return rec;
  });
}

std::vector<IntentOnlyRecord> load_intent_only(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_intent_only(in, path);
}

const char* status_name(AlignStatus status) {
  switch (status) {
    case AlignStatus::kAlignedPlain:
      return "aligned_plain";
    case AlignStatus::kAlignedBracketed:
      return "aligned_bracketed";
    case AlignStatus::kIntentOnly:
      return "intent_only";
  }
  return "unknown";
}

std::vector<TargetWord> tokenize(const std::u32string& text, Tokenizer policy) {
  if (policy == Tokenizer::kAuto) {
    policy = text.find(U' ') != std::u32string::npos ? Tokenizer::kWhitespace
                                                      : Tokenizer::kCharacter;
  }
  std::vector<TargetWord> words;
  const int m = static_cast<int>(text.size());
  int i = 0;
  while (i < m) {
    if (utf8::is_space(text[i])) {
      ++i;
      continue;
    }
    int j = i + 1;
    if (policy == Tokenizer::kWhitespace) {
      while (j < m && !utf8::is_space(text[j])) ++j;
    }
    words.push_back({utf8::encode(std::u32string_view(text).substr(i, j - i)), i, j});
    i = j;
  }
  return words;
}

std::vector<std::string> tokenize_words(const std::string& utf8_text,
                                        Tokenizer policy) {
  std::vector<std::string> out;
  for (auto& w : tokenize(utf8::decode(utf8_text), policy)) {
    out.push_back(std::move(w.text));
  }
  return out;
}

namespace {

AlignmentOutcome intent_only(const Example& source, const TranslationRecord& rec) {
  AlignmentOutcome out;
  out.status = AlignStatus::kIntentOnly;
  out.intent_only = {rec.id, rec.locale, rec.plain_text, source.intent};
  return out;
}

// Word-boundary lookup over a tokenized target text.
class TargetText {
 public:
  TargetText(std::u32string text, Tokenizer policy)
      : text_(std::move(text)), words_(tokenize(text_, policy)) {
    for (const auto& w : words_) {
      starts_.insert(w.start);
      ends_.insert(w.end);
    }
  }

  const std::u32string& text() const { return text_; }
  const std::vector<TargetWord>& words() const { return words_; }

  // Leftmost occurrence at or after `from` that covers whole words.
  std::size_t find_eligible(const std::u32string& needle, std::size_t from) const {
    std::size_t pos = text_.find(needle, from);
    while (pos != std::u32string::npos) {
      if (starts_.count(static_cast<int>(pos)) &&
          ends_.count(static_cast<int>(pos + needle.size()))) {
        return pos;
      }
      pos = text_.find(needle, pos + 1);
    }
    return std::u32string::npos;
  }

  bool covers_whole_words(int start, int end) const {
    return starts_.count(start) && ends_.count(end);
  }

 private:
  std::u32string text_;
  std::vector<TargetWord> words_;
  std::set<int> starts_;
  std::set<int> ends_;
};

// Builds the aligned example from word-aligned character spans. Fails
// (nullopt) when two same-type spans would touch, which the bare-label
// scheme cannot represent.
std::optional<Example> label_words(const Example& source,
                                   const TranslationRecord& rec,
                                   const TargetText& target,
                                   std::vector<CharSpan> spans) {
  const auto& words = target.words();
  if (words.empty()) return std::nullopt;
  std::sort(spans.begin(), spans.end(),
            [](const CharSpan& a, const CharSpan& b) { return a.start < b.start; });
  Example ex;
  ex.id = rec.id;
  ex.locale = rec.locale;
  ex.intent = source.intent;
  for (const auto& w : words) {
    ex.words.push_back(w.text);
    std::string label = kOutsideLabel;
    for (const auto& s : spans) {
      if (w.start >= s.start && w.end <= s.end) label = s.type;
    }
    ex.slots.push_back(label);
  }
  if (extract_spans(ex.slots).size() != spans.size()) return std::nullopt;
  return ex;
}

struct SourceSlot {
  std::string type;
  std::u32string translation;  // trimmed
};

std::optional<std::vector<SourceSlot>> source_slots(const Example& source,
                                                    const TranslationRecord& rec) {
  const auto spans = extract_spans(source.slots);
  if (spans.size() != rec.slot_translations.size()) return std::nullopt;
  std::vector<SourceSlot> out;
  for (std::size_t k = 0; k < spans.size(); ++k) {
    const std::u32string decoded = utf8::decode(rec.slot_translations[k]);
    const auto trimmed = utf8::trim(decoded);
    if (trimmed.empty()) return std::nullopt;
    out.push_back({spans[k].type, std::u32string(trimmed)});
  }
  return out;
}

// Greedy leftmost matching with a moving cursor, visiting slots in `order`.
std::optional<std::vector<CharSpan>> match_in_order(
    const TargetText& target, const std::vector<SourceSlot>& slots,
    const std::vector<std::size_t>& order) {
  std::vector<CharSpan> spans;
  std::size_t cursor = 0;
  for (std::size_t k : order) {
    const auto pos = target.find_eligible(slots[k].translation, cursor);
    if (pos == std::u32string::npos) return std::nullopt;
    const auto end = pos + slots[k].translation.size();
    spans.push_back({static_cast<int>(pos), static_cast<int>(end), slots[k].type});
    cursor = end;
  }
  return spans;
}

}  // namespace

AlignmentOutcome align_plain(const Example& source, const TranslationRecord& rec,
                             Tokenizer tokenizer) {
  const auto slots = source_slots(source, rec);
  if (!slots) return intent_only(source, rec);
  const TargetText target(utf8::decode(rec.plain_text), tokenizer);

  std::vector<std::size_t> order(slots->size());
  std::iota(order.begin(), order.end(), 0);
  auto spans = match_in_order(target, *slots, order);
  if (!spans) {
    // Translations reorder constituents: retry in order of first occurrence.
    std::vector<std::size_t> first(slots->size());
    for (std::size_t k = 0; k < slots->size(); ++k) {
      first[k] = target.find_eligible((*slots)[k].translation, 0);
      if (first[k] == std::u32string::npos) return intent_only(source, rec);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return first[a] < first[b]; });
    spans = match_in_order(target, *slots, order);
    if (!spans) return intent_only(source, rec);
  }
  auto ex = label_words(source, rec, target, *spans);
  if (!ex) return intent_only(source, rec);

  AlignmentOutcome out = intent_only(source, rec);
  out.status = AlignStatus::kAlignedPlain;
  out.example = std::move(ex);
  out.spans = std::move(*spans);
  std::sort(out.spans.begin(), out.spans.end(),
            [](const CharSpan& a, const CharSpan& b) { return a.start < b.start; });
  return out;
}

AlignmentOutcome align_bracketed(const Example& source,
                                 const TranslationRecord& rec,
                                 Tokenizer tokenizer) {
  if (!rec.bracketed_text) return intent_only(source, rec);
  const auto raw = utf8::decode(*rec.bracketed_text);
  std::u32string stripped;
  std::vector<std::pair<int, int>> contents;
  int open = -1;
  for (char32_t c : raw) {
    if (c == U'[') {
      if (open >= 0) throw DataError("nested '[' in bracketed translation");
      open = static_cast<int>(stripped.size());
    } else if (c == U']') {
      if (open < 0) throw DataError("unbalanced ']' in bracketed translation");
      contents.emplace_back(open, static_cast<int>(stripped.size()));
      open = -1;
    } else {
      stripped.push_back(c);
    }
  }
  if (open >= 0) throw DataError("unclosed '[' in bracketed translation");

  const auto slots = source_slots(source, rec);
  if (!slots || slots->size() != contents.size()) return intent_only(source, rec);

  const TargetText target(stripped, tokenizer);
  std::vector<CharSpan> spans;
  for (std::size_t k = 0; k < contents.size(); ++k) {
    auto [start, end] = contents[k];
    while (start < end && utf8::is_space(stripped[start])) ++start;
    while (end > start && utf8::is_space(stripped[end - 1])) --end;
    if (stripped.compare(start, end - start, (*slots)[k].translation) != 0) {
      return intent_only(source, rec);
    }
    if (!target.covers_whole_words(start, end)) return intent_only(source, rec);
    spans.push_back({start, end, (*slots)[k].type});
  }
  auto ex = label_words(source, rec, target, spans);
  if (!ex) return intent_only(source, rec);

  AlignmentOutcome out = intent_only(source, rec);
  out.status = AlignStatus::kAlignedBracketed;
  out.example = std::move(ex);
  out.spans = std::move(spans);
  return out;
}

AlignmentOutcome project_slots(const Example& source, const TranslationRecord& rec,
                               Tokenizer tokenizer) {
  auto plain = align_plain(source, rec, tokenizer);
  if (plain.aligned()) return plain;
  auto bracketed = align_bracketed(source, rec, tokenizer);
  if (bracketed.aligned()) return bracketed;
  return intent_only(source, rec);
}

}  // namespace slucr
