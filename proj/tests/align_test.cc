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

#include <sstream>
#include <string>

#include <doctest.h>

#include "slucr/align.h"
#include "slucr/common.h"
#include "slucr/corpus.h"
#include "slucr/utf8.h"

using slucr::AlignStatus;
using slucr::Example;
using slucr::Tokenizer;
using slucr::TranslationRecord;

namespace {

const std::string kFixtures = SLUCR_FIXTURE_DIR "/alignment_table";

struct Table {
  std::vector<Example> sources;
  std::vector<TranslationRecord> records;
};

Table alignment_table() {
  return {slucr::load_dataset(kFixtures + "/source.jsonl").examples,
          slucr::load_translations(kFixtures + "/translations.jsonl")};
}

// Every aligned outcome must survive this independent re-check.
void check_aligned(const slucr::AlignmentOutcome& out, const TranslationRecord& rec,
                   const std::string& target_text) {
  REQUIRE(out.example.has_value());
  const Example& ex = *out.example;
  std::string joined;
  for (const auto& w : ex.words) joined += w;
  std::string compact;
  for (char32_t c : slucr::utf8::decode(target_text)) {
    if (!slucr::utf8::is_space(c)) compact += slucr::utf8::encode(c);
  }
  CHECK(joined == compact);
  REQUIRE(out.spans.size() == rec.slot_translations.size());
  const auto text = slucr::utf8::decode(target_text);
  for (std::size_t i = 0; i < out.spans.size(); ++i) {
    const auto& s = out.spans[i];
    const auto sub = slucr::utf8::encode(text.substr(s.start, s.end - s.start));
    bool found = false;
    for (const auto& t : rec.slot_translations) found |= sub == t;
    CHECK(found);
    if (i > 0) CHECK(out.spans[i - 1].end <= s.start);
  }
}

}  // namespace

TEST_CASE("table row 1: plain text aligned after reordering") {
  const auto t = alignment_table();
  const auto out = slucr::align_plain(t.sources[0], t.records[0]);
  CHECK(out.status == AlignStatus::kAlignedPlain);
  check_aligned(out, t.records[0], t.records[0].plain_text);
  const Example& ex = *out.example;
  CHECK(ex.locale == "zh-CN");
  CHECK(ex.intent == "alarm_set");
  // 本周周五 凌晨五点 叫我起床, one character per word.
  CHECK(ex.slots == std::vector<std::string>{"date", "date", "date", "date", "time",
                                             "time", "time", "time", "O", "O", "O", "O"});
}

TEST_CASE("table row 2: bracket content differs") {
  const auto t = alignment_table();
  const auto out = slucr::align_bracketed(t.sources[0], t.records[0]);
  CHECK(out.status == AlignStatus::kIntentOnly);
  CHECK_FALSE(out.example.has_value());
}

TEST_CASE("table row 3: slot translation absent from plain text") {
  const auto t = alignment_table();
  const auto out = slucr::align_plain(t.sources[1], t.records[1]);
  CHECK(out.status == AlignStatus::kIntentOnly);
  CHECK(out.intent_only.text == t.records[1].plain_text);
  CHECK(out.intent_only.intent == "alarm_set");
}

TEST_CASE("table row 4: brackets aligned") {
  const auto t = alignment_table();
  const auto out = slucr::align_bracketed(t.sources[1], t.records[1]);
  CHECK(out.status == AlignStatus::kAlignedBracketed);
  check_aligned(out, t.records[1], "设置从现在起两小时后的闹钟");
  std::string joined;
  for (const auto& w : out.example->words) joined += w;
  CHECK(joined == "设置从现在起两小时后的闹钟");
  CHECK(out.spans == std::vector<slucr::CharSpan>{{2, 10, "time"}});
}

TEST_CASE("project_slots prefers plain text, then brackets") {
  const auto t = alignment_table();
  CHECK(slucr::project_slots(t.sources[0], t.records[0]).status == AlignStatus::kAlignedPlain);
  CHECK(slucr::project_slots(t.sources[1], t.records[1]).status ==
        AlignStatus::kAlignedBracketed);

  // When both succeed, the plain-text result is the one returned.
  auto both = t.records[1];
  both.plain_text = "设置从现在起两小时后的闹钟";
  CHECK(slucr::project_slots(t.sources[1], both).status == AlignStatus::kAlignedPlain);

  auto neither = t.records[1];
  neither.bracketed_text = std::nullopt;
  const auto out = slucr::project_slots(t.sources[1], neither);
  CHECK(out.status == AlignStatus::kIntentOnly);
  CHECK(out.intent_only.text == neither.plain_text);
  CHECK(out.intent_only.intent == "alarm_set");
  CHECK(out.intent_only.id == 2);
}

TEST_CASE("sources without slots align trivially") {
  const Example src{9, "en", {"hello", "there"}, {"O", "O"}, "greet"};
  TranslationRecord rec{9, "de", "hallo du", std::string("hallo du"), {}};
  const auto plain = slucr::align_plain(src, rec);
  CHECK(plain.status == AlignStatus::kAlignedPlain);
  CHECK(plain.example->slots == std::vector<std::string>{"O", "O"});
  CHECK(slucr::align_bracketed(src, rec).status == AlignStatus::kAlignedBracketed);
}

TEST_CASE("identity translations reproduce the source labels") {
  const Example src{4, "en", {"wake", "me", "at", "five", "am", "on", "friday"},
                    {"O", "O", "O", "time", "time", "O", "date"}, "alarm_set"};
  TranslationRecord rec{4, "en-x", "wake me at five am on friday", std::nullopt,
                        {"five am", "friday"}};
  const auto out = slucr::align_plain(src, rec, Tokenizer::kWhitespace);
  REQUIRE(out.aligned());
  CHECK(out.example->words == src.words);
  CHECK(out.example->slots == src.slots);
}

TEST_CASE("whole-word and leftmost rules") {
  const Example src{1, "en", {"play", "jazz"}, {"O", "genre"}, "play_music"};
  // "jazz" only occurs inside "jazzy": not a whole word.
  TranslationRecord partial{1, "xx", "spiel jazzy", std::nullopt, {"jazz"}};
  CHECK(slucr::align_plain(src, partial).status == AlignStatus::kIntentOnly);
  // A later whole-word occurrence is still eligible.
  TranslationRecord later{1, "xx", "jazzy jazz", std::nullopt, {"jazz"}};
  const auto out = slucr::align_plain(src, later);
  REQUIRE(out.aligned());
  CHECK(out.example->slots == std::vector<std::string>{"O", "genre"});
  // Count mismatch between spans and translations.
  TranslationRecord extra{1, "xx", "jazz jazz", std::nullopt, {"jazz", "jazz"}};
  CHECK(slucr::align_plain(src, extra).status == AlignStatus::kIntentOnly);
}

TEST_CASE("malformed brackets are errors") {
  const Example src{1, "en", {"play", "jazz"}, {"O", "genre"}, "play_music"};
  TranslationRecord nested{1, "xx", "x", std::string("spiel [[jazz]]"), {"jazz"}};
  CHECK_THROWS_AS(slucr::align_bracketed(src, nested), slucr::DataError);
  TranslationRecord open{1, "xx", "x", std::string("spiel [jazz"), {"jazz"}};
  CHECK_THROWS_AS(slucr::project_slots(src, open), slucr::DataError);
  TranslationRecord count{1, "xx", "x", std::string("[spiel] [jazz]"), {"jazz"}};
  CHECK(slucr::align_bracketed(src, count).status == AlignStatus::kIntentOnly);
  TranslationRecord padded{1, "xx", "x", std::string("spiel [ jazz ]"), {"jazz"}};
  CHECK(slucr::align_bracketed(src, padded).status == AlignStatus::kAlignedBracketed);
}

TEST_CASE("tokenizer policy") {
  CHECK(slucr::tokenize_words("a b  c") == std::vector<std::string>{"a", "b", "c"});
  CHECK(slucr::tokenize_words("叫我起床") ==
        std::vector<std::string>{"叫", "我", "起", "床"});
  CHECK(slucr::tokenize_words("ab", Tokenizer::kCharacter) ==
        std::vector<std::string>{"a", "b"});
}

TEST_CASE("translation and intent-only files") {
  std::istringstream in(
      R"({"id": 3, "locale": "de", "plain_text": "x", "bracketed_text": null, "slot_translations": []})");
  const auto recs = slucr::read_translations(in);
  REQUIRE(recs.size() == 1);
  CHECK_FALSE(recs[0].bracketed_text.has_value());

  std::stringstream buf;
  const slucr::IntentOnlyRecord r{3, "de", "hallo welt", "greet"};
  slucr::write_intent_only(buf, r);
  const auto back = slucr::read_intent_only(buf);
  REQUIRE(back.size() == 1);
  CHECK(back[0] == r);

  std::istringstream bad(R"({"id": 3, "locale": "de"})");
  CHECK_THROWS_AS(slucr::read_translations(bad), slucr::DataError);
}
