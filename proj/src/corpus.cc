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

#include "slucr/corpus.h"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <utility>

#include <json.hpp>

#include "slucr/common.h"

namespace slucr {

using json = nlohmann::json;

LabelInventory::LabelInventory(std::vector<std::string> labels)
    : labels_(std::move(labels)) {
  std::sort(labels_.begin(), labels_.end());
  labels_.erase(std::unique(labels_.begin(), labels_.end()), labels_.end());
  for (int i = 0; i < size(); ++i) index_.emplace(labels_[i], i);
}

int LabelInventory::index_of(const std::string& label) const {
  auto it = index_.find(label);
  return it == index_.end() ? -1 : it->second;
}

LabelSpace LabelSpace::from(std::span<const Dataset* const> datasets) {
  std::vector<std::string> intents;
  std::vector<std::string> slots{kOutsideLabel};
  for (const Dataset* ds : datasets) {
    intents.insert(intents.end(), ds->intents.labels().begin(),
                   ds->intents.labels().end());
    slots.insert(slots.end(), ds->slots.labels().begin(),
                 ds->slots.labels().end());
  }
  return {LabelInventory(std::move(intents)), LabelInventory(std::move(slots))};
}

void validate_example(const Example& ex) {
  if (ex.id < 0) throw DataError("negative id " + std::to_string(ex.id));
  if (ex.words.empty()) throw DataError("example has no words");
  if (ex.words.size() != ex.slots.size()) {
    throw DataError("length mismatch: " + std::to_string(ex.words.size()) +
                    " words vs " + std::to_string(ex.slots.size()) + " slots");
  }
  for (const auto& w : ex.words) {
    if (w.empty()) throw DataError("empty word");
  }
  for (const auto& s : ex.slots) {
    if (s.empty()) throw DataError("empty slot label");
  }
  if (ex.intent.empty()) throw DataError("empty intent label");
}

Dataset make_dataset(std::vector<Example> examples) {
  std::set<std::pair<std::int64_t, std::string>> keys;
  std::vector<std::string> intents;
  std::vector<std::string> slots{kOutsideLabel};
  for (const auto& ex : examples) {
    validate_example(ex);
    if (!keys.emplace(ex.id, ex.locale).second) {
      throw DataError("duplicate (id, locale): (" + std::to_string(ex.id) +
                      ", " + ex.locale + ")");
    }
    intents.push_back(ex.intent);
    slots.insert(slots.end(), ex.slots.begin(), ex.slots.end());
  }
  Dataset ds;
  ds.examples = std::move(examples);
  ds.intents = LabelInventory(std::move(intents));
  ds.slots = LabelInventory(std::move(slots));
  return ds;
}

namespace {

Example example_from_json(const json& j) {
  for (const char* key : {"id", "locale", "words", "slots", "intent"}) {
    if (!j.contains(key)) throw DataError(std::string("missing key '") + key + "'");
  }
  Example ex;
  ex.id = j.at("id").get<std::int64_t>();
  ex.locale = j.at("locale").get<std::string>();
  ex.words = j.at("words").get<std::vector<std::string>>();
  ex.slots = j.at("slots").get<std::vector<std::string>>();
  ex.intent = j.at("intent").get<std::string>();
  return ex;
}

}  // namespace

Dataset read_dataset(std::istream& in, const std::string& source) {
  std::vector<Example> examples;
  std::set<std::pair<std::int64_t, std::string>> keys;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    try {
      Example ex = example_from_json(json::parse(line));
      validate_example(ex);
      if (!keys.emplace(ex.id, ex.locale).second) {
        throw DataError("duplicate (id, locale): (" + std::to_string(ex.id) +
                        ", " + ex.locale + ")");
      }
      examples.push_back(std::move(ex));
    } catch (const json::exception& e) {
      throw DataError(where + "malformed JSON: " + e.what());
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
  }
  if (in.bad()) throw DataError(source + ": read failure");
  return make_dataset(std::move(examples));
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_dataset(in, path);
}

void write_example(std::ostream& out, const Example& ex) {
  json j;
  j["id"] = ex.id;
  j["locale"] = ex.locale;
  j["words"] = ex.words;
  j["slots"] = ex.slots;
  j["intent"] = ex.intent;
  out << j.dump() << '\n';
}

void write_dataset(std::ostream& out, const Dataset& ds) {
  for (const auto& ex : ds.examples) write_example(out, ex);
}

const ParallelIndex::Group* ParallelIndex::find(std::int64_t id) const {
  auto it = groups_.find(id);
  return it == groups_.end() ? nullptr : &it->second;
}

void ParallelIndex::add(const Example& ex) {
  auto [it, inserted] = groups_[ex.id].emplace(ex.locale, ex);
  if (!inserted) {
    throw DataError("duplicate (id, locale) across datasets: (" +
                    std::to_string(ex.id) + ", " + ex.locale + ")");
  }
}

ParallelIndex link_parallel(std::span<const Dataset* const> datasets) {
  ParallelIndex index;
  for (const Dataset* ds : datasets) {
    for (const auto& ex : ds->examples) index.add(ex);
  }
  return index;
}

}  // namespace slucr
