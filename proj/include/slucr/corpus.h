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

#ifndef SLUCR_CORPUS_H_
#define SLUCR_CORPUS_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace slucr {

inline constexpr const char* kOutsideLabel = "O";

// One annotated utterance: pre-tokenized words with one bare slot label per
// word ("O" outside any slot) and an utterance-level intent.
struct Example {
  std::int64_t id = 0;
  std::string locale;
  std::vector<std::string> words;
  std::vector<std::string> slots;
  std::string intent;

  bool operator==(const Example&) const = default;
};

// Sorted, duplicate-free label set with dense indices.
class LabelInventory {
 public:
  LabelInventory() = default;
  explicit LabelInventory(std::vector<std::string> labels);

  int index_of(const std::string& label) const;  // -1 when absent
  bool contains(const std::string& label) const { return index_of(label) >= 0; }
  const std::string& label(int index) const { return labels_.at(index); }
  int size() const { return static_cast<int>(labels_.size()); }
  const std::vector<std::string>& labels() const { return labels_; }

  bool operator==(const LabelInventory& o) const { return labels_ == o.labels_; }

 private:
  std::vector<std::string> labels_;
  std::map<std::string, int> index_;
};

struct Dataset {
  std::vector<Example> examples;
  LabelInventory intents;
  LabelInventory slots;  // always contains "O"

  bool operator==(const Dataset&) const = default;
};

// Intent and slot inventories shared by every dataset of a run, so label
// indices agree across locales and splits.
struct LabelSpace {
  LabelInventory intents;
  LabelInventory slots;

  static LabelSpace from(std::span<const Dataset* const> datasets);
  bool operator==(const LabelSpace&) const = default;
};

// Validates one example (non-empty words, matching slot count).
void validate_example(const Example& ex);

Dataset make_dataset(std::vector<Example> examples);

// Reads JSONL; `source` names the input in diagnostics. Errors carry the
// 1-based line number.
Dataset read_dataset(std::istream& in, const std::string& source = "<stream>");
Dataset load_dataset(const std::string& path);

void write_example(std::ostream& out, const Example& ex);
void write_dataset(std::ostream& out, const Dataset& ds);

// Examples grouped by id across locales.
class ParallelIndex {
 public:
  using Group = std::map<std::string, Example>;  // locale -> example

  const Group* find(std::int64_t id) const;
  std::size_t size() const { return groups_.size(); }
  const std::map<std::int64_t, Group>& groups() const { return groups_; }

  void add(const Example& ex);

 private:
  std::map<std::int64_t, Group> groups_;
};

ParallelIndex link_parallel(std::span<const Dataset* const> datasets);

}  // namespace slucr

#endif  // SLUCR_CORPUS_H_
