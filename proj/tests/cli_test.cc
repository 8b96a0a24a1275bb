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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>
#include <unistd.h>

#include "slucr/cli.h"
#include "slucr/corpus.h"
#include "slucr/metrics.h"
#include "slucr/subword.h"

namespace fs = std::filesystem;

namespace {

const std::string kFixtures = SLUCR_FIXTURE_DIR;

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = slucr::cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() {
    static int n = 0;
    path = fs::temp_directory_path() /
           ("slucr_cli_" + std::to_string(::getpid()) + "_" + std::to_string(n++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

// Trains a small model on the toy fixture; returns the checkpoint path.
std::string train_toy(const TempDir& dir, const std::string& tag,
                      const std::vector<std::string>& extra = {}) {
  const std::string toy = kFixtures + "/toy/train.jsonl";
  if (!fs::exists(dir / "vocab.tsv")) {
    REQUIRE(cli({"build-vocab", "--data", toy, "--vocab-size", "60", "--max-piece-len", "4",
                 "--out", dir / "vocab.tsv"})
                .code == 0);
  }
  if (!fs::exists(dir / "config.json")) {
    spit(dir / "config.json", R"({"epochs": 20, "batch_size": 8, "eval_every": 5, "d_model": 16, "blocks": 1})");
  }
  std::vector<std::string> args = {"train", "--config", dir / "config.json", "--train", toy,
                                   "--dev", toy, "--vocab", dir / "vocab.tsv",
                                   "--out", dir / (tag + ".ckpt"), "--log", dir / (tag + ".log")};
  args.insert(args.end(), extra.begin(), extra.end());
  const auto r = cli(args);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("best_step: ") != std::string::npos);
  return dir / (tag + ".ckpt");
}

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(cli({"--help"}).code == slucr::cli::kExitOk);
  const auto missing = cli({"segment", "--text", "ab"});
  CHECK(missing.code == slucr::cli::kExitUsage);
  CHECK(missing.err.find("--model") != std::string::npos);
  CHECK(cli({"no-such-command"}).code == slucr::cli::kExitUsage);
  CHECK(cli({}).code == slucr::cli::kExitUsage);
}

TEST_CASE("segment prints pieces") {
  TempDir dir;
  const std::string model = dir / "toy.tsv";
  slucr::save_model(model, slucr::SubwordModel({{U"a", std::log(0.5)}, {U"b", std::log(0.3)},
                                               {U"ab", std::log(0.2)}}));
  auto r = cli({"segment", "--model", model, "--text", "ab"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out == "ab\n");
  r = cli({"segment", "--model", model, "--text", "aab"});
  CHECK(r.out == "a ab\n");

  // Sampling is reproducible for a fixed seed.
  const std::vector<std::string> args = {"segment", "--model", model, "--text", "abababab",
                                         "--sample", "--alpha", "0.5", "--seed", "3"};
  CHECK(cli(args).out == cli(args).out);

  CHECK(cli({"segment", "--model", dir / "missing.tsv", "--text", "a"}).code ==
        slucr::cli::kExitData);
}

TEST_CASE("align reports counts on the table fixtures") {
  TempDir dir;
  const auto r = cli({"align", "--data", kFixtures + "/alignment_table/source.jsonl", "--translations",
                      kFixtures + "/alignment_table/translations.jsonl", "--out-aligned",
                      dir / "aligned.jsonl", "--out-intent-only", dir / "intent_only.jsonl"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("aligned_plain: 1") != std::string::npos);
  CHECK(r.out.find("aligned_bracketed: 1") != std::string::npos);
  CHECK(r.out.find("intent_only: 0") != std::string::npos);
  CHECK(slucr::load_dataset(dir / "aligned.jsonl").examples.size() == 2);
}

TEST_CASE("output path policy") {
  TempDir dir;
  const std::string toy = kFixtures + "/toy/train.jsonl";
  const std::vector<std::string> base = {"build-vocab", "--data", toy, "--vocab-size", "40"};
  auto with_out = [&](const std::string& out, bool force) {
    auto a = base;
    a.push_back("--out");
    a.push_back(out);
    if (force) a.push_back("--force");
    return cli(a);
  };
  CHECK(with_out(dir / "v.tsv", false).code == 0);
  const auto refused = with_out(dir / "v.tsv", false);
  CHECK(refused.code == slucr::cli::kExitUsage);
  CHECK(refused.err.find("--force") != std::string::npos);
  CHECK(with_out(dir / "v.tsv", true).code == 0);
  CHECK(with_out(dir / "no/such/dir/v.tsv", false).code == slucr::cli::kExitUsage);
}

TEST_CASE("malformed data exits with the data code") {
  TempDir dir;
  spit(dir / "bad.jsonl", "{\"id\": 1, \"locale\": \"x\", \"words\": [\"a\"], \"slots\": [], \"intent\": \"i\"}\n");
  const auto r = cli({"build-vocab", "--data", dir / "bad.jsonl", "--out", dir / "v.tsv"});
  CHECK(r.code == slucr::cli::kExitData);
  CHECK(r.err.find("bad.jsonl:1") != std::string::npos);

  spit(dir / "config.json", R"({"epochs": 1, "no_such_key": 3})");
  const std::string toy = kFixtures + "/toy/train.jsonl";
  REQUIRE(cli({"build-vocab", "--data", toy, "--vocab-size", "40", "--out", dir / "v.tsv"}).code == 0);
  CHECK(cli({"train", "--config", dir / "config.json", "--train", toy, "--dev", toy, "--vocab",
             dir / "v.tsv", "--out", dir / "m.ckpt", "--log", dir / "m.log"})
            .code == slucr::cli::kExitData);
}

TEST_CASE("train is reproducible and --seed overrides the config") {
  TempDir dir;
  train_toy(dir, "a");
  train_toy(dir, "b");
  CHECK(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));
  CHECK(slurp(dir / "a.log") == slurp(dir / "b.log"));

  train_toy(dir, "c", {"--seed", "5"});
  CHECK(slurp(dir / "c.log") != slurp(dir / "a.log"));
  spit(dir / "config5.json",
       R"({"epochs": 20, "batch_size": 8, "eval_every": 5, "d_model": 16, "blocks": 1, "seed": 5})");
  const std::string toy = kFixtures + "/toy/train.jsonl";
  REQUIRE(cli({"train", "--config", dir / "config5.json", "--train", toy, "--dev", toy, "--vocab",
               dir / "vocab.tsv", "--out", dir / "d.ckpt", "--log", dir / "d.log"})
              .code == 0);
  CHECK(slurp(dir / "c.ckpt") == slurp(dir / "d.ckpt"));
}

TEST_CASE("predict then score reproduces evaluate") {
  TempDir dir;
  const std::string ckpt = train_toy(dir, "m");
  const std::string toy = kFixtures + "/toy/train.jsonl";
  const auto ev = cli({"evaluate", "--checkpoint", ckpt, "--data", toy, "--out", dir / "report.json"});
  REQUIRE_MESSAGE(ev.code == 0, ev.err);
  const auto report = nlohmann::json::parse(slurp(dir / "report.json"));

  // Inputs without labels.
  const auto gold = slucr::load_dataset(toy);
  {
    std::ofstream f(dir / "inputs.jsonl");
    for (const auto& ex : gold.examples) {
      f << nlohmann::json{{"id", ex.id}, {"locale", ex.locale}, {"words", ex.words}}.dump() << "\n";
    }
  }
  const auto pr = cli({"predict", "--checkpoint", ckpt, "--data", dir / "inputs.jsonl", "--out",
                       dir / "pred.jsonl"});
  REQUIRE_MESSAGE(pr.code == 0, pr.err);
  const auto pred = slucr::load_dataset(dir / "pred.jsonl");
  const auto r = slucr::score(pred.examples, gold.examples);
  // The report holds the same values rounded to six decimals.
  std::ostringstream mine;
  slucr::write_report(mine, r, {});
  CHECK(nlohmann::json::parse(mine.str()) == report);
}
