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

#include "slucr/cli.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "slucr/align.h"
#include "slucr/augment.h"
#include "slucr/common.h"
#include "slucr/corpus.h"
#include "slucr/evaluate.h"
#include "slucr/metrics.h"
#include "slucr/model.h"
#include "slucr/subword.h"
#include "slucr/trainer.h"
#include "slucr/utf8.h"

namespace slucr::cli {

namespace {

namespace fs = std::filesystem;

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

void check_output(const std::string& path, bool force) {
  const fs::path p(path);
  const fs::path parent = p.has_parent_path() ? p.parent_path() : fs::path(".");
  if (!fs::is_directory(parent)) {
    throw UsageError("output directory does not exist: " + parent.string());
  }
  if (fs::exists(p) && !force) {
    throw UsageError("refusing to overwrite " + path + " (use --force)");
  }
}

std::ofstream open_output(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

std::vector<Dataset> load_all(const std::vector<std::string>& paths) {
  std::vector<Dataset> out;
  for (const auto& p : paths) out.push_back(load_dataset(p));
  return out;
}

std::vector<const Dataset*> pointers(const std::vector<Dataset>& ds) {
  std::vector<const Dataset*> out;
  for (const auto& d : ds) out.push_back(&d);
  return out;
}

Tokenizer parse_tokenizer(const std::string& name) {
  if (name == "auto") return Tokenizer::kAuto;
  if (name == "whitespace") return Tokenizer::kWhitespace;
  if (name == "character") return Tokenizer::kCharacter;
  throw UsageError("unknown tokenizer '" + name + "'");
}

// Unlabeled input for predict: id, locale, words; labels optional.
std::vector<Example> load_unlabeled(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<Example> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Example ex;
      ex.id = j.value("id", std::int64_t{0});
      ex.locale = j.value("locale", std::string());
      ex.words = j.at("words").get<std::vector<std::string>>();
      if (ex.words.empty()) throw DataError("example has no words");
      out.push_back(std::move(ex));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

struct Options {
  bool force = false;

  // build-vocab
  std::vector<std::string> data;
  std::vector<std::string> intent_only_texts;
  std::string out;
  UnigramTrainerConfig vocab;

  // segment
  std::string model;
  std::string text;
  bool sample = false;
  double alpha = 0.2;
  std::uint64_t seed = 0;
  bool seed_given = false;

  // align
  std::string translations;
  std::string out_aligned;
  std::string out_intent_only;
  std::string tokenizer = "auto";

  // train
  std::string config;
  std::vector<std::string> train;
  std::string dev;
  std::string vocab_path;
  std::vector<std::string> mt_aligned;
  std::vector<std::string> mt_intent_only;
  std::string log;
  int threads = 1;

  // evaluate / predict
  std::string checkpoint;
};

int run_build_vocab(const Options& o, std::ostream& out) {
  check_output(o.out, o.force);
  std::vector<std::string> texts;
  for (const auto& ds : load_all(o.data)) {
    for (const auto& ex : ds.examples) {
      texts.insert(texts.end(), ex.words.begin(), ex.words.end());
    }
  }
  for (const auto& path : o.intent_only_texts) {
    for (const auto& rec : load_intent_only(path)) {
      for (auto& w : tokenize_words(rec.text)) texts.push_back(std::move(w));
    }
  }
  UnigramTrainReport report;
  const auto model = train_unigram(texts, o.vocab, &report);
  auto file = open_output(o.out);
  save_model(file, model);
  out << "pieces: " << model.num_pieces() << "\n";
  out << "log_likelihood: " << report.log_likelihood.back().back() << "\n";
  return kExitOk;
}

int run_segment(const Options& o, std::ostream& out) {
  const auto model = load_model(o.model);
  Segmentation seg;
  if (o.sample) {
    Rng rng(o.seed);
    seg = sample_segmentation(model, std::string_view(o.text), o.alpha, rng);
  } else {
    seg = viterbi_segment(model, std::string_view(o.text));
  }
  const auto pieces = seg.piece_strings(model);
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    out << (i ? " " : "") << pieces[i];
  }
  out << "\n";
  return kExitOk;
}

int run_align(const Options& o, std::ostream& out) {
  check_output(o.out_aligned, o.force);
  check_output(o.out_intent_only, o.force);
  const Tokenizer tok = parse_tokenizer(o.tokenizer);
  const auto source = load_dataset(o.data.front());
  std::map<std::int64_t, const Example*> by_id;
  for (const auto& ex : source.examples) {
    if (!by_id.emplace(ex.id, &ex).second) {
      throw DataError("align: source dataset has several examples with id " +
                      std::to_string(ex.id));
    }
  }
  const auto records = load_translations(o.translations);
  std::map<std::string, long> counts{{"aligned_plain", 0},
                                     {"aligned_bracketed", 0},
                                     {"intent_only", 0}};
  std::vector<Example> aligned;
  std::vector<IntentOnlyRecord> intent_only;
  for (const auto& rec : records) {
    auto it = by_id.find(rec.id);
    if (it == by_id.end()) {
      throw DataError("align: translation id " + std::to_string(rec.id) +
                      " has no source example");
    }
    auto outcome = project_slots(*it->second, rec, tok);
    ++counts[status_name(outcome.status)];
    if (outcome.aligned()) {
      aligned.push_back(std::move(*outcome.example));
    } else {
      intent_only.push_back(std::move(outcome.intent_only));
    }
  }
  {
    auto f = open_output(o.out_aligned);
    for (const auto& ex : aligned) write_example(f, ex);
  }
  {
    auto f = open_output(o.out_intent_only);
    for (const auto& rec : intent_only) write_intent_only(f, rec);
  }
  for (const auto& [name, n] : counts) out << name << ": " << n << "\n";
  return kExitOk;
}

int run_train(const Options& o, std::ostream& out, std::ostream& err) {
  check_output(o.out, o.force);
  check_output(o.log, o.force);
  TrainConfig config = TrainConfig::load(o.config);
  if (o.seed_given) config.seed = o.seed;
  const auto train_sets = load_all(o.train);
  const Dataset dev = load_dataset(o.dev);
  const auto aligned_sets = load_all(o.mt_aligned);
  std::vector<IntentOnlyRecord> intent_only;
  for (const auto& p : o.mt_intent_only) {
    auto recs = load_intent_only(p);
    intent_only.insert(intent_only.end(), recs.begin(), recs.end());
  }
  const SubwordModel subword = load_model(o.vocab_path);

  std::vector<const Dataset*> all = pointers(train_sets);
  all.push_back(&dev);
  for (const auto& d : aligned_sets) all.push_back(&d);
  LabelSpace labels = LabelSpace::from(all);
  {
    std::vector<std::string> intents = labels.intents.labels();
    for (const auto& r : intent_only) intents.push_back(r.intent);
    labels.intents = LabelInventory(std::move(intents));
  }

  // Slot-aligned translations double as labeled training examples.
  std::vector<Example> train_examples;
  for (const auto* ds : pointers(train_sets)) {
    train_examples.insert(train_examples.end(), ds->examples.begin(),
                          ds->examples.end());
  }
  for (const auto& ds : aligned_sets) {
    train_examples.insert(train_examples.end(), ds.examples.begin(),
                          ds.examples.end());
  }

  TranslationPool pool;
  pool.add_parallel(link_parallel(pointers(train_sets)));
  for (const auto& ds : aligned_sets) {
    for (const auto& ex : ds.examples) pool.add_example(ex);
  }
  for (const auto& rec : intent_only) pool.add_intent_only(rec);

  TrainData data{train_examples, dev.examples, &subword, &pool, labels};
  const auto result = train(config, data, o.threads);
  if (result.log.skipped_examples > 0) {
    err << "warning: skipped " << result.log.skipped_examples
        << " training examples longer than max_len\n";
  }
  {
    auto f = open_output(o.out, /*binary=*/true);
    write_checkpoint(f, result.best);
  }
  {
    auto f = open_output(o.log);
    write_train_log(f, result.log);
  }
  const auto& best = result.log.evals[result.log.best_eval];
  out << "steps: " << result.log.steps.size() << "\n";
  out << "best_step: " << best.step << "\n";
  out << "dev_ema: " << best.dev.ema << "\n";
  return kExitOk;
}

int run_evaluate(const Options& o, std::ostream& out) {
  check_output(o.out, o.force);
  const Checkpoint ckpt = load_checkpoint(o.checkpoint);
  const Dataset data = load_dataset(o.data.front());
  const auto pooled =
      evaluate(ckpt.params, ckpt.subword, ckpt.labels, data.examples);
  std::map<std::string, MetricsReport> per_locale;
  std::set<std::string> locales;
  for (const auto& ex : data.examples) locales.insert(ex.locale);
  if (locales.size() > 1) {
    per_locale =
        evaluate_per_locale(ckpt.params, ckpt.subword, ckpt.labels, data.examples);
  }
  auto f = open_output(o.out);
  write_report(f, pooled, per_locale);
  write_report(out, pooled, per_locale);
  return kExitOk;
}

int run_predict(const Options& o, std::ostream& err) {
  check_output(o.out, o.force);
  const Checkpoint ckpt = load_checkpoint(o.checkpoint);
  const auto inputs = load_unlabeled(o.data.front());
  const auto preds = predict(ckpt.params, ckpt.subword, ckpt.labels, inputs);
  auto f = open_output(o.out);
  for (const auto& ex : preds.labeled) write_example(f, ex);
  if (preds.skipped > 0) {
    err << "warning: skipped " << preds.skipped
        << " inputs longer than the model's max_len\n";
  }
  return kExitOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err) {
  CLI::App app{"Consistency-regularized joint intent detection and slot filling"};
  app.name("slucr");
  app.require_subcommand(1);
  Options o;

  auto* vocab = app.add_subcommand("build-vocab", "Train a unigram subword model");
  vocab->add_option("--data", o.data, "Training JSONL dataset(s)")->required();
  vocab->add_option("--intent-only", o.intent_only_texts,
                    "Intent-only JSONL whose texts join the corpus");
  vocab->add_option("--out", o.out, "Output model TSV")->required();
  vocab->add_option("--vocab-size", o.vocab.target_vocab_size)->capture_default_str();
  vocab->add_option("--max-piece-len", o.vocab.max_piece_len)->capture_default_str();
  vocab->add_option("--min-freq", o.vocab.min_freq)->capture_default_str();
  vocab->add_option("--em-iters", o.vocab.em_iters)->capture_default_str();
  vocab->add_flag("--force", o.force, "Overwrite outputs");

  auto* segment = app.add_subcommand("segment", "Segment text with a subword model");
  segment->add_option("--model", o.model, "Model TSV")->required();
  segment->add_option("--text", o.text, "Text to segment")->required();
  segment->add_flag("--sample", o.sample, "Sample instead of Viterbi");
  segment->add_option("--alpha", o.alpha, "Sampling temperature")->capture_default_str();
  segment->add_option("--seed", o.seed, "Random seed")->capture_default_str();

  auto* align = app.add_subcommand("align", "Project slots onto translations");
  align->add_option("--data", o.data, "Source JSONL dataset")->required()->expected(1);
  align->add_option("--translations", o.translations, "Translation JSONL")->required();
  align->add_option("--out-aligned", o.out_aligned, "Aligned dataset JSONL")->required();
  align->add_option("--out-intent-only", o.out_intent_only, "Intent-only JSONL")
      ->required();
  align->add_option("--tokenizer", o.tokenizer, "auto|whitespace|character")
      ->capture_default_str();
  align->add_flag("--force", o.force, "Overwrite outputs");

  auto* trn = app.add_subcommand("train", "Train a model");
  trn->add_option("--config", o.config, "Train config JSON")->required();
  trn->add_option("--train", o.train, "Training JSONL dataset(s)")->required();
  trn->add_option("--dev", o.dev, "Dev JSONL dataset")->required();
  trn->add_option("--vocab", o.vocab_path, "Subword model TSV")->required();
  trn->add_option("--mt-aligned", o.mt_aligned, "Slot-aligned translation JSONL");
  trn->add_option("--mt-intent-only", o.mt_intent_only, "Intent-only translation JSONL");
  trn->add_option("--out", o.out, "Checkpoint path")->required();
  trn->add_option("--log", o.log, "Train log JSONL")->required();
  auto* seed_opt = trn->add_option("--seed", o.seed, "Override the config seed");
  trn->add_option("--threads", o.threads, "Worker threads")->capture_default_str();
  trn->add_flag("--force", o.force, "Overwrite outputs");

  auto* ev = app.add_subcommand("evaluate", "Score a checkpoint on a dataset");
  ev->add_option("--checkpoint", o.checkpoint, "Checkpoint path")->required();
  ev->add_option("--data", o.data, "Labeled JSONL dataset")->required()->expected(1);
  ev->add_option("--out", o.out, "Report JSON")->required();
  ev->add_flag("--force", o.force, "Overwrite outputs");

  auto* pred = app.add_subcommand("predict", "Label utterances");
  pred->add_option("--checkpoint", o.checkpoint, "Checkpoint path")->required();
  pred->add_option("--data", o.data, "JSONL with id, locale, words")
      ->required()
      ->expected(1);
  pred->add_option("--out", o.out, "Labeled JSONL")->required();
  pred->add_flag("--force", o.force, "Overwrite outputs");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << one_line(e.what()) << "\n";
    CLI::App* failing = &app;
    for (auto* sub : app.get_subcommands()) failing = sub;
    out << failing->help();
    return kExitUsage;
  }
  o.seed_given = seed_opt->count() > 0;

  try {
    if (vocab->parsed()) return run_build_vocab(o, out);
    if (segment->parsed()) return run_segment(o, out);
    if (align->parsed()) return run_align(o, out);
    if (trn->parsed()) return run_train(o, out, err);
    if (ev->parsed()) return run_evaluate(o, out);
    if (pred->parsed()) return run_predict(o, err);
  } catch (const UsageError& e) {
    err << "error: usage: " << one_line(e.what()) << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "error: numerical: " << one_line(e.what()) << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: data: " << one_line(e.what()) << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace slucr::cli
