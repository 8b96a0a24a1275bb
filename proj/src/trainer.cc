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

#include "slucr/trainer.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "slucr/evaluate.h"

namespace slucr {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw DataError(std::string("train config: ") + what);
  };
  require(batch_size > 0, "batch_size must be positive");
  require(epochs > 0, "epochs must be positive");
  require(learning_rate > 0.0 && std::isfinite(learning_rate),
          "learning_rate must be positive");
  require(dropout_rate >= 0.0 && dropout_rate < 1.0,
          "dropout_rate must lie in [0, 1)");
  require(lambda1 >= 0.0 && lambda2 >= 0.0 && lambda3 >= 0.0 &&
              std::isfinite(lambda1 + lambda2 + lambda3),
          "lambdas must be finite and non-negative");
  require(alpha >= 0.0 && std::isfinite(alpha), "alpha must be non-negative");
  require(grad_clip_norm > 0.0, "grad_clip_norm must be positive");
  require(d_model > 0 && blocks > 0 && max_len > 1, "model dims must be positive");
  require(eval_every > 0, "eval_every must be positive");
  try {
    strategy_distribution.validate();
  } catch (const UsageError& e) {
    throw DataError(std::string("train config: ") + e.what());
  }
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("train config: malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw DataError("train config: expected a JSON object");
  TrainConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "batch_size") c.batch_size = value.get<int>();
      else if (key == "epochs") c.epochs = value.get<int>();
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "dropout_rate") c.dropout_rate = value.get<double>();
      else if (key == "lambda1") c.lambda1 = value.get<double>();
      else if (key == "lambda2") c.lambda2 = value.get<double>();
      else if (key == "lambda3") c.lambda3 = value.get<double>();
      else if (key == "alpha") c.alpha = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "grad_clip_norm") c.grad_clip_norm = value.get<double>();
      else if (key == "task_loss_on_augmented") c.task_loss_on_augmented = value.get<bool>();
      else if (key == "d_model") c.d_model = value.get<int>();
      else if (key == "blocks") c.blocks = value.get<int>();
      else if (key == "max_len") c.max_len = value.get<int>();
      else if (key == "eval_every") c.eval_every = value.get<int>();
      else if (key == "strategy_distribution") {
        for (const auto& [k, v] : value.items()) {
          if (k == "machine_translation") c.strategy_distribution.machine_translation = v.get<double>();
          else if (k == "subword_sampling") c.strategy_distribution.subword_sampling = v.get<double>();
          else throw DataError("train config: unknown strategy '" + k + "'");
        }
      } else {
        throw DataError("train config: unknown key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("train config: bad value: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string TrainConfig::to_json() const {
  json j;
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["learning_rate"] = learning_rate;
  j["dropout_rate"] = dropout_rate;
  j["lambda1"] = lambda1;
  j["lambda2"] = lambda2;
  j["lambda3"] = lambda3;
  j["alpha"] = alpha;
  j["strategy_distribution"] = {
      {"machine_translation", strategy_distribution.machine_translation},
      {"subword_sampling", strategy_distribution.subword_sampling}};
  j["seed"] = seed;
  j["grad_clip_norm"] = grad_clip_norm;
  j["task_loss_on_augmented"] = task_loss_on_augmented;
  j["d_model"] = d_model;
  j["blocks"] = blocks;
  j["max_len"] = max_len;
  j["eval_every"] = eval_every;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Optimizer

OptimizerState OptimizerState::zeros(const ModelConfig& config) {
  return {ModelParams::zeros(config), ModelParams::zeros(config), 0};
}

void adam_update(std::span<double> params, std::span<const double> grads,
                 std::span<double> m, std::span<double> v, long step, double lr,
                 double grad_scale) {
  const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i] * grad_scale;
    m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g;
    v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g * g;
    params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kAdamEps);
  }
}

namespace {

std::vector<Matrix*> tensors(ModelParams& p) {
  std::vector<Matrix*> out;
  p.for_each([&](std::string_view, Matrix& t) { out.push_back(&t); });
  return out;
}

std::vector<const Matrix*> tensors(const ModelParams& p) {
  std::vector<const Matrix*> out;
  p.for_each([&](std::string_view, const Matrix& t) { out.push_back(&t); });
  return out;
}

std::span<double> flat(Matrix& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

std::span<const double> flat(const Matrix& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

}  // namespace

double adam_step(ModelParams& params, const ParamGrads& grads,
                 OptimizerState& state, double lr, double clip_norm) {
  auto p = tensors(params);
  const auto g = tensors(grads);
  auto m = tensors(state.first_moment);
  auto v = tensors(state.second_moment);
  if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size()) {
    throw UsageError("adam_step: tensor lists differ");
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i]->size() != g[i]->size() || p[i]->size() != m[i]->size() ||
        p[i]->size() != v[i]->size()) {
      throw UsageError("adam_step: tensor shapes differ");
    }
    sq += g[i]->squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) {
    throw NumericalError("non-finite gradient (global norm " + std::to_string(norm) +
                         ") at optimizer step " + std::to_string(state.step + 1));
  }
  const double scale = norm > clip_norm ? clip_norm / norm : 1.0;
  ++state.step;
  for (std::size_t i = 0; i < p.size(); ++i) {
    adam_update(flat(*p[i]), flat(*g[i]), flat(*m[i]), flat(*v[i]), state.step,
                lr, scale);
  }
  return norm;
}

// ---------------------------------------------------------------------------
// Model selection

int select_best(std::span<const double> dev_ema) {
  if (dev_ema.empty()) throw UsageError("select_best: no evaluations recorded");
  int best = 0;
  for (int i = 1; i < static_cast<int>(dev_ema.size()); ++i) {
    if (dev_ema[i] > dev_ema[best]) best = i;
  }
  return best;
}

int select_best(const TrainLog& log) {
  std::vector<double> ema;
  for (const auto& e : log.evals) ema.push_back(e.dev.ema);
  return select_best(ema);
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

struct PreparedExample {
  const Example* example;
  EncodedInput original;
  ViewLabels labels;
};

struct ExampleOutcome {
  LossBreakdown breakdown;
  bool has_view = false;
  AugmentKind kind = AugmentKind::kSubwordSampling;
};

class StepWorker {
 public:
  StepWorker(const TrainConfig& config, const TrainData& data,
             const ModelConfig& model_config)
      : config_(config), data_(data), grads_(ModelParams::zeros(model_config)) {}

  ParamGrads& grads() { return grads_; }

  ExampleOutcome run(const ModelParams& params, const PreparedExample& prep,
                     std::uint64_t seed) {
    Rng rng(seed);
    Rng strategy_rng = rng.split();
    Rng augment_rng = rng.split();
    Rng dropout_original = rng.split();
    Rng dropout_augmented = rng.split();

    const Example& ex = *prep.example;
    const bool mt_available =
        data_.translations && data_.translations->has_partner(ex.id, ex.locale);
    const AugmentKind kind =
        sample_strategy(config_.strategy_distribution, mt_available, strategy_rng);

    std::optional<AugmentedView> view;
    try {
      if (kind == AugmentKind::kMachineTranslation) {
        view = mt_augment(ex, *data_.translations, data_.labels, *data_.subword,
                          augment_rng, config_.max_len);
      } else {
        view = subword_augment(ex, data_.labels, *data_.subword, config_.alpha,
                               augment_rng, config_.max_len);
      }
    } catch (const DataError&) {
      view.reset();  // augmented sequence too long: task losses only
    }

    const auto orig = forward(params, prep.original, true, config_.dropout_rate,
                              dropout_original);
    std::optional<ForwardResult> aug;
    std::optional<AugmentedInput> aug_in;
    if (view) {
      aug = forward(params, view->encoded, true, config_.dropout_rate,
                    dropout_augmented);
      aug_in = AugmentedInput{&aug->dists, view->kind, view->align_slots,
                              view->labels};
    }
    const auto loss = total_loss(orig.dists, *prep.labels.intent,
                                 *prep.labels.slots, aug_in, config_.weights(),
                                 config_.task_loss_on_augmented);
    backward(params, orig.cache, loss.original.intent, loss.original.slots, grads_);
    if (aug) {
      backward(params, aug->cache, loss.augmented.intent, loss.augmented.slots,
               grads_);
    }
    return {loss.breakdown, view.has_value(), view ? view->kind : kind};
  }

 private:
  const TrainConfig& config_;
  const TrainData& data_;
  ParamGrads grads_;
};

void add_into(ParamGrads& dst, const ParamGrads& src) {
  auto d = tensors(dst);
  const auto s = tensors(src);
  for (std::size_t i = 0; i < d.size(); ++i) *d[i] += *s[i];
}

void scale(ParamGrads& g, double f) {
  for (Matrix* t : tensors(g)) *t *= f;
}

}  // namespace

TrainResult train(const TrainConfig& config, const TrainData& data, int threads) {
  config.validate();
  if (!data.subword) throw UsageError("train: subword model required");
  if (data.train.empty()) throw DataError("train: empty training set");
  if (data.dev.empty()) throw DataError("train: empty dev set");
  threads = std::max(1, threads);

  ModelConfig mc;
  mc.d_model = config.d_model;
  mc.blocks = config.blocks;
  mc.max_len = config.max_len;
  mc.vocab_size = data.subword->vocab_size();
  mc.num_intents = data.labels.intents.size();
  mc.num_slots = data.labels.slots.size();

  Rng master(config.seed);
  Rng init_rng = master.split();
  Rng order_rng = master.split();
  Rng example_rng = master.split();

  TrainResult result;
  TrainLog& log = result.log;
  ModelParams params = init_params(mc, init_rng);
  OptimizerState opt = OptimizerState::zeros(mc);

  std::vector<PreparedExample> prepared;
  for (const auto& ex : data.train) {
    std::vector<Segmentation> segs;
    std::size_t n = 1;
    for (const auto& w : ex.words) {
      segs.push_back(viterbi_segment(*data.subword, w));
      n += segs.back().pieces.size();
    }
    if (n > static_cast<std::size_t>(config.max_len)) {
      ++log.skipped_examples;
      continue;
    }
    prepared.push_back({&ex, encode_input(segs, config.max_len),
                        label_indices(data.labels, ex.intent, &ex.slots)});
  }
  if (prepared.empty()) throw DataError("train: every example exceeds max_len");

  std::vector<StepWorker> workers;
  for (int t = 0; t < threads; ++t) workers.emplace_back(config, data, mc);

  ModelParams best_params = params;
  double best_ema = -1.0;
  auto run_eval = [&](long step) {
    EvalRecord rec{step, evaluate(params, *data.subword, data.labels, data.dev)};
    if (rec.dev.ema > best_ema) {
      best_ema = rec.dev.ema;
      best_params = params;
    }
    log.evals.push_back(rec);
  };

  std::vector<std::size_t> order(prepared.size());
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(order, order_rng);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const std::size_t n = end - start;
      std::vector<std::uint64_t> seeds(n);
      for (auto& s : seeds) s = example_rng.next();

      std::vector<ExampleOutcome> outcomes(n);
      for (auto& w : workers) w.grads().set_zero();
      // Contiguous chunks per worker; merge in worker order.
      const std::size_t used = std::min<std::size_t>(workers.size(), n);
      const std::size_t chunk = (n + used - 1) / used;
      auto work = [&](std::size_t w) {
        for (std::size_t i = w * chunk; i < std::min(n, (w + 1) * chunk); ++i) {
          outcomes[i] = workers[w].run(params, prepared[order[start + i]], seeds[i]);
        }
      };
      if (used == 1) {
        work(0);
      } else {
        std::vector<std::exception_ptr> errors(used);
        {
          std::vector<std::jthread> pool;
          for (std::size_t w = 0; w < used; ++w) {
            pool.emplace_back([&, w] {
              try {
                work(w);
              } catch (...) {
                errors[w] = std::current_exception();
              }
            });
          }
        }
        for (auto& e : errors) {
          if (e) std::rethrow_exception(e);
        }
      }
      ParamGrads& grads = workers[0].grads();
      for (std::size_t w = 1; w < used; ++w) add_into(grads, workers[w].grads());
      scale(grads, 1.0 / static_cast<double>(n));

      StepRecord rec;
      rec.step = ++step;
      rec.epoch = epoch;
      rec.examples = static_cast<int>(n);
      int with_view = 0;
      for (const auto& o : outcomes) {
        const auto& b = o.breakdown;
        rec.l_intent += b.l_intent;
        rec.l_slot += b.l_slot;
        rec.total += b.total;
        if (o.has_view) {
          ++with_view;
          rec.r_intent += b.r_intent;
          if (o.kind == AugmentKind::kMachineTranslation) {
            ++rec.translation_views;
            rec.r_slot_translation += b.r_slot;
          } else {
            ++rec.subword_views;
            rec.r_slot += b.r_slot;
          }
        }
      }
      rec.l_intent /= n;
      rec.l_slot /= n;
      rec.total /= n;
      if (with_view > 0) rec.r_intent /= with_view;
      if (rec.subword_views > 0) rec.r_slot /= rec.subword_views;
      rec.grad_norm = adam_step(params, grads, opt, config.learning_rate,
                                config.grad_clip_norm);
      log.steps.push_back(rec);

      if (step % config.eval_every == 0) run_eval(step);
    }
  }
  if (log.evals.empty() || log.evals.back().step != step) run_eval(step);
  log.best_eval = select_best(log);

  result.best.params = std::move(best_params);
  result.best.labels = data.labels;
  result.best.subword = *data.subword;
  result.best.train_config_json = config.to_json();
  return result;
}

void write_train_log(std::ostream& out, const TrainLog& log) {
  for (const auto& s : log.steps) {
    json j;
    j["type"] = "step";
    j["step"] = s.step;
    j["epoch"] = s.epoch;
    j["examples"] = s.examples;
    j["subword_views"] = s.subword_views;
    j["translation_views"] = s.translation_views;
    j["l_intent"] = s.l_intent;
    j["l_slot"] = s.l_slot;
    j["r_intent"] = s.r_intent;
    j["r_slot"] = s.r_slot;
    j["r_slot_translation"] = s.r_slot_translation;
    j["total"] = s.total;
    j["grad_norm"] = s.grad_norm;
    out << j.dump() << '\n';
  }
  for (std::size_t i = 0; i < log.evals.size(); ++i) {
    const auto& e = log.evals[i];
    json j;
    j["type"] = "eval";
    j["index"] = i;
    j["step"] = e.step;
    j["intent_acc"] = e.dev.intent_acc;
    j["slot_f1"] = e.dev.slot_f1;
    j["ema"] = e.dev.ema;
    j["skipped"] = e.dev.counts.skipped;
    out << j.dump() << '\n';
  }
  json best;
  best["type"] = "best";
  best["eval_index"] = log.best_eval;
  best["step"] = log.best_eval >= 0 ? log.evals[log.best_eval].step : 0;
  best["skipped_examples"] = log.skipped_examples;
  out << best.dump() << '\n';
}

}  // namespace slucr
