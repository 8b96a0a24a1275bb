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

// Central finite differences against the analytic gradient of the combined
// objective. The stop-gradient terms are differentiated through a surrogate
// in which each KL target is frozen at its value at the base point; the
// surrogate's gradient there is exactly what stop-gradient prescribes.

#ifndef SLUCR_TESTS_GRADCHECK_H_
#define SLUCR_TESTS_GRADCHECK_H_

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "oracles.h"
#include "slucr/model.h"
#include "slucr/objective.h"

namespace gradcheck {

struct Scenario {
  slucr::ModelParams params;
  slucr::EncodedInput original;
  int intent = 0;
  std::vector<int> slots;
  std::optional<slucr::EncodedInput> augmented;
  slucr::AugmentKind kind = slucr::AugmentKind::kSubwordSampling;
  bool align_slots = true;
  slucr::ViewLabels augmented_labels;
  slucr::LossWeights weights;
  double dropout = 0.0;
  std::uint64_t dropout_seed_original = 1;
  std::uint64_t dropout_seed_augmented = 2;
};

struct Report {
  double max_rel_error = 0.0;
  std::string worst;
  long checked = 0;
};

inline slucr::ForwardResult run(const Scenario& s, const slucr::ModelParams& p,
                                const slucr::EncodedInput& in, std::uint64_t seed) {
  slucr::Rng rng(seed);
  return slucr::forward(p, in, s.dropout > 0.0, s.dropout, rng);
}

inline double neg_log(double x) { return -std::log(std::max(x, 1e-12)); }

inline double mean_slot_ce(const slucr::SluDistributions& d, const std::vector<int>& y) {
  double s = 0.0;
  for (std::size_t w = 0; w < y.size(); ++w) s += neg_log(d.slots[w][y[w]]);
  return s / y.size();
}

// The objective with KL targets frozen at `p0` (original) and `q0`
// (augmented), written directly from the loss definition.
inline double surrogate(const Scenario& s, const slucr::ModelParams& p,
                        const slucr::SluDistributions* p0,
                        const slucr::SluDistributions* q0) {
  const auto o = run(s, p, s.original, s.dropout_seed_original).dists;
  double li = neg_log(o.intent[s.intent]);
  double ls = mean_slot_ce(o, s.slots);
  double ri = 0.0, rs = 0.0;
  if (s.augmented) {
    const auto a = run(s, p, *s.augmented, s.dropout_seed_augmented).dists;
    if (s.augmented_labels.intent) li = 0.5 * (li + neg_log(a.intent[*s.augmented_labels.intent]));
    if (s.augmented_labels.slots) ls = 0.5 * (ls + mean_slot_ce(a, *s.augmented_labels.slots));
    ri = oracle::kl(p0->intent, a.intent) + oracle::kl(q0->intent, o.intent);
    if (s.align_slots && s.kind == slucr::AugmentKind::kSubwordSampling) {
      for (std::size_t w = 0; w < o.slots.size(); ++w) {
        rs += oracle::kl(p0->slots[w], a.slots[w]) + oracle::kl(q0->slots[w], o.slots[w]);
      }
      rs /= o.slots.size();
    }
  }
  return li + s.weights.lambda1 * ls + s.weights.lambda2 * ri + s.weights.lambda3 * rs;
}

inline slucr::ParamGrads analytic(const Scenario& s) {
  const auto fo = run(s, s.params, s.original, s.dropout_seed_original);
  std::optional<slucr::ForwardResult> fa;
  std::optional<slucr::AugmentedInput> aug;
  if (s.augmented) {
    fa = run(s, s.params, *s.augmented, s.dropout_seed_augmented);
    aug = slucr::AugmentedInput{&fa->dists, s.kind, s.align_slots, s.augmented_labels};
  }
  const auto loss = slucr::total_loss(fo.dists, s.intent, s.slots, aug, s.weights, true);
  auto grads = slucr::ModelParams::zeros(s.params.config);
  slucr::backward(s.params, fo.cache, loss.original.intent, loss.original.slots, grads);
  if (fa) slucr::backward(s.params, fa->cache, loss.augmented.intent, loss.augmented.slots, grads);
  return grads;
}

inline Report check(const Scenario& s, double h = 1e-5) {
  const auto grads = analytic(s);
  const auto p0 = run(s, s.params, s.original, s.dropout_seed_original).dists;
  std::optional<slucr::SluDistributions> q0;
  if (s.augmented) q0 = run(s, s.params, *s.augmented, s.dropout_seed_augmented).dists;

  slucr::ModelParams work = s.params;
  std::vector<std::pair<std::string, slucr::Matrix*>> tensors;
  work.for_each([&](std::string_view name, slucr::Matrix& m) {
    tensors.emplace_back(std::string(name), &m);
  });
  std::vector<const slucr::Matrix*> grad_tensors;
  grads.for_each([&](std::string_view, const slucr::Matrix& m) { grad_tensors.push_back(&m); });

  Report r;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    slucr::Matrix& m = *tensors[t].second;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double keep = m.data()[i];
      m.data()[i] = keep + h;
      const double up = surrogate(s, work, &p0, q0 ? &*q0 : nullptr);
      m.data()[i] = keep - h;
      const double down = surrogate(s, work, &p0, q0 ? &*q0 : nullptr);
      m.data()[i] = keep;
      const double fd = (up - down) / (2 * h);
      const double an = grad_tensors[t]->data()[i];
      const double rel = std::abs(an - fd) / std::max(1.0, std::abs(fd));
      ++r.checked;
      if (rel > r.max_rel_error) {
        r.max_rel_error = rel;
        r.worst = tensors[t].first + "[" + std::to_string(i) + "]";
      }
    }
  }
  return r;
}

}  // namespace gradcheck

#endif  // SLUCR_TESTS_GRADCHECK_H_
