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
#include <vector>

#include <doctest.h>

#include "oracles.h"
#include "slucr/common.h"
#include "slucr/objective.h"

using slucr::AugmentedInput;
using slucr::AugmentKind;
using slucr::LossWeights;
using slucr::SluDistributions;

TEST_CASE("cross entropy") {
  const std::vector<double> u = {0.25, 0.25, 0.25, 0.25};
  CHECK(slucr::cross_entropy(u, 2).loss == doctest::Approx(1.386294).epsilon(1e-6));
  const std::vector<double> onehot = {0.0, 1.0};
  const auto ce = slucr::cross_entropy(onehot, 1);
  CHECK(ce.loss == 0.0);
  CHECK(ce.grad_logits == std::vector<double>{0.0, 0.0});
  const std::vector<double> d = {0.9, 0.1};
  const auto g = slucr::cross_entropy(d, 0).grad_logits;
  CHECK(g[0] == doctest::Approx(-0.1));
  CHECK(g[1] == doctest::Approx(0.1));
  CHECK_THROWS_AS(slucr::cross_entropy(d, 2), slucr::DataError);
  // Underflowed probability is floored rather than producing infinity.
  CHECK(slucr::cross_entropy(onehot, 0).loss == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("kl divergence") {
  const std::vector<double> half = {0.5, 0.5};
  CHECK(slucr::kl_div(half, half) == 0.0);
  CHECK(slucr::kl_div(std::vector<double>{1.0, 0.0}, half) ==
        doctest::Approx(0.693147).epsilon(1e-6));
  CHECK(slucr::kl_div(std::vector<double>{0.9, 0.1}, half) ==
        doctest::Approx(0.368064).epsilon(1e-6));
  CHECK_THROWS_AS(slucr::kl_div(half, std::vector<double>{1.0}), slucr::DataError);
}

TEST_CASE("symmetric KL with stop-gradient") {
  const std::vector<double> p = {0.9, 0.1}, q = {0.5, 0.5};
  const auto s = slucr::symmetric_kl_stopgrad(p, q);
  CHECK(s.value == doctest::Approx(0.878890).epsilon(1e-6));
  CHECK(s.grad_p[0] == doctest::Approx(0.4));
  CHECK(s.grad_p[1] == doctest::Approx(-0.4));
  CHECK(s.grad_q[0] == doctest::Approx(-0.4));
  CHECK(s.grad_q[1] == doctest::Approx(0.4));

  const auto same = slucr::symmetric_kl_stopgrad(p, p);
  CHECK(same.value == 0.0);
  CHECK(same.grad_p == std::vector<double>{0.0, 0.0});

  slucr::Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const int k = 2 + static_cast<int>(rng.below(8));
    std::vector<double> up(k), uq(k);
    for (int i = 0; i < k; ++i) {
      up[i] = rng.uniform(-3, 3);
      uq[i] = rng.uniform(-3, 3);
    }
    const auto pp = oracle::softmax(up), qq = oracle::softmax(uq);
    const auto r = slucr::symmetric_kl_stopgrad(pp, qq);
    CHECK(r.value >= 0.0);
    CHECK(r.value == doctest::Approx(slucr::symmetric_kl_stopgrad(qq, pp).value).epsilon(1e-12));
    const auto fq = oracle::fd_grad_q(pp, uq, 1e-5);
    const auto fp = oracle::fd_grad_q(qq, up, 1e-5);
    for (int i = 0; i < k; ++i) {
      CHECK(r.grad_p[i] + r.grad_q[i] == 0.0);
      CHECK(std::abs(r.grad_q[i] - fq[i]) < 1e-8);
      CHECK(std::abs(r.grad_p[i] - fp[i]) < 1e-8);
    }
  }
}

namespace {

SluDistributions dists(std::vector<double> intent, std::vector<std::vector<double>> slots) {
  SluDistributions d;
  d.intent = std::move(intent);
  d.slots = std::move(slots);
  return d;
}

}  // namespace

TEST_CASE("total loss without an augmented view") {
  const auto o = dists({0.7, 0.3}, {{0.6, 0.4}, {0.1, 0.9}});
  const std::vector<int> slots = {1, 1};
  const auto r = slucr::total_loss(o, 0, slots, std::nullopt, LossWeights{2, 3, 3}, true);
  const double li = -std::log(0.7);
  const double ls = (-std::log(0.4) - std::log(0.9)) / 2;
  CHECK(r.breakdown.total == doctest::Approx(li + 2 * ls).epsilon(1e-12));
  CHECK(r.breakdown.r_intent == 0.0);
  CHECK(r.breakdown.r_slot == 0.0);
  CHECK_FALSE(r.breakdown.has_augmented);
  CHECK(r.augmented.intent.size() == 0);
  // Slot gradients carry lambda1 / n.
  CHECK(r.original.slots(0, 1) == doctest::Approx(2.0 * (0.4 - 1.0) / 2));
}

TEST_CASE("hand-summed four-term total") {
  const auto o = dists({0.7, 0.3}, {{0.6, 0.4}});
  const auto a = dists({0.4, 0.6}, {{0.2, 0.8}});
  const std::vector<int> slots = {1};
  AugmentedInput in{&a, AugmentKind::kSubwordSampling, true, {}};
  const auto r = slucr::total_loss(o, 0, slots, in, LossWeights{1, 2, 3}, true);

  const double li = -std::log(0.7);
  const double ls = -std::log(0.4);
  const double ri = oracle::kl({0.7, 0.3}, {0.4, 0.6}) + oracle::kl({0.4, 0.6}, {0.7, 0.3});
  const double rs = oracle::kl({0.6, 0.4}, {0.2, 0.8}) + oracle::kl({0.2, 0.8}, {0.6, 0.4});
  CHECK(r.breakdown.l_intent == doctest::Approx(li).epsilon(1e-12));
  CHECK(r.breakdown.r_intent == doctest::Approx(ri).epsilon(1e-12));
  CHECK(r.breakdown.r_slot == doctest::Approx(rs).epsilon(1e-12));
  CHECK(r.breakdown.total == doctest::Approx(li + ls + 2 * ri + 3 * rs).epsilon(1e-12));
  CHECK(std::abs(r.breakdown.total -
                 (r.breakdown.l_intent + 1 * r.breakdown.l_slot +
                  2 * r.breakdown.r_intent + 3 * r.breakdown.r_slot)) < 1e-12);
  // Augmented view gets only consistency gradients: lambda2 (q - p).
  CHECK(r.augmented.intent(0, 0) == doctest::Approx(2 * (0.4 - 0.7)));
  CHECK(r.augmented.slots(0, 0) == doctest::Approx(3 * (0.2 - 0.6)));
}

TEST_CASE("fixed point and gating") {
  const auto o = dists({0.7, 0.3}, {{0.6, 0.4}, {0.3, 0.7}});
  const std::vector<int> slots = {0, 1};
  AugmentedInput same{&o, AugmentKind::kSubwordSampling, true, {}};
  const auto plain = slucr::total_loss(o, 1, slots, std::nullopt, LossWeights{}, true);
  const auto fixed = slucr::total_loss(o, 1, slots, same, LossWeights{}, true);
  CHECK(fixed.breakdown.r_intent == 0.0);
  CHECK(fixed.breakdown.r_slot == 0.0);
  CHECK(fixed.breakdown.total == plain.breakdown.total);
  CHECK(fixed.original.intent == plain.original.intent);

  // Translation views never produce R_S, even with a matching shape.
  const auto t = dists({0.2, 0.8}, {{0.5, 0.5}});
  AugmentedInput mt{&t, AugmentKind::kMachineTranslation, false, {}};
  const auto r = slucr::total_loss(o, 1, slots, mt, LossWeights{}, true);
  CHECK(r.breakdown.r_intent_active);
  CHECK_FALSE(r.breakdown.r_slot_active);
  CHECK(r.breakdown.r_slot == 0.0);
  CHECK(r.augmented.slots.isZero());

  // Lambda2 = lambda3 = 0 reduces to the task loss.
  const auto zero = slucr::total_loss(o, 1, slots, mt, LossWeights{2, 0, 0}, true);
  CHECK(zero.breakdown.total == plain.breakdown.total);

  // A subword view with a different word count is a data error.
  AugmentedInput bad{&t, AugmentKind::kSubwordSampling, true, {}};
  CHECK_THROWS_AS(slucr::total_loss(o, 1, slots, bad, LossWeights{}, true), slucr::DataError);
}

TEST_CASE("labeled augmented views average the task losses") {
  const auto o = dists({0.7, 0.3}, {{0.6, 0.4}});
  const auto t = dists({0.2, 0.8}, {{0.5, 0.5}, {0.9, 0.1}});
  const std::vector<int> slots = {1};
  AugmentedInput mt{&t, AugmentKind::kMachineTranslation, false, {}};
  mt.labels.intent = 0;
  mt.labels.slots = std::vector<int>{0, 0};
  const auto r = slucr::total_loss(o, 0, slots, mt, LossWeights{2, 3, 3}, true);
  CHECK(r.breakdown.l_intent == doctest::Approx((-std::log(0.7) - std::log(0.2)) / 2));
  const double aug_slot = (-std::log(0.5) - std::log(0.9)) / 2;
  CHECK(r.breakdown.l_slot == doctest::Approx((-std::log(0.4) + aug_slot) / 2));

  const auto off = slucr::total_loss(o, 0, slots, mt, LossWeights{2, 3, 3}, false);
  CHECK(off.breakdown.l_intent == doctest::Approx(-std::log(0.7)));
}

TEST_CASE("total is monotone in each lambda") {
  const auto o = dists({0.7, 0.3}, {{0.6, 0.4}});
  const auto a = dists({0.4, 0.6}, {{0.2, 0.8}});
  const std::vector<int> slots = {1};
  AugmentedInput in{&a, AugmentKind::kSubwordSampling, true, {}};
  double prev = -1;
  for (double l : {0.0, 1.0, 2.0, 5.0}) {
    const double t = slucr::total_loss(o, 0, slots, in, LossWeights{2, l, 3}, true).breakdown.total;
    CHECK(t >= prev);
    prev = t;
  }
  CHECK_THROWS_AS(slucr::total_loss(o, 0, slots, in, LossWeights{-1, 0, 0}, true),
                  slucr::UsageError);
}
