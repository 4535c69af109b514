#include "gnnbd/backdoor.hpp"

#include <doctest.h>

#include <numeric>

#include "support.hpp"

using namespace gnnbd;
using testsup::toy_graph;

namespace {

DataSplit manual_split(std::vector<int> train, int total) {
  DataSplit s;
  s.train = std::move(train);
  std::vector<char> in_train(static_cast<size_t>(total), 0);
  for (int v : s.train) in_train[static_cast<size_t>(v)] = 1;
  for (int v = 0; v < total; ++v) {
    if (!in_train[static_cast<size_t>(v)]) s.test.push_back(v);
  }
  return s;
}

FeatureImportanceOrder identity_order(int d) {
  FeatureImportanceOrder o;
  o.order.resize(static_cast<size_t>(d));
  std::iota(o.order.begin(), o.order.end(), 0);
  o.scores.assign(static_cast<size_t>(d), 0.5);
  return o;
}

}  // namespace

TEST_CASE("resolve_trigger_size uses floor(0.05 d) and honors explicit sizes") {
  AttackConfig c;
  CHECK(resolve_trigger_size(c, 1433) == 71);
  CHECK(resolve_trigger_size(c, 3703) == 185);
  c.trigger_size = 10;
  CHECK(resolve_trigger_size(c, 1433) == 10);
  c.trigger_size = 0;
  CHECK_THROWS_AS(resolve_trigger_size(c, 10), AttackSetupError);  // floor(0.5) = 0
  c.trigger_size = 40;
  CHECK_THROWS_AS(resolve_trigger_size(c, 40), AttackSetupError);  // n must stay below d
}

TEST_CASE("sample_poison_nodes sizes, filtering, determinism, and failure modes") {
  const int total = 2708;
  std::vector<int> train(542);
  std::iota(train.begin(), train.end(), 0);
  DataSplit split = manual_split(train, total);
  std::vector<int> labels(static_cast<size_t>(total), 1);
  for (int v = 0; v < total; v += 7) labels[static_cast<size_t>(v)] = 0;  // some target-label nodes

  AttackConfig c;
  c.target_label = 0;
  c.poison_rate = 0.1;
  c.seed = 9;
  std::vector<int> picked = sample_poison_nodes(split, labels, c);
  CHECK(picked.size() == 54);  // round(0.1 * 542)
  for (int v : picked) CHECK(labels[static_cast<size_t>(v)] != 0);
  CHECK(std::is_sorted(picked.begin(), picked.end()));
  CHECK(sample_poison_nodes(split, labels, c) == picked);
  c.seed = 10;
  CHECK(sample_poison_nodes(split, labels, c) != picked);

  DataSplit tiny = manual_split({0, 1, 2, 3}, 8);
  CHECK_THROWS_AS(sample_poison_nodes(tiny, labels, c), AttackSetupError);  // rounds to zero

  std::vector<int> all_target(static_cast<size_t>(total), 0);
  CHECK_THROWS_AS(sample_poison_nodes(split, all_target, c), AttackSetupError);
}

TEST_CASE("inject_trigger writes the value at strategy positions only") {
  const int d = 8;
  FeatureImportanceOrder order = identity_order(d);
  AttackConfig c;
  c.trigger_size = 2;
  c.strategy = Strategy::kMias;

  RowVector zero = RowVector::Zero(d);
  RowVector hit = inject_trigger(zero, order, c);
  CHECK(hit(0) == 1.0);
  CHECK(hit(1) == 1.0);
  CHECK(hit.sum() == 2.0);

  c.strategy = Strategy::kLias;
  RowVector lias = inject_trigger(zero, order, c);
  CHECK(lias(d - 1) == 1.0);
  CHECK(lias(d - 2) == 1.0);
  CHECK(lias.sum() == 2.0);

  // positions already at the trigger value: row unchanged
  RowVector ones = RowVector::Ones(d);
  CHECK(inject_trigger(ones, order, c) == ones);

  // idempotence and bounded hamming distance
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    RowVector row(d);
    for (int i = 0; i < d; ++i) row(i) = rng.uniform() < 0.5 ? 1.0 : 0.0;
    RowVector once = inject_trigger(row, order, c);
    CHECK(inject_trigger(once, order, c) == once);
    int hamming = 0;
    for (int i = 0; i < d; ++i) hamming += once(i) != row(i) ? 1 : 0;
    CHECK(hamming <= c.trigger_size);
  }
}

TEST_CASE("build_poisoned_train honors the sampling and mask invariants") {
  Rng rng(31);
  CitationGraph g = testsup::random_toy_graph(rng, 40, 20, 3, 0.15);
  DataSplit ds = split(g, 0.5, 4);
  TrainConfig tc;
  tc.architecture = Architecture::kGcn;
  tc.hidden = 4;
  tc.epochs = 10;
  tc.seed = 1;
  TrainedModel clean = train(g, ds.train, g.labels, tc);

  AttackConfig ac;
  ac.target_label = 0;
  ac.poison_rate = 0.3;
  ac.trigger_size = 4;
  ac.seed = 6;
  ExplainerConfig ec;
  ec.steps = 10;
  PoisonedTrainSet pts = build_poisoned_train(g, ds, clean, ac, ec);

  CHECK(pts.nodes.size() ==
        static_cast<size_t>(std::lround(ac.poison_rate * static_cast<Real>(ds.train.size()))));
  for (size_t i = 0; i < pts.nodes.size(); ++i) {
    CHECK(g.labels[static_cast<size_t>(pts.nodes[i])] != ac.target_label);
    CHECK(pts.trigger_masks[i].popcount() == 4);
    // triggered row differs from the original only inside the mask
    RowVector original = g.feature_row(pts.nodes[i]);
    for (int cidx = 0; cidx < 20; ++cidx) {
      if (!pts.trigger_masks[i].bits[static_cast<size_t>(cidx)]) {
        CHECK(pts.rows[i](cidx) == original(cidx));
      } else {
        CHECK(pts.rows[i](cidx) == ac.trigger_value);
      }
    }
  }
}

TEST_CASE("build_poisoned_test covers every non-target test node with n-bit masks") {
  Rng rng(37);
  CitationGraph g = testsup::random_toy_graph(rng, 30, 16, 3, 0.2);
  DataSplit ds = split(g, 0.3, 8);
  TrainConfig tc;
  tc.architecture = Architecture::kGcn;
  tc.hidden = 4;
  tc.epochs = 10;
  tc.seed = 2;
  TrainedModel clean = train(g, ds.train, g.labels, tc);

  AttackConfig ac;
  ac.target_label = 1;
  ac.trigger_size = 3;
  ac.seed = 12;
  ExplainerConfig ec;
  ec.steps = 10;
  PoisonedTestSet mias = build_poisoned_test(g, ds, clean, ac, ec);

  size_t expected = 0;
  for (int v : ds.test) {
    if (g.labels[static_cast<size_t>(v)] != 1) ++expected;
  }
  CHECK(mias.nodes.size() == expected);
  CHECK(mias.clean_orders.size() == expected);
  for (size_t i = 0; i < mias.nodes.size(); ++i) {
    CHECK(g.labels[static_cast<size_t>(mias.nodes[i])] != 1);
    CHECK(mias.target_masks[i].popcount() == 3);
  }

  // same explainer seed, other strategy: target masks are disjoint (2n <= d)
  AttackConfig lias_cfg = ac;
  lias_cfg.strategy = Strategy::kLias;
  PoisonedTestSet lias = build_poisoned_test(g, ds, clean, lias_cfg, ec);
  REQUIRE(lias.nodes == mias.nodes);
  for (size_t i = 0; i < mias.nodes.size(); ++i) {
    for (int cidx = 0; cidx < 16; ++cidx) {
      CHECK((mias.target_masks[i].bits[static_cast<size_t>(cidx)] &
             lias.target_masks[i].bits[static_cast<size_t>(cidx)]) == 0);
    }
  }
}

TEST_CASE("train_backdoored with an empty poisoned set and zero epochs equals the clean model") {
  Rng rng(41);
  CitationGraph g = testsup::random_toy_graph(rng, 20, 10, 2, 0.25);
  DataSplit ds = split(g, 0.4, 3);
  TrainConfig tc;
  tc.architecture = Architecture::kGcn;
  tc.hidden = 4;
  tc.epochs = 15;
  tc.seed = 5;
  TrainedModel clean = train(g, ds.train, g.labels, tc);

  PoisonedTrainSet empty;
  empty.target_label = 0;
  AttackConfig ac;
  ac.epochs = 0;
  TrainedModel same = train_backdoored(g, ds, clean, empty, ac);
  Matrix a = forward_log_probs(clean, g);
  Matrix b = forward_log_probs(same, g);
  CHECK(a == b);

  // fine-tuning with no poison still runs and stays deterministic
  ac.epochs = 5;
  TrainedModel tuned1 = train_backdoored(g, ds, clean, empty, ac);
  TrainedModel tuned2 = train_backdoored(g, ds, clean, empty, ac);
  CHECK(tuned1.loss_trace == tuned2.loss_trace);
  CHECK(forward_log_probs(tuned1, g) == forward_log_probs(tuned2, g));
}

TEST_CASE("train_backdoored is deterministic and starts from the clean parameters") {
  Rng rng(43);
  CitationGraph g = testsup::random_toy_graph(rng, 24, 12, 2, 0.2);
  DataSplit ds = split(g, 0.5, 6);
  TrainConfig tc;
  tc.architecture = Architecture::kGcn;
  tc.hidden = 4;
  tc.epochs = 10;
  tc.seed = 7;
  TrainedModel clean = train(g, ds.train, g.labels, tc);

  AttackConfig ac;
  ac.target_label = 0;
  ac.poison_rate = 0.4;
  ac.trigger_size = 2;
  ac.epochs = 8;
  ac.seed = 2;
  ExplainerConfig ec;
  ec.steps = 8;
  PoisonedTrainSet pts = build_poisoned_train(g, ds, clean, ac, ec);
  TrainedModel b1 = train_backdoored(g, ds, clean, pts, ac);
  TrainedModel b2 = train_backdoored(g, ds, clean, pts, ac);
  CHECK(b1.loss_trace.size() == 8);
  CHECK(b1.loss_trace == b2.loss_trace);
  auto p1 = b1.params();
  auto p2 = b2.params();
  for (size_t i = 0; i < p1.size(); ++i) CHECK(p1[i]->value == p2[i]->value);
}

TEST_CASE("generate_predicted_masks yields one n-bit mask per poisoned test node") {
  Rng rng(47);
  CitationGraph g = testsup::random_toy_graph(rng, 24, 14, 3, 0.2);
  DataSplit ds = split(g, 0.4, 9);
  TrainConfig tc;
  tc.architecture = Architecture::kGcn;
  tc.hidden = 4;
  tc.epochs = 10;
  tc.seed = 3;
  TrainedModel clean = train(g, ds.train, g.labels, tc);

  AttackConfig ac;
  ac.target_label = 2;
  ac.poison_rate = 0.3;
  ac.trigger_size = 3;
  ac.epochs = 6;
  ac.seed = 5;
  ExplainerConfig ec;
  ec.steps = 8;
  PoisonedTrainSet pts = build_poisoned_train(g, ds, clean, ac, ec);
  PoisonedTestSet ptest = build_poisoned_test(g, ds, clean, ac, ec);
  TrainedModel backdoored = train_backdoored(g, ds, clean, pts, ac);
  PredictedMasks predicted = generate_predicted_masks(backdoored, g, ptest, ac, ec);
  CHECK(predicted.masks.size() == ptest.nodes.size());
  CHECK(predicted.orders.size() == ptest.nodes.size());
  for (const FeatureMask& m : predicted.masks) CHECK(m.popcount() == 3);

  // parallel fan-out returns the same masks as the sequential path
  PredictedMasks parallel = generate_predicted_masks(backdoored, g, ptest, ac, ec, 4);
  for (size_t i = 0; i < predicted.masks.size(); ++i) {
    CHECK(parallel.masks[i].bits == predicted.masks[i].bits);
  }
}
