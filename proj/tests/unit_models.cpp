#include "gnnbd/models.hpp"

#include <doctest.h>

#include <filesystem>

#include "gnnbd/node_forward.hpp"
#include "support.hpp"

using namespace gnnbd;
using testsup::random_matrix;
using testsup::toy_graph;

namespace {

TrainedModel random_gat(Rng& rng, int d, int classes, int heads = 2, int head_dim = 3) {
  TrainConfig tc;
  tc.architecture = Architecture::kGat;
  tc.heads = heads;
  tc.head_dim = head_dim;
  tc.seed = rng.next_u64();
  return init_model(tc, d, classes);
}

}  // namespace

TEST_CASE("gcn forward: zero features and zero weights give the uniform distribution") {
  Matrix x = Matrix::Zero(1, 3);
  CitationGraph g = toy_graph(4, x, {0}, {});
  TrainConfig tc;
  tc.architecture = Architecture::kGcn;
  tc.hidden = 3;
  TrainedModel model = init_model(tc, 3, 4);
  model.gcn.w1.value.setZero();
  model.gcn.w2.value.setZero();
  Matrix log_probs = forward_log_probs(model, g);
  for (int c = 0; c < 4; ++c) CHECK(log_probs(0, c) == doctest::Approx(std::log(0.25)));
}

TEST_CASE("gcn forward rows exponentiate to one") {
  Rng rng(101);
  CitationGraph g = testsup::random_toy_graph(rng, 9, 5, 3);
  TrainConfig tc;
  tc.architecture = Architecture::kGcn;
  tc.seed = 5;
  TrainedModel model = init_model(tc, 5, 3);
  Matrix log_probs = forward_log_probs(model, g);
  for (int r = 0; r < 9; ++r) {
    CHECK(std::abs(log_probs.row(r).array().exp().sum() - 1.0) <= 1e-9);
  }
}

TEST_CASE("gcn forward equals the hand-computed matrix chain on a 2-node graph") {
  Matrix x(2, 2);
  x << 1, 0, 1, 1;
  CitationGraph g = toy_graph(2, x, {0, 1}, {{0, 1}});
  TrainConfig tc;
  tc.architecture = Architecture::kGcn;
  tc.hidden = 2;
  TrainedModel model = init_model(tc, 2, 2);
  Matrix w1(2, 2), w2(2, 2);
  w1 << 0.3, -0.7, 0.5, 0.2;
  w2 << 1.0, -0.5, 0.25, 0.75;
  model.gcn.w1.value = w1;
  model.gcn.w2.value = w2;

  // hand chain: both self-augmented degrees are 2, so adj = [[.5,.5],[.5,.5]]
  Matrix adj(2, 2);
  adj << 0.5, 0.5, 0.5, 0.5;
  Matrix hidden = (adj * x * w1).cwiseMax(0.0);
  Matrix logits = adj * hidden * w2;
  Matrix expected(2, 2);
  for (int r = 0; r < 2; ++r) {
    Real mx = logits.row(r).maxCoeff();
    Real lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    expected.row(r) = logits.row(r).array() - lse;
  }
  CHECK(forward_log_probs(model, g).isApprox(expected, 1e-12));
}

TEST_CASE("gat attention: self-only neighborhood gets coefficient 1") {
  Rng rng(103);
  Matrix x(1, 4);
  x << 1, 0, 1, 0;
  CitationGraph g = toy_graph(2, x, {0}, {});
  TrainedModel model = random_gat(rng, 4, 2);
  GatStructure structure = GatStructure::build(g.edges, g.num_nodes);
  ad::Tape tape;
  GatDiagnostics diag;
  gat_logits(tape, model.gat, structure, g.features, &diag);
  for (const Matrix& alpha : diag.layer1_attention) {
    CHECK(alpha.rows() == 1);
    CHECK(alpha(0, 0) == doctest::Approx(1.0));
  }
}

TEST_CASE("gat attention: identical neighbors split attention evenly") {
  Rng rng(104);
  // node 0 linked to nodes 1 and 2 which carry identical features; with no
  // self-features on 0 distinguishing them, attention toward 1 and 2 is equal
  Matrix x(3, 3);
  x << 0, 0, 0, 1, 1, 0, 1, 1, 0;
  CitationGraph g = toy_graph(2, x, {0, 0, 1}, {{0, 1}, {0, 2}});
  TrainedModel model = random_gat(rng, 3, 2);
  GatStructure structure = GatStructure::build(g.edges, g.num_nodes);
  ad::Tape tape;
  GatDiagnostics diag;
  gat_logits(tape, model.gat, structure, g.features, &diag);
  // edges into node 0 are rows [0,1,2) of the edge list: sources 0,1,2
  for (const Matrix& alpha : diag.layer1_attention) {
    CHECK(alpha(1, 0) == doctest::Approx(alpha(2, 0)).epsilon(1e-12));
  }
}

TEST_CASE("gat attention coefficients are nonnegative and sum to one per neighborhood") {
  Rng rng(105);
  CitationGraph g = testsup::random_toy_graph(rng, 8, 5, 3);
  TrainedModel model = random_gat(rng, 5, 3);
  GatStructure structure = GatStructure::build(g.edges, g.num_nodes);
  ad::Tape tape;
  GatDiagnostics diag;
  gat_logits(tape, model.gat, structure, g.features, &diag);
  for (const Matrix& alpha : diag.layer1_attention) {
    for (int s = 0; s < structure.segments.count(); ++s) {
      Real sum = 0.0;
      for (int k = structure.segments.offsets[static_cast<size_t>(s)];
           k < structure.segments.offsets[static_cast<size_t>(s) + 1]; ++k) {
        CHECK(alpha(k, 0) >= 0.0);
        sum += alpha(k, 0);
      }
      CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("gat forward equals the naive per-edge oracle on random toy graphs") {
  Rng rng(106);
  for (int trial = 0; trial < 5; ++trial) {
    CitationGraph g = testsup::random_toy_graph(rng, 3 + rng.uniform_int(6), 4, 3, 0.4);
    TrainedModel model = random_gat(rng, 4, 3);
    Matrix expected = testsup::naive_gat_logits(model, g);
    ad::Tape tape;
    GatStructure structure = GatStructure::build(g.edges, g.num_nodes);
    Matrix got = gat_logits(tape, model.gat, structure, g.features).value();
    CHECK((got - expected).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("gat forward rows exponentiate to one") {
  Rng rng(107);
  CitationGraph g = testsup::random_toy_graph(rng, 7, 4, 3);
  TrainedModel model = random_gat(rng, 4, 3);
  Matrix log_probs = forward_log_probs(model, g);
  for (int r = 0; r < 7; ++r) {
    CHECK(std::abs(log_probs.row(r).array().exp().sum() - 1.0) <= 1e-9);
  }
}

TEST_CASE("training: zero epochs returns the initialization with an empty trace") {
  Rng rng(108);
  CitationGraph g = testsup::random_toy_graph(rng, 8, 5, 2);
  TrainConfig tc;
  tc.architecture = Architecture::kGcn;
  tc.epochs = 0;
  tc.seed = 77;
  TrainedModel trained = train(g, {0, 1, 2}, g.labels, tc);
  TrainedModel raw = init_model(tc, 5, 2);
  CHECK(trained.loss_trace.empty());
  CHECK(trained.gcn.w1.value == raw.gcn.w1.value);
  CHECK(trained.gcn.w2.value == raw.gcn.w2.value);
}

TEST_CASE("training decreases the loss and is bitwise reproducible") {
  Rng rng(109);
  CitationGraph g = testsup::random_toy_graph(rng, 16, 6, 2, 0.25);
  for (Architecture arch : {Architecture::kGcn, Architecture::kGat}) {
    TrainConfig tc;
    tc.architecture = arch;
    tc.epochs = 60;
    tc.hidden = 8;
    tc.heads = 2;
    tc.head_dim = 3;
    tc.seed = 11;
    TrainedModel a = train(g, {0, 1, 2, 3, 4, 5}, g.labels, tc);
    CHECK(a.loss_trace.front() > a.loss_trace.back());
    TrainedModel b = train(g, {0, 1, 2, 3, 4, 5}, g.labels, tc);
    CHECK(a.loss_trace == b.loss_trace);
    auto pa = a.params();
    auto pb = b.params();
    for (size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
  }
}

TEST_CASE("accuracy counts argmax hits with ties toward the lower class") {
  RowVector tie(3);
  tie << 0.5, 0.5, 0.1;
  CHECK(argmax_row(tie) == 0);

  Rng rng(110);
  CitationGraph g = testsup::random_toy_graph(rng, 6, 4, 2);
  TrainConfig tc;
  tc.architecture = Architecture::kGcn;
  TrainedModel model = init_model(tc, 4, 2);
  Matrix log_probs = forward_log_probs(model, g);
  std::vector<int> predicted;
  for (int v = 0; v < 6; ++v) predicted.push_back(argmax_row(log_probs.row(v)));
  CHECK(accuracy(model, g, {0, 1, 2, 3, 4, 5}, predicted) == doctest::Approx(1.0));
  std::vector<int> wrong = predicted;
  for (int& p : wrong) p = 1 - p;
  CHECK(accuracy(model, g, {0, 1, 2, 3, 4, 5}, wrong) == doctest::Approx(0.0));
}

TEST_CASE("node permutation relabels outputs consistently (equivariance)") {
  Rng rng(111);
  const int n = 7;
  CitationGraph g = testsup::random_toy_graph(rng, n, 5, 3, 0.4);
  // permutation: v -> (v + 3) % n
  std::vector<int> perm(n);
  for (int v = 0; v < n; ++v) perm[static_cast<size_t>(v)] = (v + 3) % n;
  Matrix x_perm(n, 5);
  std::vector<int> labels_perm(n);
  for (int v = 0; v < n; ++v) {
    x_perm.row(perm[static_cast<size_t>(v)]) = g.feature_row(v);
    labels_perm[static_cast<size_t>(perm[static_cast<size_t>(v)])] = g.labels[static_cast<size_t>(v)];
  }
  std::vector<std::pair<int, int>> edges_perm;
  for (auto [u, v] : g.edges) {
    int a = perm[static_cast<size_t>(u)], b = perm[static_cast<size_t>(v)];
    edges_perm.emplace_back(std::min(a, b), std::max(a, b));
  }
  CitationGraph gp = toy_graph(3, x_perm, labels_perm, edges_perm);

  for (Architecture arch : {Architecture::kGcn, Architecture::kGat}) {
    TrainConfig tc;
    tc.architecture = arch;
    tc.hidden = 6;
    tc.heads = 2;
    tc.head_dim = 3;
    tc.seed = 13;
    TrainedModel model = init_model(tc, 5, 3);
    Matrix out = forward_log_probs(model, g);
    Matrix out_perm = forward_log_probs(model, gp);
    for (int v = 0; v < n; ++v) {
      CHECK((out.row(v) - out_perm.row(perm[static_cast<size_t>(v)])).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }
}

TEST_CASE("node-conditional forward equals the full forward at the node") {
  Rng rng(112);
  for (Architecture arch : {Architecture::kGcn, Architecture::kGat}) {
    for (int trial = 0; trial < 3; ++trial) {
      CitationGraph g = testsup::random_toy_graph(rng, 10, 6, 3, 0.3);
      TrainConfig tc;
      tc.architecture = arch;
      tc.hidden = 5;
      tc.heads = 2;
      tc.head_dim = 3;
      tc.seed = rng.next_u64();
      TrainedModel model = init_model(tc, 6, 3);
      const auto neighbors = adjacency_lists(g.edges, g.num_nodes);
      // replace one node's row and compare against a full-graph forward
      const int node = rng.uniform_int(10);
      RowVector new_row = RowVector::Zero(6);
      new_row(1) = 1.0;
      new_row(4) = 1.0;
      SparseMatrix x_replaced = replace_feature_rows(g.features, {node}, {new_row});
      Matrix full = forward_log_probs(model, g, &x_replaced);

      NodeForward nf(model, g, neighbors, node);
      ad::Tape tape;
      Matrix logits = nf.logits(tape, tape.constant(Matrix(new_row))).value();
      Matrix log_probs = ad::log_softmax_rows(logits);
      CHECK((log_probs.row(0) - full.row(node)).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK(nf.predict(new_row) == argmax_row(full.row(node)));
    }
  }
}

TEST_CASE("checkpoint round-trip is lossless for both architectures") {
  Rng rng(113);
  auto tmp = std::filesystem::temp_directory_path() / "gnnbd_ckpt_test.json";
  for (Architecture arch : {Architecture::kGcn, Architecture::kGat}) {
    TrainConfig tc;
    tc.architecture = arch;
    tc.hidden = 4;
    tc.heads = 2;
    tc.head_dim = 3;
    tc.seed = 31;
    TrainedModel model = init_model(tc, 5, 3);
    model.loss_trace = {1.5, 0.75, 0.3};
    save_checkpoint(model, tmp.string());
    TrainedModel loaded = load_checkpoint(tmp.string());
    CHECK(loaded.architecture == model.architecture);
    CHECK(loaded.config.seed == model.config.seed);
    CHECK(loaded.loss_trace == model.loss_trace);
    auto pa = model.params();
    auto pb = loaded.params();
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
  }
  std::filesystem::remove(tmp);
}
