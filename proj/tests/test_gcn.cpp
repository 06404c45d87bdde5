#include <doctest.h>

#include <Eigen/Dense>

#include "graphfuse/errors.hpp"
#include "graphfuse/gcn.hpp"
#include "graphfuse/graph.hpp"
#include "support.hpp"

using namespace graphfuse;
using testsupport::random_graph;

namespace {

SpMatR dense_to_sparse(const Eigen::MatrixXd& m) {
  std::vector<Eigen::Triplet<double>> trip;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j)
      if (m(i, j) != 0.0) trip.emplace_back(i, j, m(i, j));
  SpMatR s(m.rows(), m.cols());
  s.setFromTriplets(trip.begin(), trip.end());
  return s;
}

SpMatR random_features(int n, int d, std::uint64_t seed, double density = 0.6) {
  Rng rng(seed);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      if (rng.uniform() < density) m(i, j) = rng.uniform(0.0, 1.0);
  return dense_to_sparse(m);
}

GcnModel zero_model(int d, int h, int c) {
  GcnModel m;
  m.theta0 = Eigen::MatrixXd::Zero(d, h);
  m.theta1 = Eigen::MatrixXd::Zero(h, c);
  m.hidden = h;
  return m;
}

}  // namespace

TEST_CASE("forward with zero weights is uniform over classes") {
  Graph g = random_graph(5, 0.5, 11);
  SpMatR f = random_features(5, 4, 12);
  Eigen::MatrixXd z = forward(zero_model(4, 3, 4), renormalize(g), f, false, 0.0, 0);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(z(i, j) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("isolated node reduces to a plain MLP") {
  Graph g = Graph::from_edges(1, {});
  Eigen::MatrixXd fd(1, 3);
  fd << 0.4, 1.2, 0.0;
  SpMatR f = dense_to_sparse(fd);
  TrainConfig cfg;
  cfg.hidden = 4;
  cfg.seed = 99;
  GcnModel model = init_model(3, 2, cfg);
  Eigen::MatrixXd z = forward(model, renormalize(g), f, false, 0.0, 0);

  Eigen::RowVectorXd h = (fd * model.theta0).cwiseMax(0.0);
  Eigen::RowVectorXd logits = h * model.theta1;
  Eigen::RowVectorXd e = (logits.array() - logits.maxCoeff()).exp();
  Eigen::RowVectorXd expect = e / e.sum();
  CHECK((z.row(0) - expect).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("softmax rows sum to one") {
  Graph g = random_graph(6, 0.6, 21);
  SpMatR f = random_features(6, 5, 22);
  TrainConfig cfg;
  cfg.hidden = 7;
  cfg.seed = 5;
  GcnModel model = init_model(5, 3, cfg);
  SUBCASE("dropout off") {
    Eigen::MatrixXd z = forward(model, renormalize(g), f, false, 0.0, 0);
    for (int i = 0; i < 6; ++i)
      CHECK(std::abs(z.row(i).sum() - 1.0) <= 1e-12);
  }
  SUBCASE("dropout on") {
    Eigen::MatrixXd z = forward(model, renormalize(g), f, true, 0.5, 313);
    for (int i = 0; i < 6; ++i)
      CHECK(std::abs(z.row(i).sum() - 1.0) <= 1e-9);
  }
}

TEST_CASE("dropout is seeded and deterministic") {
  Graph g = random_graph(8, 0.5, 31);
  SpMatR f = random_features(8, 6, 32);
  TrainConfig cfg;
  cfg.seed = 8;
  GcnModel model = init_model(6, 3, cfg);
  PropagationMatrix a = renormalize(g);
  Eigen::MatrixXd z1 = forward(model, a, f, true, 0.5, 1000);
  Eigen::MatrixXd z2 = forward(model, a, f, true, 0.5, 1000);
  Eigen::MatrixXd z3 = forward(model, a, f, true, 0.5, 1001);
  CHECK(z1 == z2);
  CHECK(z1 != z3);
}

TEST_CASE("masked cross entropy") {
  SUBCASE("perfect predictions give (near) zero loss") {
    Eigen::MatrixXd z(2, 3);
    z << 1, 0, 0, 0, 1, 0;
    CHECK(masked_cross_entropy(z, {0, 1}, {0, 1}) <= 1e-10);
  }
  SUBCASE("uniform predictions give ln(c)") {
    Eigen::MatrixXd z = Eigen::MatrixXd::Constant(4, 3, 1.0 / 3.0);
    CHECK(std::abs(masked_cross_entropy(z, {0, 1, 2, 0}, {0, 1, 2, 3}) -
                   std::log(3.0)) <= 1e-12);
    Eigen::MatrixXd z5 = Eigen::MatrixXd::Constant(2, 5, 0.2);
    CHECK(std::abs(masked_cross_entropy(z5, {4, 0}, {0, 1}) - std::log(5.0)) <=
          1e-12);
  }
  SUBCASE("mask and label validation") {
    Eigen::MatrixXd z = Eigen::MatrixXd::Constant(2, 2, 0.5);
    CHECK_THROWS_AS(masked_cross_entropy(z, {0, 1}, {}), std::invalid_argument);
    CHECK_THROWS_AS(masked_cross_entropy(z, {0, 5}, {1}), std::invalid_argument);
    CHECK_THROWS_AS(masked_cross_entropy(z, {0, 1}, {7}), std::invalid_argument);
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  Graph g = random_graph(8, 0.5, 41);
  SpMatR f = random_features(8, 5, 42);
  std::vector<int> labels{0, 1, 2, 0, 1, 2, 0, 1};
  std::vector<int> mask{0, 2, 3, 5, 7};
  TrainConfig cfg;
  cfg.hidden = 4;
  cfg.seed = 7;
  cfg.weight_decay = 5e-4;
  cfg.dropout = 0.0;
  GcnModel model = init_model(5, 3, cfg);
  PropagationMatrix a = renormalize(g);

  Gradients grad = gradients(model, a, f, labels, mask, cfg);

  auto loss_at = [&](const GcnModel& m) {
    Eigen::MatrixXd z = forward(m, a, f, false, 0.0, 0);
    return masked_cross_entropy(z, labels, mask) +
           0.5 * cfg.weight_decay * m.theta0.squaredNorm();
  };
  const double h = 1e-5;
  auto check_entry = [&](Eigen::MatrixXd& param, double analytic, int i, int j) {
    double saved = param(i, j);
    param(i, j) = saved + h;
    double up = loss_at(model);
    param(i, j) = saved - h;
    double down = loss_at(model);
    param(i, j) = saved;
    double fd = (up - down) / (2.0 * h);
    double rel = std::abs(analytic - fd) /
                 std::max({1e-3, std::abs(analytic), std::abs(fd)});
    CHECK(rel <= 1e-4);
  };
  for (int i = 0; i < model.theta0.rows(); ++i)
    for (int j = 0; j < model.theta0.cols(); ++j)
      check_entry(model.theta0, grad.theta0(i, j), i, j);
  for (int i = 0; i < model.theta1.rows(); ++i)
    for (int j = 0; j < model.theta1.cols(); ++j)
      check_entry(model.theta1, grad.theta1(i, j), i, j);
}

TEST_CASE("weight decay dominates when predictions saturate") {
  // Two isolated nodes, identity-like features, huge second layer: the
  // softmax saturates at the true labels and the CE gradient vanishes.
  Graph g = Graph::from_edges(2, {});
  Eigen::MatrixXd fd = Eigen::MatrixXd::Identity(2, 2);
  SpMatR f = dense_to_sparse(fd);
  GcnModel model = zero_model(2, 2, 2);
  model.theta0 = Eigen::MatrixXd::Identity(2, 2);
  model.theta1 = 50.0 * Eigen::MatrixXd::Identity(2, 2);
  TrainConfig cfg;
  cfg.weight_decay = 5e-4;
  cfg.dropout = 0.0;
  Gradients grad =
      gradients(model, renormalize(g), f, {0, 1}, {0, 1}, cfg);
  CHECK((grad.theta0 - cfg.weight_decay * model.theta0).cwiseAbs().maxCoeff() <=
        1e-3);
}

TEST_CASE("zero model gradient is node-swap symmetric on K2") {
  Graph k2 = Graph::from_edges(2, {{0, 1, 1.0}});
  SpMatR f = dense_to_sparse(Eigen::MatrixXd::Ones(2, 2));
  TrainConfig cfg;
  cfg.dropout = 0.0;
  cfg.weight_decay = 0.0;
  GcnModel model = zero_model(2, 3, 2);
  Gradients g01 = gradients(model, renormalize(k2), f, {0, 1}, {0, 1}, cfg);
  Gradients g10 = gradients(model, renormalize(k2), f, {1, 0}, {0, 1}, cfg);
  CHECK(g01.theta0 == g10.theta0);
  CHECK(g01.theta1 == g10.theta1);
}

TEST_CASE("training separates two labeled cliques perfectly") {
  std::vector<Edge> edges;
  for (int u = 0; u < 10; ++u)
    for (int v = u + 1; v < 10; ++v) edges.push_back({u, v, 1.0});
  for (int u = 10; u < 20; ++u)
    for (int v = u + 1; v < 20; ++v) edges.push_back({u, v, 1.0});
  Graph g = Graph::from_edges(20, edges);
  SpMatR f = dense_to_sparse(Eigen::MatrixXd::Identity(20, 20));
  std::vector<int> labels(20, 0);
  for (int i = 10; i < 20; ++i) labels[static_cast<std::size_t>(i)] = 1;

  Splits splits;
  splits.train = {0, 1, 10, 11};
  splits.val = {2, 3, 12, 13};
  splits.test = {4, 5, 6, 7, 8, 9, 14, 15, 16, 17, 18, 19};

  TrainConfig cfg;
  cfg.seed = 3;
  auto [model, report] = train(g, f, labels, splits, cfg);
  CHECK(report.test_accuracy == doctest::Approx(1.0));
  CHECK(report.train_loss.size() == 200);
  CHECK(report.val_loss.size() == 200);
  CHECK(report.val_accuracy.size() == 200);
}

TEST_CASE("one epoch at zero learning rate leaves the init untouched") {
  Graph g = random_graph(6, 0.6, 51);
  SpMatR f = random_features(6, 4, 52);
  std::vector<int> labels{0, 1, 0, 1, 0, 1};
  Splits splits;
  splits.train = {0, 1};
  splits.val = {2, 3};
  splits.test = {4, 5};
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.learning_rate = 0.0;
  cfg.seed = 77;
  auto [model, report] = train(g, f, labels, splits, cfg);
  GcnModel init = init_model(4, 2, cfg);
  CHECK(model.theta0 == init.theta0);
  CHECK(model.theta1 == init.theta1);
}

TEST_CASE("training is deterministic per seed") {
  Graph g = random_graph(10, 0.4, 61);
  SpMatR f = random_features(10, 6, 62);
  std::vector<int> labels{0, 1, 2, 0, 1, 2, 0, 1, 2, 0};
  Splits splits;
  splits.train = {0, 1, 2};
  splits.val = {3, 4, 5};
  splits.test = {6, 7, 8, 9};
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.seed = 4242;
  auto [m1, r1] = train(g, f, labels, splits, cfg);
  auto [m2, r2] = train(g, f, labels, splits, cfg);
  CHECK(m1.theta0 == m2.theta0);
  CHECK(m1.theta1 == m2.theta1);
  CHECK(r1.train_loss == r2.train_loss);
  CHECK(r1.val_loss == r2.val_loss);
  CHECK(r1.val_accuracy == r2.val_accuracy);
  CHECK(r1.test_accuracy == r2.test_accuracy);
  CHECK(r1.best_epoch == r2.best_epoch);
}

TEST_CASE("forward is permutation equivariant") {
  Graph g = random_graph(7, 0.5, 71);
  SpMatR f = random_features(7, 5, 72);
  TrainConfig cfg;
  cfg.hidden = 4;
  cfg.seed = 8;
  GcnModel model = init_model(5, 3, cfg);

  std::vector<int> perm{4, 2, 0, 6, 1, 5, 3};
  Graph gp = testsupport::permute_graph(g, perm);
  Eigen::MatrixXd fdense = Eigen::MatrixXd(f);
  Eigen::MatrixXd fpdense(7, 5);
  for (int i = 0; i < 7; ++i)
    fpdense.row(perm[static_cast<std::size_t>(i)]) = fdense.row(i);

  Eigen::MatrixXd z = forward(model, renormalize(g), f, false, 0.0, 0);
  Eigen::MatrixXd zp =
      forward(model, renormalize(gp), dense_to_sparse(fpdense), false, 0.0, 0);
  for (int i = 0; i < 7; ++i)
    CHECK((zp.row(perm[static_cast<std::size_t>(i)]) - z.row(i))
              .cwiseAbs()
              .maxCoeff() <= 1e-10);
}

TEST_CASE("dropout-off forward is pure") {
  Graph g = random_graph(6, 0.5, 81);
  SpMatR f = random_features(6, 4, 82);
  TrainConfig cfg;
  cfg.seed = 9;
  GcnModel model = init_model(4, 2, cfg);
  PropagationMatrix a = renormalize(g);
  Eigen::MatrixXd z1 = forward(model, a, f, false, 0.0, 0);
  Eigen::MatrixXd z2 = forward(model, a, f, false, 0.0, 123);
  CHECK(z1 == z2);
}

TEST_CASE("evaluate") {
  SUBCASE("uniform model ties break to the lowest class") {
    Graph g = random_graph(10, 0.4, 91);
    SpMatR f = random_features(10, 4, 92);
    std::vector<int> labels{0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
    std::vector<int> mask{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    double acc = evaluate(zero_model(4, 3, 2), renormalize(g), f, labels, mask);
    CHECK(acc == doctest::Approx(0.5));  // exactly the class-0 share
    CHECK(acc >= 0.3);
    CHECK(acc <= 0.7);
  }
  SUBCASE("empty mask is an error") {
    Graph g = random_graph(3, 0.5, 93);
    SpMatR f = random_features(3, 2, 94);
    CHECK_THROWS_AS(
        evaluate(zero_model(2, 2, 2), renormalize(g), f, {0, 1, 0}, {}),
        std::invalid_argument);
  }
}

TEST_CASE("divergent training raises a numeric failure") {
  Graph g = random_graph(8, 0.5, 120);
  SpMatR f = random_features(8, 4, 121);
  std::vector<int> labels{0, 1, 0, 1, 0, 1, 0, 1};
  Splits splits;
  splits.train = {0, 1};
  splits.val = {2, 3};
  splits.test = {4, 5, 6, 7};
  TrainConfig cfg;
  cfg.learning_rate = 1e200;  // forces the logits to overflow
  cfg.epochs = 30;
  CHECK_THROWS_AS(train(g, f, labels, splits, cfg), NumericError);
}

TEST_CASE("train validates splits") {
  Graph g = random_graph(6, 0.5, 95);
  SpMatR f = random_features(6, 3, 96);
  std::vector<int> labels{0, 1, 0, 1, 0, 1};
  TrainConfig cfg;
  Splits overlapping;
  overlapping.train = {0, 1};
  overlapping.val = {1, 2};
  overlapping.test = {3};
  CHECK_THROWS_AS(train(g, f, labels, overlapping, cfg), std::invalid_argument);
  Splits empty_val;
  empty_val.train = {0};
  empty_val.test = {3};
  CHECK_THROWS_AS(train(g, f, labels, empty_val, cfg), std::invalid_argument);
}

TEST_CASE("multiview block problem construction") {
  Graph g1 = random_graph(5, 0.6, 97);
  Graph g2 = random_graph(5, 0.6, 98);
  SpMatR f = random_features(5, 3, 99);
  std::vector<int> labels{0, 1, 2, 0, 1};
  Splits splits;
  splits.train = {0, 1};
  splits.val = {2};
  splits.test = {3, 4};

  MultiviewProblem prob =
      build_multiview_block_problem({g1, g2}, f, labels, splits);
  CHECK(prob.graph.node_count() == 10);
  CHECK(prob.base_n == 5);
  CHECK(prob.graph.edge_count() == g1.edge_count() + g2.edge_count());
  for (const Edge& e : prob.graph.edges())
    CHECK((e.u < 5) == (e.v < 5));  // no cross-block edges
  for (int i = 0; i < 5; ++i) {
    CHECK(prob.labels[static_cast<std::size_t>(i)] ==
          prob.labels[static_cast<std::size_t>(i + 5)]);
    for (int j = 0; j < 3; ++j)
      CHECK(prob.features.coeff(i, j) == prob.features.coeff(i + 5, j));
  }
  CHECK(prob.splits.train == std::vector<int>{0, 1, 5, 6});
  CHECK(prob.splits.val == std::vector<int>{2});
  CHECK(prob.splits.test == std::vector<int>{3, 4});
}
