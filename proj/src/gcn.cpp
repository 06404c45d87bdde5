#include "graphfuse/gcn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "graphfuse/errors.hpp"
#include "graphfuse/rng.hpp"

namespace graphfuse {

namespace {

constexpr double kProbFloor = 1e-12;

SpMatR dropout_sparse(const SpMatR& x, double rate, std::uint64_t seed) {
  Rng rng(seed);
  SpMatR out = x;
  const double scale = 1.0 / (1.0 - rate);
  for (int i = 0; i < out.outerSize(); ++i)
    for (SpMatR::InnerIterator it(out, i); it; ++it)
      it.valueRef() = rng.uniform() < rate ? 0.0 : it.value() * scale;
  return out;
}

// Mask entries drawn row-by-row so the stream does not depend on storage.
Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate,
                             std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd mask(rows, cols);
  const double scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      mask(i, j) = rng.uniform() < rate ? 0.0 : scale;
  return mask;
}

Eigen::MatrixXd row_softmax(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd z(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    double mx = logits.row(i).maxCoeff();
    Eigen::ArrayXd e = (logits.row(i).array() - mx).exp();
    z.row(i) = e / e.sum();
  }
  return z;
}

struct ForwardPass {
  SpMatR x;                 // features after input dropout
  Eigen::MatrixXd h1pre;    // A (X Theta0)
  Eigen::MatrixXd hidden_mask;
  Eigen::MatrixXd h1drop;   // dropout(ReLU(h1pre))
  Eigen::MatrixXd z;        // row softmax of A (h1drop Theta1)
};

void check_shapes(const GcnModel& model, const PropagationMatrix& A,
                  const SpMatR& features) {
  if (A.n != features.rows())
    throw std::invalid_argument("gcn: propagation/feature row mismatch");
  if (model.theta0.rows() != features.cols())
    throw std::invalid_argument("gcn: theta0/feature dimension mismatch");
  if (model.theta0.cols() != model.theta1.rows())
    throw std::invalid_argument("gcn: theta0/theta1 shape mismatch");
  if (!model.theta0.allFinite() || !model.theta1.allFinite())
    throw NumericError("gcn: non-finite model parameters");
}

ForwardPass run_forward(const GcnModel& model, const PropagationMatrix& A,
                        const SpMatR& features, bool dropout_active,
                        double rate, std::uint64_t seed) {
  check_shapes(model, A, features);
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("gcn: dropout rate must be in [0,1)");
  ForwardPass fp;
  const bool drop = dropout_active && rate > 0.0;
  fp.x = drop ? dropout_sparse(features, rate, Rng::mix(seed, 1)) : features;
  fp.h1pre = A.matrix * (fp.x * model.theta0);
  Eigen::MatrixXd h1 = fp.h1pre.cwiseMax(0.0);
  if (drop) {
    fp.hidden_mask = dropout_mask(h1.rows(), h1.cols(), rate, Rng::mix(seed, 2));
    fp.h1drop = h1.cwiseProduct(fp.hidden_mask);
  } else {
    fp.h1drop = std::move(h1);
  }
  fp.z = row_softmax(A.matrix * (fp.h1drop * model.theta1));
  return fp;
}

void check_mask(const std::vector<int>& mask, const std::vector<int>& labels,
                Eigen::Index n, Eigen::Index c) {
  if (mask.empty()) throw std::invalid_argument("gcn: empty node mask");
  for (int node : mask) {
    if (node < 0 || node >= n)
      throw std::invalid_argument("gcn: mask node out of range");
    if (labels[static_cast<std::size_t>(node)] < 0 ||
        labels[static_cast<std::size_t>(node)] >= c)
      throw std::invalid_argument("gcn: label out of range");
  }
}

int argmax_row(const Eigen::MatrixXd& z, int row) {
  int best = 0;
  for (int j = 1; j < z.cols(); ++j)
    if (z(row, j) > z(row, best)) best = j;
  return best;
}

struct AdamState {
  Eigen::MatrixXd m, v;
  explicit AdamState(const Eigen::MatrixXd& shape)
      : m(Eigen::MatrixXd::Zero(shape.rows(), shape.cols())),
        v(Eigen::MatrixXd::Zero(shape.rows(), shape.cols())) {}

  void update(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad, double lr,
              int t) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
    double c1 = 1.0 - std::pow(b1, t);
    double c2 = 1.0 - std::pow(b2, t);
    param.array() -=
        lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

}  // namespace

GcnModel init_model(int feature_dim, int classes, const TrainConfig& cfg) {
  if (feature_dim < 1 || classes < 1 || cfg.hidden < 1)
    throw std::invalid_argument("gcn: invalid model dimensions");
  GcnModel model;
  model.hidden = cfg.hidden;
  model.seed = cfg.seed;
  Rng rng(Rng::mix(cfg.seed, 0xA11));
  auto glorot = [&rng](int rows, int cols) {
    double limit = std::sqrt(6.0 / (rows + cols));
    Eigen::MatrixXd w(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) w(i, j) = rng.uniform(-limit, limit);
    return w;
  };
  model.theta0 = glorot(feature_dim, cfg.hidden);
  model.theta1 = glorot(cfg.hidden, classes);
  return model;
}

Eigen::MatrixXd forward(const GcnModel& model, const PropagationMatrix& A,
                        const SpMatR& features, bool dropout_active,
                        double dropout_rate, std::uint64_t seed) {
  return run_forward(model, A, features, dropout_active, dropout_rate, seed).z;
}

double masked_cross_entropy(const Eigen::MatrixXd& Z,
                            const std::vector<int>& labels,
                            const std::vector<int>& mask) {
  check_mask(mask, labels, Z.rows(), Z.cols());
  double loss = 0.0;
  for (int node : mask)
    loss -= std::log(std::max(Z(node, labels[static_cast<std::size_t>(node)]),
                              kProbFloor));
  return loss / static_cast<double>(mask.size());
}

Gradients gradients(const GcnModel& model, const PropagationMatrix& A,
                    const SpMatR& features, const std::vector<int>& labels,
                    const std::vector<int>& mask, const TrainConfig& cfg,
                    bool dropout_active, std::uint64_t dropout_seed) {
  ForwardPass fp = run_forward(model, A, features, dropout_active, cfg.dropout,
                               dropout_seed);
  check_mask(mask, labels, fp.z.rows(), fp.z.cols());

  const double inv = 1.0 / static_cast<double>(mask.size());
  Eigen::MatrixXd g_logits = Eigen::MatrixXd::Zero(fp.z.rows(), fp.z.cols());
  for (int node : mask) {
    g_logits.row(node) = fp.z.row(node) * inv;
    g_logits(node, labels[static_cast<std::size_t>(node)]) -= inv;
  }

  Eigen::MatrixXd ag = A.matrix * g_logits;
  Gradients out;
  out.theta1 = fp.h1drop.transpose() * ag;
  Eigen::MatrixXd d_h1 = ag * model.theta1.transpose();
  if (fp.hidden_mask.size() > 0) d_h1 = d_h1.cwiseProduct(fp.hidden_mask);
  Eigen::MatrixXd d_pre =
      d_h1.cwiseProduct((fp.h1pre.array() > 0.0).cast<double>().matrix());
  out.theta0 = fp.x.transpose() * (A.matrix * d_pre);
  out.theta0 += cfg.weight_decay * model.theta0;

  out.loss = masked_cross_entropy(fp.z, labels, mask) +
             0.5 * cfg.weight_decay * model.theta0.squaredNorm();
  return out;
}

std::pair<GcnModel, TrainReport> train(const Graph& graph,
                                       const SpMatR& features,
                                       const std::vector<int>& labels,
                                       const Splits& splits,
                                       const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw std::invalid_argument("gcn: epochs must be >= 1");
  if (cfg.learning_rate < 0.0)
    throw std::invalid_argument("gcn: learning rate must be >= 0");
  if (labels.size() != static_cast<std::size_t>(graph.node_count()))
    throw std::invalid_argument("gcn: label count mismatch");
  if (splits.train.empty() || splits.val.empty() || splits.test.empty())
    throw std::invalid_argument("gcn: all splits must be nonempty");
  {
    std::vector<char> seen(labels.size(), 0);
    for (const auto* part : {&splits.train, &splits.val, &splits.test})
      for (int node : *part) {
        if (node < 0 || node >= graph.node_count())
          throw std::invalid_argument("gcn: split node out of range");
        if (seen[static_cast<std::size_t>(node)]++)
          throw std::invalid_argument("gcn: splits are not disjoint");
      }
  }

  const auto t_start = std::chrono::steady_clock::now();
  PropagationMatrix A = renormalize(graph);
  const int classes =
      1 + *std::max_element(labels.begin(), labels.end());
  GcnModel model = init_model(static_cast<int>(features.cols()), classes, cfg);

  AdamState adam0(model.theta0), adam1(model.theta1);
  TrainReport report;
  report.train_loss.reserve(cfg.epochs);
  report.val_loss.reserve(cfg.epochs);
  report.val_accuracy.reserve(cfg.epochs);

  GcnModel best = model;
  double best_acc = -1.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Gradients g = gradients(model, A, features, labels, splits.train, cfg,
                            cfg.dropout > 0.0, Rng::mix(cfg.seed, 0xE000 + epoch));
    if (!std::isfinite(g.loss)) throw NumericError("gcn: non-finite loss");
    adam0.update(model.theta0, g.theta0, cfg.learning_rate, epoch + 1);
    adam1.update(model.theta1, g.theta1, cfg.learning_rate, epoch + 1);

    Eigen::MatrixXd z = forward(model, A, features, false, 0.0, 0);
    double val_loss = masked_cross_entropy(z, labels, splits.val);
    double correct = 0.0;
    for (int node : splits.val)
      if (argmax_row(z, node) == labels[static_cast<std::size_t>(node)])
        correct += 1.0;
    double val_acc = correct / static_cast<double>(splits.val.size());

    report.train_loss.push_back(g.loss);
    report.val_loss.push_back(val_loss);
    report.val_accuracy.push_back(val_acc);
    if (val_acc > best_acc) {
      best_acc = val_acc;
      best = model;
      report.best_epoch = epoch;
    }
  }

  report.test_accuracy = evaluate(best, A, features, labels, splits.test);
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return {std::move(best), std::move(report)};
}

double evaluate(const GcnModel& model, const PropagationMatrix& A,
                const SpMatR& features, const std::vector<int>& labels,
                const std::vector<int>& mask) {
  Eigen::MatrixXd z = forward(model, A, features, false, 0.0, 0);
  check_mask(mask, labels, z.rows(), z.cols());
  double correct = 0.0;
  for (int node : mask)
    if (argmax_row(z, node) == labels[static_cast<std::size_t>(node)])
      correct += 1.0;
  return correct / static_cast<double>(mask.size());
}

MultiviewProblem build_multiview_block_problem(const std::vector<Graph>& views,
                                               const SpMatR& features,
                                               const std::vector<int>& labels,
                                               const Splits& splits) {
  if (views.empty())
    throw std::invalid_argument("multiview: at least one view is required");
  const int n = views.front().node_count();
  for (const Graph& g : views)
    if (g.node_count() != n)
      throw std::invalid_argument("multiview: views disagree on node count");
  const int m = static_cast<int>(views.size());

  MultiviewProblem prob;
  prob.base_n = n;

  std::vector<Edge> edges;
  for (int b = 0; b < m; ++b)
    for (const Edge& e : views[static_cast<std::size_t>(b)].edges())
      edges.push_back({e.u + b * n, e.v + b * n, e.w});
  prob.graph = Graph::from_edges(m * n, std::move(edges));

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(features.nonZeros()) * m);
  for (int i = 0; i < features.outerSize(); ++i)
    for (SpMatR::InnerIterator it(features, i); it; ++it)
      for (int b = 0; b < m; ++b)
        trip.emplace_back(it.row() + b * n, it.col(), it.value());
  prob.features.resize(m * n, features.cols());
  prob.features.setFromTriplets(trip.begin(), trip.end());

  prob.labels.resize(static_cast<std::size_t>(m) * labels.size());
  for (int b = 0; b < m; ++b)
    for (int i = 0; i < n; ++i)
      prob.labels[static_cast<std::size_t>(b * n + i)] =
          labels[static_cast<std::size_t>(i)];

  for (int b = 0; b < m; ++b)
    for (int node : splits.train) prob.splits.train.push_back(node + b * n);
  prob.splits.val = splits.val;    // block 0
  prob.splits.test = splits.test;  // block 0
  return prob;
}

}  // namespace graphfuse
