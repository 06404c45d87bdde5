#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <utility>
#include <vector>

#include "graphfuse/graph.hpp"

namespace graphfuse {

struct GcnModel {
  Eigen::MatrixXd theta0;  // d x h
  Eigen::MatrixXd theta1;  // h x c
  int hidden = 0;
  std::uint64_t seed = 0;
};

struct TrainConfig {
  int epochs = 200;
  double learning_rate = 0.01;
  double weight_decay = 5e-4;  // first layer only
  double dropout = 0.5;
  int hidden = 16;
  std::uint64_t seed = 1;
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> val_accuracy;
  double test_accuracy = 0.0;
  int best_epoch = 0;
  double seconds = 0.0;
};

struct Splits {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;
};

struct Gradients {
  Eigen::MatrixXd theta0;
  Eigen::MatrixXd theta1;
  double loss = 0.0;  // cross entropy + (weight_decay/2) ||theta0||_F^2
};

GcnModel init_model(int feature_dim, int classes, const TrainConfig& cfg);

// Z = softmax(A ReLU(A S Theta0) Theta1), rows are probability vectors.
// Dropout applies to the input features and the hidden activations, seeded.
Eigen::MatrixXd forward(const GcnModel& model, const PropagationMatrix& A,
                        const SpMatR& features, bool dropout_active,
                        double dropout_rate, std::uint64_t seed);

// Mean of -log Z[node, label] over the masked nodes (probability floor 1e-12).
double masked_cross_entropy(const Eigen::MatrixXd& Z,
                            const std::vector<int>& labels,
                            const std::vector<int>& mask);

// Exact gradients of masked_cross_entropy + (weight_decay/2) ||Theta0||_F^2.
Gradients gradients(const GcnModel& model, const PropagationMatrix& A,
                    const SpMatR& features, const std::vector<int>& labels,
                    const std::vector<int>& mask, const TrainConfig& cfg,
                    bool dropout_active = false, std::uint64_t dropout_seed = 0);

// Full-batch Adam for cfg.epochs epochs; returns the snapshot with the best
// validation accuracy (earliest epoch on ties) and its per-epoch report.
std::pair<GcnModel, TrainReport> train(const Graph& graph,
                                       const SpMatR& features,
                                       const std::vector<int>& labels,
                                       const Splits& splits,
                                       const TrainConfig& cfg);

// Fraction of masked nodes whose argmax prediction (lowest class index on
// ties) matches the label. Dropout disabled.
double evaluate(const GcnModel& model, const PropagationMatrix& A,
                const SpMatR& features, const std::vector<int>& labels,
                const std::vector<int>& mask);

// Block-diagonal multi-view construction: one block per view, features and
// training labels replicated per block, validation/test read from block 0.
struct MultiviewProblem {
  Graph graph;
  SpMatR features;
  std::vector<int> labels;
  Splits splits;
  int base_n = 0;
};

MultiviewProblem build_multiview_block_problem(const std::vector<Graph>& views,
                                               const SpMatR& features,
                                               const std::vector<int>& labels,
                                               const Splits& splits);

}  // namespace graphfuse
