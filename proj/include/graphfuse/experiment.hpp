#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "graphfuse/fusion.hpp"
#include "graphfuse/gcn.hpp"

namespace graphfuse {

enum class Method { gcn_view1, gcn_view2, gcn_multiview, sf, pf, spf };

Method method_from_string(const std::string& name);
std::string method_to_string(Method m);

struct RunSpec {
  std::string dataset_dir;
  Method method = Method::gcn_view1;
  FusionConfig fusion;  // fusion.k == 0 means "use the dataset class count"
  TrainConfig train;
  std::vector<std::uint64_t> seeds{1};
  std::vector<double> robustness_fractions;  // empty = standard run
  std::vector<std::string> views{"view1", "view2"};
  double view2_threshold = 0.8;
  std::string out_path;
};

struct ResultRecord {
  std::string method;
  std::string dataset;
  std::uint64_t seed = 0;
  std::optional<double> fraction;
  std::string loss_mode;
  double test_accuracy = 0.0;
  int best_epoch = 0;
  std::optional<std::vector<double>> beta;
  std::optional<double> alpha;
  std::vector<FusionIterationLoss> fusion_trace;
  std::vector<std::pair<std::string, std::size_t>> view_edges;
  double wall_seconds = 0.0;
};

// RunSpec <-> JSON config document. CLI flag overrides happen on the parsed
// struct, not the JSON.
RunSpec parse_run_spec(const nlohmann::json& config);

nlohmann::ordered_json record_to_json(const ResultRecord& r);

// One record per (seed x fraction) cell, written as JSON lines to
// spec.out_path when set. Cells run in parallel up to GRAPHFUSE_THREADS;
// output order and contents are deterministic apart from wall_seconds.
std::vector<ResultRecord> run(const RunSpec& spec);

struct ReportRow {
  std::string method;
  std::string dataset;
  std::optional<double> fraction;
  int count = 0;
  double mean = 0.0;
  double stddev = 0.0;  // population
};

std::vector<ReportRow> report(std::istream& records);
std::vector<ReportRow> report_file(const std::filesystem::path& path);
std::string render_report(const std::vector<ReportRow>& rows);
void write_report_csv(const std::vector<ReportRow>& rows,
                      const std::filesystem::path& path);

}  // namespace graphfuse
