#include "graphfuse/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <future>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "graphfuse/dataset.hpp"
#include "graphfuse/errors.hpp"

namespace graphfuse {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

struct FusedOutput {
  Graph graph;
  std::optional<Eigen::VectorXd> beta;
  std::optional<double> alpha;
  std::vector<FusionIterationLoss> trace;
};

// Computes each distinct fusion input once, even when cells race for it.
class FusionMemo {
public:
  std::shared_ptr<const FusedOutput> get_or_compute(
      const std::string& key, const std::function<FusedOutput()>& fn) {
    std::shared_future<std::shared_ptr<const FusedOutput>> fut;
    std::promise<std::shared_ptr<const FusedOutput>> prom;
    bool creator = false;
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = cache_.find(key);
      if (it == cache_.end()) {
        fut = prom.get_future().share();
        cache_.emplace(key, fut);
        creator = true;
      } else {
        fut = it->second;
      }
    }
    if (creator) {
      try {
        prom.set_value(std::make_shared<const FusedOutput>(fn()));
      } catch (...) {
        prom.set_exception(std::current_exception());
      }
    }
    return fut.get();
  }

private:
  std::mutex mu_;
  std::map<std::string, std::shared_future<std::shared_ptr<const FusedOutput>>>
      cache_;
};

int worker_count(std::size_t cells) {
  int threads = 0;
  if (const char* env = std::getenv("GRAPHFUSE_THREADS")) {
    threads = std::atoi(env);
    if (threads < 1)
      throw ConfigError("GRAPHFUSE_THREADS must be a positive integer");
  } else {
    threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
  }
  return std::min<int>(threads, static_cast<int>(std::max<std::size_t>(cells, 1)));
}

bool needs_fusion(Method m) {
  return m == Method::sf || m == Method::pf || m == Method::spf;
}

bool needs_multiple_views(Method m) {
  return m == Method::gcn_multiview || m == Method::pf || m == Method::spf;
}

std::string loss_mode_name(LossMode mode) {
  return mode == LossMode::commonality_only ? "commonality_only" : "full";
}

std::string fraction_key(const std::optional<double>& fraction,
                         std::uint64_t seed) {
  if (!fraction) return "std";
  std::ostringstream os;
  os << "f=" << *fraction << ";s=" << seed;
  return os.str();
}

}  // namespace

Method method_from_string(const std::string& name) {
  if (name == "gcn_view1") return Method::gcn_view1;
  if (name == "gcn_view2") return Method::gcn_view2;
  if (name == "gcn_multiview") return Method::gcn_multiview;
  if (name == "sf") return Method::sf;
  if (name == "pf") return Method::pf;
  if (name == "spf") return Method::spf;
  throw ConfigError("unknown method \"" + name + "\"");
}

std::string method_to_string(Method m) {
  switch (m) {
    case Method::gcn_view1: return "gcn_view1";
    case Method::gcn_view2: return "gcn_view2";
    case Method::gcn_multiview: return "gcn_multiview";
    case Method::sf: return "sf";
    case Method::pf: return "pf";
    case Method::spf: return "spf";
  }
  return "?";
}

RunSpec parse_run_spec(const json& config) {
  if (!config.is_object()) throw ConfigError("config must be a JSON object");
  RunSpec spec;
  try {
    if (!config.contains("dataset"))
      throw ConfigError("config is missing \"dataset\"");
    spec.dataset_dir = config.at("dataset").get<std::string>();
    if (!config.contains("method"))
      throw ConfigError("config is missing \"method\"");
    spec.method = method_from_string(config.at("method").get<std::string>());

    if (config.contains("seeds")) {
      spec.seeds = config.at("seeds").get<std::vector<std::uint64_t>>();
      if (spec.seeds.empty()) throw ConfigError("\"seeds\" must be nonempty");
    }
    if (config.contains("fractions")) {
      spec.robustness_fractions =
          config.at("fractions").get<std::vector<double>>();
      double prev = -1.0;
      for (double f : spec.robustness_fractions) {
        if (f < 0.0 || f > 1.0 || f < prev)
          throw ConfigError("\"fractions\" must be ascending within [0,1]");
        prev = f;
      }
    }
    if (config.contains("views")) {
      spec.views = config.at("views").get<std::vector<std::string>>();
      if (spec.views.empty()) throw ConfigError("\"views\" must be nonempty");
    }
    if (config.contains("out")) spec.out_path = config.at("out").get<std::string>();
    if (config.contains("view2_threshold"))
      spec.view2_threshold = config.at("view2_threshold").get<double>();

    if (config.contains("fusion")) {
      const json& f = config.at("fusion");
      if (f.contains("alpha")) spec.fusion.alpha = f.at("alpha").get<double>();
      if (f.contains("alpha_mode")) {
        std::string mode = f.at("alpha_mode").get<std::string>();
        if (mode == "fixed")
          spec.fusion.alpha_mode = AlphaMode::fixed;
        else if (mode == "optimized")
          spec.fusion.alpha_mode = AlphaMode::optimized;
        else
          throw ConfigError("alpha_mode must be \"fixed\" or \"optimized\"");
      }
      if (f.contains("iterations"))
        spec.fusion.iterations = f.at("iterations").get<int>();
      if (f.contains("k")) spec.fusion.k = f.at("k").get<int>();
      if (f.contains("loss_mode")) {
        std::string mode = f.at("loss_mode").get<std::string>();
        if (mode == "full")
          spec.fusion.loss_mode = LossMode::full;
        else if (mode == "commonality_only")
          spec.fusion.loss_mode = LossMode::commonality_only;
        else
          throw ConfigError("loss_mode must be \"full\" or \"commonality_only\"");
      }
      if (f.contains("ridge_eps"))
        spec.fusion.ridge_eps = f.at("ridge_eps").get<double>();
      if (f.contains("pf_scale_mode")) {
        std::string mode = f.at("pf_scale_mode").get<std::string>();
        if (mode == "max_normalize")
          spec.fusion.pf_scale_mode = PfScaleMode::max_normalize;
        else if (mode == "raw")
          spec.fusion.pf_scale_mode = PfScaleMode::raw;
        else
          throw ConfigError("pf_scale_mode must be \"max_normalize\" or \"raw\"");
      }
      if (f.contains("dense_cutoff"))
        spec.fusion.eig.dense_cutoff = f.at("dense_cutoff").get<int>();
    }
    if (config.contains("train")) {
      const json& t = config.at("train");
      if (t.contains("epochs")) spec.train.epochs = t.at("epochs").get<int>();
      if (t.contains("learning_rate"))
        spec.train.learning_rate = t.at("learning_rate").get<double>();
      if (t.contains("weight_decay"))
        spec.train.weight_decay = t.at("weight_decay").get<double>();
      if (t.contains("dropout")) spec.train.dropout = t.at("dropout").get<double>();
      if (t.contains("hidden")) spec.train.hidden = t.at("hidden").get<int>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return spec;
}

ordered_json record_to_json(const ResultRecord& r) {
  ordered_json j;
  j["method"] = r.method;
  j["dataset"] = r.dataset;
  j["seed"] = r.seed;
  if (r.fraction)
    j["fraction"] = *r.fraction;
  else
    j["fraction"] = nullptr;
  j["loss_mode"] = r.loss_mode;
  j["test_accuracy"] = r.test_accuracy;
  j["best_epoch"] = r.best_epoch;
  if (r.beta) {
    j["beta"] = *r.beta;
  } else {
    j["beta"] = nullptr;
  }
  if (r.alpha)
    j["alpha"] = *r.alpha;
  else
    j["alpha"] = nullptr;
  if (r.fusion_trace.empty()) {
    j["fusion_trace"] = nullptr;
  } else {
    ordered_json trace = ordered_json::array();
    for (const FusionIterationLoss& rec : r.fusion_trace) {
      ordered_json t;
      t["specificity"] = rec.specificity;
      t["commonality"] = rec.commonality;
      t["squared_objective"] = rec.squared_objective;
      trace.push_back(t);
    }
    j["fusion_trace"] = trace;
  }
  ordered_json views = ordered_json::array();
  for (const auto& [name, edges] : r.view_edges) {
    ordered_json v;
    v["name"] = name;
    v["edges"] = edges;
    views.push_back(v);
  }
  j["views"] = views;
  j["wall_seconds"] = r.wall_seconds;
  return j;
}

std::vector<ResultRecord> run(const RunSpec& spec) {
  if (spec.seeds.empty()) throw ConfigError("run: empty seed list");
  if (needs_multiple_views(spec.method) && spec.views.size() < 2)
    throw ConfigError("method " + method_to_string(spec.method) +
                      " requires at least two views");
  if (spec.fusion.k < 0) throw ConfigError("run: fusion.k must be >= 0");

  Dataset ds = load_dataset(spec.dataset_dir);

  // Which views this run touches; view2 is derived from the features.
  std::vector<std::string> used_views;
  if (spec.method == Method::gcn_view1)
    used_views = {"view1"};
  else if (spec.method == Method::gcn_view2)
    used_views = {"view2"};
  else
    used_views = spec.views;
  for (const std::string& name : used_views) {
    if (name == "view2" && !has_view(ds, "view2"))
      materialize_view2(ds, spec.view2_threshold);
    if (!has_view(ds, name))
      throw ConfigError("dataset has no view \"" + name + "\"");
  }

  FusionConfig fusion_cfg = spec.fusion;
  if (fusion_cfg.k == 0) fusion_cfg.k = ds.c;

  const SpMatR features = row_normalize(ds.features);

  struct Cell {
    std::uint64_t seed;
    std::optional<double> fraction;
  };
  std::vector<Cell> cells;
  for (std::uint64_t seed : spec.seeds) {
    if (spec.robustness_fractions.empty()) {
      cells.push_back({seed, std::nullopt});
    } else {
      for (double f : spec.robustness_fractions) cells.push_back({seed, f});
    }
  }

  std::vector<ResultRecord> records(cells.size());
  FusionMemo memo;
  std::atomic<std::size_t> next{0};
  std::mutex error_mu;
  std::exception_ptr first_error;

  auto run_cell = [&](const Cell& cell, ResultRecord& out) {
    const auto t0 = std::chrono::steady_clock::now();
    Splits splits = standard_split(ds, cell.seed);

    Graph view1 = get_view(ds, "view1");
    if (cell.fraction && *cell.fraction > 0.0)
      view1 = remove_test_structure(view1, splits.test, *cell.fraction,
                                    cell.seed);

    std::vector<Graph> graphs;
    for (const std::string& name : used_views)
      graphs.push_back(name == "view1" ? view1 : get_view(ds, name));

    TrainConfig tc = spec.train;
    tc.seed = cell.seed;

    out.method = method_to_string(spec.method);
    out.dataset = ds.name;
    out.seed = cell.seed;
    out.fraction = cell.fraction;
    out.loss_mode = loss_mode_name(fusion_cfg.loss_mode);
    for (std::size_t i = 0; i < graphs.size(); ++i)
      out.view_edges.emplace_back(used_views[i], graphs[i].edge_count());

    TrainReport report;
    if (spec.method == Method::gcn_multiview) {
      MultiviewProblem prob =
          build_multiview_block_problem(graphs, features, ds.labels, splits);
      std::tie(std::ignore, report) =
          train(prob.graph, prob.features, prob.labels, prob.splits, tc);
    } else if (needs_fusion(spec.method)) {
      std::string key = method_to_string(spec.method) + ":" +
                        fraction_key(cell.fraction, cell.seed);
      auto fused = memo.get_or_compute(key, [&]() -> FusedOutput {
        FusedOutput fo;
        if (spec.method == Method::pf) {
          fo.graph = propagation_fusion(graphs, fusion_cfg);
        } else {
          FusionResult res = spec.method == Method::sf
                                 ? structure_fusion(graphs, fusion_cfg)
                                 : structure_propagation_fusion(graphs,
                                                                fusion_cfg);
          fo.graph = std::move(res.fused);
          fo.beta = std::move(res.weights.beta);
          fo.alpha = res.alpha;
          fo.trace = std::move(res.loss_trace);
        }
        return fo;
      });
      std::tie(std::ignore, report) =
          train(fused->graph, features, ds.labels, splits, tc);
      if (fused->beta) {
        out.beta = std::vector<double>(
            fused->beta->data(), fused->beta->data() + fused->beta->size());
        out.alpha = fused->alpha;
      }
      out.fusion_trace = fused->trace;
    } else {
      const Graph& g =
          spec.method == Method::gcn_view1 ? view1 : get_view(ds, "view2");
      std::tie(std::ignore, report) =
          train(g, features, ds.labels, splits, tc);
    }

    out.test_accuracy = report.test_accuracy;
    out.best_epoch = report.best_epoch;
    out.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
  };

  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      {
        std::lock_guard<std::mutex> lock(error_mu);
        if (first_error) return;
      }
      try {
        run_cell(cells[i], records[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  const int threads = worker_count(cells.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  if (!spec.out_path.empty()) {
    std::ofstream out(spec.out_path);
    if (!out) throw DataError("cannot write " + spec.out_path);
    for (const ResultRecord& r : records) out << record_to_json(r).dump() << "\n";
  }
  return records;
}

std::vector<ReportRow> report(std::istream& records) {
  struct Key {
    std::string method, dataset;
    std::optional<double> fraction;
    bool operator<(const Key& o) const {
      if (dataset != o.dataset) return dataset < o.dataset;
      if (method != o.method) return method < o.method;
      double a = fraction.value_or(-1.0), b = o.fraction.value_or(-1.0);
      return a < b;
    }
  };
  std::map<Key, std::vector<double>> groups;
  std::string line;
  int line_no = 0;
  while (std::getline(records, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw DataError("records line " + std::to_string(line_no) +
                      ": invalid JSON");
    for (const char* key : {"method", "dataset", "test_accuracy"})
      if (!j.contains(key))
        throw DataError("records line " + std::to_string(line_no) +
                        ": missing \"" + std::string(key) + "\"");
    Key k;
    k.method = j["method"].get<std::string>();
    k.dataset = j["dataset"].get<std::string>();
    if (j.contains("fraction") && !j["fraction"].is_null())
      k.fraction = j["fraction"].get<double>();
    groups[k].push_back(j["test_accuracy"].get<double>());
  }
  if (groups.empty()) throw DataError("no records");

  std::vector<ReportRow> rows;
  for (const auto& [key, values] : groups) {
    ReportRow row;
    row.method = key.method;
    row.dataset = key.dataset;
    row.fraction = key.fraction;
    row.count = static_cast<int>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    row.mean = mean;
    row.stddev = std::sqrt(var);
    rows.push_back(row);
  }
  return rows;
}

std::vector<ReportRow> report_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing file: " + path.string());
  return report(in);
}

std::string render_report(const std::vector<ReportRow>& rows) {
  std::ostringstream os;
  os << "dataset        method          fraction   n     mean     std\n";
  for (const ReportRow& r : rows) {
    char buf[160];
    std::string frac = r.fraction ? [&] {
      char f[32];
      std::snprintf(f, sizeof(f), "%.2f", *r.fraction);
      return std::string(f);
    }() : std::string("-");
    std::snprintf(buf, sizeof(buf), "%-14s %-15s %-10s %-5d %.4f   %.4f\n",
                  r.dataset.c_str(), r.method.c_str(), frac.c_str(), r.count,
                  r.mean, r.stddev);
    os << buf;
  }
  return os.str();
}

void write_report_csv(const std::vector<ReportRow>& rows,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "dataset,method,fraction,n,mean,std\n";
  for (const ReportRow& r : rows) {
    out << r.dataset << "," << r.method << ",";
    if (r.fraction)
      out << *r.fraction;
    out << "," << r.count << "," << r.mean << "," << r.stddev << "\n";
  }
}

}  // namespace graphfuse
