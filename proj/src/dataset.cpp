#include "graphfuse/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "graphfuse/errors.hpp"
#include "graphfuse/rng.hpp"

namespace graphfuse {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void fail(const std::filesystem::path& file, int line,
                       const std::string& what) {
  throw DataError(file.string() + ":" + std::to_string(line) + ": " + what);
}

std::ifstream open_or_throw(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("missing file: " + file.string());
  return in;
}

void strip_cr(std::string& s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
}

// Parses whitespace-separated fields; reports the line on any mismatch.
template <typename T>
T parse_field(std::string_view& rest, const std::filesystem::path& file,
              int line) {
  while (!rest.empty() && (rest.front() == '\t' || rest.front() == ' '))
    rest.remove_prefix(1);
  if (rest.empty()) fail(file, line, "missing field");
  T value{};
  const char* begin = rest.data();
  const char* end = rest.data() + rest.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{}) fail(file, line, "malformed field");
  rest.remove_prefix(static_cast<std::size_t>(ptr - begin));
  return value;
}

void expect_end(std::string_view rest, const std::filesystem::path& file,
                int line) {
  while (!rest.empty() && (rest.front() == '\t' || rest.front() == ' '))
    rest.remove_prefix(1);
  if (!rest.empty()) fail(file, line, "trailing characters");
}

json load_json(const std::filesystem::path& file) {
  std::ifstream in = open_or_throw(file);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DataError("invalid JSON in " + file.string());
  return j;
}

std::vector<int> parse_split_part(const json& j, const char* key, int n,
                                  const std::filesystem::path& file) {
  if (!j.contains(key) || !j[key].is_array())
    throw DataError(file.string() + ": split is missing array \"" +
                    std::string(key) + "\"");
  std::vector<int> nodes;
  for (const auto& v : j[key]) {
    if (!v.is_number_integer())
      throw DataError(file.string() + ": split entries must be integers");
    int node = v.get<int>();
    if (node < 0 || node >= n)
      throw DataError(file.string() + ": split node out of range: " +
                      std::to_string(node));
    nodes.push_back(node);
  }
  return nodes;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  const auto meta_path = dir / "meta.json";
  json meta = load_json(meta_path);
  if (!meta.contains("format") || meta["format"] != 1)
    throw DataError(meta_path.string() + ": unsupported format version");
  for (const char* key : {"name", "n", "d", "c"})
    if (!meta.contains(key))
      throw DataError(meta_path.string() + ": missing key \"" +
                      std::string(key) + "\"");
  ds.name = meta["name"].get<std::string>();
  ds.n = meta["n"].get<int>();
  ds.d = meta["d"].get<int>();
  ds.c = meta["c"].get<int>();
  if (ds.n < 1 || ds.d < 1 || ds.c < 1)
    throw DataError(meta_path.string() + ": n, d and c must be positive");

  // edges.tsv
  {
    const auto path = dir / "edges.tsv";
    std::ifstream in = open_or_throw(path);
    std::string line;
    std::set<std::pair<int, int>> seen;
    std::vector<Edge> edges;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      strip_cr(line);
      if (line.empty()) continue;
      std::string_view rest(line);
      int u = parse_field<int>(rest, path, line_no);
      int v = parse_field<int>(rest, path, line_no);
      expect_end(rest, path, line_no);
      if (u < 0 || u >= ds.n || v < 0 || v >= ds.n)
        fail(path, line_no, "node index out of range");
      if (u == v) {
        ++ds.dropped_self_loops;
        continue;
      }
      if (u > v) std::swap(u, v);
      if (!seen.insert({u, v}).second) {
        ++ds.duplicate_edges;
        continue;
      }
      edges.push_back({u, v, 1.0});
    }
    ds.graphs.emplace_back("view1", Graph::from_edges(ds.n, std::move(edges)));
  }

  // features.tsv
  {
    const auto path = dir / "features.tsv";
    std::ifstream in = open_or_throw(path);
    std::string line;
    std::vector<Eigen::Triplet<double>> trip;
    std::set<std::pair<int, int>> seen;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      strip_cr(line);
      if (line.empty()) continue;
      std::string_view rest(line);
      int node = parse_field<int>(rest, path, line_no);
      int dim = parse_field<int>(rest, path, line_no);
      double value = parse_field<double>(rest, path, line_no);
      expect_end(rest, path, line_no);
      if (node < 0 || node >= ds.n) fail(path, line_no, "node index out of range");
      if (dim < 0 || dim >= ds.d) fail(path, line_no, "feature dim out of range");
      if (!std::isfinite(value) || value < 0.0)
        fail(path, line_no, "feature values must be finite and nonnegative");
      if (!seen.insert({node, dim}).second)
        fail(path, line_no, "duplicate feature triplet");
      if (value != 0.0) trip.emplace_back(node, dim, value);
    }
    ds.features.resize(ds.n, ds.d);
    ds.features.setFromTriplets(trip.begin(), trip.end());
  }

  // labels.tsv
  {
    const auto path = dir / "labels.tsv";
    std::ifstream in = open_or_throw(path);
    std::string line;
    ds.labels.assign(static_cast<std::size_t>(ds.n), -1);
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      strip_cr(line);
      if (line.empty()) continue;
      std::string_view rest(line);
      int node = parse_field<int>(rest, path, line_no);
      int cls = parse_field<int>(rest, path, line_no);
      expect_end(rest, path, line_no);
      if (node < 0 || node >= ds.n) fail(path, line_no, "node index out of range");
      if (cls < 0 || cls >= ds.c) fail(path, line_no, "class out of range");
      if (ds.labels[static_cast<std::size_t>(node)] != -1)
        fail(path, line_no, "duplicate label for node");
      ds.labels[static_cast<std::size_t>(node)] = cls;
    }
    for (int i = 0; i < ds.n; ++i)
      if (ds.labels[static_cast<std::size_t>(i)] == -1)
        throw DataError(path.string() + ": node " + std::to_string(i) +
                        " has no label");
  }

  // split.json (optional)
  if (std::filesystem::exists(dir / "split.json")) {
    const auto path = dir / "split.json";
    json split = load_json(path);
    ds.splits.train = parse_split_part(split, "train", ds.n, path);
    ds.splits.val = parse_split_part(split, "val", ds.n, path);
    ds.splits.test = parse_split_part(split, "test", ds.n, path);
    std::vector<char> seen(static_cast<std::size_t>(ds.n), 0);
    for (const auto* part : {&ds.splits.train, &ds.splits.val, &ds.splits.test})
      for (int node : *part)
        if (seen[static_cast<std::size_t>(node)]++)
          throw DataError(path.string() + ": splits are not disjoint");
  }
  return ds;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    ordered_json meta;
    meta["format"] = 1;
    meta["name"] = ds.name;
    meta["n"] = ds.n;
    meta["d"] = ds.d;
    meta["c"] = ds.c;
    std::ofstream out(dir / "meta.json");
    out << meta.dump(2) << "\n";
  }
  {
    std::ofstream out(dir / "edges.tsv");
    for (const Edge& e : get_view(ds, "view1").edges())
      out << e.u << "\t" << e.v << "\n";
  }
  {
    std::ofstream out(dir / "features.tsv");
    for (int i = 0; i < ds.features.outerSize(); ++i)
      for (SpMatR::InnerIterator it(ds.features, i); it; ++it)
        out << it.row() << "\t" << it.col() << "\t" << format_double(it.value())
            << "\n";
  }
  {
    std::ofstream out(dir / "labels.tsv");
    for (int i = 0; i < ds.n; ++i)
      out << i << "\t" << ds.labels[static_cast<std::size_t>(i)] << "\n";
  }
  if (!ds.splits.train.empty() || !ds.splits.val.empty() ||
      !ds.splits.test.empty()) {
    ordered_json split;
    split["train"] = ds.splits.train;
    split["val"] = ds.splits.val;
    split["test"] = ds.splits.test;
    std::ofstream out(dir / "split.json");
    out << split.dump(2) << "\n";
  }
}

bool has_view(const Dataset& ds, const std::string& name) {
  for (const auto& [view_name, _] : ds.graphs)
    if (view_name == name) return true;
  return false;
}

const Graph& get_view(const Dataset& ds, const std::string& name) {
  for (const auto& [view_name, g] : ds.graphs)
    if (view_name == name) return g;
  throw DataError("dataset " + ds.name + " has no view \"" + name + "\"");
}

Splits standard_split(const Dataset& ds, std::uint64_t seed) {
  if (!ds.splits.train.empty()) return ds.splits;

  Rng rng(Rng::mix(seed, 0x5B17));
  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(ds.c));
  for (int i = 0; i < ds.n; ++i)
    by_class[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(i)])]
        .push_back(i);

  Splits s;
  std::vector<char> used(static_cast<std::size_t>(ds.n), 0);
  for (auto& nodes : by_class) {
    rng.shuffle(nodes);
    // 20 per class, but never more than half a small class so validation
    // and test stay populated.
    const auto take = std::min<std::size_t>(20, (nodes.size() + 1) / 2);
    for (std::size_t i = 0; i < take; ++i) {
      s.train.push_back(nodes[i]);
      used[static_cast<std::size_t>(nodes[i])] = 1;
    }
  }
  std::sort(s.train.begin(), s.train.end());

  std::vector<int> pool;
  for (int i = 0; i < ds.n; ++i)
    if (!used[static_cast<std::size_t>(i)]) pool.push_back(i);
  rng.shuffle(pool);
  std::size_t val_n = std::min<std::size_t>(500, pool.size());
  std::size_t test_n = std::min<std::size_t>(1000, pool.size() - val_n);
  if (pool.size() < 1500) {  // small datasets: keep both parts populated
    val_n = pool.size() / 3;
    test_n = pool.size() - val_n;
  }
  s.val.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(val_n));
  s.test.assign(pool.begin() + static_cast<std::ptrdiff_t>(val_n),
                pool.begin() + static_cast<std::ptrdiff_t>(val_n + test_n));
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

void materialize_view2(Dataset& ds, double threshold) {
  if (has_view(ds, "view2")) return;
  ds.graphs.emplace_back("view2",
                         cosine_similarity_graph(ds.features, threshold));
}

SpMatR row_normalize(const SpMatR& features) {
  SpMatR out = features;
  for (int i = 0; i < out.outerSize(); ++i) {
    double sum = 0.0;
    for (SpMatR::InnerIterator it(out, i); it; ++it) sum += it.value();
    if (sum == 0.0) continue;
    for (SpMatR::InnerIterator it(out, i); it; ++it)
      it.valueRef() = it.value() / sum;
  }
  return out;
}

}  // namespace graphfuse
