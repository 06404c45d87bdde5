#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "graphfuse/gcn.hpp"
#include "graphfuse/graph.hpp"

namespace graphfuse {

// Canonical dataset directory (format 1):
//   meta.json     {"format":1,"name":...,"n":...,"d":...,"c":...}
//   edges.tsv     "u\tv" per undirected edge, 0-indexed, u < v
//   features.tsv  sparse triplets "node\tdim\tvalue"
//   labels.tsv    "node\tclass"
//   split.json    {"train":[...],"val":[...],"test":[...]} (optional)
struct Dataset {
  std::string name;
  int n = 0;
  int d = 0;
  int c = 0;
  SpMatR features;
  std::vector<int> labels;
  std::vector<std::pair<std::string, Graph>> graphs;  // view1 = citation edges
  Splits splits;  // empty vectors when split.json is absent
  int dropped_self_loops = 0;
  int duplicate_edges = 0;
};

Dataset load_dataset(const std::filesystem::path& dir);

// Canonical serialization; load -> write -> load is the identity.
void write_dataset(const Dataset& ds, const std::filesystem::path& dir);

const Graph& get_view(const Dataset& ds, const std::string& name);
bool has_view(const Dataset& ds, const std::string& name);

// Splits from split.json when present, otherwise 20 train nodes per class,
// 500 validation and 1000 test nodes drawn deterministically by seed
// (capped for small datasets).
Splits standard_split(const Dataset& ds, std::uint64_t seed = 0);

// Adds the "view2" cosine-similarity graph built from the features.
// Idempotent: an existing view2 is left untouched.
void materialize_view2(Dataset& ds, double threshold = 0.8);

// Rows scaled to sum to 1; zero rows pass through.
SpMatR row_normalize(const SpMatR& features);

}  // namespace graphfuse
