#pragma once

#include <filesystem>
#include <string>

#include "intrakd/distill.hpp"

namespace intrakd {

// JSON document layout:
//   {
//     "format": "intrakd-affinity-graph", "version": 1,
//     "n": <classes>, "channels": <c>,
//     "present": [bool x n],
//     "edges": [n*n*3 numbers, index (k1*n + k2)*3 + r],
//     "nodes": {"mu1": [[c numbers] x n], "mu2": ..., "mu3": ...}
//   }
// Numbers are written in shortest round-trip form, so import(export(g)) == g.
std::string export_graph_json(const AffinityGraph& graph, int indent = -1);
AffinityGraph import_graph_json(const std::string& document);

void save_graph_json(const std::filesystem::path& path, const AffinityGraph& graph);
AffinityGraph load_graph_json(const std::filesystem::path& path);

/// One n x n PGM per moment order (`<prefix>_mu<r>.pgm`), edge values
/// mapped linearly from [-1, 1] to [0, 255].
void export_graph_heatmaps(const AffinityGraph& graph, const std::filesystem::path& dir, const std::string& prefix);

}  // namespace intrakd
