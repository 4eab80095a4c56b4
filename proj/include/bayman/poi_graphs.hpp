#pragma once

#include <iosfwd>
#include <span>
#include <unordered_map>
#include <vector>

#include "bayman/checkin_data.hpp"
#include "bayman/linalg.hpp"

namespace bayman {

/// Dense weighted directed graph over a (possibly local) POI node set.
/// adj(i, j) is the weight of the edge i -> j.
struct WeightedDigraph {
  std::vector<int> nodes;              // local index -> global poi index
  std::unordered_map<int, int> local;  // global poi index -> local index
  Matrix adj;

  int size() const { return static_cast<int>(nodes.size()); }
  int local_index(int poi) const {
    const auto it = local.find(poi);
    return it == local.end() ? -1 : it->second;
  }
};

enum class NormalizeDirection { Outgoing, Ingoing, Symmetric };

WeightedDigraph make_graph(std::vector<int> nodes);

/// Transition-frequency graph of a single sequence: nodes are the distinct
/// POIs in order of first appearance, weight(i, j) = (#consecutive i->j
/// transitions) / (#check-ins at i). Requires at least 2 check-ins.
WeightedDigraph build_personal_graph(std::span<const Visit> seq);

/// Same as the personal graph with counts pooled over all sequences;
/// built over the full global node set [0, num_pois). Transitions never
/// cross a sequence boundary.
WeightedDigraph build_semantic_graph(const std::vector<std::span<const Visit>>& seqs,
                                     int num_pois);

/// Symmetric inverse-distance graph: weight = 1/dis for 0 < dis <= delta_d
/// km, otherwise 0. Co-located distinct POIs (dis = 0) get weight 0 with a
/// logged warning; the diagonal is zero.
WeightedDigraph build_distance_graph(const PoiCatalog& catalog, double delta_d_km);

/// D^(-1/2) (A + I) D^(-1/2) with D the row-sum degree matrix of A + I.
/// Ingoing normalizes the transpose. Self-connections keep the result
/// finite even for isolated nodes.
Matrix normalize_adjacency(const Matrix& adj, NormalizeDirection dir);
Matrix normalize_adjacency(const WeightedDigraph& g, NormalizeDirection dir);

/// Edge-list text dump, one `src,dst,weight` line per nonzero edge using
/// global POI indices; rows scanned in local order. For inspection only.
void write_edge_list(const WeightedDigraph& g, std::ostream& out);

}  // namespace bayman
