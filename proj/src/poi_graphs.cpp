#include "bayman/poi_graphs.hpp"

#include <charconv>
#include <ostream>
#include <stdexcept>
#include <string>

#include "bayman/log.hpp"

namespace bayman {
namespace {

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void accumulate_transitions(std::span<const Visit> seq, const WeightedDigraph& g,
                            Matrix& transition_count, Vector& visit_count) {
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const int a = g.local_index(seq[i].poi);
    visit_count[a] += 1.0;
    if (i + 1 < seq.size()) {
      const int b = g.local_index(seq[i + 1].poi);
      transition_count(a, b) += 1.0;
    }
  }
}

void finish_frequency_graph(WeightedDigraph& g, const Matrix& transition_count,
                            const Vector& visit_count) {
  const int n = g.size();
  g.adj = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    if (visit_count[i] == 0.0) continue;
    g.adj.row(i) = transition_count.row(i) / visit_count[i];
  }
}

}  // namespace

WeightedDigraph make_graph(std::vector<int> nodes) {
  WeightedDigraph g;
  g.nodes = std::move(nodes);
  g.local.reserve(g.nodes.size());
  for (int i = 0; i < g.size(); ++i) g.local.emplace(g.nodes[i], i);
  g.adj = Matrix::Zero(g.size(), g.size());
  return g;
}

WeightedDigraph build_personal_graph(std::span<const Visit> seq) {
  if (seq.size() < 2) {
    throw std::invalid_argument("build_personal_graph: sequence needs at least 2 check-ins");
  }
  std::vector<int> nodes;
  std::unordered_map<int, int> seen;
  for (const Visit& v : seq) {
    if (seen.emplace(v.poi, static_cast<int>(nodes.size())).second) nodes.push_back(v.poi);
  }
  WeightedDigraph g = make_graph(std::move(nodes));

  Matrix transition_count = Matrix::Zero(g.size(), g.size());
  Vector visit_count = Vector::Zero(g.size());
  accumulate_transitions(seq, g, transition_count, visit_count);
  finish_frequency_graph(g, transition_count, visit_count);
  return g;
}

WeightedDigraph build_semantic_graph(const std::vector<std::span<const Visit>>& seqs,
                                     int num_pois) {
  bool any = false;
  for (const auto& s : seqs) any = any || s.size() >= 2;
  if (!any) {
    throw std::invalid_argument("build_semantic_graph: no sequence has 2 or more check-ins");
  }
  std::vector<int> nodes(num_pois);
  for (int i = 0; i < num_pois; ++i) nodes[i] = i;
  WeightedDigraph g = make_graph(std::move(nodes));

  Matrix transition_count = Matrix::Zero(num_pois, num_pois);
  Vector visit_count = Vector::Zero(num_pois);
  for (const auto& seq : seqs) accumulate_transitions(seq, g, transition_count, visit_count);
  finish_frequency_graph(g, transition_count, visit_count);
  return g;
}

WeightedDigraph build_distance_graph(const PoiCatalog& catalog, double delta_d_km) {
  if (delta_d_km <= 0.0) {
    throw std::invalid_argument("build_distance_graph: delta_d must be positive");
  }
  const int n = catalog.size();
  std::vector<int> nodes(n);
  for (int i = 0; i < n; ++i) nodes[i] = i;
  WeightedDigraph g = make_graph(std::move(nodes));
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double dis = haversine_km(catalog.coords[i], catalog.coords[j]);
      if (dis == 0.0) {
        log_warn("distance graph: poi " + catalog.ids[i] + " and " + catalog.ids[j] +
                 " are co-located; leaving them unconnected");
        continue;
      }
      if (dis <= delta_d_km) {
        g.adj(i, j) = 1.0 / dis;
        g.adj(j, i) = 1.0 / dis;
      }
    }
  }
  return g;
}

Matrix normalize_adjacency(const Matrix& adj, NormalizeDirection dir) {
  if (adj.rows() != adj.cols()) {
    throw std::invalid_argument("normalize_adjacency: adjacency must be square");
  }
  const auto n = adj.rows();
  Matrix tilde = (dir == NormalizeDirection::Ingoing) ? adj.transpose() : adj;
  tilde += Matrix::Identity(n, n);
  const Vector inv_sqrt_deg = tilde.rowwise().sum().array().rsqrt();
  return inv_sqrt_deg.asDiagonal() * tilde * inv_sqrt_deg.asDiagonal();
}

Matrix normalize_adjacency(const WeightedDigraph& g, NormalizeDirection dir) {
  return normalize_adjacency(g.adj, dir);
}

void write_edge_list(const WeightedDigraph& g, std::ostream& out) {
  for (int i = 0; i < g.size(); ++i) {
    for (int j = 0; j < g.size(); ++j) {
      if (g.adj(i, j) != 0.0) {
        out << g.nodes[i] << ',' << g.nodes[j] << ',' << fmt(g.adj(i, j)) << '\n';
      }
    }
  }
}

}  // namespace bayman
