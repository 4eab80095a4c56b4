#include "bayman/bayes_augmentation.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "bayman/log.hpp"
#include "bayman/rng.hpp"

namespace bayman {

double user_similarity(std::span<const Visit> a, std::span<const Visit> b) {
  if (a.empty() || b.empty()) {
    throw std::invalid_argument("user_similarity: sequences must be nonempty");
  }
  std::set<int> sa, sb;
  for (const Visit& v : a) sa.insert(v.poi);
  for (const Visit& v : b) sb.insert(v.poi);
  std::size_t inter = 0;
  for (int poi : sa) inter += sb.count(poi);
  const std::size_t uni = sa.size() + sb.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::optional<LikeMindedMatch> find_like_minded(
    int target, const std::vector<std::span<const Visit>>& train_seqs) {
  if (train_seqs.size() < 2) {
    throw std::invalid_argument("find_like_minded: need at least 2 users");
  }
  LikeMindedMatch best{target, -1, 0.0};
  for (int q = 0; q < static_cast<int>(train_seqs.size()); ++q) {
    if (q == target || train_seqs[q].empty()) continue;
    const double sim = user_similarity(train_seqs[target], train_seqs[q]);
    if (sim > best.similarity) {
      best.matched = q;
      best.similarity = sim;
    }
  }
  if (best.matched < 0 || best.similarity == 0.0) return std::nullopt;
  return best;
}

double poi_similarity(const PoiCatalog& catalog, Visit a, Visit b) {
  if (a.poi == b.poi && a.timestamp == b.timestamp) return 1.0;
  const double dis = haversine_km(catalog.coords.at(a.poi), catalog.coords.at(b.poi));
  const double lag_hours = std::abs(static_cast<double>(a.timestamp - b.timestamp)) / 3600.0;
  if (dis + lag_hours == 0.0) {
    log_warn("poi_similarity: distinct co-located POIs at the same instant");
    return 1.0;
  }
  return std::tanh(1.0 / (dis + lag_hours));
}

CopyDistribution copy_posterior(const PoiCatalog& catalog,
                                std::span<const Visit> s_p,
                                std::span<const Visit> s_q) {
  if (s_p.empty() || s_q.empty()) {
    throw std::invalid_argument("copy_posterior: sequences must be nonempty");
  }
  CopyDistribution dist;
  dist.probs.resize(static_cast<Eigen::Index>(s_p.size()), static_cast<Eigen::Index>(s_q.size()));
  for (std::size_t i = 0; i < s_p.size(); ++i) {
    for (std::size_t j = 0; j < s_q.size(); ++j) {
      dist.probs(i, j) = poi_similarity(catalog, s_p[i], s_q[j]);
    }
    dist.probs.row(i) /= dist.probs.row(i).sum();  // similarities are > 0
  }
  return dist;
}

AugmentedGraph sample_augmented_graph(const WeightedDigraph& g_p,
                                      const WeightedDigraph& g_q,
                                      std::span<const Visit> s_p,
                                      std::span<const Visit> s_q,
                                      const CopyDistribution& dist,
                                      double epsilon, std::uint64_t seed) {
  if (dist.probs.rows() != static_cast<Eigen::Index>(s_p.size()) ||
      dist.probs.cols() != static_cast<Eigen::Index>(s_q.size())) {
    throw std::invalid_argument("sample_augmented_graph: distribution shape mismatch");
  }
  if (epsilon < 0.0 || epsilon > 1.0) {
    throw std::invalid_argument("sample_augmented_graph: epsilon must be in [0, 1]");
  }

  Rng rng(seed);
  const std::size_t n = s_p.size();
  std::vector<std::optional<int>> copy_source(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.next_double() < epsilon) {
      const auto row = dist.probs.row(static_cast<Eigen::Index>(i));
      std::vector<double> weights(row.begin(), row.end());
      copy_source[i] = rng.categorical(weights);
    }
  }

  // Union node set: g_p's nodes plus every POI referenced by a copied row,
  // in deterministic discovery order.
  std::vector<int> nodes = g_p.nodes;
  std::unordered_map<int, int> local = g_p.local;
  auto ensure_node = [&](int poi) {
    if (local.emplace(poi, static_cast<int>(nodes.size())).second) nodes.push_back(poi);
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (!copy_source[i]) continue;
    const int src_local = g_q.local_index(s_q[static_cast<std::size_t>(*copy_source[i])].poi);
    for (int c = 0; c < g_q.size(); ++c) {
      if (g_q.adj(src_local, c) != 0.0) ensure_node(g_q.nodes[c]);
    }
  }

  AugmentedGraph aug;
  aug.copy_source = std::move(copy_source);
  aug.graph = make_graph(std::move(nodes));
  aug.graph.adj.topLeftCorner(g_p.size(), g_p.size()) = g_p.adj;
  for (std::size_t i = 0; i < n; ++i) {
    if (!aug.copy_source[i]) continue;
    const int dst = aug.graph.local_index(s_p[i].poi);
    const int src = g_q.local_index(s_q[static_cast<std::size_t>(*aug.copy_source[i])].poi);
    aug.graph.adj.row(dst).setZero();
    for (int c = 0; c < g_q.size(); ++c) {
      const double w = g_q.adj(src, c);
      if (w != 0.0) aug.graph.adj(dst, aug.graph.local_index(g_q.nodes[c])) = w;
    }
  }
  return aug;
}

void write_augmentation_provenance(const AugmentedGraph& aug,
                                   std::span<const Visit> s_p,
                                   std::span<const Visit> s_q,
                                   std::ostream& out) {
  nlohmann::ordered_json j;
  j["positions"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < aug.copy_source.size(); ++i) {
    nlohmann::ordered_json entry;
    entry["position"] = i;
    entry["poi"] = s_p[i].poi;
    if (aug.copy_source[i]) {
      entry["copied_from_position"] = *aug.copy_source[i];
      entry["copied_from_poi"] = s_q[static_cast<std::size_t>(*aug.copy_source[i])].poi;
    } else {
      entry["kept"] = true;
    }
    j["positions"].push_back(std::move(entry));
  }
  out << j.dump(2) << '\n';
}

}  // namespace bayman
