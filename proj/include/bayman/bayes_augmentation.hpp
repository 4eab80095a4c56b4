#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "bayman/checkin_data.hpp"
#include "bayman/poi_graphs.hpp"

namespace bayman {

struct LikeMindedMatch {
  int target = -1;
  int matched = -1;
  double similarity = 0.0;
};

/// Row i: categorical distribution over the positions of the like-minded
/// user's sequence, guiding which of their adjacency rows may replace the
/// row of the target's i-th check-in. Rows sum to 1.
struct CopyDistribution {
  Matrix probs;  // |s_p| x |s_q|
};

/// Augmented personal graph plus the realized copy decisions: per target
/// position, either the source position drawn from the posterior or
/// nullopt when the original row was kept.
struct AugmentedGraph {
  WeightedDigraph graph;
  std::vector<std::optional<int>> copy_source;
};

/// Jaccard similarity of the two distinct-POI sets, in [0, 1].
double user_similarity(std::span<const Visit> a, std::span<const Visit> b);

/// Most similar other user by user_similarity; ties break toward the
/// smaller user index; nullopt when the best similarity is 0. Expects the
/// training view of every user's sequence.
std::optional<LikeMindedMatch> find_like_minded(
    int target, const std::vector<std::span<const Visit>>& train_seqs);

/// Check-in affinity: 1 for the same POI at the same time, otherwise
/// tanh(1 / (distance_km + |time lag in hours|)), in (0, 1]. Two distinct
/// co-located POIs visited at the same instant degenerate to 1 (logged).
double poi_similarity(const PoiCatalog& catalog, Visit a, Visit b);

/// Row-normalized poi_similarity matrix between the positions of s_p and
/// the positions of s_q.
CopyDistribution copy_posterior(const PoiCatalog& catalog,
                                std::span<const Visit> s_p,
                                std::span<const Visit> s_q);

/// Node-copying sampler. For each position i of s_p independently: with
/// probability epsilon draw a source position from dist row i and replace
/// the adjacency row of the POI at position i with the source POI's row of
/// g_q; otherwise keep the original row. The node set grows to cover every
/// POI referenced by a copied row, so epsilon = 0 returns g_p unchanged.
/// When one POI occupies several positions, later positions win.
AugmentedGraph sample_augmented_graph(const WeightedDigraph& g_p,
                                      const WeightedDigraph& g_q,
                                      std::span<const Visit> s_p,
                                      std::span<const Visit> s_q,
                                      const CopyDistribution& dist,
                                      double epsilon, std::uint64_t seed);

/// JSON sidecar with the realized copy vector, one entry per position.
void write_augmentation_provenance(const AugmentedGraph& aug,
                                   std::span<const Visit> s_p,
                                   std::span<const Visit> s_q,
                                   std::ostream& out);

}  // namespace bayman
