#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bayman/checkin_data.hpp"

namespace bayman::testing {

/// Dataset assembled directly from visit lists; poi coordinates laid out on
/// a grid (6 per row, ~0.33 km spacing) around (40 N, 74 W).
Dataset dataset_from_visits(const std::vector<std::vector<Visit>>& visits, int num_pois);

/// Catalog-only helper with the same grid layout.
PoiCatalog grid_catalog(int num_pois);

/// Users walking one shared deterministic cycle over `num_pois` POIs, each
/// user phase-shifted by its index. The dwell time after POI p is (1 + p)
/// hours, so the lag pattern encodes the phase. Timestamps strictly
/// increase.
Dataset cycle_dataset(int num_users, int num_pois, int checkins_per_user);

/// Two latent user groups with distinct Markov kernels over disjoint
/// preferred POI subsets; kernel: 70% next-in-group, 20% skip-one, 10%
/// uniform in group. Check-ins hourly.
Dataset group_dataset(int num_users, int num_pois, int checkins_per_user, std::uint64_t seed);

/// Uniform random walks for property tests.
Dataset random_dataset(int num_users, int num_pois, int min_len, int max_len,
                       std::uint64_t seed);

/// The in-memory text of a small well-formed check-in file:
/// 5 rows, 2 users, 4 distinct POIs, shuffled timestamps.
std::string small_checkin_csv();

}  // namespace bayman::testing
