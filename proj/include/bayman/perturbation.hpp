#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bayman/checkin_data.hpp"

namespace bayman {

enum class PerturbMode { None, Delete, Replace, Mixed };

const char* to_string(PerturbMode mode);
PerturbMode perturb_mode_from_string(const std::string& name);

struct PerturbationSpec {
  PerturbMode mode = PerturbMode::None;
  double ratio = 0.0;       // r in [0, 1]
  int neighbor_count = 1;   // K >= 1, replacement modes only
  std::uint64_t seed = 0;
  bool per_user = false;    // stratify the selection per user instead of corpus-global

  void validate() const;    // throws on out-of-range fields
};

struct PerturbSummary {
  PerturbMode mode = PerturbMode::None;
  double ratio = 0.0;
  int neighbor_count = 1;
  std::uint64_t seed = 0;
  std::size_t removed_count = 0;
  std::size_t replaced_count = 0;
  // Global record indices in the *input* dataset (user-major, visit order),
  // ascending. Kept in memory for auditing; not part of the manifest.
  std::vector<std::size_t> replaced_indices;
  std::vector<std::size_t> deleted_indices;
};

struct PerturbResult {
  Dataset dataset;
  PerturbSummary summary;
};

/// Removes exactly floor(r*T) records chosen uniformly without replacement
/// over the whole corpus; survivors keep their relative order; users left
/// with no records are dropped. Deterministic for a fixed seed.
PerturbResult delete_checkins(const Dataset& ds, const PerturbationSpec& spec);

/// Replaces the POI of exactly floor(r*T) records by one of the K nearest
/// distinct POIs of the original (uniform among the K; distance ties break
/// toward the smaller POI index). Timestamps are untouched.
PerturbResult replace_checkins(const Dataset& ds, const PerturbationSpec& spec);

/// Replacement followed by deletion with disjoint selections drawn from the
/// original index set; errors when 2*floor(r*T) > T.
PerturbResult mixed_perturb(const Dataset& ds, const PerturbationSpec& spec);

/// Dispatch on spec.mode; None returns the dataset unchanged.
PerturbResult perturb(const Dataset& ds, const PerturbationSpec& spec);

/// For each POI, the k nearest distinct POIs by haversine distance,
/// ascending, ties broken by smaller index. Exact brute force.
std::vector<std::vector<int>> k_nearest_pois(const PoiCatalog& catalog, int k);

/// Provenance sidecar: {mode, ratio, K, seed, removed_count, replaced_count}.
std::string manifest_json(const PerturbSummary& summary);

}  // namespace bayman
