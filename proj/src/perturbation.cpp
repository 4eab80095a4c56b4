#include "bayman/perturbation.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "bayman/log.hpp"
#include "bayman/rng.hpp"

namespace bayman {
namespace {

// Flattened record view: global index = user-major, visit order.
struct FlatRecord {
  int user;
  Visit visit;
};

std::vector<FlatRecord> flatten(const Dataset& ds) {
  std::vector<FlatRecord> flat;
  flat.reserve(ds.total_records());
  for (int u = 0; u < ds.num_users(); ++u) {
    for (const Visit& v : ds.sequences[u].visits) flat.push_back({u, v});
  }
  return flat;
}

Dataset rebuild(const Dataset& ds, const std::vector<FlatRecord>& flat,
                const std::vector<bool>& keep) {
  Dataset out;
  out.catalog = ds.catalog;
  std::vector<std::vector<Visit>> per_user(ds.num_users());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    if (keep[i]) per_user[flat[i].user].push_back(flat[i].visit);
  }
  for (int u = 0; u < ds.num_users(); ++u) {
    if (per_user[u].empty()) {
      log_warn("perturb: user " + ds.user_ids[u] + " lost all records, dropped");
      continue;
    }
    UserSequence seq;
    seq.user = static_cast<int>(out.sequences.size());
    seq.visits = std::move(per_user[u]);
    out.sequences.push_back(std::move(seq));
    out.user_ids.push_back(ds.user_ids[u]);
  }
  return out;
}

/// First m entries of a seeded partial Fisher-Yates over [0, n).
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t m, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(m);
  return idx;
}

std::vector<std::size_t> select_global(const Dataset& ds, double ratio, bool per_user, Rng& rng) {
  std::vector<std::size_t> selected;
  if (!per_user) {
    const std::size_t total = ds.total_records();
    selected = sample_indices(total, floor_frac(ratio, total), rng);
  } else {
    std::size_t base = 0;
    for (int u = 0; u < ds.num_users(); ++u) {
      const std::size_t n = ds.sequences[u].visits.size();
      for (std::size_t local : sample_indices(n, floor_frac(ratio, n), rng)) {
        selected.push_back(base + local);
      }
      base += n;
    }
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

void apply_replacements(std::vector<FlatRecord>& flat,
                        const std::vector<std::size_t>& targets,
                        const std::vector<std::vector<int>>& neighbors,
                        int k, Rng& rng) {
  for (std::size_t idx : targets) {
    const auto& cands = neighbors[flat[idx].visit.poi];
    const int pick = (k == 1) ? 0 : static_cast<int>(rng.below(static_cast<std::size_t>(k)));
    flat[idx].visit.poi = cands[pick];
  }
}

PerturbSummary make_summary(const PerturbationSpec& spec) {
  PerturbSummary s;
  s.mode = spec.mode;
  s.ratio = spec.ratio;
  s.neighbor_count = spec.neighbor_count;
  s.seed = spec.seed;
  return s;
}

}  // namespace

const char* to_string(PerturbMode mode) {
  switch (mode) {
    case PerturbMode::None: return "none";
    case PerturbMode::Delete: return "delete";
    case PerturbMode::Replace: return "replace";
    case PerturbMode::Mixed: return "mixed";
  }
  return "?";
}

PerturbMode perturb_mode_from_string(const std::string& name) {
  if (name == "none") return PerturbMode::None;
  if (name == "delete") return PerturbMode::Delete;
  if (name == "replace") return PerturbMode::Replace;
  if (name == "mixed") return PerturbMode::Mixed;
  throw std::invalid_argument("unknown perturbation mode: " + name);
}

void PerturbationSpec::validate() const {
  if (ratio < 0.0 || ratio > 1.0) {
    throw std::invalid_argument("perturbation ratio must be in [0, 1]");
  }
  if (neighbor_count < 1) {
    throw std::invalid_argument("perturbation neighbor count must be >= 1");
  }
}

std::vector<std::vector<int>> k_nearest_pois(const PoiCatalog& catalog, int k) {
  const int n = catalog.size();
  if (n < 2) throw std::runtime_error("k_nearest_pois: catalog has fewer than 2 POIs");
  if (k > n - 1) {
    throw std::invalid_argument("k_nearest_pois: k=" + std::to_string(k) +
                                " exceeds catalog size minus one");
  }
  std::vector<std::vector<int>> result(n);
  std::vector<std::pair<double, int>> dist;
  for (int i = 0; i < n; ++i) {
    dist.clear();
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      dist.emplace_back(haversine_km(catalog.coords[i], catalog.coords[j]), j);
    }
    std::sort(dist.begin(), dist.end());  // ties fall to the smaller index
    result[i].reserve(k);
    for (int t = 0; t < k; ++t) result[i].push_back(dist[t].second);
  }
  return result;
}

PerturbResult delete_checkins(const Dataset& ds, const PerturbationSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  auto flat = flatten(ds);
  PerturbSummary summary = make_summary(spec);
  summary.deleted_indices = select_global(ds, spec.ratio, spec.per_user, rng);
  summary.removed_count = summary.deleted_indices.size();

  std::vector<bool> keep(flat.size(), true);
  for (std::size_t idx : summary.deleted_indices) keep[idx] = false;
  return {rebuild(ds, flat, keep), std::move(summary)};
}

PerturbResult replace_checkins(const Dataset& ds, const PerturbationSpec& spec) {
  spec.validate();
  const auto neighbors = k_nearest_pois(ds.catalog, spec.neighbor_count);
  Rng rng(spec.seed);
  auto flat = flatten(ds);
  PerturbSummary summary = make_summary(spec);
  summary.replaced_indices = select_global(ds, spec.ratio, spec.per_user, rng);
  summary.replaced_count = summary.replaced_indices.size();

  apply_replacements(flat, summary.replaced_indices, neighbors, spec.neighbor_count, rng);
  std::vector<bool> keep(flat.size(), true);
  return {rebuild(ds, flat, keep), std::move(summary)};
}

PerturbResult mixed_perturb(const Dataset& ds, const PerturbationSpec& spec) {
  spec.validate();
  const std::size_t total = ds.total_records();
  const std::size_t m = floor_frac(spec.ratio, total);
  if (2 * m > total) {
    throw std::runtime_error("mixed_perturb: 2*floor(r*T)=" + std::to_string(2 * m) +
                             " exceeds T=" + std::to_string(total));
  }
  const auto neighbors = k_nearest_pois(ds.catalog, spec.neighbor_count);
  Rng rng(spec.seed);
  auto flat = flatten(ds);
  PerturbSummary summary = make_summary(spec);

  // One draw of 2m distinct indices keeps the two selections disjoint.
  auto picked = sample_indices(total, 2 * m, rng);
  summary.replaced_indices.assign(picked.begin(), picked.begin() + m);
  summary.deleted_indices.assign(picked.begin() + m, picked.end());
  std::sort(summary.replaced_indices.begin(), summary.replaced_indices.end());
  std::sort(summary.deleted_indices.begin(), summary.deleted_indices.end());
  summary.replaced_count = m;
  summary.removed_count = m;

  apply_replacements(flat, summary.replaced_indices, neighbors, spec.neighbor_count, rng);
  std::vector<bool> keep(flat.size(), true);
  for (std::size_t idx : summary.deleted_indices) keep[idx] = false;
  return {rebuild(ds, flat, keep), std::move(summary)};
}

PerturbResult perturb(const Dataset& ds, const PerturbationSpec& spec) {
  switch (spec.mode) {
    case PerturbMode::None: {
      PerturbResult r{ds, make_summary(spec)};
      return r;
    }
    case PerturbMode::Delete: return delete_checkins(ds, spec);
    case PerturbMode::Replace: return replace_checkins(ds, spec);
    case PerturbMode::Mixed: return mixed_perturb(ds, spec);
  }
  throw std::logic_error("perturb: unhandled mode");
}

std::string manifest_json(const PerturbSummary& summary) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(summary.mode);
  j["ratio"] = summary.ratio;
  j["K"] = summary.neighbor_count;
  j["seed"] = summary.seed;
  j["removed_count"] = summary.removed_count;
  j["replaced_count"] = summary.replaced_count;
  return j.dump(2) + "\n";
}

}  // namespace bayman
