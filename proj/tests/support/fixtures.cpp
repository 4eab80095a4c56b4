#include "fixtures.hpp"

#include <stdexcept>

#include "bayman/rng.hpp"

namespace bayman::testing {
namespace {

constexpr std::int64_t kHour = 3600;
constexpr std::int64_t kEpochBase = 1'600'000'000;

GeoPoint grid_point(int poi) {
  return {40.0 + 0.003 * (poi / 6), -74.0 + 0.004 * (poi % 6)};
}

}  // namespace

PoiCatalog grid_catalog(int num_pois) {
  PoiCatalog catalog;
  for (int p = 0; p < num_pois; ++p) {
    catalog.ids.push_back("p" + std::to_string(p));
    catalog.coords.push_back(grid_point(p));
    catalog.index.emplace(catalog.ids.back(), p);
  }
  return catalog;
}

Dataset dataset_from_visits(const std::vector<std::vector<Visit>>& visits, int num_pois) {
  Dataset ds;
  ds.catalog = grid_catalog(num_pois);
  for (std::size_t u = 0; u < visits.size(); ++u) {
    UserSequence seq;
    seq.user = static_cast<int>(u);
    seq.visits = visits[u];
    for (const Visit& v : seq.visits) {
      if (v.poi < 0 || v.poi >= num_pois) throw std::invalid_argument("fixture poi out of range");
    }
    ds.sequences.push_back(std::move(seq));
    ds.user_ids.push_back("u" + std::to_string(u));
  }
  return ds;
}

Dataset cycle_dataset(int num_users, int num_pois, int checkins_per_user) {
  std::vector<std::vector<Visit>> visits(static_cast<std::size_t>(num_users));
  for (int u = 0; u < num_users; ++u) {
    std::int64_t t = kEpochBase;
    int poi = u % num_pois;
    for (int i = 0; i < checkins_per_user; ++i) {
      visits[static_cast<std::size_t>(u)].push_back({poi, t});
      t += kHour * (1 + poi);  // per-POI dwell time marks the cycle phase
      poi = (poi + 1) % num_pois;
    }
  }
  return dataset_from_visits(visits, num_pois);
}

Dataset group_dataset(int num_users, int num_pois, int checkins_per_user, std::uint64_t seed) {
  if (num_pois % 2 != 0) throw std::invalid_argument("group_dataset: need an even poi count");
  const int group_size = num_pois / 2;
  Rng rng(seed);
  std::vector<std::vector<Visit>> visits(static_cast<std::size_t>(num_users));
  for (int u = 0; u < num_users; ++u) {
    const int group = (u < num_users / 2) ? 0 : 1;
    const int base = group * group_size;
    int poi = base + static_cast<int>(rng.below(static_cast<std::size_t>(group_size)));
    std::int64_t t = kEpochBase + u;  // distinct start instants across users
    for (int i = 0; i < checkins_per_user; ++i) {
      visits[static_cast<std::size_t>(u)].push_back({poi, t});
      t += kHour;
      const double coin = rng.next_double();
      const int offset = poi - base;
      if (coin < 0.7) {
        poi = base + (offset + 1) % group_size;
      } else if (coin < 0.9) {
        poi = base + (offset + 2) % group_size;
      } else {
        poi = base + static_cast<int>(rng.below(static_cast<std::size_t>(group_size)));
      }
    }
  }
  return dataset_from_visits(visits, num_pois);
}

Dataset random_dataset(int num_users, int num_pois, int min_len, int max_len,
                       std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<Visit>> visits(static_cast<std::size_t>(num_users));
  for (int u = 0; u < num_users; ++u) {
    const int len =
        min_len + static_cast<int>(rng.below(static_cast<std::size_t>(max_len - min_len + 1)));
    std::int64_t t = kEpochBase + static_cast<std::int64_t>(rng.below(1000));
    for (int i = 0; i < len; ++i) {
      visits[static_cast<std::size_t>(u)].push_back(
          {static_cast<int>(rng.below(static_cast<std::size_t>(num_pois))), t});
      t += kHour / 2 + static_cast<std::int64_t>(rng.below(3 * kHour));
    }
  }
  return dataset_from_visits(visits, num_pois);
}

std::string small_checkin_csv() {
  return "alice,cafe,30,40.0,-74.0\n"
         "alice,park,10,40.01,-74.0\n"
         "alice,gym,20,40.02,-74.0\n"
         "bob,cafe,15,40.0,-74.0\n"
         "bob,library,25,40.03,-74.0\n";
}

}  // namespace bayman::testing
