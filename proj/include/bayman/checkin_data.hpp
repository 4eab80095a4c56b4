#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace bayman {

/// One raw check-in row: a user visited a POI at a point in time.
struct CheckinRecord {
  std::string user_id;
  std::string poi_id;
  std::int64_t timestamp = 0;  // seconds since the Unix epoch, >= 0
  double lat = 0.0;            // degrees in [-90, 90]
  double lon = 0.0;            // degrees in [-180, 180]
};

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
};

/// Dense POI index: external ids mapped bijectively onto [0, N).
struct PoiCatalog {
  std::vector<std::string> ids;                // poi index -> external id
  std::vector<GeoPoint> coords;                // poi index -> location
  std::unordered_map<std::string, int> index;  // external id -> poi index

  int size() const { return static_cast<int>(ids.size()); }
  int require(const std::string& id) const;  // throws on unknown id
};

struct Visit {
  int poi = -1;
  std::int64_t timestamp = 0;
};

/// One user's check-ins in chronological order (timestamps nondecreasing).
struct UserSequence {
  int user = -1;
  std::vector<Visit> visits;
};

struct Dataset {
  PoiCatalog catalog;
  std::vector<std::string> user_ids;    // user index -> external id
  std::vector<UserSequence> sequences;  // position == user index

  int num_users() const { return static_cast<int>(sequences.size()); }
  int num_pois() const { return catalog.size(); }
  std::size_t total_records() const;
};

/// Per-user chronological split: the first train_len[u] visits are the
/// training prefix, the remainder is the test suffix.
struct DatasetSplit {
  Dataset data;
  std::vector<int> train_len;

  std::span<const Visit> train(int user) const;
  std::span<const Visit> test(int user) const;
  std::size_t test_size() const;
};

/// Parses `user_id,poi_id,timestamp,lat,lon` rows. An optional header line
/// is detected by a non-numeric third field. Malformed rows abort ingestion
/// with the offending line number. Per-user visits are sorted by timestamp
/// (stable, so equal timestamps keep file order); POI indices are assigned
/// in order of first appearance over the sorted sequences, which makes
/// ingest(serialize(ingest(x))) reproduce the exact same Dataset.
Dataset ingest(std::istream& in);
Dataset ingest_file(const std::string& path);

/// Writes the dataset back to the check-in text format, users in index
/// order, visits in chronological order. Byte-stable for a given Dataset.
void serialize(const Dataset& ds, std::ostream& out);
std::string serialize_to_string(const Dataset& ds);
void serialize_to_file(const Dataset& ds, const std::string& path);

/// Per-user prefix split with |train| = floor(train_frac * n).
/// Throws if any user has fewer than 2 check-ins.
DatasetSplit split_dataset(const Dataset& ds, double train_frac);

/// Removes users whose training prefix would be empty (or who have a single
/// check-in), logging a warning per dropped user. Run before split_dataset
/// when the input may contain degenerate users.
Dataset drop_unsplittable_users(const Dataset& ds, double train_frac);

/// Great-circle distance in km, Earth radius 6371.0 km.
double haversine_km(GeoPoint a, GeoPoint b);

/// floor(frac * n) computed so that exact rational products (0.7 * 10)
/// do not round down from representation error.
std::size_t floor_frac(double frac, std::size_t n);

}  // namespace bayman
