#include "bayman/checkin_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "bayman/errors.hpp"
#include "bayman/log.hpp"

namespace bayman {
namespace {

constexpr double kEarthRadiusKm = 6371.0;

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

bool parse_i64(std::string_view s, std::int64_t& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

bool parse_double(std::string_view s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last && std::isfinite(out);
}

[[noreturn]] void reject(std::size_t line_no, const std::string& why) {
  throw std::runtime_error("ingest: row " + std::to_string(line_no) + ": " + why);
}

CheckinRecord parse_record(std::string_view line, std::size_t line_no) {
  const auto fields = split_fields(line);
  if (fields.size() != 5) {
    reject(line_no, "expected 5 comma-separated fields, got " + std::to_string(fields.size()));
  }
  CheckinRecord rec;
  rec.user_id = std::string(fields[0]);
  rec.poi_id = std::string(fields[1]);
  if (rec.user_id.empty()) reject(line_no, "empty user id");
  if (rec.poi_id.empty()) reject(line_no, "empty poi id");
  if (!parse_i64(fields[2], rec.timestamp)) reject(line_no, "unparsable timestamp");
  if (rec.timestamp < 0) reject(line_no, "negative timestamp");
  if (!parse_double(fields[3], rec.lat)) reject(line_no, "unparsable latitude");
  if (!parse_double(fields[4], rec.lon)) reject(line_no, "unparsable longitude");
  if (rec.lat < -90.0 || rec.lat > 90.0) reject(line_no, "latitude out of [-90, 90]");
  if (rec.lon < -180.0 || rec.lon > 180.0) reject(line_no, "longitude out of [-180, 180]");
  return rec;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

int PoiCatalog::require(const std::string& id) const {
  const auto it = index.find(id);
  if (it == index.end()) throw std::runtime_error("unknown poi id: " + id);
  return it->second;
}

std::size_t Dataset::total_records() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.visits.size();
  return n;
}

std::span<const Visit> DatasetSplit::train(int user) const {
  const auto& v = data.sequences.at(user).visits;
  return {v.data(), static_cast<std::size_t>(train_len.at(user))};
}

std::span<const Visit> DatasetSplit::test(int user) const {
  const auto& v = data.sequences.at(user).visits;
  const auto n = static_cast<std::size_t>(train_len.at(user));
  return {v.data() + n, v.size() - n};
}

std::size_t DatasetSplit::test_size() const {
  std::size_t n = 0;
  for (int u = 0; u < data.num_users(); ++u) n += test(u).size();
  return n;
}

Dataset ingest(std::istream& in) {
  struct RawVisit {
    std::string poi_id;
    std::int64_t timestamp;
    double lat, lon;
    std::size_t file_order;
  };

  std::vector<std::string> user_order;
  std::unordered_map<std::string, int> user_index;
  std::vector<std::vector<RawVisit>> per_user;

  std::string line;
  std::size_t line_no = 0;
  std::size_t rows = 0;
  bool first_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first_line) {
      first_line = false;
      const auto fields = split_fields(line);
      std::int64_t dummy;
      if (fields.size() == 5 && !parse_i64(fields[2], dummy)) {
        continue;  // header line
      }
    }
    CheckinRecord rec = parse_record(line, line_no);
    auto [it, inserted] = user_index.try_emplace(rec.user_id, static_cast<int>(user_order.size()));
    if (inserted) {
      user_order.push_back(rec.user_id);
      per_user.emplace_back();
    }
    per_user[it->second].push_back(
        {std::move(rec.poi_id), rec.timestamp, rec.lat, rec.lon, rows});
    ++rows;
  }
  if (rows == 0) throw std::runtime_error("ingest: empty input");

  for (auto& visits : per_user) {
    std::stable_sort(visits.begin(), visits.end(),
                     [](const RawVisit& a, const RawVisit& b) { return a.timestamp < b.timestamp; });
  }

  // POI indices follow first appearance over the sorted sequences so that a
  // serialize/ingest round trip rebuilds the identical catalog.
  Dataset ds;
  ds.user_ids = user_order;
  ds.sequences.resize(per_user.size());
  for (std::size_t u = 0; u < per_user.size(); ++u) {
    ds.sequences[u].user = static_cast<int>(u);
    ds.sequences[u].visits.reserve(per_user[u].size());
    for (const auto& rv : per_user[u]) {
      auto [it, inserted] =
          ds.catalog.index.try_emplace(rv.poi_id, ds.catalog.size());
      if (inserted) {
        ds.catalog.ids.push_back(rv.poi_id);
        ds.catalog.coords.push_back({rv.lat, rv.lon});
      } else {
        const GeoPoint& known = ds.catalog.coords[it->second];
        if (known.lat != rv.lat || known.lon != rv.lon) {
          log_warn("ingest: poi " + rv.poi_id + " has conflicting coordinates; keeping first");
        }
      }
      ds.sequences[u].visits.push_back({it->second, rv.timestamp});
    }
  }
  return ds;
}

Dataset ingest_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open input file: " + path);
  return ingest(in);
}

void serialize(const Dataset& ds, std::ostream& out) {
  for (int u = 0; u < ds.num_users(); ++u) {
    const auto& uid = ds.user_ids.at(u);
    for (const Visit& v : ds.sequences[u].visits) {
      const GeoPoint& p = ds.catalog.coords.at(v.poi);
      out << uid << ',' << ds.catalog.ids.at(v.poi) << ',' << v.timestamp << ','
          << format_double(p.lat) << ',' << format_double(p.lon) << '\n';
    }
  }
}

std::string serialize_to_string(const Dataset& ds) {
  std::ostringstream oss;
  serialize(ds, oss);
  return oss.str();
}

void serialize_to_file(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  serialize(ds, out);
}

std::size_t floor_frac(double frac, std::size_t n) {
  const double x = frac * static_cast<double>(n);
  return static_cast<std::size_t>(std::floor(x + 1e-9));
}

DatasetSplit split_dataset(const Dataset& ds, double train_frac) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw std::invalid_argument("split_dataset: train_frac must be in (0, 1)");
  }
  DatasetSplit split;
  split.data = ds;
  split.train_len.resize(ds.num_users());
  for (int u = 0; u < ds.num_users(); ++u) {
    const std::size_t n = ds.sequences[u].visits.size();
    if (n < 2) {
      throw std::runtime_error("split_dataset: user " + ds.user_ids[u] +
                               " has fewer than 2 check-ins");
    }
    split.train_len[u] = static_cast<int>(floor_frac(train_frac, n));
  }
  return split;
}

Dataset drop_unsplittable_users(const Dataset& ds, double train_frac) {
  Dataset out;
  out.catalog = ds.catalog;
  for (int u = 0; u < ds.num_users(); ++u) {
    const std::size_t n = ds.sequences[u].visits.size();
    if (n < 2 || floor_frac(train_frac, n) == 0) {
      log_warn("dropping user " + ds.user_ids[u] + " (" + std::to_string(n) +
               " check-ins, empty train split)");
      continue;
    }
    UserSequence seq = ds.sequences[u];
    seq.user = static_cast<int>(out.sequences.size());
    out.sequences.push_back(std::move(seq));
    out.user_ids.push_back(ds.user_ids[u]);
  }
  return out;
}

double haversine_km(GeoPoint a, GeoPoint b) {
  constexpr double deg = std::numbers::pi / 180.0;
  const double lat1 = a.lat * deg, lat2 = b.lat * deg;
  const double dlat = (b.lat - a.lat) * deg;
  const double dlon = (b.lon - a.lon) * deg;
  const double s1 = std::sin(0.5 * dlat);
  const double s2 = std::sin(0.5 * dlon);
  const double h = s1 * s1 + std::cos(lat1) * std::cos(lat2) * s2 * s2;
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(std::min(1.0, h)));
}

}  // namespace bayman
