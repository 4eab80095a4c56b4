#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "bayman/checkin_data.hpp"
#include "bayman/rng.hpp"
#include "fixtures.hpp"

using namespace bayman;

TEST_CASE("ingest sorts each user's visits by timestamp") {
  std::istringstream in(testing::small_checkin_csv());
  const Dataset ds = ingest(in);
  REQUIRE(ds.num_users() == 2);
  const auto& alice = ds.sequences[0].visits;
  REQUIRE(alice.size() == 3);
  CHECK(alice[0].timestamp == 10);
  CHECK(alice[1].timestamp == 20);
  CHECK(alice[2].timestamp == 30);
}

TEST_CASE("ingest keeps file order for equal timestamps") {
  std::istringstream in("u,a,100,0,0\nu,b,100,0,1\nu,c,100,0,2\n");
  const Dataset ds = ingest(in);
  const auto& v = ds.sequences[0].visits;
  CHECK(ds.catalog.ids[v[0].poi] == "a");
  CHECK(ds.catalog.ids[v[1].poi] == "b");
  CHECK(ds.catalog.ids[v[2].poi] == "c");
}

TEST_CASE("ingest builds a bijective catalog over all pois") {
  // 5 rows, 2 users, 4 distinct POIs (hand count on the fixture text).
  std::istringstream in(testing::small_checkin_csv());
  const Dataset ds = ingest(in);
  CHECK(ds.num_users() == 2);
  CHECK(ds.num_pois() == 4);
  CHECK(ds.total_records() == 5);
  REQUIRE(ds.catalog.index.size() == 4);
  std::vector<bool> seen(4, false);
  for (const auto& [id, idx] : ds.catalog.index) {
    REQUIRE(idx >= 0);
    REQUIRE(idx < 4);
    CHECK(!seen[static_cast<std::size_t>(idx)]);
    seen[static_cast<std::size_t>(idx)] = true;
    CHECK(ds.catalog.ids[static_cast<std::size_t>(idx)] == id);
  }
}

TEST_CASE("ingest rejects malformed rows with the line number") {
  SUBCASE("empty input") {
    std::istringstream in("");
    CHECK_THROWS_WITH_AS(ingest(in), "ingest: empty input", std::runtime_error);
  }
  SUBCASE("wrong field count") {
    std::istringstream in("u,a,100,0\n");
    CHECK_THROWS_WITH_AS(ingest(in), doctest::Contains("row 1"), std::runtime_error);
  }
  SUBCASE("unparsable timestamp counts as a header only on line 1") {
    std::istringstream in("u,a,100,0,0\nu,a,xyz,0,0\n");
    CHECK_THROWS_WITH_AS(ingest(in), doctest::Contains("row 2"), std::runtime_error);
  }
  SUBCASE("latitude out of range") {
    std::istringstream in("u,a,100,91.0,0\n");
    CHECK_THROWS_WITH_AS(ingest(in), doctest::Contains("latitude"), std::runtime_error);
  }
  SUBCASE("negative timestamp") {
    std::istringstream in("u,a,-5,0,0\n");
    CHECK_THROWS_AS(ingest(in), std::runtime_error);
  }
}

TEST_CASE("ingest skips a header line detected by its third field") {
  std::istringstream in("user_id,poi_id,timestamp,lat,lon\nu,a,100,1.5,2.5\n");
  const Dataset ds = ingest(in);
  CHECK(ds.total_records() == 1);
  CHECK(ds.catalog.coords[0].lat == 1.5);
}

TEST_CASE("ingest round-trips through serialize byte-stably") {
  std::istringstream in(testing::small_checkin_csv());
  const Dataset first = ingest(in);
  const std::string text1 = serialize_to_string(first);
  std::istringstream in2(text1);
  const Dataset second = ingest(in2);
  const std::string text2 = serialize_to_string(second);
  CHECK(text1 == text2);
  REQUIRE(second.num_users() == first.num_users());
  for (int u = 0; u < first.num_users(); ++u) {
    CHECK(second.user_ids[u] == first.user_ids[u]);
    REQUIRE(second.sequences[u].visits.size() == first.sequences[u].visits.size());
    for (std::size_t i = 0; i < first.sequences[u].visits.size(); ++i) {
      CHECK(second.sequences[u].visits[i].poi == first.sequences[u].visits[i].poi);
      CHECK(second.sequences[u].visits[i].timestamp == first.sequences[u].visits[i].timestamp);
    }
  }
}

TEST_CASE("split sizes follow floor(train_frac * n)") {
  SUBCASE("n=10 gives 8/2") {
    const Dataset ds = testing::random_dataset(1, 4, 10, 10, 7);
    const DatasetSplit split = split_dataset(ds, 0.8);
    CHECK(split.train(0).size() == 8);
    CHECK(split.test(0).size() == 2);
  }
  SUBCASE("n=5 gives 4/1") {
    const Dataset ds = testing::random_dataset(1, 4, 5, 5, 7);
    const DatasetSplit split = split_dataset(ds, 0.8);
    CHECK(split.train(0).size() == 4);
    CHECK(split.test(0).size() == 1);
  }
  SUBCASE("exact rational products do not round down") {
    CHECK(floor_frac(0.7, 10) == 7);
    CHECK(floor_frac(0.8, 5) == 4);
    CHECK(floor_frac(0.1, 30) == 3);
  }
  SUBCASE("n=1 errors naming the user") {
    const Dataset ds = testing::dataset_from_visits({{{0, 100}}}, 2);
    CHECK_THROWS_WITH_AS(split_dataset(ds, 0.8), doctest::Contains("u0"), std::runtime_error);
  }
}

TEST_CASE("split preserves each user's records and their order") {
  const Dataset ds = testing::random_dataset(5, 8, 4, 20, 11);
  const DatasetSplit split = split_dataset(ds, 0.8);
  for (int u = 0; u < ds.num_users(); ++u) {
    const auto& original = ds.sequences[u].visits;
    std::vector<Visit> joined;
    joined.insert(joined.end(), split.train(u).begin(), split.train(u).end());
    joined.insert(joined.end(), split.test(u).begin(), split.test(u).end());
    REQUIRE(joined.size() == original.size());
    for (std::size_t i = 0; i < original.size(); ++i) {
      CHECK(joined[i].poi == original[i].poi);
      CHECK(joined[i].timestamp == original[i].timestamp);
    }
  }
}

TEST_CASE("drop_unsplittable_users removes users with empty train prefixes") {
  const Dataset ds = testing::dataset_from_visits(
      {{{0, 1}}, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 5}}}, 4);
  const Dataset kept = drop_unsplittable_users(ds, 0.8);
  REQUIRE(kept.num_users() == 1);
  CHECK(kept.user_ids[0] == "u1");
  CHECK(kept.sequences[0].user == 0);
}

TEST_CASE("haversine matches analytic great-circle values") {
  CHECK(haversine_km({12.5, 67.8}, {12.5, 67.8}) == 0.0);
  // One degree along the equator: pi * 6371 / 180.
  CHECK(haversine_km({0, 0}, {0, 1}) ==
        doctest::Approx(std::numbers::pi * 6371.0 / 180.0).epsilon(1e-8));
  CHECK(haversine_km({0, 0}, {0, 1}) == doctest::Approx(111.195).epsilon(1e-5));
  // Quarter meridian: pi * 6371 / 2.
  CHECK(haversine_km({0, 0}, {90, 0}) == doctest::Approx(10007.543).epsilon(1e-5));
}

TEST_CASE("haversine is symmetric and satisfies the triangle inequality") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const GeoPoint a{rng.uniform(-90, 90), rng.uniform(-180, 180)};
    const GeoPoint b{rng.uniform(-90, 90), rng.uniform(-180, 180)};
    const GeoPoint c{rng.uniform(-90, 90), rng.uniform(-180, 180)};
    CHECK(haversine_km(a, b) == haversine_km(b, a));
    const double ab = haversine_km(a, b);
    const double bc = haversine_km(b, c);
    const double ac = haversine_km(a, c);
    CHECK(ac <= (ab + bc) * (1.0 + 1e-6) + 1e-9);
  }
}
