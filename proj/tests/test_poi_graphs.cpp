#include <doctest.h>

#include <cmath>
#include <sstream>

#include "bayman/poi_graphs.hpp"
#include "bayman/rng.hpp"
#include "fixtures.hpp"

using namespace bayman;

namespace {

std::vector<Visit> seq(std::initializer_list<int> pois) {
  std::vector<Visit> out;
  std::int64_t t = 1000;
  for (int p : pois) out.push_back({p, t += 60});
  return out;
}

/// Counting oracle: weight = transitions(i->j) / check-ins at i, computed
/// with plain maps, no graph machinery.
double weight_oracle(const std::vector<std::vector<Visit>>& seqs, int from, int to) {
  long transitions = 0, visits = 0;
  for (const auto& s : seqs) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i].poi == from) ++visits;
      if (i + 1 < s.size() && s[i].poi == from && s[i + 1].poi == to) ++transitions;
    }
  }
  return visits == 0 ? 0.0 : static_cast<double>(transitions) / static_cast<double>(visits);
}

}  // namespace

TEST_CASE("personal graph weights are transition frequencies over visit counts") {
  SUBCASE("v1,v2,v1,v2") {
    const auto s = seq({1, 2, 1, 2});
    const WeightedDigraph g = build_personal_graph(s);
    REQUIRE(g.size() == 2);
    const int a = g.local_index(1), b = g.local_index(2);
    CHECK(g.adj(a, b) == 1.0);   // two 1->2 transitions, freq(1) = 2
    CHECK(g.adj(b, a) == 0.5);   // one 2->1 transition, freq(2) = 2
  }
  SUBCASE("a self-transition is a recorded edge") {
    const auto s = seq({1, 1});
    const WeightedDigraph g = build_personal_graph(s);
    REQUIRE(g.size() == 1);
    CHECK(g.adj(0, 0) == 0.5);  // one 1->1 transition, freq(1) = 2
  }
  SUBCASE("a single transition has weight 1") {
    const auto s = seq({0, 3});
    const WeightedDigraph g = build_personal_graph(s);
    CHECK(g.adj(g.local_index(0), g.local_index(3)) == 1.0);
  }
  SUBCASE("sequences shorter than 2 error") {
    const auto s = seq({1});
    CHECK_THROWS_AS(build_personal_graph(s), std::invalid_argument);
  }
}

TEST_CASE("personal and semantic weights match the counting oracle exactly") {
  Rng rng(314);
  for (int trial = 0; trial < 20; ++trial) {
    const Dataset ds = testing::random_dataset(3, 5, 2, 9, 1000 + trial);
    std::vector<std::vector<Visit>> all;
    std::vector<std::span<const Visit>> views;
    for (const auto& s : ds.sequences) {
      all.push_back(s.visits);
      views.emplace_back(s.visits);
    }
    for (const auto& s : ds.sequences) {
      const WeightedDigraph g = build_personal_graph(s.visits);
      for (int i = 0; i < g.size(); ++i) {
        for (int j = 0; j < g.size(); ++j) {
          CHECK(g.adj(i, j) == weight_oracle({s.visits}, g.nodes[i], g.nodes[j]));
        }
      }
    }
    const WeightedDigraph gs = build_semantic_graph(views, ds.num_pois());
    for (int i = 0; i < gs.size(); ++i) {
      for (int j = 0; j < gs.size(); ++j) {
        CHECK(gs.adj(i, j) == weight_oracle(all, i, j));
      }
    }
  }
}

TEST_CASE("semantic graph pools transitions over users") {
  SUBCASE("one user equals the personal graph embedded in the global node set") {
    const auto s = seq({0, 1, 0, 2});
    const WeightedDigraph personal = build_personal_graph(s);
    const WeightedDigraph semantic = build_semantic_graph({std::span<const Visit>(s)}, 4);
    REQUIRE(semantic.size() == 4);
    for (int i = 0; i < personal.size(); ++i) {
      for (int j = 0; j < personal.size(); ++j) {
        CHECK(semantic.adj(personal.nodes[i], personal.nodes[j]) == personal.adj(i, j));
      }
    }
    CHECK(semantic.adj.row(3).sum() == 0.0);
  }
  SUBCASE("two users with one v1->v2 transition each pool to 1.0") {
    const auto s1 = seq({1, 2});
    const auto s2 = seq({1, 2});
    const WeightedDigraph gs =
        build_semantic_graph({std::span<const Visit>(s1), std::span<const Visit>(s2)}, 3);
    CHECK(gs.adj(1, 2) == 1.0);  // 2 transitions / 2 visits at v1
  }
  SUBCASE("a poi never followed by anything has a zero out-row") {
    const auto s = seq({0, 1});
    const WeightedDigraph gs = build_semantic_graph({std::span<const Visit>(s)}, 2);
    CHECK(gs.adj.row(1).sum() == 0.0);
  }
}

TEST_CASE("row sums equal outgoing transitions over visit counts, at most 1") {
  const Dataset ds = testing::random_dataset(4, 6, 2, 12, 808);
  for (const auto& s : ds.sequences) {
    const WeightedDigraph g = build_personal_graph(s.visits);
    for (int i = 0; i < g.size(); ++i) {
      const double row_sum = g.adj.row(i).sum();
      CHECK(row_sum <= 1.0 + 1e-12);
      // Equality iff every occurrence of the node has a successor, i.e. it
      // is not the final check-in (or it is but also occurs earlier... the
      // count form below is exact either way).
      long visits = 0, with_successor = 0;
      for (std::size_t k = 0; k < s.visits.size(); ++k) {
        if (s.visits[k].poi == g.nodes[i]) {
          ++visits;
          if (k + 1 < s.visits.size()) ++with_successor;
        }
      }
      CHECK(row_sum == doctest::Approx(static_cast<double>(with_successor) /
                                       static_cast<double>(visits))
                           .epsilon(1e-12));
    }
  }
}

TEST_CASE("distance graph thresholds inverse-distance weights") {
  // Three collinear POIs 0.9 km apart: adjacent pairs connect, the ends do not.
  PoiCatalog catalog;
  const double step_deg = 0.9 / 111.19492664455873;
  for (int i = 0; i < 3; ++i) {
    catalog.ids.push_back("p" + std::to_string(i));
    catalog.coords.push_back({step_deg * i, 0.0});
    catalog.index.emplace(catalog.ids.back(), i);
  }
  const WeightedDigraph g = build_distance_graph(catalog, 1.0);
  CHECK(g.adj(0, 1) == doctest::Approx(1.0 / 0.9).epsilon(1e-9));
  CHECK(g.adj(1, 0) == g.adj(0, 1));
  CHECK(g.adj(1, 2) == doctest::Approx(1.0 / 0.9).epsilon(1e-9));
  CHECK(g.adj(0, 2) == 0.0);  // 1.8 km > delta_d
  CHECK(g.adj(0, 0) == 0.0);
  CHECK((g.adj - g.adj.transpose()).cwiseAbs().maxCoeff() == 0.0);

  SUBCASE("weights match pairwise haversine within 1e-9") {
    const double d01 = haversine_km(catalog.coords[0], catalog.coords[1]);
    CHECK(std::abs(g.adj(0, 1) - 1.0 / d01) < 1e-9);
  }
  SUBCASE("a pair 0.5 km apart under delta_d 1 gets weight 2") {
    PoiCatalog two;
    two.ids = {"a", "b"};
    two.coords = {{0.0, 0.0}, {0.5 / 111.19492664455873, 0.0}};
    two.index = {{"a", 0}, {"b", 1}};
    const WeightedDigraph pair_graph = build_distance_graph(two, 1.0);
    CHECK(pair_graph.adj(0, 1) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(pair_graph.adj(1, 0) == doctest::Approx(2.0).epsilon(1e-9));
  }
  SUBCASE("co-located distinct pois stay unconnected") {
    PoiCatalog dup;
    dup.ids = {"a", "b"};
    dup.coords = {{1.0, 2.0}, {1.0, 2.0}};
    dup.index = {{"a", 0}, {"b", 1}};
    const WeightedDigraph co = build_distance_graph(dup, 1.0);
    CHECK(co.adj(0, 1) == 0.0);
  }
}

TEST_CASE("normalize_adjacency adds self-connections and degree-normalizes") {
  SUBCASE("no edges yields the identity") {
    Matrix a = Matrix::Zero(3, 3);
    const Matrix norm = normalize_adjacency(a, NormalizeDirection::Outgoing);
    CHECK((norm - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("hand-computed 2x2 case") {
    Matrix a = Matrix::Zero(2, 2);
    a(0, 1) = 1.0;
    const Matrix norm = normalize_adjacency(a, NormalizeDirection::Outgoing);
    CHECK(norm(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(norm(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(norm(1, 0) == 0.0);
    CHECK(norm(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("ingoing equals outgoing of the transpose") {
    Rng rng(55);
    Matrix a(4, 4);
    for (int i = 0; i < 16; ++i) a(i / 4, i % 4) = rng.next_double();
    a.diagonal().setZero();
    const Matrix in_norm = normalize_adjacency(a, NormalizeDirection::Ingoing);
    const Matrix out_of_t = normalize_adjacency(Matrix(a.transpose()),
                                                NormalizeDirection::Outgoing);
    CHECK((in_norm - out_of_t).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("entries stay in [0, 1] and symmetry is preserved") {
    const Dataset ds = testing::random_dataset(1, 8, 20, 20, 99);
    const WeightedDigraph gd = build_distance_graph(ds.catalog, 1.0);
    const Matrix norm = normalize_adjacency(gd, NormalizeDirection::Symmetric);
    CHECK(norm.minCoeff() >= 0.0);
    CHECK(norm.maxCoeff() <= 1.0 + 1e-12);
    CHECK((norm - norm.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("graph construction is deterministic") {
  const Dataset ds = testing::random_dataset(3, 6, 4, 10, 123);
  const WeightedDigraph g1 = build_personal_graph(ds.sequences[0].visits);
  const WeightedDigraph g2 = build_personal_graph(ds.sequences[0].visits);
  CHECK(g1.nodes == g2.nodes);
  CHECK((g1.adj - g2.adj).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("edge list export writes src,dst,weight lines") {
  const auto s = seq({0, 1});
  const WeightedDigraph g = build_personal_graph(s);
  std::ostringstream out;
  write_edge_list(g, out);
  CHECK(out.str() == "0,1,1\n");
}
