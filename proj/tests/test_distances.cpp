#include <cmath>
#include <set>

#include "doctest.h"
#include "support/oracles.hpp"
#include "vida/distances.hpp"
#include "vida/multistrand_io.hpp"

using namespace vida;

namespace {

std::vector<StateGraph> random_graphs(oracle::Rng& rng, std::size_t n, std::vector<std::size_t> lengths) {
  std::vector<StateGraph> g;
  for (std::size_t i = 0; i < n; ++i) g.push_back(to_graph(parse_dp(oracle::random_dp(rng, lengths), lengths)));
  return g;
}

const char* kChain = "ACGTA\n[1] ..... | 0 | 0\n[1] (...) | 2 | 0\n[1] ((.)) | 5 | 0\n";

}  // namespace

TEST_SUITE("distances") {
  TEST_CASE("mpt graph weights are source holding times") {
    const Dataset d = parse_log(kChain);
    const auto g = mpt_graph(d.transitions, d.states);
    REQUIRE(g.out[0].size() == 1);
    CHECK(g.out[0][0].to == 1);
    CHECK(g.out[0][0].weight == doctest::Approx(2e-6));
    CHECK(g.out[1][0].weight == doctest::Approx(3e-6));
    CHECK(g.out[2].empty());
    const Dataset twice = parse_log("ACGTA\n[1] ..... | 0 | 0\n[1] (...) | 1 | 0\n[1] ..... | 2 | 0\n[1] ((.)) | 5 | 0\n");
    const auto g2 = mpt_graph(twice.transitions, twice.states);
    REQUIRE(g2.out[0].size() == 2);
    for (const auto& a : g2.out[0]) CHECK(a.weight == doctest::Approx(2e-6));
  }

  TEST_CASE("mpt knn on a chain") {
    const Dataset d = parse_log(kChain);
    const auto g = mpt_graph(d.transitions, d.states);
    const auto t = mpt_knn(g, 10);
    REQUIRE(t.rows[0].size() == 2);
    CHECK(t.rows[0][1].id == 2);
    CHECK(t.rows[0][1].distance == doctest::Approx(5e-6));
    CHECK(t.rows[2].empty());
    const auto one = mpt_knn(g, 1);
    REQUIRE(one.rows[0].size() == 1);
    CHECK(one.rows[0][0].id == 1);
    CHECK(one.rows[0][0].distance == doctest::Approx(2e-6));
    CHECK(t.metric == NeighborMetric::MptSeconds);
  }

  TEST_CASE("mpt knn matches bellman-ford") {
    oracle::Rng rng(23);
    for (int trial = 0; trial < 25; ++trial) {
      const std::size_t n = 2 + oracle::below(rng, 120);
      const bool ties = trial % 2 == 0;
      const auto g = oracle::random_digraph(rng, n, 3.0 / static_cast<double>(n), ties);
      const std::size_t k = 1 + oracle::below(rng, n);
      const auto t = mpt_knn(g, k);
      for (std::size_t s = 0; s < n; ++s) {
        const auto bf = oracle::bellman_ford(g, s);
        std::vector<std::pair<double, std::size_t>> want;
        for (std::size_t v = 0; v < n; ++v)
          if (v != s && std::isfinite(bf[v])) want.emplace_back(bf[v], v);
        std::sort(want.begin(), want.end());
        if (want.size() > k) want.resize(k);
        REQUIRE(t.rows[s].size() == want.size());
        for (std::size_t r = 0; r < want.size(); ++r) {
          CHECK(t.rows[s][r].id == want[r].second);
          CHECK(t.rows[s][r].distance == want[r].first);
        }
      }
    }
  }

  TEST_CASE("symmetrize and weights") {
    const Dataset d = parse_log(kChain);
    const auto t = symmetrize(mpt_knn(mpt_graph(d.transitions, d.states), 10));
    REQUIRE(t.rows[2].size() == 2);
    CHECK(t.rows[2][0].id == 1);
    CHECK(t.rows[2][0].distance == doctest::Approx(3e-6));
    const auto w = importance_weights(t, d.states.probability);
    for (std::size_t i = 0; i < t.rows.size(); ++i)
      for (std::size_t k = 0; k < t.rows[i].size(); ++k) {
        const auto j = t.rows[i][k].id;
        CHECK(w.rows[i][k] == doctest::Approx(1.0 / 9.0));
        for (std::size_t q = 0; q < t.rows[j].size(); ++q)
          if (t.rows[j][q].id == i) CHECK(w.rows[j][q] == w.rows[i][k]);
      }
  }

  TEST_CASE("ged knn hand case") {
    // ged(0,1) = 2, ged(0,2) = 4, ged(1,2) = 2.
    std::vector<StateGraph> g{to_graph(parse_dp("((..))")), to_graph(parse_dp("(....)")), to_graph(parse_dp("......"))};
    const auto t = ged_knn(g, 1, GedSearch::Exact);
    CHECK(t.rows[0][0].id == 1);
    CHECK(t.rows[1][0].id == 0);  // tie with 2 goes to the smaller id
    CHECK(t.rows[1][0].distance == 2.0);
    CHECK(t.rows[2][0].id == 1);
    std::vector<StateGraph> other{to_graph(parse_dp("(...)"))};
    other.push_back(g[0]);
    CHECK_THROWS_AS(ged_knn(other, 1, GedSearch::Exact), DistanceError);
  }

  TEST_CASE("exact ged knn equals brute force") {
    oracle::Rng rng(29);
    const auto g = random_graphs(rng, 300, {20, 14});
    const std::size_t k = 12;
    const auto t = ged_knn(g, k, GedSearch::Exact);
    for (std::size_t i = 0; i < g.size(); ++i) {
      std::vector<std::pair<double, std::size_t>> all;
      for (std::size_t j = 0; j < g.size(); ++j)
        if (j != i) all.emplace_back(static_cast<double>(oracle::ged_dense(g[i], g[j])), j);
      std::sort(all.begin(), all.end());
      REQUIRE(t.rows[i].size() == k);
      for (std::size_t r = 0; r < k; ++r) {
        CHECK(t.rows[i][r].id == all[r].second);
        CHECK(t.rows[i][r].distance == all[r].first);
      }
    }
  }

  TEST_CASE("projection forest recall on trajectory-like states") {
    oracle::Rng rng(31);
    std::vector<StateGraph> g;
    std::string dp(40, '.');
    for (int i = 0; i < 1200; ++i) {
      dp = oracle::elementary_step(rng, dp);
      g.push_back(to_graph(parse_dp(dp)));
    }
    const std::size_t k = 20;
    const auto exact = ged_knn(g, k, GedSearch::Exact);
    const auto approx = ged_knn(g, k, GedSearch::RandomProjection, {16, 32, 0, 1});
    std::size_t hit = 0, total = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      // Distances, not ids: ties at the k-th distance make id sets ambiguous.
      const double kth = exact.rows[i].back().distance;
      for (const auto& nb : approx.rows[i]) hit += nb.distance <= kth;
      total += exact.rows[i].size();
      for (std::size_t r = 1; r < approx.rows[i].size(); ++r)
        CHECK(approx.rows[i][r - 1].distance <= approx.rows[i][r].distance);
    }
    CHECK(static_cast<double>(hit) / static_cast<double>(total) >= 0.9);
  }

  TEST_CASE("table serialization") {
    const Dataset d = parse_log(kChain);
    const auto t = mpt_knn(mpt_graph(d.transitions, d.states), 10);
    const auto w = importance_weights(t, d.states.probability);
    WeightTable wb;
    CHECK(neighbor_table_from_binary(to_binary(t, &w), &wb) == t);
    CHECK(wb == w);
    WeightTable wj;
    CHECK(neighbor_table_from_json(to_json(t, &w), &wj) == t);
    CHECK(wj == w);
    CHECK_THROWS_AS(neighbor_table_from_binary("VDNTjunk"), DistanceError);
  }
}
