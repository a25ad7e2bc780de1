// Supervision distances between states: minimum passage times on the observed
// transition graph, and adjacency L1 ("GED") neighbourhoods.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vida/dp.hpp"
#include "vida/error.hpp"
#include "vida/multistrand_io.hpp"

namespace vida {

enum class DistanceErrorKind { DimensionMismatch, InvalidArgument, MalformedTable };
using DistanceError = KindedError<DistanceErrorKind>;

enum class NeighborMetric { MptSeconds, GedCount };

struct Neighbor {
  std::uint32_t id = 0;
  double distance = 0.0;

  bool operator==(const Neighbor&) const = default;
};

// Per-state neighbour lists sorted by (distance, id), never containing the
// state itself. Rows of states that were not queried are empty.
struct NeighborTable {
  NeighborMetric metric = NeighborMetric::GedCount;
  std::size_t k = 100;
  std::vector<std::vector<Neighbor>> rows;

  std::size_t pair_count() const;
  bool operator==(const NeighborTable&) const = default;
};

// w_ij = p_i p_j for every stored pair, laid out like the table rows.
struct WeightTable {
  std::vector<std::vector<double>> rows;

  bool operator==(const WeightTable&) const = default;
};

struct WeightedDigraph {
  struct Arc {
    std::uint32_t to;
    double weight;
  };
  std::vector<std::vector<Arc>> out;

  std::size_t size() const { return out.size(); }
};

// Observed transitions weighted by the mean holding time of the source state.
WeightedDigraph mpt_graph(const TransitionGraph& tg, const StateSpace& ss);

// k smallest shortest-path lengths from each source. Ties on distance go to
// the smaller id. Unreachable states are omitted.
NeighborTable mpt_knn(const WeightedDigraph& g, std::span<const std::size_t> sources, std::size_t k);
NeighborTable mpt_knn(const WeightedDigraph& g, std::size_t k);  // all states as sources

// Adds the reverse of every stored pair, keeping the smaller distance when
// both directions are present. Rows may grow beyond k.
NeighborTable symmetrize(const NeighborTable& t);

WeightTable importance_weights(const NeighborTable& t, std::span<const double> probability);

// Strict upper triangles of structure adjacency matrices packed as bits. The
// L1 distance of the full flattened matrices is twice the popcount of the
// XOR, since the matrices are symmetric with zero diagonals.
class PackedAdjacency {
 public:
  explicit PackedAdjacency(std::span<const StateGraph> graphs);

  std::size_t size() const { return count_; }
  std::size_t nodes() const { return nodes_; }
  std::size_t distance(std::size_t a, std::size_t b) const;

 private:
  std::size_t count_ = 0;
  std::size_t nodes_ = 0;
  std::size_t words_ = 0;
  std::vector<std::uint64_t> bits_;
};

enum class GedSearch { Exact, RandomProjection, Auto };

struct ForestConfig {
  std::size_t trees = 16;
  std::size_t leaf_size = 32;
  std::size_t search_k = 0;  // candidate budget per query; 0 means trees * k
  std::uint64_t seed = 0;
};

// Below this many states Auto means Exact.
inline constexpr std::size_t kExactSearchLimit = 5000;

NeighborTable ged_knn(std::span<const StateGraph> graphs, std::size_t k, GedSearch mode,
                      const ForestConfig& forest = {});

// Random-hyperplane forest over packed adjacency. Each split separates the
// points nearer one random pivot from those nearer another, which for 0/1
// vectors is the hyperplane bisecting the two pivots.
class ProjectionForest {
 public:
  ProjectionForest(const PackedAdjacency& data, const ForestConfig& config);

  // Candidate ids (deduplicated, unsorted) for a query point of the index.
  std::vector<std::uint32_t> candidates(std::size_t query, std::size_t budget) const;
  std::size_t tree_count() const { return roots_.size(); }

 private:
  struct Node {
    std::uint32_t pivot_a = 0;
    std::uint32_t pivot_b = 0;
    std::int32_t left = -1;  // -1 marks a leaf
    std::int32_t right = -1;
    std::vector<std::uint32_t> items;
  };

  std::int32_t build(std::vector<std::uint32_t> items, std::uint64_t& state);

  const PackedAdjacency& data_;
  ForestConfig config_;
  std::vector<Node> nodes_;
  std::vector<std::int32_t> roots_;
};

std::string_view to_string(NeighborMetric m);

nlohmann::json to_json(const NeighborTable& t, const WeightTable* weights = nullptr);
NeighborTable neighbor_table_from_json(const nlohmann::json& j, WeightTable* weights = nullptr);

// Compact binary: "VDNT", u32 version, u8 metric, u8 has_weights, u16 zero,
// u32 k, u32 rows; per row u32 count then count * (u32 id, f64 distance) and,
// with weights, count * f64. All little-endian.
std::string to_binary(const NeighborTable& t, const WeightTable* weights = nullptr);
NeighborTable neighbor_table_from_binary(std::string_view bytes, WeightTable* weights = nullptr);

}  // namespace vida
