// The viewer bundle: one JSON document carrying everything the landscape
// explorer renders (states with coordinates, trajectories, clusters).
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vida/dp.hpp"
#include "vida/embed.hpp"
#include "vida/error.hpp"
#include "vida/eval.hpp"
#include "vida/multistrand_io.hpp"

namespace vida {

inline constexpr const char* kBundleSchemaVersion = "1";
inline constexpr int kFilteredOut = -2;  // cluster label of states excluded by the time filter

enum class BundleErrorKind { SchemaMismatch, InvalidInput };
using BundleError = KindedError<BundleErrorKind>;

struct BundleState {
  std::size_t id = 0;
  std::string dp;
  double energy = 0.0;
  double p = 0.0;
  double cumulative_time = 0.0;
  double x = 0.0;
  double y = 0.0;
};

struct BundleTrajectory {
  std::size_t id = 0;
  std::string outcome;
  std::vector<std::size_t> states;
  std::vector<double> times;
};

struct BundleClusters {
  double eps = 0.0;
  std::size_t min_samples = 4;
  double threshold = 0.0;
  std::vector<int> labels;  // per state: cluster id, kNoise, or kFilteredOut
  std::vector<TrapRecord> traps;
};

struct ViewerBundle {
  std::string reaction;
  std::vector<Strand> strands;
  Provenance embedding;
  std::vector<BundleState> states;
  std::vector<BundleTrajectory> trajectories;
  std::optional<BundleClusters> clusters;
};

// Uses the first two embedding columns as x, y.
ViewerBundle make_bundle(const Dataset& d, const Embedding& e, std::string reaction);

// Per-state labels from a clustering of a subset of states.
BundleClusters make_bundle_clusters(const ClusterResult& cr, std::span<const TrapRecord> traps, std::size_t states,
                                    double eps, std::size_t min_samples, double threshold);

nlohmann::json to_json(const ViewerBundle& b);
// Validates first; throws BundleError listing every problem found.
ViewerBundle bundle_from_json(const nlohmann::json& j);

// Structural and referential checks. Empty means valid.
std::vector<std::string> validate_bundle(const nlohmann::json& j);

}  // namespace vida
