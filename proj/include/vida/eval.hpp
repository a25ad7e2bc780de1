// Embedding quality metrics and landscape analysis: trajectory distortion,
// local preservation, DBSCAN with an elbow eps, time filtering and traps.
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "vida/dp.hpp"
#include "vida/error.hpp"
#include "vida/multistrand_io.hpp"

namespace vida {

enum class EvalErrorKind { ZeroDiameter, InvalidArgument, MissingState };
using EvalError = KindedError<EvalErrorKind>;

// Above this many points the diameter of a planar embedding is taken from its
// convex hull.
inline constexpr Eigen::Index kExactDiameterLimit = 20000;

double diameter(const Eigen::MatrixXd& points);

enum class StepCounting { PerOccurrence, Unique };

// Mean embedded length of consecutive trajectory steps over the diameter.
// PerOccurrence counts every step; Unique counts each directed (i, j) once.
double avg_distortion(const Eigen::MatrixXd& coords, std::span<const Trajectory> trajectories,
                      StepCounting counting = StepCounting::PerOccurrence);

struct LocalPreservation {
  std::vector<std::size_t> ks;
  std::vector<double> energy_diff;  // one value per K
  std::vector<double> ged_diff;     // empty when no structures were supplied
};

// For each K: per state, the mean |dG_i - dG_j| and mean GED over its K
// nearest embedded neighbours (Euclidean, ties by id), averaged over states.
LocalPreservation local_preservation(const Eigen::MatrixXd& coords, std::span<const double> energies,
                                     std::span<const StateGraph> structures, std::span<const std::size_t> ks);

struct MetricsReport {
  double avg_distortion = 0.0;
  StepCounting counting = StepCounting::PerOccurrence;
  LocalPreservation local;
  nlohmann::json config;
};

nlohmann::json to_json(const MetricsReport& r);
std::string to_csv(const MetricsReport& r);

inline constexpr int kNoise = -1;

// Labels are cluster ids 0.. in order of each cluster's lowest core point, or
// kNoise. Core points have at least min_samples points (self included) within
// eps; a border point joins the lowest-id cluster among its core neighbours.
std::vector<int> dbscan(const Eigen::MatrixXd& points, double eps, std::size_t min_samples);

struct ElbowResult {
  double eps = 0.0;
  std::vector<double> curve;  // sorted k-th neighbour distances
  std::size_t index = 0;      // position of eps on the curve
  bool degenerate = false;    // no knee; eps is the curve median
};

ElbowResult elbow_eps(const Eigen::MatrixXd& points, std::size_t k = 4);

// Ids of states whose cumulative holding time is at least threshold seconds.
std::vector<std::size_t> filter_by_cumulative_time(const StateSpace& ss, double threshold);

struct ClusterResult {
  std::vector<std::size_t> state_ids;  // the clustered states, in point order
  std::vector<int> labels;             // parallel to state_ids
  int cluster_count = 0;
};

ClusterResult cluster_states(const Eigen::MatrixXd& coords, std::span<const std::size_t> state_ids, double eps,
                             std::size_t min_samples);

struct TrapRecord {
  int cluster = 0;
  std::size_t state_id = 0;
  std::string dp;
  double energy = 0.0;
  double cumulative_time = 0.0;
};

// Minimum free energy member of every cluster (ties to the smaller state id),
// ordered by cumulative time, longest first.
std::vector<TrapRecord> kinetic_traps(const ClusterResult& cr, const StateSpace& ss);

nlohmann::json to_json(const TrapRecord& t);
std::string traps_to_csv(std::span<const TrapRecord> traps);

}  // namespace vida
