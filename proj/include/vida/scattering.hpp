// Geometric scattering of structure graphs.
//
// The lazy walk P = (I + A D^-1) / 2 gives band-pass wavelets
// Psi_j = P^(2^(j-1)) - P^(2^j) for j = 1..J and a low-pass P^t. Every node
// Dirac is used as an input signal, so each filter's responses form an
// L x L matrix whose column k is the response to the Dirac at node k.
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "vida/dp.hpp"
#include "vida/error.hpp"

namespace vida {

enum class ScatteringErrorKind { InvalidConfig, IsolatedNode, ShapeMismatch };
using ScatteringError = KindedError<ScatteringErrorKind>;

enum class Aggregation { NodeWise, Moments };

struct ScatteringConfig {
  int scales = 4;          // J
  int lowpass_power = 16;  // t, at least 2^J
  int order = 1;           // 1 or 2
  Aggregation aggregation = Aggregation::NodeWise;
  std::vector<int> moments{1, 2, 3, 4};  // used by Moments

  void validate() const;
};

struct FilterSpec {
  enum class Kind { LowPass, Band, Band2 };
  Kind kind = Kind::LowPass;
  int scale = 0;        // j for Band, inner j for Band2
  int outer_scale = 0;  // j' for Band2

  std::string name() const;
};

// Which filter, signal and node/moment each slot of a scattering vector holds.
// Values are filter-major, then signal (Dirac node), then node or moment.
struct ScatteringLayout {
  std::size_t nodes = 0;
  std::vector<FilterSpec> filters;
  Aggregation aggregation = Aggregation::NodeWise;
  std::vector<int> moments;

  std::size_t per_signal() const { return aggregation == Aggregation::NodeWise ? nodes : moments.size(); }
  std::size_t size() const { return filters.size() * nodes * per_signal(); }
  nlohmann::json to_json() const;
};

struct ScatteringVector {
  std::vector<double> values;
  ScatteringLayout layout;
};

ScatteringLayout scattering_layout(std::size_t nodes, const ScatteringConfig& c);

// Column-stochastic lazy random walk.
Eigen::MatrixXd lazy_walk(const StateGraph& g);

// Signed wavelets Psi_1..Psi_J of a lazy walk.
std::vector<Eigen::MatrixXd> wavelet_bank(const Eigen::MatrixXd& p, int scales);

ScatteringVector scatter(const StateGraph& g, const ScatteringConfig& c);

// Row-major n x m feature matrix, one scattering vector per row.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;
  ScatteringLayout layout;

  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  Eigen::MatrixXd to_eigen() const;
};

// Graphs must share one node count. Rows are computed in parallel.
FeatureMatrix scatter_all(std::span<const StateGraph> graphs, const ScatteringConfig& c);

// Raw little-endian f64 row-major payload plus a JSON sidecar (<path>.json).
void write_features(const std::string& path, const FeatureMatrix& f);
FeatureMatrix read_features(const std::string& path);
std::string features_to_csv(const FeatureMatrix& f);

}  // namespace vida
