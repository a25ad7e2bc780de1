// Low-dimensional embeddings of state spaces: PHATE, metric MDS by SMACOF,
// and a direct stress embedder for passage-time and edit-distance targets.
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "vida/distances.hpp"
#include "vida/error.hpp"

namespace vida {

enum class EmbedErrorKind { InvalidConfig, InvalidInput, DegenerateKernel, MissingState, RankDeficient };
using EmbedError = KindedError<EmbedErrorKind>;

struct Provenance {
  std::string method;
  std::string config_hash;
  std::string input_hash;

  bool operator==(const Provenance&) const = default;
};

// Row i holds the coordinates of state i.
struct Embedding {
  Eigen::MatrixXd coords;
  Provenance provenance;
};

// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);
std::string hash_matrix(const Eigen::MatrixXd& m);

// ---- metric MDS -----------------------------------------------------------

enum class MdsInit { Classical, Random };

struct MdsResult {
  Eigen::MatrixXd coords;
  std::vector<double> stress_trace;  // raw stress, starting with the initial layout
  int iterations = 0;
  bool converged = false;
};

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& points);

// Raw stress sum_{i<j} (||x_i - x_j|| - D_ij)^2.
double raw_stress(const Eigen::MatrixXd& coords, const Eigen::MatrixXd& dissimilarities);

// Torgerson scaling; eigenvector signs fixed so each column's largest-magnitude entry is positive.
Eigen::MatrixXd classical_mds(const Eigen::MatrixXd& dissimilarities, int dim);

// Guttman-transform iterations until the relative stress decrease drops below tol.
MdsResult smacof_mds(const Eigen::MatrixXd& dissimilarities, int dim, int max_iter, double tol, std::uint64_t seed,
                     MdsInit init = MdsInit::Classical);

// ---- PHATE ----------------------------------------------------------------

struct PhateConfig {
  std::size_t n_neighbors = 5;
  double decay = 40.0;
  std::size_t n_landmarks = 2000;
  std::optional<int> t;  // empty selects t at the entropy knee
  int t_max = 100;
  int out_dim = 2;
  int mds_max_iter = 300;
  double mds_tol = 1e-9;
  std::uint64_t seed = 0;

  void validate() const;
  std::string describe() const;
};

struct PhateResult {
  Embedding embedding;
  int t = 1;
  std::vector<double> entropy;  // H(t) for t = 1..t_max (empty when t is fixed)
  bool used_landmarks = false;
  MdsResult mds;
};

// Symmetrised alpha-decay affinities with bandwidth equal to each point's
// distance to its n_neighbors-th nearest neighbour.
Eigen::MatrixXd alpha_decay_kernel(const Eigen::MatrixXd& distances, std::size_t n_neighbors, double decay);

Eigen::MatrixXd row_normalize(const Eigen::MatrixXd& m);

// H(t) over t = 1..t_max from an operator spectrum (magnitudes).
std::vector<double> von_neumann_entropy(const Eigen::VectorXd& spectrum, int t_max);

// Spectrum magnitudes of the Markov operator of a symmetric kernel, via its
// symmetric conjugate D^-1/2 K D^-1/2.
Eigen::VectorXd diffusion_spectrum(const Eigen::MatrixXd& kernel);

// Knee of the entropy curve as a diffusion time in [1, t_max]; flat curves give 1.
int select_diffusion_time(std::span<const double> entropy);

Eigen::MatrixXd matrix_power(const Eigen::MatrixXd& m, int t);

// Pairwise L2 distances between rows of -log(P^t + 1e-7).
Eigen::MatrixXd potential_distances(const Eigen::MatrixXd& diffused);

PhateResult phate(const Eigen::MatrixXd& features, const PhateConfig& c);
PhateResult phate_from_distances(const Eigen::MatrixXd& distances, const PhateConfig& c);

// ---- stress losses --------------------------------------------------------

// sum over stored pairs of w_ij (||z_i - z_j|| - t_ij)^2.
double eval_l_mpt(const Eigen::MatrixXd& z, const NeighborTable& nbrs, const WeightTable& w);
// Same with unit weights.
double eval_l_ged(const Eigen::MatrixXd& z, const NeighborTable& nbrs);

enum class StressInit { PhateInit, Random };

struct StressConfig {
  double mpt_weight = 0.0004;   // delta
  double ged_weight = 0.00004;  // epsilon
  double learning_rate = 1.0;   // first trial step of the line search
  int max_iter = 2000;
  double tol = 1e-12;           // relative loss decrease that counts as converged
  StressInit init = StressInit::Random;
  std::uint64_t seed = 0;
  int out_dim = 2;
  bool normalize_targets = false;  // min-max scale each metric's targets to [0, 1]

  void validate() const;
  std::string describe() const;
};

struct StressTerm {
  std::uint32_t i;
  std::uint32_t j;
  double target;
  double weight;
};

// delta * L_mpt + epsilon * L_ged flattened into weighted pair terms.
class StressObjective {
 public:
  StressObjective(std::size_t states, const NeighborTable* mpt, const WeightTable* weights, const NeighborTable* ged,
                  const StressConfig& c);

  std::size_t states() const { return states_; }
  std::span<const StressTerm> terms() const { return terms_; }
  double value(const Eigen::MatrixXd& z) const;
  // Returns the value; writes the analytic gradient (zero contribution for coincident points).
  double value_and_gradient(const Eigen::MatrixXd& z, Eigen::MatrixXd& gradient) const;

 private:
  std::size_t states_;
  std::vector<StressTerm> terms_;
};

struct StressResult {
  Embedding embedding;
  std::vector<double> loss_trace;
  int iterations = 0;
  bool converged = false;
};

StressResult stress_embed(const NeighborTable& mpt, const WeightTable& weights, const NeighborTable& ged,
                          const StressConfig& c, std::size_t states,
                          const std::optional<Eigen::MatrixXd>& init = std::nullopt);

struct ProbeResult {
  Eigen::VectorXd coefficients;
  double intercept = 0.0;
  double residual = 0.0;  // sum of squared errors
};

// Least-squares affine fit y ~ a^T z + b.
ProbeResult energy_probe(const Eigen::MatrixXd& z, std::span<const double> y);

std::string embedding_to_csv(const Embedding& e);
nlohmann::json to_json(const Embedding& e);
Embedding embedding_from_json(const nlohmann::json& j);

}  // namespace vida
