// Dense continuous-time Markov chain kinetics for desk-scale state spaces
// (a few thousand states at most): equilibrium, detailed balance, the
// propagator, mean first passage times, and Gillespie sampling.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "vida/error.hpp"

namespace vida {

enum class CtmcErrorKind { InvalidRateMatrix, InvalidArgument, AsymmetricSupport, AbsorbingState, Unreachable };
using CtmcError = KindedError<CtmcErrorKind>;

// Generator matrix K in s^-1: off-diagonal rates >= 0, rows summing to zero.
class RateMatrix {
 public:
  RateMatrix() = default;
  explicit RateMatrix(Eigen::MatrixXd k);

  // Takes off-diagonal rates and fills the diagonal; the input diagonal is ignored.
  static RateMatrix from_rates(Eigen::MatrixXd rates);

  const Eigen::MatrixXd& matrix() const { return k_; }
  Eigen::Index size() const { return k_.rows(); }
  double rate(Eigen::Index from, Eigen::Index to) const { return k_(from, to); }
  double exit_rate(Eigen::Index state) const { return -k_(state, state); }

 private:
  Eigen::MatrixXd k_;
};

struct EnergyModel {
  std::vector<double> energies;  // kcal/mol
  double beta = 1.0;             // mol/kcal
};

// Gibbs-Boltzmann distribution over the listed states.
Eigen::VectorXd boltzmann(const EnergyModel& e);

struct BalanceViolation {
  Eigen::Index from;
  Eigen::Index to;
  double observed_ratio;  // K(from,to) / K(to,from)
  double expected_ratio;  // exp(-beta (G_to - G_from))
};

struct BalanceReport {
  std::size_t pairs_checked = 0;
  std::vector<BalanceViolation> violations;
  bool passed() const { return violations.empty(); }
};

// Checks every connected pair; a violation is |observed - expected| > tol * max(1, expected).
// Throws AsymmetricSupport when a rate is positive but its reverse is zero.
BalanceReport check_detailed_balance(const RateMatrix& k, const EnergyModel& e, double tol = 1e-9);

// Embedded jump chain P(x,x') = K(x,x') / -K(x,x). Absorbing rows are an
// error unless allowed, in which case they become self loops.
Eigen::MatrixXd transition_probabilities(const RateMatrix& k, bool allow_absorbing = false);

// Matrix exponential by scaling and squaring with a diagonal Pade core.
Eigen::MatrixXd expm(const Eigen::MatrixXd& a);

// Q_t = exp(tK).
Eigen::MatrixXd propagator(const RateMatrix& k, double t);

// Mean first passage times into `targets` (seconds); zero on the targets.
Eigen::VectorXd mfpt(const RateMatrix& k, std::span<const std::size_t> targets);

// Expected first passage time from an initial distribution.
double mfpt_from(const Eigen::VectorXd& initial, const Eigen::VectorXd& tau);

struct SsaPath {
  std::vector<std::size_t> states;
  std::vector<double> times;  // seconds, times[0] == 0
  bool reached_stop = false;
};

// Gillespie simulation from an initial state drawn from `initial`, stopping on
// entry to `stop` or after max_steps transitions. Bit-identical for a given seed.
SsaPath ssa_sample(const RateMatrix& k, const Eigen::VectorXd& initial, std::span<const std::size_t> stop,
                   std::uint64_t seed, std::size_t max_steps);

nlohmann::json to_json(const RateMatrix& k);
RateMatrix rate_matrix_from_json(const nlohmann::json& j);
std::string to_csv(const RateMatrix& k);
RateMatrix rate_matrix_from_csv(const std::string& text);

}  // namespace vida
