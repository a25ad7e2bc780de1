#include <cmath>

#include "doctest.h"
#include "support/oracles.hpp"
#include "vida/ctmc.hpp"

using namespace vida;

namespace {

RateMatrix chain3() {
  Eigen::MatrixXd r(3, 3);
  r << 0, 1, 0, 1, 0, 1, 0, 1, 0;
  return RateMatrix::from_rates(r);
}

}  // namespace

TEST_SUITE("ctmc") {
  TEST_CASE("rate matrix validation") {
    Eigen::MatrixXd bad(2, 2);
    bad << -1, 1, 1, -2;
    CHECK_THROWS_AS(RateMatrix{bad}, CtmcError);
    bad << 1, -1, 1, -1;
    CHECK_THROWS_AS(RateMatrix{bad}, CtmcError);
    const auto k = chain3();
    CHECK(k.exit_rate(1) == 2.0);
    CHECK(k.matrix().rowwise().sum().cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("boltzmann") {
    CHECK(boltzmann({{1.0, 1.0}, 1.0}).isApprox(Eigen::Vector2d(0.5, 0.5)));
    const auto pi = boltzmann({{0.0, -std::log(2.0)}, 1.0});
    CHECK(pi(0) == doctest::Approx(1.0 / 3).epsilon(1e-14));
    CHECK(pi(1) == doctest::Approx(2.0 / 3).epsilon(1e-14));
    CHECK(boltzmann({{5.0}, 1.0})(0) == 1.0);
    const auto big = boltzmann({{-2000.0, -2001.0}, 1.0});
    CHECK(std::isfinite(big(0)));
    CHECK(big.sum() == doctest::Approx(1.0));
  }

  TEST_CASE("detailed balance fixtures") {
    Eigen::MatrixXd r(2, 2);
    r << 0, 1, 0.5, 0;
    const EnergyModel e{{0.0, -std::log(2.0)}, 1.0};
    CHECK(check_detailed_balance(RateMatrix::from_rates(r), e).passed());
    r << 0, 1, 1, 0;
    const auto report = check_detailed_balance(RateMatrix::from_rates(r), e);
    CHECK_FALSE(report.passed());
    REQUIRE(report.violations.size() == 1);
    CHECK(report.violations[0].expected_ratio == doctest::Approx(2.0));
    CHECK(check_detailed_balance(RateMatrix::from_rates(r), {{0.0, 0.0}, 1.0}).passed());
    r << 0, 1, 0, 0;
    CHECK_THROWS_AS(check_detailed_balance(RateMatrix::from_rates(r), e), CtmcError);
  }

  TEST_CASE("embedded jump chain") {
    Eigen::MatrixXd r(2, 2);
    r << 0, 2, 1, 0;
    CHECK(transition_probabilities(RateMatrix::from_rates(r))(0, 1) == 1.0);
    Eigen::MatrixXd r3(3, 3);
    r3 << 0, 1, 3, 1, 0, 1, 1, 1, 0;
    const auto p = transition_probabilities(RateMatrix::from_rates(r3));
    CHECK(p(0, 1) == 0.25);
    CHECK(p(0, 2) == 0.75);
    CHECK(p(1, 0) == 0.5);
    Eigen::MatrixXd absorbing(2, 2);
    absorbing << 0, 1, 0, 0;
    CHECK_THROWS_AS(transition_probabilities(RateMatrix::from_rates(absorbing)), CtmcError);
    CHECK(transition_probabilities(RateMatrix::from_rates(absorbing), true)(1, 1) == 1.0);
  }

  TEST_CASE("propagator closed forms") {
    Eigen::MatrixXd r(2, 2);
    r << 0, 1, 1, 0;
    const auto k = RateMatrix::from_rates(r);
    CHECK(propagator(k, 0.0).isApprox(Eigen::MatrixXd::Identity(2, 2)));
    const double e = std::exp(-1.0);
    Eigen::Matrix2d want;
    want << 1 + e, 1 - e, 1 - e, 1 + e;
    CHECK((propagator(k, 0.5) - 0.5 * want).cwiseAbs().maxCoeff() <= 1e-14);
    r << 0, 3, 0.7, 0;
    CHECK((propagator(RateMatrix::from_rates(r), 1.3) - oracle::two_state_propagator(3, 0.7, 1.3)).cwiseAbs().maxCoeff() <= 1e-13);
  }

  TEST_CASE("expm against eigendecomposition and stationarity") {
    oracle::Rng rng(11);
    for (int trial = 0; trial < 30; ++trial) {
      const auto c = oracle::random_reversible_chain(rng, 2 + oracle::below(rng, 9));
      const RateMatrix k(c.rates);
      for (double t : {0.01, 0.7, 5.0, 80.0}) {
        const Eigen::MatrixXd q = propagator(k, t);
        CHECK((q - oracle::expm_reversible(c, t)).cwiseAbs().maxCoeff() <= 1e-9);
        CHECK((q.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-9);
        CHECK(q.minCoeff() >= -1e-12);
      }
      const EnergyModel e{std::vector<double>(c.energies.data(), c.energies.data() + c.energies.size()), c.beta};
      REQUIRE(check_detailed_balance(k, e).passed());
      const Eigen::RowVectorXd pi = boltzmann(e).transpose();
      CHECK((pi * propagator(k, 0.9) - pi).cwiseAbs().maxCoeff() <= 1e-8);
      const Eigen::MatrixXd far = propagator(k, 500.0);
      for (Eigen::Index i = 0; i < far.rows(); ++i) CHECK((far.row(i) - pi).cwiseAbs().maxCoeff() <= 1e-6);
    }
  }

  TEST_CASE("expm of large and nilpotent matrices") {
    Eigen::MatrixXd n = Eigen::MatrixXd::Zero(3, 3);
    n(0, 1) = 1.0;
    n(1, 2) = 1.0;
    Eigen::MatrixXd want = Eigen::MatrixXd::Identity(3, 3) + n;
    want(0, 2) = 0.5;
    CHECK((expm(n) - want).cwiseAbs().maxCoeff() <= 1e-15);
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
    d(0, 0) = 30.0;
    d(1, 1) = -30.0;
    CHECK(expm(d)(0, 0) == doctest::Approx(std::exp(30.0)).epsilon(1e-13));
  }

  TEST_CASE("mfpt hand cases") {
    Eigen::MatrixXd r(2, 2);
    r << 0, 2, 1, 0;
    const std::size_t second[] = {1};
    CHECK(mfpt(RateMatrix::from_rates(r), second)(0) == doctest::Approx(0.5).epsilon(1e-15));
    const std::size_t target[] = {2};
    const auto tau = mfpt(chain3(), target);
    CHECK(std::abs(tau(0) - 3.0) <= 1e-12);
    CHECK(std::abs(tau(1) - 2.0) <= 1e-12);
    CHECK(tau(2) == 0.0);
    CHECK(mfpt_from(Eigen::Vector3d(0.5, 0.5, 0.0), tau) == doctest::Approx(2.5));
  }

  TEST_CASE("mfpt errors") {
    Eigen::MatrixXd r(3, 3);
    r << 0, 1, 0, 1, 0, 0, 0, 1, 0;  // 0 and 1 never reach 2
    const std::size_t target[] = {2};
    CHECK_THROWS_AS(mfpt(RateMatrix::from_rates(r), target), CtmcError);
    CHECK_THROWS_AS(mfpt(chain3(), std::span<const std::size_t>{}), CtmcError);
  }

  TEST_CASE("ssa determinism and stop handling") {
    const auto k = chain3();
    const std::size_t stop[] = {2};
    const Eigen::Vector3d start(1, 0, 0);
    const auto a = ssa_sample(k, start, stop, 42, 1000);
    const auto b = ssa_sample(k, start, stop, 42, 1000);
    CHECK(a.states == b.states);
    CHECK(a.times == b.times);
    CHECK(a.reached_stop);
    CHECK(a.states.back() == 2);
    const auto at_stop = ssa_sample(k, Eigen::Vector3d(0, 0, 1), stop, 1, 1000);
    CHECK(at_stop.states.size() == 1);
    CHECK(at_stop.times[0] == 0.0);
    const auto cut = ssa_sample(k, start, stop, 42, 0);
    CHECK_FALSE(cut.reached_stop);
  }

  TEST_CASE("ssa occupancy approaches boltzmann") {
    oracle::Rng rng(5);
    const auto c = oracle::random_reversible_chain(rng, 4);
    const RateMatrix k(c.rates);
    const auto path = ssa_sample(k, Eigen::Vector4d(1, 0, 0, 0), std::span<const std::size_t>{}, 9, 200000);
    Eigen::Vector4d occupancy = Eigen::Vector4d::Zero();
    for (std::size_t i = 0; i + 1 < path.states.size(); ++i)
      occupancy(static_cast<Eigen::Index>(path.states[i])) += path.times[i + 1] - path.times[i];
    occupancy /= occupancy.sum();
    const EnergyModel e{std::vector<double>(c.energies.data(), c.energies.data() + 4), 1.0};
    CHECK((occupancy - boltzmann(e)).cwiseAbs().maxCoeff() < 0.02);
  }

  TEST_CASE("serialization round trips") {
    oracle::Rng rng(3);
    const RateMatrix k(oracle::random_reversible_chain(rng, 5).rates);
    CHECK(rate_matrix_from_json(to_json(k)).matrix() == k.matrix());
    CHECK(rate_matrix_from_csv(to_csv(k)).matrix() == k.matrix());
    CHECK_THROWS_AS(rate_matrix_from_csv("1,2\n3\n"), CtmcError);
  }
}
