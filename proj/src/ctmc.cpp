#include "vida/ctmc.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

namespace vida {

namespace {

double row_tolerance(const Eigen::MatrixXd& k, Eigen::Index i) {
  return 1e-12 * std::max(1.0, k.row(i).cwiseAbs().sum());
}

// Uniform double in [0, 1) from the top 53 bits.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

RateMatrix::RateMatrix(Eigen::MatrixXd k) : k_(std::move(k)) {
  if (k_.rows() != k_.cols() || k_.rows() == 0)
    throw CtmcError(CtmcErrorKind::InvalidRateMatrix, "rate matrix must be square and non-empty");
  for (Eigen::Index i = 0; i < k_.rows(); ++i) {
    for (Eigen::Index j = 0; j < k_.cols(); ++j) {
      if (!std::isfinite(k_(i, j)))
        throw CtmcError(CtmcErrorKind::InvalidRateMatrix, "rate matrix has a non-finite entry");
      if (i != j && k_(i, j) < 0.0)
        throw CtmcError(CtmcErrorKind::InvalidRateMatrix,
                        "negative off-diagonal rate at (" + std::to_string(i) + "," + std::to_string(j) + ")");
    }
    if (std::abs(k_.row(i).sum()) > row_tolerance(k_, i))
      throw CtmcError(CtmcErrorKind::InvalidRateMatrix, "row " + std::to_string(i) + " does not sum to zero");
  }
}

RateMatrix RateMatrix::from_rates(Eigen::MatrixXd rates) {
  for (Eigen::Index i = 0; i < rates.rows(); ++i) {
    rates(i, i) = 0.0;
    rates(i, i) = -rates.row(i).sum();
  }
  return RateMatrix(std::move(rates));
}

Eigen::VectorXd boltzmann(const EnergyModel& e) {
  if (!(e.beta > 0.0)) throw CtmcError(CtmcErrorKind::InvalidArgument, "beta must be positive");
  if (e.energies.empty()) throw CtmcError(CtmcErrorKind::InvalidArgument, "no energies");
  for (double g : e.energies)
    if (!std::isfinite(g)) throw CtmcError(CtmcErrorKind::InvalidArgument, "non-finite energy");
  const double g_min = *std::min_element(e.energies.begin(), e.energies.end());
  Eigen::VectorXd pi(static_cast<Eigen::Index>(e.energies.size()));
  for (std::size_t i = 0; i < e.energies.size(); ++i)
    pi(static_cast<Eigen::Index>(i)) = std::exp(-e.beta * (e.energies[i] - g_min));
  return pi / pi.sum();
}

BalanceReport check_detailed_balance(const RateMatrix& k, const EnergyModel& e, double tol) {
  if (static_cast<Eigen::Index>(e.energies.size()) != k.size())
    throw CtmcError(CtmcErrorKind::InvalidArgument, "energy count does not match rate matrix size");
  if (!(e.beta > 0.0)) throw CtmcError(CtmcErrorKind::InvalidArgument, "beta must be positive");
  BalanceReport report;
  const auto& m = k.matrix();
  for (Eigen::Index i = 0; i < k.size(); ++i)
    for (Eigen::Index j = i + 1; j < k.size(); ++j) {
      const double fwd = m(i, j);
      const double rev = m(j, i);
      if (fwd == 0.0 && rev == 0.0) continue;
      if (fwd == 0.0 || rev == 0.0)
        throw CtmcError(CtmcErrorKind::AsymmetricSupport,
                        "rate between " + std::to_string(i) + " and " + std::to_string(j) + " is one-directional");
      ++report.pairs_checked;
      const double observed = fwd / rev;
      const double expected =
          std::exp(-e.beta * (e.energies[static_cast<std::size_t>(j)] - e.energies[static_cast<std::size_t>(i)]));
      if (std::abs(observed - expected) > tol * std::max(1.0, expected))
        report.violations.push_back({i, j, observed, expected});
    }
  return report;
}

Eigen::MatrixXd transition_probabilities(const RateMatrix& k, bool allow_absorbing) {
  const auto& m = k.matrix();
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double exit = -m(i, i);
    if (exit <= 0.0) {
      if (!allow_absorbing)
        throw CtmcError(CtmcErrorKind::AbsorbingState, "state " + std::to_string(i) + " has no exits");
      p(i, i) = 1.0;
      continue;
    }
    p.row(i) = m.row(i) / exit;
    p(i, i) = 0.0;
  }
  return p;
}

namespace {

template <std::size_t N>
Eigen::MatrixXd pade(const Eigen::MatrixXd& a, const std::array<double, N>& b) {
  // Degree N-1 diagonal approximant: U collects odd terms, V even terms.
  const auto n = a.rows();
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd a2 = a * a;
  Eigen::MatrixXd u_inner = b[1] * id;
  Eigen::MatrixXd v = b[0] * id;
  Eigen::MatrixXd power = id;
  for (std::size_t k = 2; k < N; k += 2) {
    power = power * a2;
    v += b[k] * power;
    if (k + 1 < N) u_inner += b[k + 1] * power;
  }
  const Eigen::MatrixXd u = a * u_inner;
  return (v - u).partialPivLu().solve(v + u);
}

Eigen::MatrixXd pade13(const Eigen::MatrixXd& a) {
  static constexpr std::array<double, 14> b = {
      64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0, 129060195264000.0,
      10559470521600.0,    670442572800.0,      33522128640.0,      1323241920.0,       40840800.0,
      960960.0,            16380.0,             182.0,              1.0};
  const auto n = a.rows();
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd a2 = a * a;
  const Eigen::MatrixXd a4 = a2 * a2;
  const Eigen::MatrixXd a6 = a4 * a2;
  const Eigen::MatrixXd u =
      a * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
  const Eigen::MatrixXd v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
  return (v - u).partialPivLu().solve(v + u);
}

}  // namespace

Eigen::MatrixXd expm(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw CtmcError(CtmcErrorKind::InvalidArgument, "expm of a non-square matrix");
  if (a.size() == 0) return a;
  const double norm = a.cwiseAbs().colwise().sum().maxCoeff();
  if (!std::isfinite(norm)) throw CtmcError(CtmcErrorKind::InvalidArgument, "expm of a non-finite matrix");

  // Backward-error bounds for degrees 3, 5, 7, 9, 13 in double precision.
  if (norm <= 1.495585217958292e-2)
    return pade(a, std::array<double, 4>{120.0, 60.0, 12.0, 1.0});
  if (norm <= 2.539398330063230e-1)
    return pade(a, std::array<double, 6>{30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0});
  if (norm <= 9.504178996162932e-1)
    return pade(a, std::array<double, 8>{17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0});
  if (norm <= 2.097847961257068e0)
    return pade(a, std::array<double, 10>{17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
                                          2162160.0, 110880.0, 3960.0, 90.0, 1.0});

  constexpr double theta13 = 5.371920351148152;
  const int squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / theta13))));
  Eigen::MatrixXd r = pade13(a / std::ldexp(1.0, squarings));
  for (int s = 0; s < squarings; ++s) r = r * r;
  return r;
}

Eigen::MatrixXd propagator(const RateMatrix& k, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw CtmcError(CtmcErrorKind::InvalidArgument, "time must be finite and >= 0");
  if (t == 0.0) return Eigen::MatrixXd::Identity(k.size(), k.size());
  return expm(t * k.matrix());
}

Eigen::VectorXd mfpt(const RateMatrix& k, std::span<const std::size_t> targets) {
  const auto n = static_cast<std::size_t>(k.size());
  if (targets.empty()) throw CtmcError(CtmcErrorKind::InvalidArgument, "empty target set");
  std::vector<char> is_target(n, 0);
  for (auto t : targets) {
    if (t >= n) throw CtmcError(CtmcErrorKind::InvalidArgument, "target state out of range");
    is_target[t] = 1;
  }

  // Backward reachability from the targets.
  const auto& m = k.matrix();
  std::vector<char> reaches(is_target);
  std::vector<std::size_t> frontier(targets.begin(), targets.end());
  while (!frontier.empty()) {
    const auto y = frontier.back();
    frontier.pop_back();
    for (std::size_t x = 0; x < n; ++x)
      if (!reaches[x] && x != y && m(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) > 0.0) {
        reaches[x] = 1;
        frontier.push_back(x);
      }
  }
  for (std::size_t x = 0; x < n; ++x)
    if (!reaches[x]) throw CtmcError(CtmcErrorKind::Unreachable, "state " + std::to_string(x) + " cannot reach the target set");

  std::vector<Eigen::Index> free;
  for (std::size_t x = 0; x < n; ++x)
    if (!is_target[x]) free.push_back(static_cast<Eigen::Index>(x));
  Eigen::VectorXd tau = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  if (free.empty()) return tau;

  const auto f = static_cast<Eigen::Index>(free.size());
  Eigen::MatrixXd a(f, f);
  for (Eigen::Index r = 0; r < f; ++r)
    for (Eigen::Index c = 0; c < f; ++c) a(r, c) = -m(free[r], free[c]);
  const Eigen::VectorXd rhs = Eigen::VectorXd::Ones(f);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) throw CtmcError(CtmcErrorKind::Unreachable, "first passage system is singular");
  const Eigen::VectorXd sol = lu.solve(rhs);
  if (!sol.allFinite()) throw CtmcError(CtmcErrorKind::Unreachable, "first passage system is singular");
  for (Eigen::Index r = 0; r < f; ++r) tau(free[r]) = sol(r);
  return tau;
}

double mfpt_from(const Eigen::VectorXd& initial, const Eigen::VectorXd& tau) {
  if (initial.size() != tau.size()) throw CtmcError(CtmcErrorKind::InvalidArgument, "distribution size mismatch");
  return initial.dot(tau);
}

SsaPath ssa_sample(const RateMatrix& k, const Eigen::VectorXd& initial, std::span<const std::size_t> stop,
                   std::uint64_t seed, std::size_t max_steps) {
  const auto n = static_cast<std::size_t>(k.size());
  if (static_cast<std::size_t>(initial.size()) != n)
    throw CtmcError(CtmcErrorKind::InvalidArgument, "initial distribution size mismatch");
  if ((initial.array() < 0.0).any() || !(initial.sum() > 0.0))
    throw CtmcError(CtmcErrorKind::InvalidArgument, "initial distribution must be non-negative with positive mass");
  std::vector<char> is_stop(n, 0);
  for (auto s : stop) {
    if (s >= n) throw CtmcError(CtmcErrorKind::InvalidArgument, "stop state out of range");
    is_stop[s] = 1;
  }

  std::mt19937_64 rng(seed);
  const auto& m = k.matrix();

  std::size_t state = n - 1;
  {
    const double u = uniform01(rng) * initial.sum();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += initial(static_cast<Eigen::Index>(i));
      if (u < acc) {
        state = i;
        break;
      }
    }
  }

  SsaPath path;
  double time = 0.0;
  path.states.push_back(state);
  path.times.push_back(time);
  for (std::size_t step = 0; step < max_steps; ++step) {
    if (is_stop[state]) break;
    const auto row = static_cast<Eigen::Index>(state);
    const double exit = -m(row, row);
    if (exit <= 0.0) break;
    time += -std::log1p(-uniform01(rng)) / exit;
    const double u = uniform01(rng) * exit;
    double acc = 0.0;
    std::size_t next = state;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == state) continue;
      const double r = m(row, static_cast<Eigen::Index>(j));
      if (r <= 0.0) continue;
      next = j;
      acc += r;
      if (u < acc) break;
    }
    state = next;
    path.states.push_back(state);
    path.times.push_back(time);
  }
  path.reached_stop = is_stop[state] != 0;
  return path;
}

nlohmann::json to_json(const RateMatrix& k) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < k.size(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < k.size(); ++j) row.push_back(k.rate(i, j));
    rows.push_back(std::move(row));
  }
  return {{"kind", "rate_matrix"}, {"units", "1/s"}, {"n", k.size()}, {"rates", rows}};
}

RateMatrix rate_matrix_from_json(const nlohmann::json& j) {
  try {
    const auto n = j.at("n").get<Eigen::Index>();
    const auto& rows = j.at("rates");
    if (static_cast<Eigen::Index>(rows.size()) != n) throw CtmcError(CtmcErrorKind::InvalidRateMatrix, "rate matrix JSON: row count differs from n");
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& row = rows[static_cast<std::size_t>(i)];
      if (static_cast<Eigen::Index>(row.size()) != n) throw CtmcError(CtmcErrorKind::InvalidRateMatrix, "rate matrix JSON: ragged row");
      for (Eigen::Index c = 0; c < n; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return RateMatrix(std::move(m));
  } catch (const nlohmann::json::exception& e) {
    throw CtmcError(CtmcErrorKind::InvalidRateMatrix, std::string("malformed rate matrix JSON: ") + e.what());
  }
}

std::string to_csv(const RateMatrix& k) {
  std::string out;
  char buf[40];
  for (Eigen::Index i = 0; i < k.size(); ++i) {
    for (Eigen::Index j = 0; j < k.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", k.rate(i, j));
      if (j) out += ',';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

RateMatrix rate_matrix_from_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) throw CtmcError(CtmcErrorKind::InvalidRateMatrix, "rate matrix CSV: non-numeric cell '" + cell + "'");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != n)
      throw CtmcError(CtmcErrorKind::InvalidRateMatrix, "rate matrix CSV: matrix is not square");
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return RateMatrix(std::move(m));
}

}  // namespace vida
