#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

#include "vida/embed.hpp"

namespace vida {

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 80;

void check_table(const NeighborTable& t, std::size_t states, const char* what) {
  if (t.rows.size() > states)
    throw EmbedError(EmbedErrorKind::MissingState, std::string(what) + " table has rows for states beyond the embedding");
  for (const auto& row : t.rows)
    for (const auto& nb : row)
      if (nb.id >= states)
        throw EmbedError(EmbedErrorKind::MissingState,
                         std::string(what) + " table references state " + std::to_string(nb.id) + " which is not embedded");
}

double pair_loss(const Eigen::MatrixXd& z, std::size_t i, std::size_t j, double target) {
  const double r = (z.row(static_cast<Eigen::Index>(i)) - z.row(static_cast<Eigen::Index>(j))).norm() - target;
  return r * r;
}

}  // namespace

double eval_l_mpt(const Eigen::MatrixXd& z, const NeighborTable& nbrs, const WeightTable& w) {
  check_table(nbrs, static_cast<std::size_t>(z.rows()), "MPT");
  if (w.rows.size() != nbrs.rows.size())
    throw EmbedError(EmbedErrorKind::InvalidInput, "weight table does not match the neighbour table");
  double loss = 0.0;
  for (std::size_t i = 0; i < nbrs.rows.size(); ++i) {
    if (w.rows[i].size() != nbrs.rows[i].size())
      throw EmbedError(EmbedErrorKind::InvalidInput, "weight row " + std::to_string(i) + " has the wrong length");
    for (std::size_t k = 0; k < nbrs.rows[i].size(); ++k)
      loss += w.rows[i][k] * pair_loss(z, i, nbrs.rows[i][k].id, nbrs.rows[i][k].distance);
  }
  return loss;
}

double eval_l_ged(const Eigen::MatrixXd& z, const NeighborTable& nbrs) {
  check_table(nbrs, static_cast<std::size_t>(z.rows()), "GED");
  double loss = 0.0;
  for (std::size_t i = 0; i < nbrs.rows.size(); ++i)
    for (const auto& nb : nbrs.rows[i]) loss += pair_loss(z, i, nb.id, nb.distance);
  return loss;
}

void StressConfig::validate() const {
  if (!(mpt_weight >= 0.0) || !(ged_weight >= 0.0))
    throw EmbedError(EmbedErrorKind::InvalidConfig, "loss weights must be non-negative");
  if (mpt_weight == 0.0 && ged_weight == 0.0)
    throw EmbedError(EmbedErrorKind::InvalidConfig, "MPT and GED weights cannot both be zero");
  if (!(learning_rate > 0.0)) throw EmbedError(EmbedErrorKind::InvalidConfig, "learning rate must be positive");
  if (max_iter < 0) throw EmbedError(EmbedErrorKind::InvalidConfig, "max_iter must be >= 0");
  if (!(tol >= 0.0)) throw EmbedError(EmbedErrorKind::InvalidConfig, "tol must be >= 0");
  if (out_dim < 1) throw EmbedError(EmbedErrorKind::InvalidConfig, "out_dim must be >= 1");
}

std::string StressConfig::describe() const {
  std::ostringstream s;
  s.precision(17);
  s << "stress delta=" << mpt_weight << " epsilon=" << ged_weight << " lr=" << learning_rate
    << " max_iter=" << max_iter << " tol=" << tol << " init=" << (init == StressInit::PhateInit ? "phate" : "random")
    << " seed=" << seed << " dim=" << out_dim << " normalize=" << normalize_targets;
  return s.str();
}

StressObjective::StressObjective(std::size_t states, const NeighborTable* mpt, const WeightTable* weights,
                                 const NeighborTable* ged, const StressConfig& c)
    : states_(states) {
  c.validate();
  auto add = [&](const NeighborTable& t, const WeightTable* w, double scale, const char* what) {
    check_table(t, states, what);
    if (w && w->rows.size() != t.rows.size())
      throw EmbedError(EmbedErrorKind::InvalidInput, "weight table does not match the neighbour table");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& row : t.rows)
      for (const auto& nb : row) {
        lo = std::min(lo, nb.distance);
        hi = std::max(hi, nb.distance);
      }
    const bool rescale = c.normalize_targets && hi > lo;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      if (w && w->rows[i].size() != t.rows[i].size())
        throw EmbedError(EmbedErrorKind::InvalidInput, "weight row " + std::to_string(i) + " has the wrong length");
      for (std::size_t k = 0; k < t.rows[i].size(); ++k) {
        const auto& nb = t.rows[i][k];
        double target = nb.distance;
        if (rescale) target = (target - lo) / (hi - lo);
        else if (c.normalize_targets) target = 0.0;
        const double weight = scale * (w ? w->rows[i][k] : 1.0);
        if (weight != 0.0) terms_.push_back({static_cast<std::uint32_t>(i), nb.id, target, weight});
      }
    }
  };
  if (mpt && c.mpt_weight > 0.0) {
    if (!weights) throw EmbedError(EmbedErrorKind::InvalidInput, "MPT term needs importance weights");
    add(*mpt, weights, c.mpt_weight, "MPT");
  }
  if (ged && c.ged_weight > 0.0) add(*ged, nullptr, c.ged_weight, "GED");
}

double StressObjective::value(const Eigen::MatrixXd& z) const {
  double f = 0.0;
  for (const auto& t : terms_) f += t.weight * pair_loss(z, t.i, t.j, t.target);
  return f;
}

double StressObjective::value_and_gradient(const Eigen::MatrixXd& z, Eigen::MatrixXd& gradient) const {
  gradient.setZero(z.rows(), z.cols());
  double f = 0.0;
  for (const auto& t : terms_) {
    const Eigen::RowVectorXd diff = z.row(t.i) - z.row(t.j);
    const double r = diff.norm();
    f += t.weight * (r - t.target) * (r - t.target);
    if (r == 0.0) continue;
    const Eigen::RowVectorXd g = (2.0 * t.weight * (r - t.target) / r) * diff;
    gradient.row(t.i) += g;
    gradient.row(t.j) -= g;
  }
  return f;
}

StressResult stress_embed(const NeighborTable& mpt, const WeightTable& weights, const NeighborTable& ged,
                          const StressConfig& c, std::size_t states, const std::optional<Eigen::MatrixXd>& init) {
  const StressObjective objective(states, &mpt, &weights, &ged, c);
  const auto n = static_cast<Eigen::Index>(states);
  StressResult r;
  Eigen::MatrixXd z;
  if (init) {
    if (init->rows() != n || init->cols() != c.out_dim)
      throw EmbedError(EmbedErrorKind::InvalidInput, "initial layout has the wrong shape");
    if (!init->allFinite()) throw EmbedError(EmbedErrorKind::InvalidInput, "initial layout is not finite");
    z = *init;
  } else {
    if (c.init == StressInit::PhateInit)
      throw EmbedError(EmbedErrorKind::InvalidConfig, "PHATE initialisation requires an initial layout");
    double scale = 0.0;
    for (const auto& t : objective.terms()) scale += t.target;
    scale = objective.terms().empty() ? 1.0 : scale / static_cast<double>(objective.terms().size());
    if (!(scale > 0.0)) scale = 1.0;
    std::mt19937_64 rng(c.seed);
    std::normal_distribution<double> normal(0.0, scale);
    z.resize(n, c.out_dim);
    for (Eigen::Index i = 0; i < n; ++i)
      for (int k = 0; k < c.out_dim; ++k) z(i, k) = normal(rng);
  }

  Eigen::MatrixXd grad;
  double f = objective.value_and_gradient(z, grad);
  r.loss_trace.push_back(f);
  double step = c.learning_rate;
  while (r.iterations < c.max_iter) {
    const double g2 = grad.squaredNorm();
    if (g2 == 0.0 || f == 0.0) {
      r.converged = true;
      break;
    }
    bool accepted = false;
    Eigen::MatrixXd trial;
    double f_trial = f;
    for (int b = 0; b < kMaxBacktracks; ++b) {
      trial = z - step * grad;
      f_trial = objective.value(trial);
      if (f_trial <= f - kArmijo * step * g2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No step along the gradient makes progress at working precision.
      r.converged = true;
      break;
    }
    ++r.iterations;
    const double decrease = f - f_trial;
    z = std::move(trial);
    f = objective.value_and_gradient(z, grad);
    r.loss_trace.push_back(f);
    step *= 2.0;
    if (decrease <= c.tol * std::max(f + decrease, std::numeric_limits<double>::min())) {
      r.converged = true;
      break;
    }
  }
  r.embedding.coords = std::move(z);
  std::string inputs = to_binary(mpt, &weights) + to_binary(ged) + std::to_string(states);
  if (init) inputs += hash_matrix(*init);
  r.embedding.provenance = {"stress", fnv1a_hex(c.describe()), fnv1a_hex(inputs)};
  return r;
}

ProbeResult energy_probe(const Eigen::MatrixXd& z, std::span<const double> y) {
  const auto n = z.rows();
  if (static_cast<std::size_t>(n) != y.size())
    throw EmbedError(EmbedErrorKind::InvalidInput, "energy count does not match the embedding");
  const auto d = z.cols();
  if (n < d + 1) throw EmbedError(EmbedErrorKind::RankDeficient, "need at least dim + 1 points for an affine fit");
  Eigen::MatrixXd design(n, d + 1);
  design.leftCols(d) = z;
  design.col(d).setOnes();
  const Eigen::Map<const Eigen::VectorXd> target(y.data(), n);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < d + 1) throw EmbedError(EmbedErrorKind::RankDeficient, "embedding coordinates are affinely degenerate");
  const Eigen::VectorXd beta = qr.solve(target);
  ProbeResult r;
  r.coefficients = beta.head(d);
  r.intercept = beta(d);
  r.residual = (design * beta - target).squaredNorm();
  return r;
}

std::string embedding_to_csv(const Embedding& e) {
  std::string out = "id";
  const auto d = e.coords.cols();
  static const char* names[] = {"x", "y", "z"};
  for (Eigen::Index k = 0; k < d; ++k) out += "," + (d <= 3 ? std::string(names[k]) : "x" + std::to_string(k));
  out += "\n";
  char buf[32];
  for (Eigen::Index i = 0; i < e.coords.rows(); ++i) {
    out += std::to_string(i);
    for (Eigen::Index k = 0; k < d; ++k) {
      std::snprintf(buf, sizeof buf, ",%.17g", e.coords(i, k));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

nlohmann::json to_json(const Embedding& e) {
  nlohmann::json coords = nlohmann::json::array();
  for (Eigen::Index i = 0; i < e.coords.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < e.coords.cols(); ++k) row.push_back(e.coords(i, k));
    coords.push_back(std::move(row));
  }
  return {{"schema_version", "1"},
          {"kind", "embedding"},
          {"method", e.provenance.method},
          {"config_hash", e.provenance.config_hash},
          {"input_hash", e.provenance.input_hash},
          {"dim", e.coords.cols()},
          {"coords", std::move(coords)}};
}

Embedding embedding_from_json(const nlohmann::json& j) {
  try {
    if (j.at("kind").get<std::string>() != "embedding")
      throw EmbedError(EmbedErrorKind::InvalidInput, "JSON document is not an embedding");
    Embedding e;
    e.provenance = {j.at("method").get<std::string>(), j.at("config_hash").get<std::string>(),
                    j.at("input_hash").get<std::string>()};
    const auto dim = j.at("dim").get<Eigen::Index>();
    const auto& coords = j.at("coords");
    e.coords.resize(static_cast<Eigen::Index>(coords.size()), dim);
    for (std::size_t i = 0; i < coords.size(); ++i) {
      if (coords[i].size() != static_cast<std::size_t>(dim))
        throw EmbedError(EmbedErrorKind::InvalidInput, "embedding row " + std::to_string(i) + " has the wrong width");
      for (Eigen::Index k = 0; k < dim; ++k) e.coords(static_cast<Eigen::Index>(i), k) = coords[i][static_cast<std::size_t>(k)].get<double>();
    }
    if (!e.coords.allFinite()) throw EmbedError(EmbedErrorKind::InvalidInput, "embedding has non-finite coordinates");
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw EmbedError(EmbedErrorKind::InvalidInput, std::string("malformed embedding JSON: ") + ex.what());
  }
}

}  // namespace vida
