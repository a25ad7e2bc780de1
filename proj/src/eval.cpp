#include "vida/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>

#include "vida/distances.hpp"
#include "vida/knee.hpp"
#include "vida/parallel.hpp"

namespace vida {

namespace {

struct P2 {
  double x, y;
};

double cross(const P2& o, const P2& a, const P2& b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }
double dist2(const P2& a, const P2& b) { return (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y); }

std::vector<P2> convex_hull(std::vector<P2> p) {
  std::sort(p.begin(), p.end(), [](const P2& a, const P2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  p.erase(std::unique(p.begin(), p.end(), [](const P2& a, const P2& b) { return a.x == b.x && a.y == b.y; }), p.end());
  if (p.size() < 3) return p;
  std::vector<P2> h(2 * p.size());
  std::size_t k = 0;
  for (const auto& pt : p) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], pt) <= 0) --k;
    h[k++] = pt;
  }
  for (std::size_t i = p.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(h[k - 2], h[k - 1], p[i]) <= 0) --k;
    h[k++] = p[i];
  }
  h.resize(k - 1);
  return h;
}

double hull_diameter(const Eigen::MatrixXd& points) {
  std::vector<P2> p(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) p[static_cast<std::size_t>(i)] = {points(i, 0), points(i, 1)};
  const auto h = convex_hull(std::move(p));
  const std::size_t m = h.size();
  if (m == 1) return 0.0;
  if (m == 2) return std::sqrt(dist2(h[0], h[1]));
  // Rotating calipers over antipodal pairs.
  double best = 0.0;
  std::size_t j = 1;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t ni = (i + 1) % m;
    while (std::abs(cross(h[i], h[ni], h[(j + 1) % m])) > std::abs(cross(h[i], h[ni], h[j]))) j = (j + 1) % m;
    best = std::max({best, dist2(h[i], h[j]), dist2(h[ni], h[j])});
  }
  return std::sqrt(best);
}

bool within(const Eigen::MatrixXd& p, Eigen::Index a, Eigen::Index b, double eps) {
  return (p.row(a) - p.row(b)).norm() <= eps;
}

// Fixed-radius neighbour queries; a uniform grid in the plane, brute force otherwise.
class RadiusIndex {
 public:
  RadiusIndex(const Eigen::MatrixXd& points, double eps) : p_(points), eps_(eps) {
    grid_ = p_.cols() == 2 && p_.rows() > 256;
    if (!grid_) return;
    const double span = (p_.colwise().maxCoeff() - p_.colwise().minCoeff()).maxCoeff();
    const double origin = p_.cwiseAbs().maxCoeff();
    if (span / eps_ > 1e9 || std::abs(origin) / eps_ > 1e9) {
      grid_ = false;
      return;
    }
    for (Eigen::Index i = 0; i < p_.rows(); ++i) cells_[key(cell(p_(i, 0)), cell(p_(i, 1)))].push_back(i);
  }

  template <typename F>
  void for_each(Eigen::Index q, F&& f) const {
    if (!grid_) {
      for (Eigen::Index i = 0; i < p_.rows(); ++i)
        if (within(p_, q, i, eps_)) f(i);
      return;
    }
    const long cx = cell(p_(q, 0)), cy = cell(p_(q, 1));
    for (long dx = -1; dx <= 1; ++dx)
      for (long dy = -1; dy <= 1; ++dy) {
        const auto it = cells_.find(key(cx + dx, cy + dy));
        if (it == cells_.end()) continue;
        for (Eigen::Index i : it->second)
          if (within(p_, q, i, eps_)) f(i);
      }
  }

 private:
  long cell(double v) const { return static_cast<long>(std::floor(v / eps_)); }
  static std::uint64_t key(long x, long y) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(x)) << 32) | static_cast<std::uint32_t>(y);
  }

  const Eigen::MatrixXd& p_;
  double eps_;
  bool grid_ = false;
  std::unordered_map<std::uint64_t, std::vector<Eigen::Index>> cells_;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double diameter(const Eigen::MatrixXd& points) {
  const auto n = points.rows();
  if (n < 2) return 0.0;
  if (n > kExactDiameterLimit && points.cols() == 2) return hull_diameter(points);
  std::vector<double> row_max(static_cast<std::size_t>(n), 0.0);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    double best = 0.0;
    const auto ii = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = ii + 1; j < n; ++j) best = std::max(best, (points.row(ii) - points.row(j)).squaredNorm());
    row_max[i] = best;
  });
  return std::sqrt(*std::max_element(row_max.begin(), row_max.end()));
}

double avg_distortion(const Eigen::MatrixXd& coords, std::span<const Trajectory> trajectories, StepCounting counting) {
  if (!coords.allFinite()) throw EvalError(EvalErrorKind::InvalidArgument, "embedding has non-finite coordinates");
  const auto n = static_cast<std::size_t>(coords.rows());
  std::map<std::pair<std::size_t, std::size_t>, bool> seen;
  double total = 0.0;
  std::size_t steps = 0;
  for (const auto& t : trajectories)
    for (std::size_t s = 0; s < t.steps.size(); ++s) {
      if (t.steps[s].state_id >= n)
        throw EvalError(EvalErrorKind::MissingState,
                        "trajectory " + std::to_string(t.id) + " visits state " + std::to_string(t.steps[s].state_id) +
                            " which is not embedded");
      if (s == 0) continue;
      const std::size_t a = t.steps[s - 1].state_id, b = t.steps[s].state_id;
      if (counting == StepCounting::Unique && !seen.emplace(std::make_pair(a, b), true).second) continue;
      total += (coords.row(static_cast<Eigen::Index>(a)) - coords.row(static_cast<Eigen::Index>(b))).norm();
      ++steps;
    }
  if (steps == 0) return 0.0;
  const double d = diameter(coords);
  if (d == 0.0) throw EvalError(EvalErrorKind::ZeroDiameter, "all embedded states coincide");
  return total / static_cast<double>(steps) / d;
}

LocalPreservation local_preservation(const Eigen::MatrixXd& coords, std::span<const double> energies,
                                     std::span<const StateGraph> structures, std::span<const std::size_t> ks) {
  const auto n = static_cast<std::size_t>(coords.rows());
  if (energies.size() != n) throw EvalError(EvalErrorKind::InvalidArgument, "energy count does not match the embedding");
  if (!structures.empty() && structures.size() != n)
    throw EvalError(EvalErrorKind::InvalidArgument, "structure count does not match the embedding");
  if (ks.empty()) throw EvalError(EvalErrorKind::InvalidArgument, "no K requested");
  for (std::size_t k : ks)
    if (k < 1 || k >= n)
      throw EvalError(EvalErrorKind::InvalidArgument,
                      "K = " + std::to_string(k) + " must lie in [1, " + std::to_string(n) + ")");
  const std::size_t kmax = *std::max_element(ks.begin(), ks.end());
  std::optional<PackedAdjacency> packed;
  if (!structures.empty()) packed.emplace(structures);

  // Per state, running sums over its first K neighbours for every requested K.
  std::vector<std::vector<double>> e_sum(n), g_sum(n);
  parallel_for(n, [&](std::size_t i) {
    std::vector<std::pair<double, std::size_t>> d;
    d.reserve(n - 1);
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) d.emplace_back((coords.row(ii) - coords.row(static_cast<Eigen::Index>(j))).squaredNorm(), j);
    std::partial_sort(d.begin(), d.begin() + static_cast<long>(kmax), d.end());
    std::vector<double> e_prefix(kmax + 1, 0.0), g_prefix(kmax + 1, 0.0);
    for (std::size_t r = 0; r < kmax; ++r) {
      const std::size_t j = d[r].second;
      e_prefix[r + 1] = e_prefix[r] + std::abs(energies[i] - energies[j]);
      if (packed) g_prefix[r + 1] = g_prefix[r] + static_cast<double>(packed->distance(i, j));
    }
    for (std::size_t k : ks) {
      e_sum[i].push_back(e_prefix[k] / static_cast<double>(k));
      g_sum[i].push_back(g_prefix[k] / static_cast<double>(k));
    }
  });
  LocalPreservation r;
  r.ks.assign(ks.begin(), ks.end());
  for (std::size_t q = 0; q < ks.size(); ++q) {
    double e = 0.0, g = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      e += e_sum[i][q];
      g += g_sum[i][q];
    }
    r.energy_diff.push_back(e / static_cast<double>(n));
    if (packed) r.ged_diff.push_back(g / static_cast<double>(n));
  }
  return r;
}

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json local = nlohmann::json::array();
  for (std::size_t q = 0; q < r.local.ks.size(); ++q) {
    nlohmann::json row = {{"K", r.local.ks[q]}, {"energy_diff", r.local.energy_diff[q]}};
    if (!r.local.ged_diff.empty()) row["ged_diff"] = r.local.ged_diff[q];
    local.push_back(std::move(row));
  }
  return {{"schema_version", "1"},
          {"kind", "metrics"},
          {"avg_distortion", r.avg_distortion},
          {"step_counting", r.counting == StepCounting::Unique ? "unique" : "per_occurrence"},
          {"local_preservation", std::move(local)},
          {"config", r.config}};
}

std::string to_csv(const MetricsReport& r) {
  std::string out = "metric,K,value\n";
  out += "avg_distortion,," + fmt(r.avg_distortion) + "\n";
  for (std::size_t q = 0; q < r.local.ks.size(); ++q)
    out += "energy_diff," + std::to_string(r.local.ks[q]) + "," + fmt(r.local.energy_diff[q]) + "\n";
  for (std::size_t q = 0; q < r.local.ged_diff.size(); ++q)
    out += "ged_diff," + std::to_string(r.local.ks[q]) + "," + fmt(r.local.ged_diff[q]) + "\n";
  return out;
}

std::vector<int> dbscan(const Eigen::MatrixXd& points, double eps, std::size_t min_samples) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw EvalError(EvalErrorKind::InvalidArgument, "eps must be positive");
  if (min_samples < 1) throw EvalError(EvalErrorKind::InvalidArgument, "min_samples must be >= 1");
  if (!points.allFinite()) throw EvalError(EvalErrorKind::InvalidArgument, "points must be finite");
  const auto n = static_cast<std::size_t>(points.rows());
  const RadiusIndex index(points, eps);
  std::vector<char> core(n, 0);
  parallel_for(n, [&](std::size_t i) {
    std::size_t count = 0;
    index.for_each(static_cast<Eigen::Index>(i), [&](Eigen::Index) { ++count; });
    core[i] = count >= min_samples;
  });

  std::vector<int> label(n, kNoise);
  int next = 0;
  std::vector<Eigen::Index> stack;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (!core[seed] || label[seed] != kNoise) continue;
    const int id = next++;
    label[seed] = id;
    stack.assign(1, static_cast<Eigen::Index>(seed));
    while (!stack.empty()) {
      const Eigen::Index q = stack.back();
      stack.pop_back();
      index.for_each(q, [&](Eigen::Index j) {
        const auto ju = static_cast<std::size_t>(j);
        if (core[ju] && label[ju] == kNoise) {
          label[ju] = id;
          stack.push_back(j);
        }
      });
    }
  }
  // Border points: lowest cluster id among core neighbours.
  parallel_for(n, [&](std::size_t i) {
    if (core[i]) return;
    int best = kNoise;
    index.for_each(static_cast<Eigen::Index>(i), [&](Eigen::Index j) {
      const auto ju = static_cast<std::size_t>(j);
      if (core[ju] && (best == kNoise || label[ju] < best)) best = label[ju];
    });
    label[i] = best;
  });
  return label;
}

ElbowResult elbow_eps(const Eigen::MatrixXd& points, std::size_t k) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (k < 1 || n <= k)
    throw EvalError(EvalErrorKind::InvalidArgument, "elbow needs more points than k (" + std::to_string(k) + ")");
  ElbowResult r;
  r.curve.resize(n);
  parallel_for(n, [&](std::size_t i) {
    std::vector<double> d;
    d.reserve(n - 1);
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) d.push_back((points.row(ii) - points.row(static_cast<Eigen::Index>(j))).norm());
    std::nth_element(d.begin(), d.begin() + static_cast<long>(k - 1), d.end());
    r.curve[i] = d[k - 1];
  });
  std::sort(r.curve.begin(), r.curve.end());
  if (const auto knee = knee_index(r.curve)) {
    r.index = *knee;
  } else {
    r.index = n / 2;
    r.degenerate = true;
  }
  r.eps = r.curve[r.index];
  return r;
}

std::vector<std::size_t> filter_by_cumulative_time(const StateSpace& ss, double threshold) {
  if (!(threshold >= 0.0)) throw EvalError(EvalErrorKind::InvalidArgument, "threshold must be >= 0");
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < ss.size(); ++i)
    if (ss.cumulative_time[i] >= threshold) keep.push_back(i);
  return keep;
}

ClusterResult cluster_states(const Eigen::MatrixXd& coords, std::span<const std::size_t> state_ids, double eps,
                             std::size_t min_samples) {
  Eigen::MatrixXd points(static_cast<Eigen::Index>(state_ids.size()), coords.cols());
  for (std::size_t i = 0; i < state_ids.size(); ++i) {
    if (state_ids[i] >= static_cast<std::size_t>(coords.rows()))
      throw EvalError(EvalErrorKind::MissingState, "state " + std::to_string(state_ids[i]) + " is not embedded");
    points.row(static_cast<Eigen::Index>(i)) = coords.row(static_cast<Eigen::Index>(state_ids[i]));
  }
  ClusterResult r;
  r.state_ids.assign(state_ids.begin(), state_ids.end());
  r.labels = dbscan(points, eps, min_samples);
  for (int l : r.labels) r.cluster_count = std::max(r.cluster_count, l + 1);
  return r;
}

std::vector<TrapRecord> kinetic_traps(const ClusterResult& cr, const StateSpace& ss) {
  if (cr.labels.size() != cr.state_ids.size())
    throw EvalError(EvalErrorKind::InvalidArgument, "cluster labels do not match the clustered states");
  std::vector<std::optional<std::size_t>> best(static_cast<std::size_t>(cr.cluster_count));
  for (std::size_t i = 0; i < cr.labels.size(); ++i) {
    const int l = cr.labels[i];
    if (l < 0) continue;
    const std::size_t s = cr.state_ids[i];
    if (s >= ss.size()) throw EvalError(EvalErrorKind::MissingState, "state " + std::to_string(s) + " does not exist");
    auto& b = best[static_cast<std::size_t>(l)];
    if (!b || ss.energy[s] < ss.energy[*b] || (ss.energy[s] == ss.energy[*b] && s < *b)) b = s;
  }
  std::vector<TrapRecord> traps;
  for (std::size_t c = 0; c < best.size(); ++c)
    if (best[c])
      traps.push_back({static_cast<int>(c), *best[c], ss.states[*best[c]].dp(), ss.energy[*best[c]],
                       ss.cumulative_time[*best[c]]});
  std::stable_sort(traps.begin(), traps.end(),
                   [](const TrapRecord& a, const TrapRecord& b) { return a.cumulative_time > b.cumulative_time; });
  return traps;
}

nlohmann::json to_json(const TrapRecord& t) {
  return {{"cluster", t.cluster},
          {"state", t.state_id},
          {"dp", t.dp},
          {"energy", t.energy},
          {"cumulative_time", t.cumulative_time}};
}

std::string traps_to_csv(std::span<const TrapRecord> traps) {
  std::string out = "cluster,state,dp,cumulative_time,energy\n";
  for (const auto& t : traps)
    out += std::to_string(t.cluster) + "," + std::to_string(t.state_id) + "," + t.dp + "," + fmt(t.cumulative_time) +
           "," + fmt(t.energy) + "\n";
  return out;
}

}  // namespace vida
