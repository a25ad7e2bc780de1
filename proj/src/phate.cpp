#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "vida/embed.hpp"
#include "vida/knee.hpp"

namespace vida {

namespace {

constexpr double kPotentialFloor = 1e-7;
constexpr Eigen::Index kClassicalInitLimit = 3000;

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double normal(std::mt19937_64& rng) {
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

void check_dissimilarities(const Eigen::MatrixXd& d) {
  if (d.rows() != d.cols()) throw EmbedError(EmbedErrorKind::InvalidInput, "distance matrix is not square");
  if (!d.allFinite()) throw EmbedError(EmbedErrorKind::InvalidInput, "distance matrix has non-finite entries");
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    if (d(i, i) != 0.0) throw EmbedError(EmbedErrorKind::InvalidInput, "distance matrix diagonal must be zero");
    for (Eigen::Index j = 0; j < i; ++j) {
      if (d(i, j) < 0.0) throw EmbedError(EmbedErrorKind::InvalidInput, "negative distance");
      if (std::abs(d(i, j) - d(j, i)) > 1e-9 * std::max(1.0, std::abs(d(i, j))))
        throw EmbedError(EmbedErrorKind::InvalidInput, "distance matrix is not symmetric");
    }
  }
}

Eigen::MatrixXd guttman(const Eigen::MatrixXd& x, const Eigen::MatrixXd& delta) {
  const auto n = x.rows();
  const Eigen::MatrixXd d = pairwise_distances(x);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double diag = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j || d(i, j) == 0.0) continue;
      b(i, j) = -delta(i, j) / d(i, j);
      diag -= b(i, j);
    }
    b(i, i) = diag;
  }
  return b * x / static_cast<double>(n);
}

// Seeded k-means (k-means++ start, Lloyd refinement). Returns labels 0..k'-1
// with empty clusters dropped.
std::vector<std::size_t> kmeans(const Eigen::MatrixXd& x, std::size_t k, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(x.rows());
  std::mt19937_64 rng(seed);
  std::vector<Eigen::Index> centers_idx;
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  centers_idx.push_back(static_cast<Eigen::Index>(rng() % n));
  while (centers_idx.size() < k) {
    const auto& c = x.row(centers_idx.back());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], (x.row(static_cast<Eigen::Index>(i)) - c).squaredNorm());
      total += nearest[i];
    }
    if (total <= 0.0) break;
    double u = uniform01(rng) * total;
    std::size_t pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      u -= nearest[i];
      if (u < 0.0) {
        pick = i;
        break;
      }
    }
    centers_idx.push_back(static_cast<Eigen::Index>(pick));
  }
  Eigen::MatrixXd centers(static_cast<Eigen::Index>(centers_idx.size()), x.cols());
  for (std::size_t c = 0; c < centers_idx.size(); ++c) centers.row(static_cast<Eigen::Index>(c)) = x.row(centers_idx[c]);

  std::vector<std::size_t> label(n, 0);
  for (int iter = 0; iter < 25; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < centers.rows(); ++c) {
        const double d = (x.row(static_cast<Eigen::Index>(i)) - centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (iter == 0 || label[i] != static_cast<std::size_t>(best)) changed = true;
      label[i] = static_cast<std::size_t>(best);
    }
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(centers.rows(), x.cols());
    std::vector<std::size_t> counts(static_cast<std::size_t>(centers.rows()), 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(static_cast<Eigen::Index>(label[i])) += x.row(static_cast<Eigen::Index>(i));
      ++counts[label[i]];
    }
    for (Eigen::Index c = 0; c < centers.rows(); ++c)
      if (counts[static_cast<std::size_t>(c)]) centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
  }
  // Compact labels in order of first appearance.
  std::vector<long> remap(static_cast<std::size_t>(centers.rows()), -1);
  std::size_t next = 0;
  for (auto& l : label) {
    if (remap[l] < 0) remap[l] = static_cast<long>(next++);
    l = static_cast<std::size_t>(remap[l]);
  }
  return label;
}

PhateResult embed_operator(const Eigen::MatrixXd& op, const Eigen::VectorXd& spectrum, const PhateConfig& c) {
  PhateResult r;
  if (c.t) {
    r.t = *c.t;
  } else {
    r.entropy = von_neumann_entropy(spectrum, c.t_max);
    r.t = select_diffusion_time(r.entropy);
  }
  const Eigen::MatrixXd diffused = matrix_power(op, r.t);
  const Eigen::MatrixXd potential = potential_distances(diffused);
  const auto init = potential.rows() <= kClassicalInitLimit ? MdsInit::Classical : MdsInit::Random;
  r.mds = smacof_mds(potential, c.out_dim, c.mds_max_iter, c.mds_tol, c.seed, init);
  return r;
}

PhateResult run_phate(const Eigen::MatrixXd& distances, const PhateConfig& c, const std::string& input_hash) {
  c.validate();
  const auto n = distances.rows();
  if (n < c.out_dim + 1)
    throw EmbedError(EmbedErrorKind::InvalidInput, "PHATE needs at least out_dim + 1 points");
  const Eigen::MatrixXd kernel = alpha_decay_kernel(distances, c.n_neighbors, c.decay);

  PhateResult r;
  if (static_cast<std::size_t>(n) <= c.n_landmarks) {
    r = embed_operator(row_normalize(kernel), diffusion_spectrum(kernel), c);
    r.embedding.coords = r.mds.coords;
  } else {
    // Landmarks: cluster a random projection of the diffusion operator, then
    // compress the kernel through the cluster membership.
    const Eigen::MatrixXd p = row_normalize(kernel);
    const Eigen::Index proj_dim = std::min<Eigen::Index>(100, n);
    std::mt19937_64 rng(c.seed ^ 0x5bd1e995ULL);
    Eigen::MatrixXd projection(n, proj_dim);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < proj_dim; ++j) projection(i, j) = normal(rng);
    const auto label = kmeans(p * projection, c.n_landmarks, c.seed);
    const auto landmarks = static_cast<Eigen::Index>(*std::max_element(label.begin(), label.end()) + 1);
    Eigen::MatrixXd membership = Eigen::MatrixXd::Zero(n, landmarks);
    for (Eigen::Index i = 0; i < n; ++i) membership(i, static_cast<Eigen::Index>(label[static_cast<std::size_t>(i)])) = 1.0;
    const Eigen::MatrixXd to_landmark = row_normalize(kernel * membership);                 // n x L
    const Eigen::MatrixXd from_landmark = row_normalize(membership.transpose() * kernel);   // L x n
    const Eigen::MatrixXd op = from_landmark * to_landmark;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(op);
    r = embed_operator(op, svd.singularValues(), c);
    r.embedding.coords = to_landmark * r.mds.coords;
    r.used_landmarks = true;
  }
  r.embedding.provenance = {"phate", fnv1a_hex(c.describe()), input_hash};
  return r;
}

}  // namespace

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string hash_matrix(const Eigen::MatrixXd& m) {
  std::string bytes(reinterpret_cast<const char*>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(double));
  bytes += std::to_string(m.rows()) + "x" + std::to_string(m.cols());
  return fnv1a_hex(bytes);
}

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& x) {
  const auto n = x.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (x.row(i) - x.row(j)).norm();
  return d;
}

double raw_stress(const Eigen::MatrixXd& coords, const Eigen::MatrixXd& delta) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < coords.rows(); ++i)
    for (Eigen::Index j = i + 1; j < coords.rows(); ++j) {
      const double r = (coords.row(i) - coords.row(j)).norm() - delta(i, j);
      s += r * r;
    }
  return s;
}

Eigen::MatrixXd classical_mds(const Eigen::MatrixXd& delta, int dim) {
  check_dissimilarities(delta);
  const auto n = delta.rows();
  if (dim < 1) throw EmbedError(EmbedErrorKind::InvalidConfig, "MDS dimension must be >= 1");
  const Eigen::MatrixXd sq = delta.array().square().matrix();
  const Eigen::MatrixXd centering = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
  const Eigen::MatrixXd b = -0.5 * centering * sq * centering;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (b + b.transpose()));
  Eigen::MatrixXd coords = Eigen::MatrixXd::Zero(n, dim);
  for (int k = 0; k < dim && k < n; ++k) {
    const Eigen::Index col = n - 1 - k;  // eigenvalues ascend
    const double lambda = eig.eigenvalues()(col);
    if (lambda <= 0.0) continue;
    Eigen::VectorXd v = eig.eigenvectors().col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    coords.col(k) = v * std::sqrt(lambda);
  }
  return coords;
}

MdsResult smacof_mds(const Eigen::MatrixXd& delta, int dim, int max_iter, double tol, std::uint64_t seed,
                     MdsInit init) {
  check_dissimilarities(delta);
  if (dim < 1) throw EmbedError(EmbedErrorKind::InvalidConfig, "MDS dimension must be >= 1");
  MdsResult r;
  const auto n = delta.rows();
  if (init == MdsInit::Classical) {
    r.coords = classical_mds(delta, dim);
  } else {
    std::mt19937_64 rng(seed);
    const double scale = n > 1 ? delta.sum() / static_cast<double>(n * (n - 1)) : 1.0;
    r.coords.resize(n, dim);
    for (Eigen::Index i = 0; i < n; ++i)
      for (int k = 0; k < dim; ++k) r.coords(i, k) = scale * normal(rng);
  }
  double stress = raw_stress(r.coords, delta);
  r.stress_trace.push_back(stress);
  for (r.iterations = 0; r.iterations < max_iter;) {
    if (stress <= 1e-300) {
      r.converged = true;
      break;
    }
    Eigen::MatrixXd next = guttman(r.coords, delta);
    const double next_stress = raw_stress(next, delta);
    ++r.iterations;
    // Majorization never increases stress; round-off may, and then we stop.
    if (next_stress > stress) {
      r.converged = true;
      break;
    }
    r.coords = std::move(next);
    r.stress_trace.push_back(next_stress);
    const double change = stress - next_stress;
    stress = next_stress;
    if (change <= tol * std::max(stress + change, 1e-300)) {
      r.converged = true;
      break;
    }
  }
  return r;
}

void PhateConfig::validate() const {
  if (n_neighbors < 1) throw EmbedError(EmbedErrorKind::InvalidConfig, "n_neighbors must be >= 1");
  if (!(decay > 0.0)) throw EmbedError(EmbedErrorKind::InvalidConfig, "decay must be positive");
  if (n_landmarks < 2) throw EmbedError(EmbedErrorKind::InvalidConfig, "n_landmarks must be >= 2");
  if (t && *t < 1) throw EmbedError(EmbedErrorKind::InvalidConfig, "t must be >= 1");
  if (t_max < 1) throw EmbedError(EmbedErrorKind::InvalidConfig, "t_max must be >= 1");
  if (out_dim < 1) throw EmbedError(EmbedErrorKind::InvalidConfig, "out_dim must be >= 1");
  if (mds_max_iter < 0 || !(mds_tol >= 0.0)) throw EmbedError(EmbedErrorKind::InvalidConfig, "bad MDS settings");
}

std::string PhateConfig::describe() const {
  std::ostringstream s;
  s.precision(17);
  s << "phate knn=" << n_neighbors << " decay=" << decay << " landmarks=" << n_landmarks
    << " t=" << (t ? std::to_string(*t) : "auto") << " t_max=" << t_max << " dim=" << out_dim
    << " mds_iter=" << mds_max_iter << " mds_tol=" << mds_tol << " seed=" << seed;
  return s.str();
}

Eigen::MatrixXd alpha_decay_kernel(const Eigen::MatrixXd& d, std::size_t n_neighbors, double decay) {
  const auto n = d.rows();
  if (n < 2) throw EmbedError(EmbedErrorKind::InvalidInput, "kernel needs at least two points");
  const auto knn = static_cast<Eigen::Index>(std::min<std::size_t>(n_neighbors, static_cast<std::size_t>(n - 1)));
  Eigen::VectorXd bandwidth(n);
  std::vector<double> row(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) row[static_cast<std::size_t>(j)] = d(i, j);
    row[static_cast<std::size_t>(i)] = -1.0;  // self sorts first
    std::nth_element(row.begin(), row.begin() + knn, row.end());
    bandwidth(i) = row[static_cast<std::size_t>(knn)];
  }
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double dist = d(i, j);
      double ratio;
      if (dist == 0.0)
        ratio = 0.0;
      else if (bandwidth(i) == 0.0)
        ratio = std::numeric_limits<double>::infinity();
      else
        ratio = dist / bandwidth(i);
      k(i, j) = std::exp(-std::pow(ratio, decay));
    }
  const Eigen::MatrixXd sym = 0.5 * (k + k.transpose());
  double off = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) off += sym(i, j);
  if (!(off > 0.0) || !sym.allFinite())
    throw EmbedError(EmbedErrorKind::DegenerateKernel, "all pairwise affinities vanish");
  return sym;
}

Eigen::MatrixXd row_normalize(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out = m;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double s = out.row(i).sum();
    if (s > 0.0) out.row(i) /= s;
  }
  return out;
}

Eigen::VectorXd diffusion_spectrum(const Eigen::MatrixXd& kernel) {
  const Eigen::VectorXd degree = kernel.rowwise().sum();
  const Eigen::VectorXd inv_sqrt = degree.array().rsqrt().matrix();
  const Eigen::MatrixXd conj = inv_sqrt.asDiagonal() * kernel * inv_sqrt.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (conj + conj.transpose()), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs();
}

std::vector<double> von_neumann_entropy(const Eigen::VectorXd& spectrum, int t_max) {
  std::vector<double> h;
  h.reserve(static_cast<std::size_t>(t_max));
  for (int t = 1; t <= t_max; ++t) {
    const Eigen::ArrayXd powered = spectrum.array().abs().pow(t);
    const double total = powered.sum();
    double entropy = 0.0;
    if (total > 0.0)
      for (Eigen::Index i = 0; i < powered.size(); ++i) {
        const double p = powered(i) / total;
        if (p > 0.0) entropy -= p * std::log(p);
      }
    h.push_back(entropy);
  }
  return h;
}

int select_diffusion_time(std::span<const double> entropy) {
  if (entropy.empty()) return 1;
  const auto knee = knee_index(entropy);
  return knee ? static_cast<int>(*knee) + 1 : 1;
}

Eigen::MatrixXd matrix_power(const Eigen::MatrixXd& m, int t) {
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(m.rows(), m.cols());
  Eigen::MatrixXd base = m;
  for (; t > 0; t >>= 1) {
    if (t & 1) result = result * base;
    if (t > 1) base = base * base;
  }
  return result;
}

Eigen::MatrixXd potential_distances(const Eigen::MatrixXd& diffused) {
  const Eigen::MatrixXd potential = -(diffused.array().max(0.0) + kPotentialFloor).log().matrix();
  return pairwise_distances(potential);
}

PhateResult phate(const Eigen::MatrixXd& features, const PhateConfig& c) {
  if (!features.allFinite()) throw EmbedError(EmbedErrorKind::InvalidInput, "features contain non-finite values");
  return run_phate(pairwise_distances(features), c, hash_matrix(features));
}

PhateResult phate_from_distances(const Eigen::MatrixXd& distances, const PhateConfig& c) {
  check_dissimilarities(distances);
  return run_phate(distances, c, hash_matrix(distances));
}

}  // namespace vida
