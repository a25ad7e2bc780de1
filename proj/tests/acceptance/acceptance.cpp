// Acceptance suite: one PASS/FAIL line per criterion, with the tolerances and
// wall-clock limits fixed below. Exits nonzero when any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "vida/bundle.hpp"
#include "vida/cli.hpp"
#include "vida/ctmc.hpp"
#include "vida/distances.hpp"
#include "vida/embed.hpp"
#include "vida/eval.hpp"
#include "vida/multistrand_io.hpp"
#include "vida/scattering.hpp"

using namespace vida;
namespace fs = std::filesystem;

namespace {

// Collects failed checks with a short description of each.
struct Checks {
  std::vector<std::string> failures;
  std::size_t count = 0;

  void expect(bool ok, const std::string& what) {
    ++count;
    if (!ok && failures.size() < 5) failures.push_back(what);
    if (!ok && failures.size() == 5) failures.push_back("...");
  }
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

// ---- parser ----------------------------------------------------------------

void parser(Checks& c) {
  const Dataset d = parse_log(read_fixture("fsm_sample.log"));
  c.expect(d.strands.header() == kSampleHeader, "strand header");
  c.expect(d.trajectories.size() == 1, "one trajectory");
  if (d.trajectories.size() != 1) return;
  const auto& steps = d.trajectories[0].steps;
  c.expect(steps.size() == std::size(kSampleRecords), "record count");
  for (std::size_t i = 0; i < std::min(steps.size(), std::size(kSampleRecords)); ++i) {
    const auto& want = kSampleRecords[i];
    c.expect(d.states.states[steps[i].state_id].dp() == want.dp, "dp of record " + std::to_string(i));
    c.expect(steps[i].time == want.time_us * 1e-6, "time of record " + std::to_string(i));
    c.expect(steps[i].energy == want.energy, "energy of record " + std::to_string(i));
  }
  const std::string once = format_log(d);
  c.expect(format_log(parse_log(once)) == once, "log round trip is byte stable");
  const std::string json = to_json(d).dump(2);
  c.expect(to_json(dataset_from_json(nlohmann::json::parse(json))).dump(2) == json, "dataset JSON round trip");
}

// ---- CTMC ------------------------------------------------------------------

RateMatrix chain3() {
  Eigen::MatrixXd r(3, 3);
  r << 0, 1, 0, 1, 0, 1, 0, 1, 0;
  return RateMatrix::from_rates(r);
}

void ctmc(Checks& c) {
  const std::size_t target[] = {2};
  const auto tau = mfpt(chain3(), target);
  c.expect(std::abs(tau(0) - 3.0) <= 1e-12 && std::abs(tau(1) - 2.0) <= 1e-12 && tau(2) == 0.0, "mfpt (3,2,0)");

  const std::size_t runs = 10000;
  const Eigen::VectorXd start = Eigen::Vector3d(1, 0, 0);
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t r = 0; r < runs; ++r) {
    const auto path = ssa_sample(chain3(), start, target, 1000 + r, 1000000);
    c.expect(path.reached_stop, "ssa run reached the target");
    const double t = path.times.back();
    sum += t;
    sum2 += t * t;
  }
  const double mean = sum / runs;
  const double se = std::sqrt((sum2 / runs - mean * mean) / (runs - 1));
  c.expect(std::abs(mean - 3.0) <= 3.0 * se, "ssa mfpt " + fmt(mean) + " within 3 se (" + fmt(se) + ") of 3");

  oracle::Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto chain = oracle::random_reversible_chain(rng, 2 + oracle::below(rng, 12));
    const RateMatrix k(chain.rates);
    const Eigen::MatrixXd qs = propagator(k, 0.3), qt = propagator(k, 1.1), qst = propagator(k, 1.4);
    c.expect((qs * qt - qst).cwiseAbs().maxCoeff() <= 1e-8, "semigroup");
    const EnergyModel e{std::vector<double>(chain.energies.data(), chain.energies.data() + chain.energies.size()),
                        chain.beta};
    const Eigen::RowVectorXd pi = boltzmann(e).transpose();
    c.expect((pi * qt - pi).cwiseAbs().maxCoeff() <= 1e-8, "stationarity");
    c.expect((pi * k.matrix()).cwiseAbs().maxCoeff() <= 1e-8 * k.matrix().cwiseAbs().maxCoeff(), "pi K = 0");
    c.expect(check_detailed_balance(k, e).passed(), "reversible chain passes detailed balance");
  }

  Eigen::MatrixXd r(2, 2);
  r << 0, 1, 0.5, 0;
  const EnergyModel two{{0.0, -std::log(2.0)}, 1.0};
  c.expect(check_detailed_balance(RateMatrix::from_rates(r), two).passed(), "balanced fixture passes");
  r << 0, 1, 1, 0;
  c.expect(!check_detailed_balance(RateMatrix::from_rates(r), two).passed(), "unbalanced fixture fails");
}

// ---- scattering ------------------------------------------------------------

void scattering(Checks& c) {
  oracle::Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = to_graph(parse_dp(oracle::random_dp(rng, {2 + oracle::below(rng, 40), 2 + oracle::below(rng, 20)})));
    const auto p = lazy_walk(g);
    Eigen::VectorXd d(p.rows());
    const auto deg = g.degrees();
    for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = deg[static_cast<std::size_t>(i)];
    Eigen::VectorXd f(p.rows());
    for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = oracle::uniform(rng, -1, 1);
    for (const auto& psi : wavelet_bank(p, 4)) {
      c.expect(std::abs((psi * f).sum()) <= 1e-10, "1^T psi f = 0");
      c.expect((psi * d).cwiseAbs().maxCoeff() <= 1e-10, "psi d = 0");
    }
  }
  const auto v = scatter(to_graph(parse_dp("..")), {});
  const auto& layout = v.layout;
  const std::size_t block = layout.nodes * layout.per_signal();
  for (std::size_t f = 0; f < layout.filters.size(); ++f)
    if (layout.filters[f].kind != FilterSpec::Kind::LowPass)
      for (std::size_t k = 0; k < block; ++k) c.expect(v.values[f * block + k] == 0.0, "2-node band-pass is zero");
  for (std::size_t n : {2u, 6u, 25u})
    for (int j = 1; j <= 5; ++j) {
      ScatteringConfig cfg;
      cfg.scales = j;
      cfg.lowpass_power = 1 << j;
      c.expect(scattering_layout(n, cfg).size() == n * n * static_cast<std::size_t>(j + 1), "m = L^2 (J+1)");
    }
}

// ---- distances -------------------------------------------------------------

void distances(Checks& c) {
  oracle::Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + oracle::below(rng, 199);
    const auto g = oracle::random_digraph(rng, n, 3.0 / static_cast<double>(n), trial % 2 == 0);
    const std::size_t k = 1 + oracle::below(rng, n);
    const auto t = mpt_knn(g, k);
    for (std::size_t s = 0; s < n; ++s) {
      const auto bf = oracle::bellman_ford(g, s);
      std::vector<std::pair<double, std::size_t>> want;
      for (std::size_t v = 0; v < n; ++v)
        if (v != s && std::isfinite(bf[v])) want.emplace_back(bf[v], v);
      std::sort(want.begin(), want.end());
      if (want.size() > k) want.resize(k);
      bool same = t.rows[s].size() == want.size();
      for (std::size_t r = 0; same && r < want.size(); ++r)
        same = t.rows[s][r].id == want[r].second && t.rows[s][r].distance == want[r].first;
      c.expect(same, "mpt_knn equals bellman-ford, trial " + std::to_string(trial));
    }
  }

  std::vector<StateGraph> random_states;
  for (int i = 0; i < 400; ++i) random_states.push_back(to_graph(parse_dp(oracle::random_dp(rng, {24, 16}), std::vector<std::size_t>{24, 16})));
  const std::size_t k = 15;
  const auto exact = ged_knn(random_states, k, GedSearch::Exact);
  for (std::size_t i = 0; i < random_states.size(); ++i) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t j = 0; j < random_states.size(); ++j)
      if (j != i) all.emplace_back(static_cast<double>(oracle::ged_dense(random_states[i], random_states[j])), j);
    std::sort(all.begin(), all.end());
    bool same = exact.rows[i].size() == k;
    for (std::size_t r = 0; same && r < k; ++r)
      same = exact.rows[i][r].id == all[r].second && exact.rows[i][r].distance == all[r].first;
    c.expect(same, "exact ged_knn equals brute force");
  }

  // Synthetic states: elementary-step walks, the shape of simulated trajectories.
  std::vector<StateGraph> walk;
  for (int w = 0; w < 4; ++w) {
    std::string dp(60, '.');
    for (int i = 0; i < 500; ++i) {
      dp = oracle::elementary_step(rng, dp);
      walk.push_back(to_graph(parse_dp(dp)));
    }
  }
  const std::size_t k100 = 100;
  const auto truth = ged_knn(walk, k100, GedSearch::Exact);
  const auto approx = ged_knn(walk, k100, GedSearch::RandomProjection, {16, 32, 0, 1});
  std::size_t hit = 0, total = 0;
  for (std::size_t i = 0; i < walk.size(); ++i) {
    // A neighbour counts when it is no farther than the true k-th: ids at a
    // tied k-th distance are interchangeable.
    const double kth = truth.rows[i].back().distance;
    for (const auto& nb : approx.rows[i]) hit += nb.distance <= kth;
    total += truth.rows[i].size();
  }
  const double recall = static_cast<double>(hit) / static_cast<double>(total);
  c.expect(recall >= 0.9, "random projection recall@100 " + fmt(recall) + " >= 0.9");
}

// ---- embedding -------------------------------------------------------------

void random_tables(oracle::Rng& rng, std::size_t n, NeighborTable& mpt, WeightTable& w, NeighborTable& ged) {
  mpt = {};
  ged = {};
  mpt.metric = NeighborMetric::MptSeconds;
  mpt.rows.resize(n);
  ged.rows.resize(n);
  w.rows.assign(n, {});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (oracle::uniform(rng) < 0.5) {
        mpt.rows[i].push_back({static_cast<std::uint32_t>(j), oracle::uniform(rng, 0.1, 3.0)});
        w.rows[i].push_back(oracle::uniform(rng, 0.01, 1.0));
      }
      if (oracle::uniform(rng) < 0.5)
        ged.rows[i].push_back({static_cast<std::uint32_t>(j), 2.0 * static_cast<double>(1 + oracle::below(rng, 4))});
    }
}

void embedding(Checks& c) {
  oracle::Rng rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5 + oracle::below(rng, 20);
    NeighborTable mpt, ged;
    WeightTable w;
    random_tables(rng, n, mpt, w, ged);
    StressConfig cfg;
    cfg.mpt_weight = oracle::uniform(rng, 0.1, 1.0);
    cfg.ged_weight = oracle::uniform(rng, 0.1, 1.0);
    const StressObjective obj(n, &mpt, &w, &ged, cfg);
    Eigen::MatrixXd z(static_cast<Eigen::Index>(n), 2);
    for (Eigen::Index i = 0; i < z.rows(); ++i) z.row(i) << oracle::uniform(rng, -3, 3), oracle::uniform(rng, -3, 3);
    Eigen::MatrixXd g;
    obj.value_and_gradient(z, g);
    Eigen::MatrixXd fd(z.rows(), z.cols());
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < z.rows(); ++i)
      for (Eigen::Index k = 0; k < z.cols(); ++k) {
        Eigen::MatrixXd a = z, b = z;
        a(i, k) += h;
        b(i, k) -= h;
        fd(i, k) = (obj.value(a) - obj.value(b)) / (2 * h);
      }
    const double rel = (fd - g).norm() / g.norm();
    c.expect(rel < 1e-5, "gradient relative error " + fmt(rel));

    Eigen::Matrix2d rot;
    const double angle = oracle::uniform(rng, 0, 6.28);
    rot << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    const Eigen::MatrixXd moved = (z * rot.transpose()).rowwise() + Eigen::RowVector2d(oracle::uniform(rng, -9, 9), 4.0);
    c.expect(std::abs(eval_l_mpt(moved, mpt, w) - eval_l_mpt(z, mpt, w)) <= 1e-9, "L_mpt rigid invariance");
    c.expect(std::abs(eval_l_ged(moved, ged) - eval_l_ged(z, ged)) <= 1e-9, "L_ged rigid invariance");
  }

  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd x(12, 2);
    for (Eigen::Index i = 0; i < x.rows(); ++i) x.row(i) << oracle::uniform(rng, -5, 5), oracle::uniform(rng, -5, 5);
    const Eigen::MatrixXd d = pairwise_distances(x);
    const auto exact = smacof_mds(d, 2, 1000, 1e-14, static_cast<std::uint64_t>(trial));
    c.expect(exact.stress_trace.back() <= 1e-10, "smacof self-consistency " + fmt(exact.stress_trace.back()));
    const auto r = smacof_mds(d, 2, 2000, 0.0, static_cast<std::uint64_t>(trial), MdsInit::Random);
    for (std::size_t i = 1; i < r.stress_trace.size(); ++i)
      c.expect(r.stress_trace[i] <= r.stress_trace[i - 1], "smacof stress monotone");
  }

  Eigen::VectorXd a = Eigen::VectorXd::Zero(10), b = Eigen::VectorXd::Zero(10);
  b(0) = 20.0;
  const Eigen::MatrixXd x = oracle::gaussian_blobs(rng, 100, {a, b}, 1.0);
  PhateConfig pc;
  pc.seed = 2;
  const auto res = phate(x, pc);
  const auto d = pairwise_distances(res.embedding.coords);
  std::size_t pure = 0;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    Eigen::Index best = -1;
    for (Eigen::Index j = 0; j < d.rows(); ++j)
      if (j != i && (best < 0 || d(i, j) < d(i, best))) best = j;
    pure += (i < 100) == (best < 100);
  }
  const double purity = static_cast<double>(pure) / 200.0;
  c.expect(purity >= 0.99, "phate two-cluster purity " + fmt(purity));
}

// ---- eval ------------------------------------------------------------------

Trajectory path_of(std::initializer_list<std::size_t> ids) {
  Trajectory t;
  double time = 0.0;
  for (auto id : ids) t.steps.push_back({id, time++, 0.0});
  return t;
}

void eval(Checks& c) {
  Eigen::MatrixXd line = Eigen::MatrixXd::Zero(3, 2);
  line.col(0) << 0, 1, 2;
  c.expect(avg_distortion(line, std::vector<Trajectory>{path_of({0, 1, 2})}) == 0.5, "distortion 0.5");
  c.expect(avg_distortion(line, std::vector<Trajectory>{path_of({1, 1, 1})}) == 0.0, "distortion 0");

  oracle::Rng rng(79);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd z = Eigen::MatrixXd::Random(50, 2);
    std::vector<Trajectory> ts(4);
    for (auto& t : ts)
      for (int s = 0; s < 40; ++s) t.steps.push_back({oracle::below(rng, 50), static_cast<double>(s), 0.0});
    Eigen::Matrix2d r;
    const double angle = oracle::uniform(rng, 0, 6.28);
    r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    const Eigen::MatrixXd moved = (oracle::uniform(rng, 0.1, 50) * z * r.transpose()).rowwise() + Eigen::RowVector2d(3, -8);
    c.expect(std::abs(avg_distortion(moved, ts) - avg_distortion(z, ts)) <= 1e-9, "distortion similarity invariance");
  }

  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 10 + oracle::below(rng, 500);
    Eigen::MatrixXd p(static_cast<Eigen::Index>(n), 2);
    for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i) << oracle::uniform(rng, 0, 10), oracle::uniform(rng, 0, 10);
    const double eps = oracle::uniform(rng, 0.2, 1.5);
    const std::size_t ms = 1 + oracle::below(rng, 6);
    c.expect(dbscan(p, eps, ms) == oracle::dbscan_reference(p, eps, ms), "dbscan equals reference, trial " + std::to_string(trial));
  }

  const std::size_t n = 30;
  const Eigen::MatrixXd z = Eigen::MatrixXd::Random(n, 2);
  std::vector<double> e(n);
  std::vector<StateGraph> g;
  for (std::size_t i = 0; i < n; ++i) {
    e[i] = oracle::uniform(rng, -10, 0);
    g.push_back(to_graph(parse_dp(oracle::random_dp(rng, {30}))));
  }
  double want_e = 0.0, want_g = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) {
        want_e += std::abs(e[i] - e[j]);
        want_g += static_cast<double>(ged(g[i], g[j]));
      }
  want_e /= static_cast<double>(n * (n - 1));
  want_g /= static_cast<double>(n * (n - 1));
  const std::size_t ks[] = {n - 1};
  const auto lp = local_preservation(z, e, g, ks);
  c.expect(std::abs(lp.energy_diff[0] - want_e) <= 1e-12, "K = n-1 energy mean");
  c.expect(std::abs(lp.ged_diff[0] - want_g) <= 1e-12, "K = n-1 GED mean");
}

// ---- end to end ------------------------------------------------------------

int cli(std::vector<std::string> args, std::string* out_text = nullptr) {
  args.insert(args.begin(), "vida");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (code != 0) std::cerr << err.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void end_to_end(Checks& c) {
  // One 10-nt strand, Metropolis rates between four hand-picked structures.
  const std::vector<std::string> dp{"..........", "(........)", "((......))", "...(..)..."};
  const std::vector<double> energy{0.0, 1.0, -2.0, -4.0};
  const double beta = 1.0, k0 = 1e6;
  Eigen::MatrixXd rates = Eigen::MatrixXd::Zero(4, 4);
  for (auto [i, j] : {std::pair{0, 1}, {1, 2}, {0, 3}}) {
    rates(i, j) = k0 * std::min(1.0, std::exp(-beta * (energy[static_cast<std::size_t>(j)] - energy[static_cast<std::size_t>(i)])));
    rates(j, i) = k0 * std::min(1.0, std::exp(-beta * (energy[static_cast<std::size_t>(i)] - energy[static_cast<std::size_t>(j)])));
  }
  const RateMatrix k = RateMatrix::from_rates(rates);
  c.expect(check_detailed_balance(k, {energy, beta}).passed(), "toy rates are balanced");

  const StrandSet strands(std::vector<Strand>{{"hairpin", "GGCAATTGCC"}});
  std::vector<LogTrajectory> logs;
  const std::size_t stop[] = {2};
  for (std::size_t r = 0; r < 200; ++r) {
    const auto path = ssa_sample(k, Eigen::Vector4d(1, 0, 0, 0), stop, 500 + r, 100000);
    LogTrajectory lt;
    lt.index = static_cast<long>(r + 1);
    for (std::size_t s = 0; s < path.states.size(); ++s)
      lt.records.push_back({dp[path.states[s]], path.times[s], energy[path.states[s]]});
    logs.push_back(std::move(lt));
  }

  const fs::path dir = fs::temp_directory_path() / ("vida-acceptance-" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);
  auto at = [&](const char* name) { return (dir / name).string(); };
  std::ofstream(at("toy.log"), std::ios::binary) << format_log(strands, logs);

  bool ok = cli({"parse", at("toy.log"), "-o", at("dataset.json")}) == 0;
  ok = ok && cli({"scatter", "--dataset", at("dataset.json"), "-o", at("features.bin")}) == 0;
  ok = ok && cli({"distances", "--dataset", at("dataset.json"), "--k", "3", "--mpt-out", at("mpt.json"), "--ged-out",
                  at("ged.json")}) == 0;
  ok = ok && cli({"--seed", "3", "embed", "--dataset", at("dataset.json"), "--mpt", at("mpt.json"), "--ged", at("ged.json"),
                  "--features", at("features.bin"), "--knn", "2", "-o", at("embedding.json")}) == 0;
  std::string metrics;
  ok = ok && cli({"eval", "--dataset", at("dataset.json"), "--embedding", at("embedding.json"), "--K", "1,2,3"}, &metrics) == 0;
  ok = ok && cli({"cluster", "--dataset", at("dataset.json"), "--embedding", at("embedding.json"), "--min-samples", "1",
                  "--elbow-k", "1", "-o", at("clusters.json")}) == 0;
  ok = ok && cli({"export", "--dataset", at("dataset.json"), "--embedding", at("embedding.json"), "--clusters",
                  at("clusters.json"), "--reaction", "toy-hairpin", "-o", at("bundle.json")}) == 0;
  c.expect(ok, "pipeline commands exit 0");
  if (ok) {
    const Dataset d = dataset_from_json(nlohmann::json::parse(slurp(at("dataset.json"))));
    c.expect(d.states.size() == 4, "all four states visited");
    const auto m = nlohmann::json::parse(metrics);
    c.expect(m.at("local_preservation").size() == 3, "eval reports every K");
    const auto well = d.states.find(dp[3]);
    c.expect(well.has_value(), "deep well visited");
    const auto cl = nlohmann::json::parse(slurp(at("clusters.json")));
    const auto ids = cl.at("state_ids").get<std::vector<std::size_t>>();
    const auto labels = cl.at("labels").get<std::vector<int>>();
    int label = kNoise;
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (well && ids[i] == *well) label = labels[i];
    c.expect(label != kNoise, "deep well is clustered");
    bool trap = false;
    for (const auto& t : cl.at("traps"))
      if (t.at("cluster").get<int>() == label) trap = well && t.at("state").get<std::size_t>() == *well;
    c.expect(trap, "deep well is its cluster's MFE trap");
    const auto bundle = nlohmann::json::parse(slurp(at("bundle.json")));
    const auto problems = validate_bundle(bundle);
    c.expect(problems.empty(), problems.empty() ? "bundle validates" : "bundle validates: " + problems.front());
    c.expect(to_json(bundle_from_json(bundle)).dump(2) + "\n" == slurp(at("bundle.json")), "bundle round trip");
  }
  fs::remove_all(dir);
}

struct Criterion {
  const char* name;
  double limit_seconds;
  std::function<void(Checks&)> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"parser conformance", 1.0, parser},        {"ctmc oracles", 30.0, ctmc},
      {"scattering invariants", 10.0, scattering}, {"distance oracles", 60.0, distances},
      {"embedding suite", 60.0, embedding},        {"eval suite", 30.0, eval},
      {"end-to-end smoke", 60.0, end_to_end},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Checks c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      cr.run(c);
    } catch (const std::exception& e) {
      c.failures.insert(c.failures.begin(), std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > cr.limit_seconds) c.failures.push_back("runtime " + fmt(secs) + " s over " + fmt(cr.limit_seconds) + " s");
    const bool pass = c.failures.empty();
    failed += !pass;
    std::printf("%s  %-22s %7.2f s (limit %g s)  %zu checks\n", pass ? "PASS" : "FAIL", cr.name, secs, cr.limit_seconds,
                c.count);
    for (const auto& f : c.failures) std::printf("      %s\n", f.c_str());
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
