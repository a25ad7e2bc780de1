#include "vida/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "CLI11.hpp"
#include "vida/bundle.hpp"
#include "vida/config.hpp"
#include "vida/distances.hpp"
#include "vida/embed.hpp"
#include "vida/eval.hpp"
#include "vida/multistrand_io.hpp"
#include "vida/parallel.hpp"
#include "vida/scattering.hpp"

namespace vida {

namespace {

class IoError : public Error {
 public:
  using Error::Error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_output(const std::string& path, const std::string& content, std::ostream& out) {
  if (path == "-") {
    out << content;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError(path + ": cannot open for writing");
  f << content;
  if (!f) throw IoError(path + ": write failed");
}

nlohmann::json read_json(const std::string& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(path + ": " + e.what());
  }
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

// Re-raises library errors with the file they came from.
template <typename F>
auto with_path(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const IoError&) {
    throw;
  } catch (const Error& e) {
    throw IoError(path + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

Dataset load_dataset(const std::string& path) {
  return with_path(path, [&] { return dataset_from_json(read_json(path)); });
}

Embedding load_embedding(const std::string& path) {
  return with_path(path, [&] { return embedding_from_json(read_json(path)); });
}

NeighborTable load_table(const std::string& path) {
  return with_path(path, [&] {
    const std::string bytes = read_file(path);
    if (bytes.compare(0, 4, "VDNT") == 0) return neighbor_table_from_binary(bytes);
    return neighbor_table_from_json(nlohmann::json::parse(bytes));
  });
}

std::vector<StateGraph> graphs_of(const StateSpace& ss) {
  std::vector<StateGraph> g;
  g.reserve(ss.size());
  for (const auto& s : ss.states) g.push_back(to_graph(s));
  return g;
}

// TOML keys may spell a flag with underscores (min_samples for --min-samples).
class ConfigFile : public CLI::ConfigTOML {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigTOML::from_config(input);
    for (auto& item : items) std::replace(item.name.begin(), item.name.end(), '_', '-');
    return items;
  }
};

struct Globals {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string preset;
};

bool given(const CLI::App* app, const std::string& name) { return app->count(name) > 0; }

template <typename T>
void from_preset(const CLI::App* app, const std::string& name, T& target, const std::optional<T>& value) {
  if (value && !given(app, name)) target = *value;
}

// ---- subcommands -----------------------------------------------------------

struct ParseArgs {
  std::string log;
  std::string out = "-";
  std::string probability = "visits";
  std::optional<double> subsample;
  std::string reactive;
  std::string non_reactive;
};

int cmd_parse(const ParseArgs& a, std::ostream& out, std::ostream& err) {
  LogOptions options;
  options.probability = a.probability == "holding-time" ? ProbabilityMode::HoldingTime : ProbabilityMode::Visits;
  options.subsample_interval = a.subsample;
  Dataset d = with_path(a.log, [&] { return parse_log(read_file(a.log), options); });
  std::optional<OutcomeClassifier> classifier;
  if (!a.reactive.empty()) {
    classifier = OutcomeClassifier{parse_rule(a.reactive), std::nullopt};
    if (!a.non_reactive.empty()) classifier->non_reactive = parse_rule(a.non_reactive);
  } else if (!a.non_reactive.empty()) {
    throw IoError("--non-reactive requires --reactive");
  } else if (d.strands.size() == 2) {
    classifier = hybridization_classifier(d.strands);
  }
  if (classifier) classify_all(d, *classifier);
  write_output(a.out, dump(to_json(d)), out);
  err << "parsed " << d.trajectories.size() << " trajectories, " << d.states.size() << " states, "
      << d.transitions.edges().size() << " transitions\n";
  return 0;
}

struct StatsArgs {
  std::string dataset;
  std::string out = "-";
};

int cmd_stats(const StatsArgs& a, std::ostream& out) {
  const Dataset d = load_dataset(a.dataset);
  nlohmann::json j = to_json(stats(d.trajectories));
  j["states"] = d.states.size();
  j["transitions"] = d.transitions.edges().size();
  write_output(a.out, dump(j), out);
  return 0;
}

struct ScatterArgs {
  std::string dataset;
  std::string out;
  std::string csv;
  int scales = 4;
  std::optional<int> lowpass;
  int order = 1;
  std::string aggregation = "nodewise";
  std::vector<int> moments{1, 2, 3, 4};
};

int cmd_scatter(const ScatterArgs& a, std::ostream& out, std::ostream& err) {
  const Dataset d = load_dataset(a.dataset);
  ScatteringConfig c;
  c.scales = a.scales;
  c.lowpass_power = a.lowpass ? *a.lowpass : 1 << std::min(a.scales, 30);
  c.order = a.order;
  c.aggregation = a.aggregation == "moments" ? Aggregation::Moments : Aggregation::NodeWise;
  c.moments = a.moments;
  const auto graphs = graphs_of(d.states);
  const FeatureMatrix f = scatter_all(graphs, c);
  write_features(a.out, f);
  if (!a.csv.empty()) write_output(a.csv, features_to_csv(f), out);
  err << "scattered " << f.rows << " states into " << f.cols << " features\n";
  return 0;
}

struct DistancesArgs {
  std::string dataset;
  std::size_t k = 100;
  std::string ged_search = "auto";
  std::size_t trees = 16;
  std::size_t leaf_size = 32;
  std::size_t search_k = 0;
  bool symmetrize = false;
  std::string mpt_out;
  std::string ged_out;
  std::string format = "json";
};

int cmd_distances(const DistancesArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  if (a.mpt_out.empty() && a.ged_out.empty()) throw IoError("nothing to do: give --mpt-out and/or --ged-out");
  if (a.k == 0) throw IoError("--k must be positive");
  const Dataset d = load_dataset(a.dataset);
  auto emit = [&](const std::string& path, const NeighborTable& t, const WeightTable* w) {
    if (a.format == "binary") write_output(path, to_binary(t, w), out);
    else write_output(path, dump(to_json(t, w)), out);
  };
  if (!a.mpt_out.empty()) {
    NeighborTable t = mpt_knn(mpt_graph(d.transitions, d.states), a.k);
    if (a.symmetrize) t = symmetrize(t);
    const WeightTable w = importance_weights(t, d.states.probability);
    emit(a.mpt_out, t, &w);
    err << "mpt: " << t.pair_count() << " pairs\n";
  }
  if (!a.ged_out.empty()) {
    const auto graphs = graphs_of(d.states);
    const GedSearch mode = a.ged_search == "exact" ? GedSearch::Exact
                           : a.ged_search == "rp"  ? GedSearch::RandomProjection
                                                   : GedSearch::Auto;
    const NeighborTable t = ged_knn(graphs, a.k, mode, {a.trees, a.leaf_size, a.search_k, g.seed});
    emit(a.ged_out, t, nullptr);
    err << "ged: " << t.pair_count() << " pairs\n";
  }
  return 0;
}

struct EmbedArgs {
  std::string method = "stress";
  std::string dataset;
  std::string features;
  std::string mpt;
  std::string ged;
  std::string init = "auto";
  double delta = 0.0004;
  double epsilon = 0.00004;
  double lr = 1.0;
  int max_iter = 2000;
  double tol = 1e-12;
  bool normalize_targets = false;
  std::size_t knn = 5;
  double decay = 40.0;
  std::size_t landmarks = 2000;
  std::optional<int> t;
  int t_max = 100;
  int mds_iter = 300;
  double mds_tol = 1e-9;
  int dim = 2;
  std::string out = "-";
  std::string csv;
};

int cmd_embed(const EmbedArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  PhateConfig pc;
  pc.n_neighbors = a.knn;
  pc.decay = a.decay;
  pc.n_landmarks = a.landmarks;
  pc.t = a.t;
  pc.t_max = a.t_max;
  pc.out_dim = a.dim;
  pc.mds_max_iter = a.mds_iter;
  pc.mds_tol = a.mds_tol;
  pc.seed = g.seed;

  auto run_phate = [&]() {
    if (a.features.empty()) throw IoError("PHATE needs --features");
    const FeatureMatrix f = with_path(a.features, [&] { return read_features(a.features); });
    PhateResult r = phate(f.to_eigen(), pc);
    err << "phate: t = " << r.t << (r.used_landmarks ? " (landmarks)" : "") << ", MDS " << r.mds.iterations
        << " iterations, stress " << (r.mds.stress_trace.empty() ? 0.0 : r.mds.stress_trace.back())
        << (r.mds.converged ? "" : " (not converged)") << "\n";
    return r;
  };

  Embedding e;
  if (a.method == "phate") {
    e = run_phate().embedding;
  } else {
    if (a.dataset.empty() || (a.mpt.empty() && a.ged.empty()))
      throw IoError("stress embedding needs --dataset and at least one of --mpt, --ged");
    const Dataset d = load_dataset(a.dataset);
    StressConfig sc;
    sc.mpt_weight = a.mpt.empty() ? 0.0 : a.delta;
    sc.ged_weight = a.ged.empty() ? 0.0 : a.epsilon;
    sc.learning_rate = a.lr;
    sc.max_iter = a.max_iter;
    sc.tol = a.tol;
    sc.seed = g.seed;
    sc.out_dim = a.dim;
    sc.normalize_targets = a.normalize_targets;
    const bool phate_init = a.init == "phate" || (a.init == "auto" && !a.features.empty());
    sc.init = phate_init ? StressInit::PhateInit : StressInit::Random;
    NeighborTable mpt, ged;
    if (!a.mpt.empty()) mpt = load_table(a.mpt);
    if (!a.ged.empty()) ged = load_table(a.ged);
    const WeightTable w = importance_weights(mpt, d.states.probability);
    std::optional<Eigen::MatrixXd> init;
    if (phate_init) {
      init = run_phate().embedding.coords;
      if (init->rows() != static_cast<Eigen::Index>(d.states.size()))
        throw IoError(a.features + ": feature rows do not match the dataset's states");
    }
    StressResult r = stress_embed(mpt, w, ged, sc, d.states.size(), init);
    err << "stress: " << r.iterations << " iterations, loss " << r.loss_trace.front() << " -> " << r.loss_trace.back()
        << (r.converged ? "" : " (iteration limit reached)") << "\n";
    e = std::move(r.embedding);
  }
  write_output(a.out, dump(to_json(e)), out);
  if (!a.csv.empty()) write_output(a.csv, embedding_to_csv(e), out);
  return 0;
}

struct EvalArgs {
  std::string dataset;
  std::string embedding;
  std::vector<std::size_t> ks;
  bool unique_steps = false;
  std::string out = "-";
  std::string csv;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const Dataset d = load_dataset(a.dataset);
  const Embedding e = load_embedding(a.embedding);
  if (static_cast<std::size_t>(e.coords.rows()) != d.states.size())
    throw IoError(a.embedding + ": embedding rows do not match the dataset's states");
  std::vector<std::size_t> ks = a.ks;
  if (ks.empty())
    for (std::size_t k : {10, 50, 100})
      if (k < d.states.size()) ks.push_back(k);
  MetricsReport r;
  r.counting = a.unique_steps ? StepCounting::Unique : StepCounting::PerOccurrence;
  r.avg_distortion = avg_distortion(e.coords, d.trajectories, r.counting);
  if (!ks.empty()) {
    const auto graphs = graphs_of(d.states);
    r.local = local_preservation(e.coords, d.states.energy, graphs, ks);
  }
  r.config = {{"K", ks},
              {"step_counting", a.unique_steps ? "unique" : "per_occurrence"},
              {"embedding", e.provenance.method},
              {"embedding_config", e.provenance.config_hash}};
  write_output(a.out, dump(to_json(r)), out);
  if (!a.csv.empty()) write_output(a.csv, to_csv(r), out);
  return 0;
}

struct ClusterArgs {
  std::string dataset;
  std::string embedding;
  std::optional<double> eps;
  std::size_t min_samples = 4;
  double threshold = 0.0;
  std::optional<std::size_t> elbow_k;
  std::string out = "-";
  std::string csv;
};

int cmd_cluster(const ClusterArgs& a, std::ostream& out, std::ostream& err) {
  const Dataset d = load_dataset(a.dataset);
  const Embedding e = load_embedding(a.embedding);
  if (static_cast<std::size_t>(e.coords.rows()) != d.states.size())
    throw IoError(a.embedding + ": embedding rows do not match the dataset's states");
  const auto kept = filter_by_cumulative_time(d.states, a.threshold);
  double eps = 0.0;
  std::string source = "given";
  if (a.eps) {
    eps = *a.eps;
  } else {
    Eigen::MatrixXd points(static_cast<Eigen::Index>(kept.size()), e.coords.cols());
    for (std::size_t i = 0; i < kept.size(); ++i)
      points.row(static_cast<Eigen::Index>(i)) = e.coords.row(static_cast<Eigen::Index>(kept[i]));
    const ElbowResult elbow = elbow_eps(points, a.elbow_k.value_or(a.min_samples));
    eps = elbow.eps;
    source = elbow.degenerate ? "elbow_median" : "elbow";
    if (!(eps > 0.0)) throw IoError("elbow eps is zero; pass --eps");
  }
  const ClusterResult cr = cluster_states(e.coords, kept, eps, a.min_samples);
  const auto traps = kinetic_traps(cr, d.states);
  nlohmann::json tj = nlohmann::json::array();
  for (const auto& t : traps) tj.push_back(to_json(t));
  const nlohmann::json j = {{"schema_version", "1"},
                            {"kind", "clusters"},
                            {"eps", eps},
                            {"eps_source", source},
                            {"min_samples", a.min_samples},
                            {"threshold", a.threshold},
                            {"cluster_count", cr.cluster_count},
                            {"state_ids", cr.state_ids},
                            {"labels", cr.labels},
                            {"traps", std::move(tj)}};
  write_output(a.out, dump(j), out);
  if (!a.csv.empty()) write_output(a.csv, traps_to_csv(traps), out);
  err << "clusters: " << cr.cluster_count << " at eps " << eps << " (" << source << "), " << kept.size() << " of "
      << d.states.size() << " states kept\n";
  return 0;
}

struct ExportArgs {
  std::string dataset;
  std::string embedding;
  std::string clusters;
  std::string bundle;
  std::string reaction = "reaction";
  std::string out = "-";
};

int cmd_export(const ExportArgs& a, std::ostream& out) {
  ViewerBundle b;
  if (!a.bundle.empty()) {
    b = with_path(a.bundle, [&] { return bundle_from_json(read_json(a.bundle)); });
  } else {
    if (a.dataset.empty() || a.embedding.empty()) throw IoError("export needs --dataset and --embedding (or --bundle)");
    const Dataset d = load_dataset(a.dataset);
    const Embedding e = load_embedding(a.embedding);
    b = with_path(a.embedding, [&] { return make_bundle(d, e, a.reaction); });
    if (!a.clusters.empty()) {
      const nlohmann::json cj = read_json(a.clusters);
      b.clusters = with_path(a.clusters, [&] {
        ClusterResult cr;
        cr.state_ids = cj.at("state_ids").get<std::vector<std::size_t>>();
        cr.labels = cj.at("labels").get<std::vector<int>>();
        cr.cluster_count = cj.at("cluster_count").get<int>();
        const auto traps = kinetic_traps(cr, d.states);
        return make_bundle_clusters(cr, traps, d.states.size(), cj.at("eps").get<double>(),
                                    cj.at("min_samples").get<std::size_t>(), cj.at("threshold").get<double>());
      });
    }
  }
  const nlohmann::json j = to_json(b);
  const auto problems = validate_bundle(j);
  if (!problems.empty()) throw IoError("generated bundle failed validation: " + problems.front());
  write_output(a.out, dump(j), out);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Landscape analysis of DNA reaction trajectories", "vida"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Read options from a TOML-style key = value file (flags win)");
  app.config_formatter(std::make_shared<ConfigFile>());
  app.allow_config_extras(CLI::config_extras_mode::error);
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")->capture_default_str();
  std::vector<std::string> preset_names;
  for (const auto& p : presets()) preset_names.emplace_back(p.name);
  app.add_option("--preset", g.preset, "Parameter preset")->check(CLI::IsMember(preset_names));

  ParseArgs pa;
  auto* parse = app.add_subcommand("parse", "Parse a first-step-mode trajectory log into a dataset");
  parse->add_option("log", pa.log, "Trajectory log")->required();
  parse->add_option("-o,--out", pa.out, "Dataset JSON ('-' for stdout)")->capture_default_str();
  parse->add_option("--probability", pa.probability, "State probabilities from visit counts or holding time")
      ->check(CLI::IsMember({"visits", "holding-time"}))
      ->capture_default_str();
  parse->add_option("--subsample", pa.subsample, "Keep one state per interval (seconds)")->check(CLI::PositiveNumber);
  parse->add_option("--reactive", pa.reactive, "Reactive outcome rule: full-duplex:A,B | dissociated:A | dp:<dp>");
  parse->add_option("--non-reactive", pa.non_reactive, "Non-reactive outcome rule");

  StatsArgs sa;
  auto* stats_cmd = app.add_subcommand("stats", "Outcome counts and mean reaction time");
  stats_cmd->add_option("--dataset", sa.dataset, "Dataset JSON")->required();
  stats_cmd->add_option("-o,--out", sa.out, "Output JSON")->capture_default_str();

  ScatterArgs sca;
  auto* scatter_cmd = app.add_subcommand("scatter", "Geometric scattering features of every state");
  scatter_cmd->add_option("--dataset", sca.dataset, "Dataset JSON")->required();
  scatter_cmd->add_option("-o,--out", sca.out, "Feature matrix (raw f64, layout in <out>.json)")->required();
  scatter_cmd->add_option("--csv", sca.csv, "Also write features as CSV");
  scatter_cmd->add_option("--scales", sca.scales, "Dyadic scales J")->capture_default_str();
  scatter_cmd->add_option("--lowpass", sca.lowpass, "Low-pass diffusion power (default 2^J)");
  scatter_cmd->add_option("--order", sca.order, "Scattering order")->check(CLI::IsMember({1, 2}))->capture_default_str();
  scatter_cmd->add_option("--aggregation", sca.aggregation, "Keep node-wise responses or node moments")
      ->check(CLI::IsMember({"nodewise", "moments"}))
      ->capture_default_str();
  scatter_cmd->add_option("--moments", sca.moments, "Moment orders q")->delimiter(',')->capture_default_str();

  DistancesArgs da;
  auto* dist_cmd = app.add_subcommand("distances", "Minimum passage time and GED neighbour tables");
  dist_cmd->add_option("--dataset", da.dataset, "Dataset JSON")->required();
  dist_cmd->add_option("--k", da.k, "Neighbours per state")->capture_default_str();
  dist_cmd->add_option("--ged-search", da.ged_search, "GED neighbour search")
      ->check(CLI::IsMember({"exact", "rp", "auto"}))
      ->capture_default_str();
  dist_cmd->add_option("--trees", da.trees, "Projection trees")->capture_default_str();
  dist_cmd->add_option("--leaf-size", da.leaf_size, "Projection tree leaf size")->capture_default_str();
  dist_cmd->add_option("--search-k", da.search_k, "Candidate budget per query (0 = trees * k)")->capture_default_str();
  dist_cmd->add_flag("--symmetrize", da.symmetrize, "Add reverse MPT pairs, keeping the shorter time");
  dist_cmd->add_option("--mpt-out", da.mpt_out, "MPT table with importance weights");
  dist_cmd->add_option("--ged-out", da.ged_out, "GED table");
  dist_cmd->add_option("--format", da.format, "Table encoding")
      ->check(CLI::IsMember({"json", "binary"}))
      ->capture_default_str();

  EmbedArgs ea;
  auto* embed_cmd = app.add_subcommand("embed", "Embed states with PHATE or the MPT/GED stress objective");
  embed_cmd->add_option("--method", ea.method, "Embedding method")
      ->check(CLI::IsMember({"stress", "phate"}))
      ->capture_default_str();
  embed_cmd->add_option("--dataset", ea.dataset, "Dataset JSON (stress)");
  embed_cmd->add_option("--features", ea.features, "Scattering features (PHATE and PHATE initialisation)");
  embed_cmd->add_option("--mpt", ea.mpt, "MPT neighbour table");
  embed_cmd->add_option("--ged", ea.ged, "GED neighbour table");
  embed_cmd->add_option("--init", ea.init, "Stress initialisation (auto = phate when features are given)")
      ->check(CLI::IsMember({"auto", "phate", "random"}))
      ->capture_default_str();
  embed_cmd->add_option("--delta", ea.delta, "MPT loss weight")->capture_default_str();
  embed_cmd->add_option("--epsilon", ea.epsilon, "GED loss weight")->capture_default_str();
  embed_cmd->add_option("--lr", ea.lr, "First trial step of the line search")->capture_default_str();
  embed_cmd->add_option("--max-iter", ea.max_iter, "Stress iterations")->capture_default_str();
  embed_cmd->add_option("--tol", ea.tol, "Relative loss decrease counted as converged")->capture_default_str();
  embed_cmd->add_flag("--normalize-targets", ea.normalize_targets, "Scale each metric's targets to [0, 1]");
  embed_cmd->add_option("--knn", ea.knn, "PHATE kernel neighbours")->capture_default_str();
  embed_cmd->add_option("--decay", ea.decay, "PHATE kernel decay")->capture_default_str();
  embed_cmd->add_option("--landmarks", ea.landmarks, "PHATE landmark count")->capture_default_str();
  embed_cmd->add_option("--t", ea.t, "PHATE diffusion time (default: entropy knee)");
  embed_cmd->add_option("--t-max", ea.t_max, "Largest diffusion time searched")->capture_default_str();
  embed_cmd->add_option("--mds-iter", ea.mds_iter, "SMACOF iterations")->capture_default_str();
  embed_cmd->add_option("--mds-tol", ea.mds_tol, "SMACOF relative stress tolerance")->capture_default_str();
  embed_cmd->add_option("--dim", ea.dim, "Output dimension")->capture_default_str();
  embed_cmd->add_option("-o,--out", ea.out, "Embedding JSON")->capture_default_str();
  embed_cmd->add_option("--csv", ea.csv, "Also write id,x,y CSV");

  EvalArgs va;
  auto* eval_cmd = app.add_subcommand("eval", "Distortion and local preservation of an embedding");
  eval_cmd->add_option("--dataset", va.dataset, "Dataset JSON")->required();
  eval_cmd->add_option("--embedding", va.embedding, "Embedding JSON")->required();
  eval_cmd->add_option("--K", va.ks, "Neighbourhood sizes (default 10,50,100 below the state count)")
      ->delimiter(',');
  eval_cmd->add_flag("--unique-steps", va.unique_steps, "Count each distinct transition once in the distortion");
  eval_cmd->add_option("-o,--out", va.out, "Metrics JSON")->capture_default_str();
  eval_cmd->add_option("--csv", va.csv, "Also write metrics CSV");

  ClusterArgs ca;
  auto* cluster_cmd = app.add_subcommand("cluster", "DBSCAN on the embedding and kinetic trap table");
  cluster_cmd->add_option("--dataset", ca.dataset, "Dataset JSON")->required();
  cluster_cmd->add_option("--embedding", ca.embedding, "Embedding JSON")->required();
  cluster_cmd->add_option("--eps", ca.eps, "DBSCAN radius (default: elbow of the k-distance curve)")
      ->check(CLI::PositiveNumber);
  cluster_cmd->add_option("--min-samples", ca.min_samples, "DBSCAN core size, self included")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cluster_cmd->add_option("--threshold", ca.threshold, "Drop states with less cumulative time (seconds)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cluster_cmd->add_option("--elbow-k", ca.elbow_k, "Neighbour rank for the elbow curve (default min-samples)");
  cluster_cmd->add_option("-o,--out", ca.out, "Cluster JSON")->capture_default_str();
  cluster_cmd->add_option("--csv", ca.csv, "Also write the trap table as CSV");

  ExportArgs xa;
  auto* export_cmd = app.add_subcommand("export", "Write the viewer bundle");
  export_cmd->add_option("--dataset", xa.dataset, "Dataset JSON");
  export_cmd->add_option("--embedding", xa.embedding, "Embedding JSON");
  export_cmd->add_option("--clusters", xa.clusters, "Cluster JSON");
  export_cmd->add_option("--bundle", xa.bundle, "Re-export an existing bundle after validation");
  export_cmd->add_option("--reaction", xa.reaction, "Reaction name")->capture_default_str();
  export_cmd->add_option("-o,--out", xa.out, "Bundle JSON")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    set_thread_count(g.threads);
    if (const Preset* p = g.preset.empty() ? nullptr : find_preset(g.preset)) {
      from_preset<std::size_t>(dist_cmd, "--k", da.k, p->k);
      from_preset<double>(embed_cmd, "--delta", ea.delta, p->mpt_weight);
      from_preset<double>(embed_cmd, "--epsilon", ea.epsilon, p->ged_weight);
      from_preset<std::size_t>(embed_cmd, "--knn", ea.knn, p->n_neighbors);
      from_preset<double>(embed_cmd, "--decay", ea.decay, p->decay);
      from_preset<std::size_t>(embed_cmd, "--landmarks", ea.landmarks, p->n_landmarks);
      from_preset<std::size_t>(cluster_cmd, "--min-samples", ca.min_samples, p->min_samples);
      if (p->eps && !given(cluster_cmd, "--eps")) ca.eps = p->eps;
      from_preset<double>(cluster_cmd, "--threshold", ca.threshold, p->threshold);
    }
    if (*parse) return cmd_parse(pa, out, err);
    if (*stats_cmd) return cmd_stats(sa, out);
    if (*scatter_cmd) return cmd_scatter(sca, out, err);
    if (*dist_cmd) return cmd_distances(da, g, out, err);
    if (*embed_cmd) return cmd_embed(ea, g, out, err);
    if (*eval_cmd) return cmd_eval(va, out);
    if (*cluster_cmd) return cmd_cluster(ca, out, err);
    if (*export_cmd) return cmd_export(xa, out);
    err << "error: no subcommand\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace vida
