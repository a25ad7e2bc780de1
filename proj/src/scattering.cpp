#include "vida/scattering.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "vida/parallel.hpp"

namespace vida {

void ScatteringConfig::validate() const {
  if (scales < 1) throw ScatteringError(ScatteringErrorKind::InvalidConfig, "J must be >= 1");
  if (scales > 24) throw ScatteringError(ScatteringErrorKind::InvalidConfig, "J must be <= 24");
  if ((1L << scales) > lowpass_power)
    throw ScatteringError(ScatteringErrorKind::InvalidConfig, "low-pass power t must be at least 2^J");
  if (order != 1 && order != 2) throw ScatteringError(ScatteringErrorKind::InvalidConfig, "order must be 1 or 2");
  if (aggregation == Aggregation::Moments) {
    if (moments.empty()) throw ScatteringError(ScatteringErrorKind::InvalidConfig, "moment list is empty");
    for (int q : moments)
      if (q < 1) throw ScatteringError(ScatteringErrorKind::InvalidConfig, "moments must be >= 1");
  }
}

std::string FilterSpec::name() const {
  switch (kind) {
    case Kind::LowPass: return "lowpass";
    case Kind::Band: return "psi" + std::to_string(scale);
    case Kind::Band2: return "psi" + std::to_string(outer_scale) + "|psi" + std::to_string(scale) + "|";
  }
  return {};
}

nlohmann::json ScatteringLayout::to_json() const {
  nlohmann::json f = nlohmann::json::array();
  for (const auto& spec : filters) f.push_back(spec.name());
  return {{"nodes", nodes},
          {"filters", f},
          {"aggregation", aggregation == Aggregation::NodeWise ? "nodewise" : "moments"},
          {"moments", moments},
          {"order", "filter, signal, " + std::string(aggregation == Aggregation::NodeWise ? "node" : "moment")},
          {"size", size()}};
}

ScatteringLayout scattering_layout(std::size_t nodes, const ScatteringConfig& c) {
  c.validate();
  ScatteringLayout layout;
  layout.nodes = nodes;
  layout.aggregation = c.aggregation;
  if (c.aggregation == Aggregation::Moments) layout.moments = c.moments;
  layout.filters.push_back({FilterSpec::Kind::LowPass, 0, 0});
  for (int j = 1; j <= c.scales; ++j) layout.filters.push_back({FilterSpec::Kind::Band, j, 0});
  if (c.order == 2)
    for (int j = 1; j <= c.scales; ++j)
      for (int jj = j + 1; jj <= c.scales; ++jj) layout.filters.push_back({FilterSpec::Kind::Band2, j, jj});
  return layout;
}

Eigen::MatrixXd lazy_walk(const StateGraph& g) {
  const auto n = static_cast<Eigen::Index>(g.size());
  const auto degrees = g.degrees();
  Eigen::MatrixXd p = 0.5 * Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const int d = degrees[static_cast<std::size_t>(j)];
    if (d == 0) throw ScatteringError(ScatteringErrorKind::IsolatedNode, "node " + std::to_string(j) + " has no edges");
    const double w = 0.5 / d;
    for (Eigen::Index i = 0; i < n; ++i)
      if (g.adjacent(static_cast<std::size_t>(i), static_cast<std::size_t>(j))) p(i, j) += w;
  }
  return p;
}

namespace {

// P^(2^k) for k = 0..J by repeated squaring.
std::vector<Eigen::MatrixXd> dyadic_powers(const Eigen::MatrixXd& p, int scales) {
  std::vector<Eigen::MatrixXd> powers{p};
  for (int k = 1; k <= scales; ++k) powers.push_back(powers.back() * powers.back());
  return powers;
}

Eigen::MatrixXd matrix_power(std::vector<Eigen::MatrixXd> dyadic, long t) {
  const auto n = dyadic.front().rows();
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(n, n);
  for (std::size_t bit = 0; t > 0; ++bit, t >>= 1) {
    if (bit == dyadic.size()) dyadic.push_back(dyadic.back() * dyadic.back());
    if (t & 1) result = result * dyadic[bit];
  }
  return result;
}

}  // namespace

std::vector<Eigen::MatrixXd> wavelet_bank(const Eigen::MatrixXd& p, int scales) {
  const auto powers = dyadic_powers(p, scales);
  std::vector<Eigen::MatrixXd> psi;
  psi.reserve(static_cast<std::size_t>(scales));
  for (int j = 1; j <= scales; ++j)
    psi.push_back(powers[static_cast<std::size_t>(j - 1)] - powers[static_cast<std::size_t>(j)]);
  return psi;
}

ScatteringVector scatter(const StateGraph& g, const ScatteringConfig& c) {
  ScatteringVector out;
  out.layout = scattering_layout(g.size(), c);
  const Eigen::MatrixXd p = lazy_walk(g);
  const auto powers = dyadic_powers(p, c.scales);

  std::vector<Eigen::MatrixXd> responses;
  responses.reserve(out.layout.filters.size());
  responses.push_back(matrix_power(powers, c.lowpass_power));
  std::vector<Eigen::MatrixXd> band;
  for (int j = 1; j <= c.scales; ++j) {
    band.push_back((powers[static_cast<std::size_t>(j - 1)] - powers[static_cast<std::size_t>(j)]).cwiseAbs());
    responses.push_back(band.back());
  }
  if (c.order == 2) {
    for (int j = 1; j <= c.scales; ++j)
      for (int jj = j + 1; jj <= c.scales; ++jj) {
        const Eigen::MatrixXd outer =
            powers[static_cast<std::size_t>(jj - 1)] - powers[static_cast<std::size_t>(jj)];
        responses.push_back((outer * band[static_cast<std::size_t>(j - 1)]).cwiseAbs());
      }
  }

  const auto n = static_cast<Eigen::Index>(g.size());
  out.values.reserve(out.layout.size());
  for (const auto& r : responses) {
    for (Eigen::Index signal = 0; signal < n; ++signal) {
      if (c.aggregation == Aggregation::NodeWise) {
        for (Eigen::Index node = 0; node < n; ++node) out.values.push_back(r(node, signal));
      } else {
        for (int q : c.moments) {
          double m = 0.0;
          for (Eigen::Index node = 0; node < n; ++node) m += std::pow(std::abs(r(node, signal)), q);
          out.values.push_back(m);
        }
      }
    }
  }
  return out;
}

Eigen::MatrixXd FeatureMatrix::to_eigen() const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data[i * cols + j];
  return m;
}

FeatureMatrix scatter_all(std::span<const StateGraph> graphs, const ScatteringConfig& c) {
  FeatureMatrix f;
  if (graphs.empty()) return f;
  const auto nodes = graphs.front().size();
  for (const auto& g : graphs)
    if (g.size() != nodes) throw ScatteringError(ScatteringErrorKind::ShapeMismatch, "graphs differ in node count");
  f.layout = scattering_layout(nodes, c);
  f.rows = graphs.size();
  f.cols = f.layout.size();
  f.data.resize(f.rows * f.cols);
  parallel_for(graphs.size(), [&](std::size_t i) {
    const auto v = scatter(graphs[i], c);
    std::copy(v.values.begin(), v.values.end(), f.data.begin() + static_cast<std::ptrdiff_t>(i * f.cols));
  });
  return f;
}

namespace {

ScatteringLayout layout_from_json(const nlohmann::json& j) {
  ScatteringLayout l;
  l.nodes = j.at("nodes");
  l.aggregation = j.at("aggregation").get<std::string>() == "moments" ? Aggregation::Moments : Aggregation::NodeWise;
  l.moments = j.at("moments").get<std::vector<int>>();
  for (const auto& name : j.at("filters")) {
    const auto s = name.get<std::string>();
    FilterSpec spec;
    if (s == "lowpass") {
      spec.kind = FilterSpec::Kind::LowPass;
    } else if (s.find('|') == std::string::npos) {
      spec.kind = FilterSpec::Kind::Band;
      spec.scale = std::stoi(s.substr(3));
    } else {
      spec.kind = FilterSpec::Kind::Band2;
      const auto bar = s.find('|');
      spec.outer_scale = std::stoi(s.substr(3, bar - 3));
      spec.scale = std::stoi(s.substr(bar + 4));
    }
    l.filters.push_back(spec);
  }
  return l;
}

}  // namespace

void write_features(const std::string& path, const FeatureMatrix& f) {
  static_assert(std::endian::native == std::endian::little, "feature files are little-endian");
  std::ofstream bin(path, std::ios::binary);
  if (!bin) throw Error("cannot open '" + path + "' for writing");
  bin.write(reinterpret_cast<const char*>(f.data.data()), static_cast<std::streamsize>(f.data.size() * sizeof(double)));
  std::ofstream side(path + ".json");
  if (!side) throw Error("cannot open '" + path + ".json' for writing");
  const nlohmann::json j = {{"kind", "features"}, {"rows", f.rows}, {"cols", f.cols},
                            {"dtype", "f64le"},   {"order", "row-major"}, {"layout", f.layout.to_json()}};
  side << j.dump(2) << '\n';
}

FeatureMatrix read_features(const std::string& path) {
  std::ifstream side(path + ".json");
  if (!side) throw Error("missing feature sidecar '" + path + ".json'");
  FeatureMatrix f;
  try {
    const auto j = nlohmann::json::parse(side);
    if (j.at("dtype") != "f64le") throw Error("unsupported feature dtype");
    f.rows = j.at("rows");
    f.cols = j.at("cols");
    f.layout = layout_from_json(j.at("layout"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed feature sidecar: ") + e.what());
  }
  std::ifstream bin(path, std::ios::binary);
  if (!bin) throw Error("cannot open '" + path + "'");
  f.data.resize(f.rows * f.cols);
  bin.read(reinterpret_cast<char*>(f.data.data()), static_cast<std::streamsize>(f.data.size() * sizeof(double)));
  if (bin.gcount() != static_cast<std::streamsize>(f.data.size() * sizeof(double)) ||
      bin.peek() != std::char_traits<char>::eof())
    throw Error("feature payload size does not match sidecar");
  return f;
}

std::string features_to_csv(const FeatureMatrix& f) {
  std::string out = "id";
  for (std::size_t j = 0; j < f.cols; ++j) out += ",f" + std::to_string(j);
  out += '\n';
  char buf[40];
  for (std::size_t i = 0; i < f.rows; ++i) {
    out += std::to_string(i);
    for (double v : f.row(i)) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace vida
