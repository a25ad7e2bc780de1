#include "vida/distances.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <limits>
#include <map>
#include <memory>
#include <queue>
#include <random>
#include <tuple>

#include "vida/parallel.hpp"

namespace vida {

namespace {

bool by_distance_then_id(const Neighbor& a, const Neighbor& b) {
  return std::tie(a.distance, a.id) < std::tie(b.distance, b.id);
}

std::uint64_t splitmix(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::string_view to_string(NeighborMetric m) {
  return m == NeighborMetric::MptSeconds ? "mpt_seconds" : "ged_count";
}

std::size_t NeighborTable::pair_count() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.size();
  return n;
}

WeightedDigraph mpt_graph(const TransitionGraph& tg, const StateSpace& ss) {
  if (tg.state_count() != ss.size())
    throw DistanceError(DistanceErrorKind::DimensionMismatch, "transition graph and state space differ in size");
  WeightedDigraph g;
  g.out.resize(ss.size());
  for (const auto& e : tg.edges())
    g.out[e.from].push_back({static_cast<std::uint32_t>(e.to), ss.mean_holding_time[e.from]});
  return g;
}

NeighborTable mpt_knn(const WeightedDigraph& g, std::span<const std::size_t> sources, std::size_t k) {
  const std::size_t n = g.size();
  for (const auto& arcs : g.out)
    for (const auto& a : arcs)
      if (!(a.weight >= 0.0) || a.to >= n)
        throw DistanceError(DistanceErrorKind::InvalidArgument, "MPT graph needs non-negative weights");
  NeighborTable table;
  table.metric = NeighborMetric::MptSeconds;
  table.k = k;
  table.rows.resize(n);
  for (auto s : sources)
    if (s >= n) throw DistanceError(DistanceErrorKind::InvalidArgument, "source state out of range");

  parallel_for(sources.size(), [&](std::size_t si) {
    const std::size_t source = sources[si];
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(n, inf);
    std::vector<char> done(n, 0);
    using Item = std::pair<double, std::uint32_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist[source] = 0.0;
    heap.emplace(0.0, static_cast<std::uint32_t>(source));
    std::vector<Neighbor> found;
    double kth = inf;
    while (!heap.empty() && k > 0) {
      const auto [d, u] = heap.top();
      heap.pop();
      if (done[u] || d > dist[u]) continue;
      // Settle past the k-th distance only while ties remain.
      if (found.size() >= k && d > kth) break;
      done[u] = 1;
      if (u != source) {
        found.push_back({u, d});
        if (found.size() == k) kth = d;
      }
      for (const auto& arc : g.out[u]) {
        const double nd = d + arc.weight;
        if (nd < dist[arc.to]) {
          dist[arc.to] = nd;
          heap.emplace(nd, arc.to);
        }
      }
    }
    std::sort(found.begin(), found.end(), by_distance_then_id);
    if (found.size() > k) found.resize(k);
    table.rows[source] = std::move(found);
  });
  return table;
}

NeighborTable mpt_knn(const WeightedDigraph& g, std::size_t k) {
  std::vector<std::size_t> all(g.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return mpt_knn(g, all, k);
}

NeighborTable symmetrize(const NeighborTable& t) {
  std::vector<std::map<std::uint32_t, double>> merged(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    for (const auto& nb : t.rows[i]) {
      for (const auto& [a, b] : {std::pair{i, static_cast<std::size_t>(nb.id)}, std::pair{static_cast<std::size_t>(nb.id), i}}) {
        auto [it, inserted] = merged[a].try_emplace(static_cast<std::uint32_t>(b), nb.distance);
        if (!inserted) it->second = std::min(it->second, nb.distance);
      }
    }
  NeighborTable out;
  out.metric = t.metric;
  out.k = t.k;
  out.rows.resize(t.rows.size());
  for (std::size_t i = 0; i < merged.size(); ++i) {
    for (const auto& [id, d] : merged[i]) out.rows[i].push_back({id, d});
    std::sort(out.rows[i].begin(), out.rows[i].end(), by_distance_then_id);
  }
  return out;
}

WeightTable importance_weights(const NeighborTable& t, std::span<const double> probability) {
  if (probability.size() != t.rows.size())
    throw DistanceError(DistanceErrorKind::DimensionMismatch, "probability vector does not match table size");
  WeightTable w;
  w.rows.resize(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    w.rows[i].reserve(t.rows[i].size());
    for (const auto& nb : t.rows[i]) w.rows[i].push_back(probability[i] * probability[nb.id]);
  }
  return w;
}

PackedAdjacency::PackedAdjacency(std::span<const StateGraph> graphs) : count_(graphs.size()) {
  if (graphs.empty()) return;
  nodes_ = graphs.front().size();
  const std::size_t bits = nodes_ * (nodes_ - (nodes_ ? 1 : 0)) / 2;
  words_ = std::max<std::size_t>(1, (bits + 63) / 64);
  bits_.assign(count_ * words_, 0);
  for (std::size_t g = 0; g < count_; ++g) {
    if (graphs[g].size() != nodes_)
      throw DistanceError(DistanceErrorKind::DimensionMismatch, "structures come from systems of different size");
    std::uint64_t* row = bits_.data() + g * words_;
    std::size_t bit = 0;
    for (std::size_t i = 0; i < nodes_; ++i)
      for (std::size_t j = i + 1; j < nodes_; ++j, ++bit)
        if (graphs[g].adjacent(i, j)) row[bit / 64] |= std::uint64_t{1} << (bit % 64);
  }
}

std::size_t PackedAdjacency::distance(std::size_t a, std::size_t b) const {
  const std::uint64_t* x = bits_.data() + a * words_;
  const std::uint64_t* y = bits_.data() + b * words_;
  std::size_t d = 0;
  for (std::size_t w = 0; w < words_; ++w) d += static_cast<std::size_t>(std::popcount(x[w] ^ y[w]));
  return 2 * d;
}

ProjectionForest::ProjectionForest(const PackedAdjacency& data, const ForestConfig& config)
    : data_(data), config_(config) {
  if (config_.trees == 0 || config_.leaf_size == 0)
    throw DistanceError(DistanceErrorKind::InvalidArgument, "forest needs at least one tree and a positive leaf size");
  std::vector<std::uint32_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::uint32_t>(i);
  for (std::size_t t = 0; t < config_.trees; ++t) {
    std::uint64_t state = config_.seed * 0x100000001b3ULL + t;
    roots_.push_back(build(all, state));
  }
}

std::int32_t ProjectionForest::build(std::vector<std::uint32_t> items, std::uint64_t& state) {
  const auto index = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();
  if (items.size() <= config_.leaf_size) {
    nodes_[static_cast<std::size_t>(index)].items = std::move(items);
    return index;
  }

  std::uint32_t a = items[splitmix(state) % items.size()];
  std::uint32_t b = a;
  for (int attempt = 0; attempt < 8 && data_.distance(a, b) == 0; ++attempt)
    b = items[splitmix(state) % items.size()];

  std::vector<std::uint32_t> left, right;
  if (data_.distance(a, b) != 0) {
    for (auto x : items) {
      const auto da = data_.distance(x, a);
      const auto db = data_.distance(x, b);
      if (da < db || (da == db && (splitmix(state) & 1)))
        left.push_back(x);
      else
        right.push_back(x);
    }
  }
  // Pivots that cannot separate the points: split at random.
  if (left.empty() || right.empty()) {
    left.clear();
    right.clear();
    for (auto x : items) (splitmix(state) & 1 ? left : right).push_back(x);
    if (left.empty() || right.empty()) {
      const auto half = static_cast<std::ptrdiff_t>(items.size() / 2);
      left.assign(items.begin(), items.begin() + half);
      right.assign(items.begin() + half, items.end());
    }
  }
  items.clear();
  items.shrink_to_fit();
  const auto l = build(std::move(left), state);
  const auto r = build(std::move(right), state);
  auto& node = nodes_[static_cast<std::size_t>(index)];
  node.pivot_a = a;
  node.pivot_b = b;
  node.left = l;
  node.right = r;
  return index;
}

std::vector<std::uint32_t> ProjectionForest::candidates(std::size_t query, std::size_t budget) const {
  // Best-first descent over all trees, ordered by the smallest margin seen
  // along the path (larger is more certain).
  using Item = std::tuple<double, std::int32_t>;
  std::priority_queue<Item> heap;
  for (auto root : roots_) heap.emplace(std::numeric_limits<double>::infinity(), root);
  std::vector<std::uint32_t> out;
  std::size_t visited = 0;
  while (!heap.empty() && visited < budget) {
    const auto [priority, id] = heap.top();
    heap.pop();
    const auto& node = nodes_[static_cast<std::size_t>(id)];
    if (node.left < 0) {
      out.insert(out.end(), node.items.begin(), node.items.end());
      visited += node.items.size();
      continue;
    }
    const double margin = static_cast<double>(data_.distance(query, node.pivot_b)) -
                          static_cast<double>(data_.distance(query, node.pivot_a));
    heap.emplace(std::min(priority, margin), node.left);
    heap.emplace(std::min(priority, -margin), node.right);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

NeighborTable ged_knn(std::span<const StateGraph> graphs, std::size_t k, GedSearch mode, const ForestConfig& forest) {
  const PackedAdjacency data(graphs);
  const std::size_t n = data.size();
  if (mode == GedSearch::Auto) mode = n < kExactSearchLimit ? GedSearch::Exact : GedSearch::RandomProjection;

  NeighborTable table;
  table.metric = NeighborMetric::GedCount;
  table.k = k;
  table.rows.resize(n);
  if (k == 0 || n < 2) return table;

  std::unique_ptr<ProjectionForest> index;
  std::size_t budget = 0;
  if (mode == GedSearch::RandomProjection) {
    index = std::make_unique<ProjectionForest>(data, forest);
    budget = forest.search_k ? forest.search_k : forest.trees * k;
  }

  parallel_for(n, [&](std::size_t q) {
    std::vector<Neighbor> found;
    auto consider = [&](std::size_t j) {
      if (j != q) found.push_back({static_cast<std::uint32_t>(j), static_cast<double>(data.distance(q, j))});
    };
    if (index) {
      for (auto j : index->candidates(q, budget)) consider(j);
    } else {
      found.reserve(n - 1);
      for (std::size_t j = 0; j < n; ++j) consider(j);
    }
    const std::size_t keep = std::min(k, found.size());
    std::partial_sort(found.begin(), found.begin() + static_cast<std::ptrdiff_t>(keep), found.end(),
                      by_distance_then_id);
    found.resize(keep);
    table.rows[q] = std::move(found);
  });
  return table;
}

nlohmann::json to_json(const NeighborTable& t, const WeightTable* weights) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t.rows) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& nb : r) row.push_back({nb.id, nb.distance});
    rows.push_back(std::move(row));
  }
  nlohmann::json j = {{"schema_version", "1"}, {"kind", "neighbor_table"}, {"metric", to_string(t.metric)}, {"k", t.k}, {"rows", rows}};
  if (weights) j["weights"] = weights->rows;
  return j;
}

NeighborTable neighbor_table_from_json(const nlohmann::json& j, WeightTable* weights) {
  try {
    NeighborTable t;
    const auto metric = j.at("metric").get<std::string>();
    if (metric == "mpt_seconds")
      t.metric = NeighborMetric::MptSeconds;
    else if (metric == "ged_count")
      t.metric = NeighborMetric::GedCount;
    else
      throw DistanceError(DistanceErrorKind::MalformedTable, "unknown metric '" + metric + "'");
    t.k = j.at("k");
    const auto n = j.at("rows").size();
    for (const auto& row : j.at("rows")) {
      std::vector<Neighbor> r;
      for (const auto& pair : row) {
        const auto id = pair.at(0).get<std::uint32_t>();
        if (id >= n) throw DistanceError(DistanceErrorKind::MalformedTable, "neighbor id out of range");
        r.push_back({id, pair.at(1).get<double>()});
      }
      t.rows.push_back(std::move(r));
    }
    if (weights) {
      if (!j.contains("weights")) throw DistanceError(DistanceErrorKind::MalformedTable, "table has no weights");
      weights->rows = j.at("weights").get<std::vector<std::vector<double>>>();
      if (weights->rows.size() != t.rows.size())
        throw DistanceError(DistanceErrorKind::MalformedTable, "weight rows do not match table rows");
      for (std::size_t i = 0; i < t.rows.size(); ++i)
        if (weights->rows[i].size() != t.rows[i].size())
          throw DistanceError(DistanceErrorKind::MalformedTable, "weight row length mismatch");
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw DistanceError(DistanceErrorKind::MalformedTable, std::string("malformed neighbor table JSON: ") + e.what());
  }
}

namespace {

template <typename T>
void put(std::string& out, T v) {
  static_assert(std::endian::native == std::endian::little);
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(std::string_view& in) {
  if (in.size() < sizeof(T)) throw DistanceError(DistanceErrorKind::MalformedTable, "truncated neighbor table");
  T v;
  std::memcpy(&v, in.data(), sizeof(T));
  in.remove_prefix(sizeof(T));
  return v;
}

}  // namespace

std::string to_binary(const NeighborTable& t, const WeightTable* weights) {
  std::string out = "VDNT";
  put<std::uint32_t>(out, 1);
  put<std::uint8_t>(out, t.metric == NeighborMetric::MptSeconds ? 0 : 1);
  put<std::uint8_t>(out, weights ? 1 : 0);
  put<std::uint16_t>(out, 0);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(t.k));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rows.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rows[i].size()));
    for (const auto& nb : t.rows[i]) {
      put<std::uint32_t>(out, nb.id);
      put<double>(out, nb.distance);
    }
    if (weights)
      for (double w : weights->rows.at(i)) put<double>(out, w);
  }
  return out;
}

NeighborTable neighbor_table_from_binary(std::string_view in, WeightTable* weights) {
  if (in.substr(0, 4) != "VDNT") throw DistanceError(DistanceErrorKind::MalformedTable, "bad neighbor table magic");
  in.remove_prefix(4);
  if (take<std::uint32_t>(in) != 1) throw DistanceError(DistanceErrorKind::MalformedTable, "unsupported version");
  NeighborTable t;
  t.metric = take<std::uint8_t>(in) == 0 ? NeighborMetric::MptSeconds : NeighborMetric::GedCount;
  const bool has_weights = take<std::uint8_t>(in) != 0;
  take<std::uint16_t>(in);
  t.k = take<std::uint32_t>(in);
  const auto rows = take<std::uint32_t>(in);
  t.rows.resize(rows);
  if (weights) weights->rows.assign(rows, {});
  for (std::uint32_t i = 0; i < rows; ++i) {
    const auto count = take<std::uint32_t>(in);
    for (std::uint32_t c = 0; c < count; ++c) {
      const auto id = take<std::uint32_t>(in);
      if (id >= rows) throw DistanceError(DistanceErrorKind::MalformedTable, "neighbor id out of range");
      t.rows[i].push_back({id, take<double>(in)});
    }
    if (has_weights)
      for (std::uint32_t c = 0; c < count; ++c) {
        const double w = take<double>(in);
        if (weights) weights->rows[i].push_back(w);
      }
  }
  if (weights && !has_weights) throw DistanceError(DistanceErrorKind::MalformedTable, "table has no weights");
  if (!in.empty()) throw DistanceError(DistanceErrorKind::MalformedTable, "trailing bytes after neighbor table");
  return t;
}

}  // namespace vida
