#include "vida/dp.hpp"

#include <algorithm>
#include <numeric>

namespace vida {

namespace {

bool is_base(char c) { return c == 'A' || c == 'C' || c == 'G' || c == 'T'; }

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace

StrandSet::StrandSet(std::vector<Strand> strands) : strands_(std::move(strands)) {
  if (strands_.empty()) throw DpError(DpErrorKind::InvalidStrand, "strand set is empty");
  for (const auto& s : strands_) {
    if (s.sequence.empty())
      throw DpError(DpErrorKind::InvalidStrand, "strand '" + s.id + "' has an empty sequence");
    for (char c : s.sequence)
      if (!is_base(c))
        throw DpError(DpErrorKind::InvalidStrand,
                      "strand '" + s.id + "' contains non-ACGT character '" + std::string(1, c) + "'");
  }
}

StrandSet StrandSet::from_header(std::string_view header) {
  const std::string line = trim(header);
  std::vector<Strand> strands;
  std::size_t start = 0;
  for (;;) {
    const auto plus = line.find('+', start);
    const auto end = plus == std::string::npos ? line.size() : plus;
    strands.push_back({"s" + std::to_string(strands.size()), line.substr(start, end - start)});
    if (plus == std::string::npos) break;
    start = plus + 1;
  }
  return StrandSet(std::move(strands));
}

std::size_t StrandSet::total_length() const {
  std::size_t total = 0;
  for (const auto& s : strands_) total += s.sequence.size();
  return total;
}

std::vector<std::size_t> StrandSet::lengths() const {
  std::vector<std::size_t> out;
  out.reserve(strands_.size());
  for (const auto& s : strands_) out.push_back(s.sequence.size());
  return out;
}

std::optional<std::size_t> StrandSet::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < strands_.size(); ++i)
    if (strands_[i].id == id) return i;
  return std::nullopt;
}

std::string StrandSet::header() const {
  std::string out;
  for (std::size_t i = 0; i < strands_.size(); ++i) {
    if (i) out += '+';
    out += strands_[i].sequence;
  }
  return out;
}

SecondaryStructure parse_dp(std::string_view dp, std::span<const std::size_t> strand_lengths) {
  if (dp.empty()) throw DpError(DpErrorKind::EmptyInput, "empty dp string");
  if (strand_lengths.empty()) throw DpError(DpErrorKind::InvalidStrand, "no strand lengths given");

  std::size_t separators = 0;
  for (std::size_t i = 0; i < dp.size(); ++i) {
    const char c = dp[i];
    if (c == '+') {
      ++separators;
    } else if (c != '.' && c != '(' && c != ')') {
      throw DpError(DpErrorKind::IllegalCharacter,
                    "illegal character '" + std::string(1, c) + "' at position " + std::to_string(i));
    }
  }
  if (separators + 1 != strand_lengths.size())
    throw DpError(DpErrorKind::SeparatorCount, "expected " + std::to_string(strand_lengths.size() - 1) +
                                                   " '+' separators, found " + std::to_string(separators));

  SecondaryStructure s;
  s.dp_ = std::string(dp);
  s.strand_lengths_.assign(strand_lengths.begin(), strand_lengths.end());

  // Per-strand segment lengths.
  std::size_t segment = 0;
  std::size_t strand = 0;
  std::size_t offset = 0;
  s.strand_offsets_.push_back(0);
  auto close_segment = [&] {
    if (segment != strand_lengths[strand])
      throw DpError(DpErrorKind::LengthMismatch, "strand " + std::to_string(strand) + " has " +
                                                     std::to_string(segment) + " bases in dp, expected " +
                                                     std::to_string(strand_lengths[strand]));
  };
  for (char c : dp) {
    if (c == '+') {
      close_segment();
      offset += segment;
      s.strand_offsets_.push_back(offset);
      segment = 0;
      ++strand;
    } else {
      ++segment;
    }
  }
  close_segment();

  const std::size_t n = dp.size() - separators;
  s.pair_table_.assign(n, kUnpaired);
  std::vector<std::size_t> open;
  std::size_t base = 0;
  for (std::size_t i = 0; i < dp.size(); ++i) {
    const char c = dp[i];
    if (c == '+') continue;
    if (c == '(') {
      open.push_back(base);
    } else if (c == ')') {
      if (open.empty())
        throw DpError(DpErrorKind::UnbalancedParentheses, "unmatched ')' at position " + std::to_string(i));
      const std::size_t partner = open.back();
      open.pop_back();
      s.pair_table_[partner] = static_cast<int>(base);
      s.pair_table_[base] = static_cast<int>(partner);
    }
    ++base;
  }
  if (!open.empty())
    throw DpError(DpErrorKind::UnbalancedParentheses,
                  std::to_string(open.size()) + " unmatched '(' (first at base " + std::to_string(open.front()) + ")");
  return s;
}

SecondaryStructure parse_dp(std::string_view dp) {
  std::vector<std::size_t> lengths{0};
  for (char c : dp) {
    if (c == '+')
      lengths.push_back(0);
    else
      ++lengths.back();
  }
  return parse_dp(dp, lengths);
}

std::size_t SecondaryStructure::strand_of(std::size_t base) const {
  const auto it = std::upper_bound(strand_offsets_.begin(), strand_offsets_.end(), base);
  return static_cast<std::size_t>(it - strand_offsets_.begin()) - 1;
}

std::vector<std::pair<std::size_t, std::size_t>> SecondaryStructure::pairs() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < pair_table_.size(); ++i)
    if (pair_table_[i] > static_cast<int>(i)) out.emplace_back(i, static_cast<std::size_t>(pair_table_[i]));
  return out;
}

std::size_t SecondaryStructure::pair_count() const {
  return static_cast<std::size_t>(std::count_if(pair_table_.begin(), pair_table_.end(),
                                                [](int p) { return p != kUnpaired; })) /
         2;
}

std::string SecondaryStructure::serialize() const {
  std::string out;
  out.reserve(pair_table_.size() + strand_offsets_.size());
  std::size_t next_strand = 1;
  for (std::size_t i = 0; i < pair_table_.size(); ++i) {
    if (next_strand < strand_offsets_.size() && strand_offsets_[next_strand] == i) {
      out += '+';
      ++next_strand;
    }
    const int p = pair_table_[i];
    out += p == kUnpaired ? '.' : (p > static_cast<int>(i) ? '(' : ')');
  }
  return out;
}

StateGraph::StateGraph(std::size_t n, std::vector<GraphEdge> edges)
    : n_(n), adjacency_(n * n, 0), edges_(std::move(edges)) {
  for (const auto& e : edges_) {
    adjacency_[e.a * n_ + e.b] = 1;
    adjacency_[e.b * n_ + e.a] = 1;
  }
}

std::vector<int> StateGraph::degrees() const {
  std::vector<int> d(n_, 0);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) d[i] += adjacency_[i * n_ + j];
  return d;
}

StateGraph to_graph(const SecondaryStructure& s) {
  std::vector<GraphEdge> edges;
  const auto offsets = s.strand_offsets();
  const auto lengths = s.strand_lengths();
  for (std::size_t k = 0; k < lengths.size(); ++k)
    for (std::size_t i = 1; i < lengths[k]; ++i) {
      const auto base = static_cast<std::uint32_t>(offsets[k] + i);
      edges.push_back({base - 1, base, EdgeKind::Backbone});
    }
  for (const auto& [i, j] : s.pairs())
    edges.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), EdgeKind::BasePair});
  return StateGraph(s.length(), std::move(edges));
}

std::size_t ged(const StateGraph& a, const StateGraph& b) {
  if (a.size() != b.size())
    throw DpError(DpErrorKind::DimensionMismatch, "ged between graphs of size " + std::to_string(a.size()) +
                                                      " and " + std::to_string(b.size()));
  const auto x = a.adjacency();
  const auto y = b.adjacency();
  std::size_t d = 0;
  for (std::size_t i = 0; i < x.size(); ++i) d += x[i] != y[i];
  return d;
}

std::vector<std::vector<std::size_t>> strand_complexes(const SecondaryStructure& s) {
  const std::size_t k = s.strand_count();
  std::vector<std::size_t> parent(k);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& [i, j] : s.pairs()) {
    const auto a = find(s.strand_of(i));
    const auto b = find(s.strand_of(j));
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::vector<std::vector<std::size_t>> groups;
  std::vector<long> group_of(k, -1);
  for (std::size_t i = 0; i < k; ++i) {
    const auto root = find(i);
    if (group_of[root] < 0) {
      group_of[root] = static_cast<long>(groups.size());
      groups.emplace_back();
    }
    groups[static_cast<std::size_t>(group_of[root])].push_back(i);
  }
  return groups;
}

}  // namespace vida
