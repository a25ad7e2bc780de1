// Multi-strand dot-parenthesis secondary structures and their base graphs.
//
// A structure over strands s_0 + s_1 + ... is written as one dp string with
// '.' for unpaired bases, matching '(' ')' for base pairs and '+' between
// strands. Bases are indexed 0..L-1 in concatenation order with separators
// removed; that index is also the node id of the structure graph, so node
// identity is shared by every state of one reaction system.
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vida/error.hpp"

namespace vida {

enum class DpErrorKind {
  EmptyInput,
  IllegalCharacter,
  SeparatorCount,
  LengthMismatch,
  UnbalancedParentheses,
  InvalidStrand,
  DimensionMismatch,
};

using DpError = KindedError<DpErrorKind>;

struct Strand {
  std::string id;
  std::string sequence;  // over {A,C,G,T}

  bool operator==(const Strand&) const = default;
};

class StrandSet {
 public:
  StrandSet() = default;
  explicit StrandSet(std::vector<Strand> strands);

  // Parses a `SEQ(+SEQ)*` header line; strands are named s0, s1, ...
  static StrandSet from_header(std::string_view header);

  std::span<const Strand> strands() const { return strands_; }
  std::size_t size() const { return strands_.size(); }
  std::size_t total_length() const;
  std::vector<std::size_t> lengths() const;
  std::optional<std::size_t> index_of(std::string_view id) const;
  std::string header() const;

  bool operator==(const StrandSet&) const = default;

 private:
  std::vector<Strand> strands_;
};

inline constexpr int kUnpaired = -1;

class SecondaryStructure {
 public:
  SecondaryStructure() = default;

  const std::string& dp() const { return dp_; }
  // Entry i is the 0-based partner of base i, or kUnpaired.
  std::span<const int> pair_table() const { return pair_table_; }
  // First base index of each strand.
  std::span<const std::size_t> strand_offsets() const { return strand_offsets_; }
  std::span<const std::size_t> strand_lengths() const { return strand_lengths_; }

  std::size_t length() const { return pair_table_.size(); }
  std::size_t strand_count() const { return strand_lengths_.size(); }
  std::size_t strand_of(std::size_t base) const;

  // Base pairs (i, j) with i < j, ordered by i.
  std::vector<std::pair<std::size_t, std::size_t>> pairs() const;
  std::size_t pair_count() const;

  // Rebuilds the dp string from the pair table.
  std::string serialize() const;

  bool operator==(const SecondaryStructure& other) const { return dp_ == other.dp_; }

 private:
  friend SecondaryStructure parse_dp(std::string_view, std::span<const std::size_t>);

  std::string dp_;
  std::vector<int> pair_table_;
  std::vector<std::size_t> strand_offsets_;
  std::vector<std::size_t> strand_lengths_;
};

// Parses a dp string against explicit strand lengths. Only '(' and ')' are
// accepted as brackets, so every result is pseudoknot-free.
SecondaryStructure parse_dp(std::string_view dp, std::span<const std::size_t> strand_lengths);

// Same, with strand lengths read off the '+' separators.
SecondaryStructure parse_dp(std::string_view dp);

enum class EdgeKind : std::uint8_t { Backbone, BasePair };

struct GraphEdge {
  std::uint32_t a;
  std::uint32_t b;
  EdgeKind kind;
};

class StateGraph {
 public:
  StateGraph() = default;
  StateGraph(std::size_t n, std::vector<GraphEdge> edges);

  std::size_t size() const { return n_; }
  bool adjacent(std::size_t i, std::size_t j) const { return adjacency_[i * n_ + j] != 0; }
  // Row-major n*n 0/1 matrix.
  std::span<const std::uint8_t> adjacency() const { return adjacency_; }
  std::span<const GraphEdge> edges() const { return edges_; }
  std::vector<int> degrees() const;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> adjacency_;
  std::vector<GraphEdge> edges_;
};

// Backbone chain per strand plus one edge per base pair.
StateGraph to_graph(const SecondaryStructure& s);

// L1 distance between flattened adjacency matrices.
std::size_t ged(const StateGraph& a, const StateGraph& b);

// Strands grouped into complexes (connected through inter-strand pairs).
// Each group is sorted; groups are ordered by their smallest strand index.
std::vector<std::vector<std::size_t>> strand_complexes(const SecondaryStructure& s);

}  // namespace vida
