// Multistrand first-step-mode trajectory logs.
//
// Accepted grammar, one item per line:
//   header  := SEQ ('+' SEQ)*                      strand sequences over ACGT
//   record  := '[' INT ']' DP '|' FLOAT '|' FLOAT    dp, time in microseconds, dG in kcal/mol
//   comment := '#' ...
// Decorative lines from the simulator printout (rules of '-', the column
// caption containing '|', and "..." elision markers) are skipped. A change of
// the bracketed index, a blank line, or a new header starts a new trajectory;
// a blank line directly after an elision marker does not.
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "vida/dp.hpp"
#include "vida/error.hpp"

namespace vida {

enum class LogErrorKind { EmptyLog, MissingHeader, HeaderMismatch, MalformedRecord, InvalidStructure, NonMonotoneTime };

class LogError : public KindedError<LogErrorKind> {
 public:
  LogError(LogErrorKind kind, std::size_t line, const std::string& what)
      : KindedError(kind, line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

enum class Outcome { Reactive, NonReactive, Truncated };

std::string_view to_string(Outcome o);
Outcome outcome_from_string(std::string_view s);

struct TrajectoryStep {
  std::size_t state_id = 0;
  double time = 0.0;    // seconds
  double energy = 0.0;  // kcal/mol, as printed in the log
};

struct Trajectory {
  std::size_t id = 0;       // position in the dataset
  long log_index = 0;       // the bracketed [k] prefix
  std::vector<TrajectoryStep> steps;
  Outcome outcome = Outcome::Truncated;
};

enum class ProbabilityMode { Visits, HoldingTime };

// Deduplicated states with their occupancy statistics. All vectors are
// indexed by state id.
struct StateSpace {
  std::vector<SecondaryStructure> states;
  std::vector<double> energy;
  std::vector<std::size_t> visit_count;
  // Visits that were followed by another step (the ones that sampled a holding time).
  std::vector<std::size_t> holding_samples;
  std::vector<double> cumulative_time;
  std::vector<double> mean_holding_time;
  std::vector<double> probability;
  ProbabilityMode mode = ProbabilityMode::Visits;

  std::size_t size() const { return states.size(); }
  std::optional<std::size_t> find(std::string_view dp) const;
};

struct TransitionEdge {
  std::size_t from = 0;
  std::size_t to = 0;
  std::size_t count = 0;
};

// Observed transitions, sorted by (from, to). Self transitions are not edges.
class TransitionGraph {
 public:
  TransitionGraph() = default;
  TransitionGraph(std::size_t states, std::vector<TransitionEdge> edges, std::vector<double> mean_holding_time);

  std::size_t state_count() const { return mean_holding_time_.size(); }
  std::span<const TransitionEdge> edges() const { return edges_; }
  std::span<const TransitionEdge> out_edges(std::size_t state) const;
  std::optional<std::size_t> count(std::size_t from, std::size_t to) const;
  double mean_holding_time(std::size_t state) const { return mean_holding_time_[state]; }

 private:
  std::vector<TransitionEdge> edges_;
  std::vector<std::size_t> offsets_;
  std::vector<double> mean_holding_time_;
};

struct Dataset {
  StrandSet strands;
  std::vector<Trajectory> trajectories;
  StateSpace states;
  TransitionGraph transitions;
};

struct LogOptions {
  ProbabilityMode probability = ProbabilityMode::Visits;
  // When set, every trajectory is subsampled at this interval (seconds)
  // before states are counted.
  std::optional<double> subsample_interval;
};

Dataset parse_log(std::string_view text, const LogOptions& options = {});

// Recomputes state statistics and transitions from trajectories whose step
// state ids index `states`. Unreferenced states are dropped and ids compacted
// in order of first appearance.
Dataset assemble_dataset(StrandSet strands, std::span<const SecondaryStructure> states,
                         std::vector<Trajectory> trajectories, ProbabilityMode mode);

// Keeps the first step of every interval [k*dt, (k+1)*dt) measured from the
// first step, plus the final step.
Trajectory subsample(const Trajectory& t, double interval);

// Dataset with every trajectory subsampled and statistics recomputed.
Dataset resample(const Dataset& d, double interval);

// Outcome predicates on the final state of a trajectory.
struct FullDuplex {
  std::string first;   // strand ids
  std::string second;
};
struct Dissociated {
  std::string strand;  // the named strand ends alone in its complex
};
struct DpPattern {
  std::string dp;
};
using OutcomeRule = std::variant<FullDuplex, Dissociated, DpPattern>;

struct OutcomeClassifier {
  OutcomeRule reactive;
  std::optional<OutcomeRule> non_reactive;
};

enum class ClassifyErrorKind { UnknownStrand, InvalidRule };
using ClassifyError = KindedError<ClassifyErrorKind>;

bool rule_satisfied(const OutcomeRule& rule, const SecondaryStructure& s, const StrandSet& strands);

// Reactive if the reactive rule holds on the final state, NonReactive if the
// non-reactive rule holds, Truncated otherwise.
Outcome classify_outcome(const Trajectory& t, const StateSpace& states, const StrandSet& strands,
                         const OutcomeClassifier& classifier);

void classify_all(Dataset& d, const OutcomeClassifier& classifier);

// Default rules for a two-strand hybridization: full duplex is reactive,
// separated strands are non-reactive.
OutcomeClassifier hybridization_classifier(const StrandSet& strands);

OutcomeRule parse_rule(std::string_view text);  // "full-duplex:A,B" | "dissociated:A" | "dp:<dp>"

struct TrajectoryStats {
  std::size_t total = 0;
  std::size_t reactive = 0;
  std::size_t non_reactive = 0;
  std::size_t truncated = 0;
  double fraction_reactive = 0.0;
  // Mean final time (seconds) over reactive trajectories.
  std::optional<double> mean_reaction_time;
};

TrajectoryStats stats(std::span<const Trajectory> trajectories);

// Log text in the accepted grammar. format_log(parse_log(format_log(d)))
// reproduces its input byte for byte.
std::string format_log(const Dataset& d);

struct LogRecord {
  std::string dp;
  double time = 0.0;  // seconds
  double energy = 0.0;
};
struct LogTrajectory {
  long index = 1;
  std::vector<LogRecord> records;
};
std::string format_log(const StrandSet& strands, std::span<const LogTrajectory> trajectories);

nlohmann::json to_json(const Dataset& d);
Dataset dataset_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrajectoryStats& s);

}  // namespace vida
