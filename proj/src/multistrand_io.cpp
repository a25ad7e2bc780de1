#include "vida/multistrand_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <tuple>
#include <unordered_map>

namespace vida {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

bool all_of_chars(std::string_view s, std::string_view allowed) {
  return !s.empty() && s.find_first_not_of(allowed) == std::string_view::npos;
}

std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

struct RawRecord {
  std::size_t state;
  double time_us;
  double energy;
  std::size_t line;
};

struct RawTrajectory {
  long index;
  std::vector<RawRecord> records;
};

std::string format_shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string format_time_us(double seconds) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", seconds * 1e6);
  return buf;
}

}  // namespace

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Reactive: return "reactive";
    case Outcome::NonReactive: return "non_reactive";
    case Outcome::Truncated: return "truncated";
  }
  return "truncated";
}

Outcome outcome_from_string(std::string_view s) {
  if (s == "reactive") return Outcome::Reactive;
  if (s == "non_reactive") return Outcome::NonReactive;
  if (s == "truncated") return Outcome::Truncated;
  throw Error("unknown outcome '" + std::string(s) + "'");
}

std::optional<std::size_t> StateSpace::find(std::string_view dp) const {
  for (std::size_t i = 0; i < states.size(); ++i)
    if (states[i].dp() == dp) return i;
  return std::nullopt;
}

TransitionGraph::TransitionGraph(std::size_t states, std::vector<TransitionEdge> edges,
                                 std::vector<double> mean_holding_time)
    : edges_(std::move(edges)), offsets_(states + 1, 0), mean_holding_time_(std::move(mean_holding_time)) {
  if (mean_holding_time_.size() != states) throw Error("transition graph: holding-time vector size mismatch");
  std::sort(edges_.begin(), edges_.end(),
            [](const auto& a, const auto& b) { return std::tie(a.from, a.to) < std::tie(b.from, b.to); });
  for (const auto& e : edges_) {
    if (e.from >= states || e.to >= states) throw Error("transition graph: edge references unknown state");
    ++offsets_[e.from + 1];
  }
  for (std::size_t i = 0; i < states; ++i) offsets_[i + 1] += offsets_[i];
}

std::span<const TransitionEdge> TransitionGraph::out_edges(std::size_t state) const {
  return std::span<const TransitionEdge>(edges_).subspan(offsets_[state], offsets_[state + 1] - offsets_[state]);
}

std::optional<std::size_t> TransitionGraph::count(std::size_t from, std::size_t to) const {
  for (const auto& e : out_edges(from))
    if (e.to == to) return e.count;
  return std::nullopt;
}

Dataset parse_log(std::string_view text, const LogOptions& options) {
  std::optional<StrandSet> strands;
  std::vector<std::size_t> lengths;
  std::vector<RawTrajectory> raw;
  std::vector<SecondaryStructure> states;
  std::unordered_map<std::string, std::size_t> index_of;
  bool open = false;        // records may extend the last trajectory
  bool after_elision = false;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto end = nl == std::string_view::npos ? text.size() : nl;
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (nl == std::string_view::npos && line.empty()) break;

    const std::string_view t = trim(line);
    if (t.empty()) {
      if (!after_elision) open = false;
      continue;
    }
    if (t.front() == '#' || all_of_chars(t, "-")) continue;
    if (all_of_chars(t, ".")) {
      after_elision = true;
      continue;
    }
    if (t.front() == '[') {
      if (!strands) throw LogError(LogErrorKind::MissingHeader, line_no, "record before sequence header");
      const auto close = t.find(']');
      if (close == std::string_view::npos)
        throw LogError(LogErrorKind::MalformedRecord, line_no, "missing ']' in trajectory index");
      long index = 0;
      const auto idx = t.substr(1, close - 1);
      const auto [ip, iec] = std::from_chars(idx.data(), idx.data() + idx.size(), index);
      if (iec != std::errc{} || ip != idx.data() + idx.size() || idx.empty())
        throw LogError(LogErrorKind::MalformedRecord, line_no, "non-integer trajectory index");

      std::vector<std::string_view> fields;
      std::string_view rest = t.substr(close + 1);
      for (;;) {
        const auto bar = rest.find('|');
        fields.push_back(trim(rest.substr(0, bar)));
        if (bar == std::string_view::npos) break;
        rest = rest.substr(bar + 1);
      }
      if (fields.size() != 3)
        throw LogError(LogErrorKind::MalformedRecord, line_no,
                       "expected 3 '|'-separated columns, found " + std::to_string(fields.size()));
      const auto time = parse_number(fields[1]);
      const auto energy = parse_number(fields[2]);
      if (!time) throw LogError(LogErrorKind::MalformedRecord, line_no, "non-numeric time '" + std::string(fields[1]) + "'");
      if (!energy)
        throw LogError(LogErrorKind::MalformedRecord, line_no, "non-numeric energy '" + std::string(fields[2]) + "'");
      if (*time < 0.0) throw LogError(LogErrorKind::MalformedRecord, line_no, "negative time");
      auto [known, inserted] = index_of.try_emplace(std::string(fields[0]), states.size());
      if (inserted) {
        try {
          states.push_back(parse_dp(fields[0], lengths));
        } catch (const DpError& e) {
          index_of.erase(known);
          throw LogError(LogErrorKind::InvalidStructure, line_no, e.what());
        }
      }

      if (!open || raw.back().index != index) raw.push_back({index, {}});
      auto& records = raw.back().records;
      if (!records.empty() && *time < records.back().time_us)
        throw LogError(LogErrorKind::NonMonotoneTime, line_no,
                       "time " + std::string(fields[1]) + " precedes previous step");
      records.push_back({known->second, *time, *energy, line_no});
      open = true;
      after_elision = false;
      continue;
    }
    if (t.find('|') != std::string_view::npos) continue;  // column caption
    if (all_of_chars(t, "ACGT+")) {
      StrandSet header;
      try {
        header = StrandSet::from_header(t);
      } catch (const DpError& e) {
        throw LogError(LogErrorKind::MalformedRecord, line_no, e.what());
      }
      if (strands && !(header == *strands))
        throw LogError(LogErrorKind::HeaderMismatch, line_no, "sequence header differs from the first header");
      strands = std::move(header);
      lengths = strands->lengths();
      open = false;
      after_elision = false;
      continue;
    }
    throw LogError(LogErrorKind::MalformedRecord, line_no, "unrecognized line");
  }

  if (raw.empty()) throw LogError(LogErrorKind::EmptyLog, 0, "log contains no trajectory records");

  std::vector<Trajectory> trajectories;
  trajectories.reserve(raw.size());
  for (const auto& r : raw) {
    Trajectory t;
    t.id = trajectories.size();
    t.log_index = r.index;
    t.steps.reserve(r.records.size());
    for (const auto& rec : r.records) t.steps.push_back({rec.state, rec.time_us * 1e-6, rec.energy});
    if (options.subsample_interval) t = subsample(t, *options.subsample_interval);
    trajectories.push_back(std::move(t));
  }
  return assemble_dataset(*strands, states, std::move(trajectories), options.probability);
}

Dataset assemble_dataset(StrandSet strands, std::span<const SecondaryStructure> states,
                         std::vector<Trajectory> trajectories, ProbabilityMode mode) {
  constexpr std::size_t kUnseen = static_cast<std::size_t>(-1);
  std::vector<std::size_t> remap(states.size(), kUnseen);
  Dataset d;
  d.strands = std::move(strands);
  StateSpace& ss = d.states;
  ss.mode = mode;

  std::unordered_map<std::uint64_t, std::size_t> edge_count;
  for (std::size_t ti = 0; ti < trajectories.size(); ++ti) {
    auto& t = trajectories[ti];
    t.id = ti;
    if (t.steps.empty()) throw Error("trajectory " + std::to_string(ti) + " has no steps");
    for (auto& step : t.steps) {
      if (step.state_id >= states.size()) throw Error("trajectory step references unknown state");
      auto& id = remap[step.state_id];
      if (id == kUnseen) {
        id = ss.states.size();
        ss.states.push_back(states[step.state_id]);
        ss.energy.push_back(step.energy);
        ss.visit_count.push_back(0);
        ss.holding_samples.push_back(0);
        ss.cumulative_time.push_back(0.0);
      }
      step.state_id = id;
    }
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
      const auto s = t.steps[i].state_id;
      ++ss.visit_count[s];
      if (i + 1 == t.steps.size()) continue;
      const auto next = t.steps[i + 1].state_id;
      const double hold = t.steps[i + 1].time - t.steps[i].time;
      if (hold < 0.0) throw Error("trajectory " + std::to_string(ti) + " has decreasing times");
      ss.cumulative_time[s] += hold;
      ++ss.holding_samples[s];
      if (next != s) ++edge_count[(static_cast<std::uint64_t>(s) << 32) | next];
    }
  }

  const std::size_t n = ss.states.size();
  ss.mean_holding_time.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    ss.mean_holding_time[i] = ss.holding_samples[i] ? ss.cumulative_time[i] / ss.holding_samples[i] : 0.0;

  double total_visits = 0.0;
  double total_time = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total_visits += static_cast<double>(ss.visit_count[i]);
    total_time += ss.cumulative_time[i];
  }
  ss.probability.resize(n);
  const bool by_time = mode == ProbabilityMode::HoldingTime && total_time > 0.0;
  for (std::size_t i = 0; i < n; ++i)
    ss.probability[i] = by_time ? ss.cumulative_time[i] / total_time : ss.visit_count[i] / total_visits;

  std::vector<TransitionEdge> edges;
  edges.reserve(edge_count.size());
  for (const auto& [key, count] : edge_count)
    edges.push_back({static_cast<std::size_t>(key >> 32), static_cast<std::size_t>(key & 0xffffffffu), count});
  d.transitions = TransitionGraph(n, std::move(edges), ss.mean_holding_time);
  d.trajectories = std::move(trajectories);
  return d;
}

Trajectory subsample(const Trajectory& t, double interval) {
  if (!(interval > 0.0)) throw Error("subsample interval must be positive");
  Trajectory out;
  out.id = t.id;
  out.log_index = t.log_index;
  out.outcome = t.outcome;
  if (t.steps.empty()) return out;
  const double t0 = t.steps.front().time;
  auto bin = [&](double time) {
    const double q = (time - t0) / interval;
    double k = std::floor(q);
    if (k + 1.0 - q <= 1e-9 * std::max(1.0, q)) k += 1.0;
    return k;
  };
  double last_bin = -1.0;
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const double b = bin(t.steps[i].time);
    if (b > last_bin || i + 1 == t.steps.size()) {
      out.steps.push_back(t.steps[i]);
      last_bin = b;
    }
  }
  return out;
}

Dataset resample(const Dataset& d, double interval) {
  std::vector<Trajectory> trajectories;
  trajectories.reserve(d.trajectories.size());
  for (const auto& t : d.trajectories) trajectories.push_back(subsample(t, interval));
  return assemble_dataset(d.strands, d.states.states, std::move(trajectories), d.states.mode);
}

namespace {

std::size_t strand_index(const StrandSet& strands, const std::string& id) {
  const auto idx = strands.index_of(id);
  if (!idx) throw ClassifyError(ClassifyErrorKind::UnknownStrand, "outcome rule names unknown strand '" + id + "'");
  return *idx;
}

}  // namespace

bool rule_satisfied(const OutcomeRule& rule, const SecondaryStructure& s, const StrandSet& strands) {
  if (const auto* full = std::get_if<FullDuplex>(&rule)) {
    const auto a = strand_index(strands, full->first);
    const auto b = strand_index(strands, full->second);
    const auto pt = s.pair_table();
    for (std::size_t i = 0; i < s.length(); ++i) {
      const auto strand = s.strand_of(i);
      if (strand != a && strand != b) continue;
      if (pt[i] == kUnpaired) return false;
      const auto other = s.strand_of(static_cast<std::size_t>(pt[i]));
      if ((strand == a && other != b) || (strand == b && other != a)) return false;
    }
    return true;
  }
  if (const auto* diss = std::get_if<Dissociated>(&rule)) {
    const auto x = strand_index(strands, diss->strand);
    for (const auto& group : strand_complexes(s))
      if (std::find(group.begin(), group.end(), x) != group.end()) return group.size() == 1;
    return false;
  }
  return s.dp() == std::get<DpPattern>(rule).dp;
}

Outcome classify_outcome(const Trajectory& t, const StateSpace& states, const StrandSet& strands,
                         const OutcomeClassifier& classifier) {
  if (t.steps.empty()) throw Error("cannot classify an empty trajectory");
  const auto& final_state = states.states.at(t.steps.back().state_id);
  if (rule_satisfied(classifier.reactive, final_state, strands)) return Outcome::Reactive;
  if (classifier.non_reactive && rule_satisfied(*classifier.non_reactive, final_state, strands))
    return Outcome::NonReactive;
  return Outcome::Truncated;
}

void classify_all(Dataset& d, const OutcomeClassifier& classifier) {
  for (auto& t : d.trajectories) t.outcome = classify_outcome(t, d.states, d.strands, classifier);
}

OutcomeClassifier hybridization_classifier(const StrandSet& strands) {
  if (strands.size() != 2)
    throw ClassifyError(ClassifyErrorKind::InvalidRule, "default hybridization rules need exactly two strands");
  const auto& s = strands.strands();
  return {FullDuplex{s[0].id, s[1].id}, Dissociated{s[0].id}};
}

OutcomeRule parse_rule(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos)
    throw ClassifyError(ClassifyErrorKind::InvalidRule, "outcome rule '" + std::string(text) + "' lacks ':'");
  const auto kind = text.substr(0, colon);
  const std::string arg(text.substr(colon + 1));
  if (kind == "full-duplex") {
    const auto comma = arg.find(',');
    if (comma == std::string::npos)
      throw ClassifyError(ClassifyErrorKind::InvalidRule, "full-duplex rule needs two strand ids");
    return FullDuplex{arg.substr(0, comma), arg.substr(comma + 1)};
  }
  if (kind == "dissociated") return Dissociated{arg};
  if (kind == "dp") return DpPattern{arg};
  throw ClassifyError(ClassifyErrorKind::InvalidRule, "unknown outcome rule kind '" + std::string(kind) + "'");
}

TrajectoryStats stats(std::span<const Trajectory> trajectories) {
  if (trajectories.empty()) throw Error("stats over zero trajectories");
  TrajectoryStats s;
  s.total = trajectories.size();
  double time_sum = 0.0;
  for (const auto& t : trajectories) {
    switch (t.outcome) {
      case Outcome::Reactive:
        ++s.reactive;
        time_sum += t.steps.back().time;
        break;
      case Outcome::NonReactive: ++s.non_reactive; break;
      case Outcome::Truncated: ++s.truncated; break;
    }
  }
  s.fraction_reactive = static_cast<double>(s.reactive) / static_cast<double>(s.total);
  if (s.reactive) s.mean_reaction_time = time_sum / static_cast<double>(s.reactive);
  return s;
}

std::string format_log(const StrandSet& strands, std::span<const LogTrajectory> trajectories) {
  std::string out = strands.header();
  out += '\n';
  for (std::size_t k = 0; k < trajectories.size(); ++k) {
    if (k) out += '\n';
    const std::string prefix = "[" + std::to_string(trajectories[k].index) + "] ";
    for (const auto& r : trajectories[k].records) {
      out += prefix;
      out += r.dp;
      out += " | ";
      out += format_time_us(r.time);
      out += " | ";
      out += format_shortest(r.energy);
      out += '\n';
    }
  }
  return out;
}

std::string format_log(const Dataset& d) {
  std::vector<LogTrajectory> trajectories;
  trajectories.reserve(d.trajectories.size());
  for (const auto& t : d.trajectories) {
    LogTrajectory lt{t.log_index, {}};
    for (const auto& step : t.steps)
      lt.records.push_back({d.states.states[step.state_id].dp(), step.time, step.energy});
    trajectories.push_back(std::move(lt));
  }
  return format_log(d.strands, trajectories);
}

nlohmann::json to_json(const Dataset& d) {
  using nlohmann::json;
  json strands = json::array();
  for (const auto& s : d.strands.strands()) strands.push_back({{"id", s.id}, {"sequence", s.sequence}});

  const auto& ss = d.states;
  json states = json::array();
  for (std::size_t i = 0; i < ss.size(); ++i)
    states.push_back({{"id", i},
                      {"dp", ss.states[i].dp()},
                      {"energy", ss.energy[i]},
                      {"visit_count", ss.visit_count[i]},
                      {"holding_samples", ss.holding_samples[i]},
                      {"cumulative_time", ss.cumulative_time[i]},
                      {"mean_holding_time", ss.mean_holding_time[i]},
                      {"p", ss.probability[i]}});

  json edges = json::array();
  for (const auto& e : d.transitions.edges()) edges.push_back({{"from", e.from}, {"to", e.to}, {"count", e.count}});

  json trajectories = json::array();
  for (const auto& t : d.trajectories) {
    json ids = json::array(), times = json::array(), energies = json::array();
    for (const auto& s : t.steps) {
      ids.push_back(s.state_id);
      times.push_back(s.time);
      energies.push_back(s.energy);
    }
    trajectories.push_back({{"id", t.id},
                            {"log_index", t.log_index},
                            {"outcome", to_string(t.outcome)},
                            {"states", ids},
                            {"times", times},
                            {"energies", energies}});
  }
  return {{"schema_version", "1"},
          {"kind", "dataset"},
          {"probability_mode", ss.mode == ProbabilityMode::Visits ? "visits" : "holding_time"},
          {"strands", strands},
          {"states", states},
          {"transitions", edges},
          {"trajectories", trajectories}};
}

Dataset dataset_from_json(const nlohmann::json& j) {
  try {
    if (j.at("kind").get<std::string>() != "dataset") throw Error("JSON document is not a dataset");
    Dataset d;
    std::vector<Strand> strands;
    for (const auto& s : j.at("strands")) strands.push_back({s.at("id"), s.at("sequence")});
    d.strands = StrandSet(std::move(strands));
    const auto lengths = d.strands.lengths();

    auto& ss = d.states;
    const auto mode = j.at("probability_mode").get<std::string>();
    if (mode != "visits" && mode != "holding_time") throw Error("unknown probability_mode '" + mode + "'");
    ss.mode = mode == "visits" ? ProbabilityMode::Visits : ProbabilityMode::HoldingTime;
    for (const auto& s : j.at("states")) {
      if (s.at("id").get<std::size_t>() != ss.size()) throw Error("state ids must be consecutive from 0");
      ss.states.push_back(parse_dp(s.at("dp").get<std::string>(), lengths));
      ss.energy.push_back(s.at("energy"));
      ss.visit_count.push_back(s.at("visit_count"));
      ss.holding_samples.push_back(s.at("holding_samples"));
      ss.cumulative_time.push_back(s.at("cumulative_time"));
      ss.mean_holding_time.push_back(s.at("mean_holding_time"));
      ss.probability.push_back(s.at("p"));
    }
    std::vector<TransitionEdge> edges;
    for (const auto& e : j.at("transitions")) edges.push_back({e.at("from"), e.at("to"), e.at("count")});
    d.transitions = TransitionGraph(ss.size(), std::move(edges), ss.mean_holding_time);

    for (const auto& tj : j.at("trajectories")) {
      Trajectory t;
      t.id = tj.at("id");
      t.log_index = tj.at("log_index");
      t.outcome = outcome_from_string(tj.at("outcome").get<std::string>());
      const auto& ids = tj.at("states");
      const auto& times = tj.at("times");
      const auto& energies = tj.at("energies");
      if (ids.size() != times.size() || ids.size() != energies.size())
        throw Error("trajectory " + std::to_string(t.id) + ": column lengths differ");
      for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto id = ids[i].get<std::size_t>();
        if (id >= ss.size()) throw Error("trajectory " + std::to_string(t.id) + " references unknown state");
        t.steps.push_back({id, times[i], energies[i]});
      }
      d.trajectories.push_back(std::move(t));
    }
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed dataset JSON: ") + e.what());
  } catch (const DpError& e) {
    throw Error(std::string("malformed dataset JSON: ") + e.what());
  }
}

nlohmann::json to_json(const TrajectoryStats& s) {
  nlohmann::json j = {{"total", s.total},
                      {"reactive", s.reactive},
                      {"non_reactive", s.non_reactive},
                      {"truncated", s.truncated},
                      {"fraction_reactive", s.fraction_reactive}};
  j["mean_reaction_time"] = s.mean_reaction_time ? nlohmann::json(*s.mean_reaction_time) : nlohmann::json(nullptr);
  return j;
}

}  // namespace vida
