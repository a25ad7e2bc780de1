#include "vida/bundle.hpp"

#include <cmath>

namespace vida {

namespace {

class Checker {
 public:
  std::vector<std::string> problems;

  const nlohmann::json* field(const nlohmann::json& obj, const char* key, const std::string& where) {
    if (!obj.is_object()) {
      problems.push_back(where + " must be an object");
      return nullptr;
    }
    auto it = obj.find(key);
    if (it == obj.end()) {
      problems.push_back(where + "." + key + " is missing");
      return nullptr;
    }
    return &*it;
  }

  void string(const nlohmann::json& obj, const char* key, const std::string& where) {
    if (auto* v = field(obj, key, where); v && !v->is_string()) problems.push_back(where + "." + key + " must be a string");
  }

  void finite(const nlohmann::json& obj, const char* key, const std::string& where, bool non_negative = false) {
    auto* v = field(obj, key, where);
    if (!v) return;
    if (!v->is_number()) {
      problems.push_back(where + "." + key + " must be a number");
      return;
    }
    const double x = v->get<double>();
    if (!std::isfinite(x)) problems.push_back(where + "." + key + " must be finite");
    else if (non_negative && x < 0.0) problems.push_back(where + "." + key + " must be non-negative");
  }

  bool index(const nlohmann::json& v, std::size_t bound, const std::string& where) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      problems.push_back(where + " must be a non-negative integer");
      return false;
    }
    if (v.get<std::size_t>() >= bound) {
      problems.push_back(where + " refers to unknown state " + std::to_string(v.get<std::size_t>()));
      return false;
    }
    return true;
  }

  const nlohmann::json* array(const nlohmann::json& obj, const char* key, const std::string& where) {
    auto* v = field(obj, key, where);
    if (v && !v->is_array()) {
      problems.push_back(where + "." + key + " must be an array");
      return nullptr;
    }
    return v;
  }
};

}  // namespace

ViewerBundle make_bundle(const Dataset& d, const Embedding& e, std::string reaction) {
  const auto& ss = d.states;
  if (static_cast<std::size_t>(e.coords.rows()) != ss.size())
    throw BundleError(BundleErrorKind::InvalidInput, "embedding has " + std::to_string(e.coords.rows()) +
                                                         " rows for " + std::to_string(ss.size()) + " states");
  if (e.coords.cols() < 1) throw BundleError(BundleErrorKind::InvalidInput, "embedding has no coordinates");
  ViewerBundle b;
  b.reaction = std::move(reaction);
  b.strands.assign(d.strands.strands().begin(), d.strands.strands().end());
  b.embedding = e.provenance;
  for (std::size_t i = 0; i < ss.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    b.states.push_back({i, ss.states[i].dp(), ss.energy[i], ss.probability[i], ss.cumulative_time[i], e.coords(r, 0),
                        e.coords.cols() > 1 ? e.coords(r, 1) : 0.0});
  }
  for (const auto& t : d.trajectories) {
    BundleTrajectory bt{t.id, std::string(to_string(t.outcome)), {}, {}};
    for (const auto& s : t.steps) {
      bt.states.push_back(s.state_id);
      bt.times.push_back(s.time);
    }
    b.trajectories.push_back(std::move(bt));
  }
  return b;
}

BundleClusters make_bundle_clusters(const ClusterResult& cr, std::span<const TrapRecord> traps, std::size_t states,
                                    double eps, std::size_t min_samples, double threshold) {
  BundleClusters c{eps, min_samples, threshold, std::vector<int>(states, kFilteredOut), {traps.begin(), traps.end()}};
  for (std::size_t i = 0; i < cr.state_ids.size(); ++i) {
    if (cr.state_ids[i] >= states) throw BundleError(BundleErrorKind::InvalidInput, "clustered state out of range");
    c.labels[cr.state_ids[i]] = cr.labels[i];
  }
  return c;
}

nlohmann::json to_json(const ViewerBundle& b) {
  nlohmann::json strands = nlohmann::json::array();
  for (const auto& s : b.strands) strands.push_back({{"id", s.id}, {"sequence", s.sequence}});
  nlohmann::json states = nlohmann::json::array();
  for (const auto& s : b.states)
    states.push_back({{"id", s.id},
                      {"dp", s.dp},
                      {"energy", s.energy},
                      {"p", s.p},
                      {"cumulative_time", s.cumulative_time},
                      {"x", s.x},
                      {"y", s.y}});
  nlohmann::json trajectories = nlohmann::json::array();
  for (const auto& t : b.trajectories)
    trajectories.push_back({{"id", t.id}, {"outcome", t.outcome}, {"states", t.states}, {"times", t.times}});
  nlohmann::json j = {
      {"schema_version", kBundleSchemaVersion},
      {"meta",
       {{"reaction", b.reaction},
        {"strands", std::move(strands)},
        {"units", {{"time", "s"}, {"energy", "kcal/mol"}}},
        {"embedding",
         {{"method", b.embedding.method},
          {"config_hash", b.embedding.config_hash},
          {"input_hash", b.embedding.input_hash}}}}},
      {"states", std::move(states)},
      {"trajectories", std::move(trajectories)}};
  if (b.clusters) {
    nlohmann::json traps = nlohmann::json::array();
    for (const auto& t : b.clusters->traps) traps.push_back(to_json(t));
    j["clusters"] = {{"eps", b.clusters->eps},
                     {"min_samples", b.clusters->min_samples},
                     {"threshold", b.clusters->threshold},
                     {"labels", b.clusters->labels},
                     {"traps", std::move(traps)}};
  }
  return j;
}

std::vector<std::string> validate_bundle(const nlohmann::json& j) {
  Checker c;
  if (!j.is_object()) return {"bundle must be a JSON object"};
  if (auto* v = c.field(j, "schema_version", "bundle")) {
    if (!v->is_string() || v->get<std::string>() != kBundleSchemaVersion)
      return {"unsupported schema_version (expected \"" + std::string(kBundleSchemaVersion) + "\")"};
  } else {
    return c.problems;
  }
  if (auto* meta = c.field(j, "meta", "bundle")) {
    c.string(*meta, "reaction", "meta");
    if (auto* strands = c.array(*meta, "strands", "meta"))
      for (std::size_t i = 0; i < strands->size(); ++i) {
        const std::string where = "meta.strands[" + std::to_string(i) + "]";
        c.string((*strands)[i], "id", where);
        c.string((*strands)[i], "sequence", where);
      }
    if (auto* units = c.field(*meta, "units", "meta")) {
      c.string(*units, "time", "meta.units");
      c.string(*units, "energy", "meta.units");
    }
    if (auto* emb = c.field(*meta, "embedding", "meta"))
      for (const char* key : {"method", "config_hash", "input_hash"}) c.string(*emb, key, "meta.embedding");
  }
  std::size_t n = 0;
  if (auto* states = c.array(j, "states", "bundle")) {
    n = states->size();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& s = (*states)[i];
      const std::string where = "states[" + std::to_string(i) + "]";
      if (auto* id = c.field(s, "id", where); id && !(id->is_number_integer() && id->get<long long>() == static_cast<long long>(i)))
        c.problems.push_back(where + ".id must equal its position " + std::to_string(i));
      c.string(s, "dp", where);
      c.finite(s, "energy", where);
      c.finite(s, "p", where, true);
      c.finite(s, "cumulative_time", where, true);
      c.finite(s, "x", where);
      c.finite(s, "y", where);
    }
  }
  if (auto* trajectories = c.array(j, "trajectories", "bundle"))
    for (std::size_t i = 0; i < trajectories->size(); ++i) {
      const auto& t = (*trajectories)[i];
      const std::string where = "trajectories[" + std::to_string(i) + "]";
      if (auto* id = c.field(t, "id", where); id && !id->is_number_integer()) c.problems.push_back(where + ".id must be an integer");
      if (auto* o = c.field(t, "outcome", where)) {
        if (!o->is_string() || (*o != "reactive" && *o != "non_reactive" && *o != "truncated"))
          c.problems.push_back(where + ".outcome must be reactive, non_reactive or truncated");
      }
      auto* ids = c.array(t, "states", where);
      auto* times = c.array(t, "times", where);
      if (ids)
        for (std::size_t k = 0; k < ids->size(); ++k)
          c.index((*ids)[k], n, where + ".states[" + std::to_string(k) + "]");
      if (times)
        for (std::size_t k = 0; k < times->size(); ++k)
          if (!(*times)[k].is_number() || !std::isfinite((*times)[k].get<double>()))
            c.problems.push_back(where + ".times[" + std::to_string(k) + "] must be a finite number");
      if (ids && times && ids->size() != times->size())
        c.problems.push_back(where + " has " + std::to_string(ids->size()) + " states but " +
                             std::to_string(times->size()) + " times");
    }
  if (j.contains("clusters")) {
    const auto& cl = j["clusters"];
    c.finite(cl, "eps", "clusters", true);
    c.finite(cl, "threshold", "clusters", true);
    if (auto* ms = c.field(cl, "min_samples", "clusters"); ms && !(ms->is_number_integer() && ms->get<long long>() >= 1))
      c.problems.push_back("clusters.min_samples must be a positive integer");
    if (auto* labels = c.array(cl, "labels", "clusters")) {
      if (labels->size() != n) c.problems.push_back("clusters.labels must have one entry per state");
      for (std::size_t i = 0; i < labels->size(); ++i)
        if (!(*labels)[i].is_number_integer() || (*labels)[i].get<long long>() < kFilteredOut)
          c.problems.push_back("clusters.labels[" + std::to_string(i) + "] must be an integer >= -2");
    }
    if (auto* traps = c.array(cl, "traps", "clusters"))
      for (std::size_t i = 0; i < traps->size(); ++i) {
        const auto& t = (*traps)[i];
        const std::string where = "clusters.traps[" + std::to_string(i) + "]";
        if (auto* cid = c.field(t, "cluster", where); cid && !(cid->is_number_integer() && cid->get<long long>() >= 0))
          c.problems.push_back(where + ".cluster must be a non-negative integer");
        if (auto* s = c.field(t, "state", where)) c.index(*s, n, where + ".state");
        c.string(t, "dp", where);
        c.finite(t, "energy", where);
        c.finite(t, "cumulative_time", where, true);
      }
  }
  return c.problems;
}

ViewerBundle bundle_from_json(const nlohmann::json& j) {
  const auto problems = validate_bundle(j);
  if (!problems.empty()) {
    std::string msg = "invalid viewer bundle:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw BundleError(BundleErrorKind::SchemaMismatch, msg);
  }
  ViewerBundle b;
  const auto& meta = j["meta"];
  b.reaction = meta["reaction"].get<std::string>();
  for (const auto& s : meta["strands"]) b.strands.push_back({s["id"].get<std::string>(), s["sequence"].get<std::string>()});
  const auto& emb = meta["embedding"];
  b.embedding = {emb["method"].get<std::string>(), emb["config_hash"].get<std::string>(),
                 emb["input_hash"].get<std::string>()};
  for (const auto& s : j["states"])
    b.states.push_back({s["id"].get<std::size_t>(), s["dp"].get<std::string>(), s["energy"].get<double>(),
                        s["p"].get<double>(), s["cumulative_time"].get<double>(), s["x"].get<double>(),
                        s["y"].get<double>()});
  for (const auto& t : j["trajectories"])
    b.trajectories.push_back({t["id"].get<std::size_t>(), t["outcome"].get<std::string>(),
                              t["states"].get<std::vector<std::size_t>>(), t["times"].get<std::vector<double>>()});
  if (j.contains("clusters")) {
    const auto& cl = j["clusters"];
    BundleClusters c{cl["eps"].get<double>(), cl["min_samples"].get<std::size_t>(), cl["threshold"].get<double>(),
                     cl["labels"].get<std::vector<int>>(), {}};
    for (const auto& t : cl["traps"])
      c.traps.push_back({t["cluster"].get<int>(), t["state"].get<std::size_t>(), t["dp"].get<std::string>(),
                         t["energy"].get<double>(), t["cumulative_time"].get<double>()});
    b.clusters = std::move(c);
  }
  return b;
}

}  // namespace vida
