#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "support/fixtures.hpp"
#include "vida/cli.hpp"
#include "vida/embed.hpp"
#include "vida/multistrand_io.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "vida");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = vida::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("vida-cli-" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

// Dataset from the sample log plus a fixed embedding of its states.
struct Workspace {
  TempDir dir;
  std::string log, dataset, embedding;
  std::size_t states = 0;

  Workspace() {
    log = dir / "sample.log";
    dataset = dir / "dataset.json";
    embedding = dir / "embedding.json";
    spit(log, read_fixture("fsm_sample.log"));
    REQUIRE(run({"parse", log, "-o", dataset}).code == 0);
    states = vida::dataset_from_json(nlohmann::json::parse(slurp(dataset))).states.size();
    vida::Embedding e;
    e.coords.resize(static_cast<Eigen::Index>(states), 2);
    for (Eigen::Index i = 0; i < e.coords.rows(); ++i)
      e.coords.row(i) << static_cast<double>(i % 4), 0.25 * static_cast<double>(i / 4);
    e.provenance = {"stress", "0000000000000001", "0000000000000002"};
    spit(embedding, vida::to_json(e).dump(2));
  }
};

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("help output matches the snapshots") {
    const std::vector<std::string> commands{"", "parse", "stats", "scatter", "distances", "embed", "eval", "cluster", "export"};
    for (const auto& c : commands) {
      CAPTURE(c);
      const Run r = c.empty() ? run({"--help"}) : run({c, "--help"});
      CHECK(r.code == 0);
      CHECK(r.out == read_fixture("help/" + (c.empty() ? std::string("vida") : c) + ".txt"));
    }
  }

  TEST_CASE("usage errors exit 1") {
    CHECK(run({}).code == 1);
    CHECK(run({"parse", "--no-such-flag", "x.log"}).code == 1);
    CHECK(run({"frobnicate"}).code == 1);
    CHECK(run({"--preset", "nope", "stats", "--dataset", "x"}).code == 1);
    const Run missing = run({"parse", "/nonexistent/file.log"});
    CHECK(missing.code == 1);
    CHECK(missing.err.find("/nonexistent/file.log") != std::string::npos);
  }

  TEST_CASE("malformed inputs exit 1") {
    TempDir dir;
    spit(dir / "bad.log", "ACGT\n[0] ((( 1 -1\n");
    CHECK(run({"parse", dir / "bad.log"}).code == 1);
    spit(dir / "bad.json", "{\"schema_version\": ");
    CHECK(run({"stats", "--dataset", dir / "bad.json"}).code == 1);
    spit(dir / "wrong.json", "{\"schema_version\": \"1\"}");
    CHECK(run({"stats", "--dataset", dir / "wrong.json"}).code == 1);
  }

  TEST_CASE("parse counts unique states") {
    Workspace w;
    std::set<std::string> unique;
    for (const auto& r : kSampleRecords) unique.insert(r.dp);
    CHECK(w.states == unique.size());
    const Run stdout_run = run({"parse", w.log});
    CHECK(stdout_run.code == 0);
    CHECK(stdout_run.out == slurp(w.dataset));
    const Run s = run({"stats", "--dataset", w.dataset});
    CHECK(s.code == 0);
    CHECK(nlohmann::json::parse(s.out)["states"] == w.states);
  }

  TEST_CASE("eval echoes every K") {
    Workspace w;
    const Run r = run({"eval", "--dataset", w.dataset, "--embedding", w.embedding, "--K", "1,3,5"});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    REQUIRE(j["local_preservation"].size() == 3);
    CHECK(j["local_preservation"][0]["K"] == 1);
    CHECK(j["local_preservation"][2]["K"] == 5);
    const Run d = run({"eval", "--dataset", w.dataset, "--embedding", w.embedding});
    REQUIRE(d.code == 0);
    CHECK(nlohmann::json::parse(d.out)["local_preservation"].size() == 1);  // only 10 is below 13 states
    CHECK(run({"eval", "--dataset", w.dataset, "--embedding", w.embedding, "--K", "13"}).code == 1);
  }

  TEST_CASE("export re-import is byte identical and idempotent") {
    Workspace w;
    const std::string b1 = w.dir / "b1.json", b2 = w.dir / "b2.json", b3 = w.dir / "b3.json";
    const std::string c = w.dir / "clusters.json";
    REQUIRE(run({"cluster", "--dataset", w.dataset, "--embedding", w.embedding, "--eps", "1.1", "--min-samples", "3",
                 "-o", c})
                .code == 0);
    REQUIRE(run({"export", "--dataset", w.dataset, "--embedding", w.embedding, "--clusters", c, "-o", b1}).code == 0);
    REQUIRE(run({"export", "--dataset", w.dataset, "--embedding", w.embedding, "--clusters", c, "-o", b2}).code == 0);
    CHECK(slurp(b1) == slurp(b2));
    REQUIRE(run({"export", "--bundle", b1, "-o", b3}).code == 0);
    CHECK(slurp(b1) == slurp(b3));
    const auto j = nlohmann::json::parse(slurp(b1));
    CHECK(j["states"].size() == w.states);
    CHECK(j["clusters"]["labels"].size() == w.states);
    CHECK(run({"export", "--dataset", w.dataset, "-o", b3}).code == 1);
  }

  TEST_CASE("flags beat config beats preset") {
    Workspace w;
    auto eps_of = [&](std::vector<std::string> args) {
      std::vector<std::string> full = args;
      for (const auto& a : std::vector<std::string>{"cluster", "--dataset", w.dataset, "--embedding", w.embedding})
        full.push_back(a);
      const Run r = run(full);
      REQUIRE(r.code == 0);
      return nlohmann::json::parse(r.out);
    };
    auto with_flag = [&](std::vector<std::string> pre, std::vector<std::string> post) {
      pre.push_back("cluster");
      for (const auto& a : std::vector<std::string>{"--dataset", w.dataset, "--embedding", w.embedding}) pre.push_back(a);
      for (const auto& a : post) pre.push_back(a);
      const Run r = run(pre);
      REQUIRE(r.code == 0);
      return nlohmann::json::parse(r.out);
    };
    const std::string cfg = w.dir / "vida.toml";
    spit(cfg, "[cluster]\neps = 0.75\nmin_samples = 2\n");

    const auto preset = eps_of({"--preset", "gao-p4t4"});
    CHECK(preset["eps"] == 0.0034);
    CHECK(preset["threshold"] == 5e-4);
    CHECK(preset["min_samples"] == 4);

    const auto config = eps_of({"--preset", "gao-p4t4", "--config", cfg});
    CHECK(config["eps"] == 0.75);
    CHECK(config["min_samples"] == 2);
    CHECK(config["threshold"] == 5e-4);

    const auto flag = with_flag({"--preset", "gao-p4t4", "--config", cfg}, {"--eps", "0.9"});
    CHECK(flag["eps"] == 0.9);
    CHECK(flag["min_samples"] == 2);

    spit(cfg, "[cluster]\nepsilon = 0.75\n");
    CHECK(run({"--config", cfg, "cluster", "--dataset", w.dataset, "--embedding", w.embedding}).code == 1);

    const auto plain = with_flag({}, {"--eps", "0.5"});
    CHECK(plain["threshold"] == 0.0);
    CHECK(plain["min_samples"] == 4);
  }
}
