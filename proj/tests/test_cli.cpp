#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

#include "arena/cli.hpp"
#include "arena/loop.hpp"

using namespace arena;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("arena_cli_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string write(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path.string();
}

std::string slurp(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> plain_csv(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream f(path);
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) fields.push_back(cell);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    rows.push_back(fields);
  }
  return rows;
}

const char* kFastConfig = R"({"cycles": 2, "eig": {"mc_samples": 1000}, "master_seed": 3})";

}  // namespace

TEST_CASE("run writes a trace that replays") {
  const auto dir = scratch("run");
  const auto cfg = write(dir / "c.json", kFastConfig);
  const auto r = cli({"run", "--config", cfg, "--out", (dir / "out").string()});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("cycle 1:") != std::string::npos);
  CHECK(r.out.find("verdict:") != std::string::npos);
  REQUIRE(fs::exists(dir / "out" / "trace.json"));
  const auto trace = Json::parse(slurp(dir / "out" / "trace.json"));
  const auto replayed = replay_posteriors(trace);
  REQUIRE(replayed.size() == trace["cycles"].size());
  for (std::size_t c = 0; c < replayed.size(); ++c)
    for (const auto& [id, v] : posterior_from_json(trace["cycles"][c]["posterior_after"]))
      CHECK(std::abs(v - replayed[c].at(id)) < 1e-9);
}

TEST_CASE("run with cycles=0 exits 2 naming the field") {
  const auto dir = scratch("cycles");
  const auto r = cli({"run", "--config", write(dir / "c.json", R"({"cycles": 0})")});
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find("cycles") != std::string::npos);
  CHECK(r.err.find("c.json") != std::string::npos);

  const auto o = cli({"run", "--config", write(dir / "ok.json", "{}"), "--cycles", "0", "--out", dir.string()});
  CHECK(o.code == kExitConfig);
  CHECK(o.err.find("cycles") != std::string::npos);
}

TEST_CASE("run with the same seed twice gives identical traces") {
  const auto dir = scratch("seed");
  const auto cfg = write(dir / "c.json", kFastConfig);
  REQUIRE(cli({"run", "--config", cfg, "--seed", "7", "--out", (dir / "a").string()}).code == kExitOk);
  REQUIRE(cli({"run", "--config", cfg, "--seed", "7", "--out", (dir / "b").string()}).code == kExitOk);
  REQUIRE(cli({"run", "--config", cfg, "--seed", "8", "--out", (dir / "c").string()}).code == kExitOk);
  CHECK(slurp(dir / "a" / "trace.json") == slurp(dir / "b" / "trace.json"));
  CHECK(slurp(dir / "a" / "trace.json") != slurp(dir / "c" / "trace.json"));
}

TEST_CASE("bad invocations exit 2") {
  const auto dir = scratch("bad");
  CHECK(cli({}).code == kExitConfig);
  CHECK(cli({"launch"}).code == kExitConfig);
  CHECK(cli({"run"}).code == kExitConfig);
  CHECK(cli({"run", "--config", (dir / "missing.json").string()}).code == kExitConfig);
  CHECK(cli({"run", "--config", write(dir / "broken.json", "{ not json")}).code == kExitConfig);
  CHECK(cli({"study", "--config", write(dir / "c.json", "{}"), "--reps", "many"}).code == kExitConfig);
  CHECK(cli({"study", "--config", (dir / "c.json").string(), "--eps", "0,2", "--out", dir.string()}).code ==
        kExitConfig);
}

TEST_CASE("designs prints the enumerated pool") {
  const auto dir = scratch("designs");
  const auto space = write(dir / "s.json", R"({"dims": 2, "categories": 2})");
  const auto r = cli({"designs", "--space", space, "--budget", "5"});
  REQUIRE(r.code == kExitOk);
  std::stringstream ss(r.out);
  std::string line;
  int n = 0;
  StimulusSpace s;
  s.dims = 2;
  s.max_train_items = 4;
  s.max_test_items = 4;
  const auto expected = enumerate_designs(s, 5);
  while (std::getline(ss, line)) {
    REQUIRE(n < 5);
    CHECK(design_from_json(Json::parse(line)).id == expected[n].id);
    ++n;
  }
  CHECK(n == 5);
  CHECK(cli({"designs", "--space", space, "--budget", "0"}).code == kExitConfig);
}

TEST_CASE("study writes rows, summary and traces; report emits matching series") {
  const auto dir = scratch("study");
  const auto cfg = write(dir / "c.json", kFastConfig);
  const auto out = dir / "out";
  const auto r = cli({"study", "--config", cfg, "--truths", "GCM,RULEX", "--eps", "0,0.4", "--reps", "2", "--seed",
                      "4", "--out", out.string()});
  REQUIRE(r.code == kExitOk);

  const auto rows_text = slurp(out / "recovery_rows.csv");
  CHECK(rows_text.rfind("# schema=v1\n", 0) == 0);
  const auto rows = plain_csv(out / "recovery_rows.csv");
  const auto summary = plain_csv(out / "recovery_summary.csv");
  REQUIRE(rows.size() == 1 + 8);
  REQUIRE(summary.size() == 1 + 4);
  CHECK(rows[0][0] == "truth");
  CHECK(rows[0].back() == "errors");
  CHECK(summary[0] == std::vector<std::string>{"truth", "epsilon", "runs", "recovery_rate", "mean_margin"});

  // Independent aggregation of the recovered column.
  std::map<std::pair<std::string, std::string>, std::pair<double, int>> agg;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    auto& a = agg[{rows[i][0], rows[i][1]}];
    a.first += std::stod(rows[i][3]);
    a.second += 1;
  }
  for (std::size_t i = 1; i < summary.size(); ++i) {
    const auto& a = agg.at({summary[i][0], summary[i][1]});
    CHECK(std::stod(summary[i][3]) == doctest::Approx(a.first / a.second).epsilon(1e-15));
    CHECK(std::stoi(summary[i][2]) == a.second);
  }
  int traces = 0;
  for (const auto& e : fs::directory_iterator(out / "traces")) traces += e.path().extension() == ".json";
  CHECK(traces == 8);
  CHECK(fs::exists(out / "traces" / "GCM_eps0p4_rep1.json"));

  const auto rep = dir / "report";
  REQUIRE(cli({"report", "--rows", (out / "recovery_rows.csv").string(), "--out", rep.string()}).code == kExitOk);
  for (const auto* truth : {"GCM", "RULEX"}) {
    const auto a = plain_csv(rep / (std::string("fig1a_") + truth + ".csv"));
    const auto b = plain_csv(rep / (std::string("fig1b_") + truth + ".csv"));
    REQUIRE(a.size() == 3);
    REQUIRE(b.size() == 3);
    CHECK(a[0] == std::vector<std::string>{"epsilon", "recovery_rate"});
    CHECK(b[0] == std::vector<std::string>{"epsilon", "mean_margin"});
    for (std::size_t i = 1; i < a.size(); ++i) {
      bool found = false;
      for (std::size_t s = 1; s < summary.size(); ++s) {
        if (summary[s][0] != truth || summary[s][1] != a[i][0]) continue;
        found = true;
        CHECK(a[i][1] == summary[s][3]);
        CHECK(b[i][0] == summary[s][1]);
        CHECK(b[i][1] == summary[s][4]);
      }
      CHECK(found);
    }
  }
}

TEST_CASE("report rejects malformed rows files") {
  const auto dir = scratch("report");
  auto report = [&](const std::string& name, const std::string& text) {
    return cli({"report", "--rows", write(dir / name, text), "--out", (dir / "o").string()});
  };
  const std::string header = "truth,epsilon,replication,recovered,margin,cycles_used,winner,final_posterior,errors\n";

  CHECK(report("empty.csv", "").code == kExitConfig);
  CHECK(report("header_only.csv", "# schema=v1\n" + header).code == kExitConfig);
  CHECK(report("v2.csv", "# schema=v2\n" + header + "GCM,0,0,1,0.9,1,GCM,GCM=1,\n").code == kExitConfig);
  const auto col = report("col.csv", "# schema=v1\ntruth,eps,replication,recovered,margin,cycles_used,winner,"
                                     "final_posterior,errors\nGCM,0,0,1,0.9,1,GCM,GCM=1,\n");
  CHECK(col.code == kExitConfig);
  CHECK(col.err.find("eps") != std::string::npos);
  const auto val = report("val.csv", "# schema=v1\n" + header + "GCM,zero,0,1,0.9,1,GCM,GCM=1,\n");
  CHECK(val.code == kExitConfig);
  CHECK(val.err.find("epsilon") != std::string::npos);
  CHECK(report("ok.csv", "# schema=v1\n" + header + "GCM,0,0,1,0.9,1,GCM,GCM=1,\n").code == kExitOk);
}

TEST_CASE("rows and summary files round-trip") {
  const auto dir = scratch("roundtrip");
  std::vector<RecoveryRow> rows = {
      {"GCM", 0.1, 0, true, 0.75, 3, "GCM", {{"GCM", 0.875}, {"RULEX", 0.125}}, ""},
      {"GCM", 0.1, 1, false, std::nan(""), 0, "", {}, "CONFIG_ERROR: truth.params: \"bad\", really"},
  };
  write_rows_csv((dir / "rows.csv").string(), rows);
  const auto back = read_rows_csv((dir / "rows.csv").string());
  REQUIRE(back.size() == 2);
  CHECK(back[0].final_posterior == rows[0].final_posterior);
  CHECK(back[0].margin == 0.75);
  CHECK(std::isnan(back[1].margin));
  CHECK(back[1].error == rows[1].error);

  const auto cells = aggregate_rows(back);
  write_summary_csv((dir / "summary.csv").string(), cells);
  const auto cells_back = read_summary_csv((dir / "summary.csv").string());
  REQUIRE(cells_back.size() == 1);
  CHECK(cells_back[0].recovery_rate == 0.5);
  CHECK(cells_back[0].mean_margin == 0.75);
}

TEST_CASE("THEORY_ARENA_THREADS parsing") {
  ::unsetenv("THEORY_ARENA_THREADS");
  CHECK(threads_from_env() == 1);
  ::setenv("THEORY_ARENA_THREADS", "0", 1);
  CHECK(threads_from_env() == 0);
  ::setenv("THEORY_ARENA_THREADS", "4", 1);
  CHECK(threads_from_env() == 4);
  ::setenv("THEORY_ARENA_THREADS", "lots", 1);
  CHECK_THROWS(threads_from_env());
  ::unsetenv("THEORY_ARENA_THREADS");
}
