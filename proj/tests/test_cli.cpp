#include "novact/cli.hpp"
#include "novact/explorer.hpp"
#include "novact/parallel.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace novact;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("novact_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("gamma outside [0, 1] is a usage error naming the range") {
  const auto r = run({"train", "--data", "x", "--out", "y", "--gamma", "1.5"});
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.find("[0 - 1]") != std::string::npos);
  CHECK(r.err.find("--gamma") != std::string::npos);
}

TEST_CASE("usage errors exit 1") {
  CHECK(run({}).code == cli::kExitUsage);
  CHECK(run({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run({"gen-data"}).code == cli::kExitUsage);  // --out is required
  const auto unknown = run({"gen-data", "--out", "/tmp/x", "--bogus", "1"});
  CHECK(unknown.code == cli::kExitUsage);
  CHECK(unknown.err.find("bogus") != std::string::npos);
  CHECK(run({"generate", "--ckpt", "/nonexistent.json"}).code == cli::kExitUsage);
}

TEST_CASE("help lists every flag with its default") {
  const auto top = run({"--help"});
  CHECK(top.code == 0);
  for (const char* sub : {"gen-data", "train", "sweep", "measure", "render-map", "serve", "generate"}) {
    CHECK(top.out.find(sub) != std::string::npos);
    const auto r = run({sub, "--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("--") != std::string::npos);
  }
  const auto train = run({"train", "--help"});
  for (const char* flag : {"--gamma", "--epochs", "--lr", "--seed", "--threads", "--sigma"}) {
    CHECK(train.out.find(flag) != std::string::npos);
  }
  CHECK(train.out.find("[0.5]") != std::string::npos);
  CHECK(train.out.find("[100000]") != std::string::npos);
  CHECK(train.out.find("[0.001]") != std::string::npos);
  const auto sweep = run({"sweep", "--help"});
  CHECK(sweep.out.find("[200]") != std::string::npos);
  CHECK(sweep.out.find("[30]") != std::string::npos);
}

TEST_CASE("full pipeline with effective config echo") {
  const auto dir = scratch("pipeline");
  const auto data = dir / "data";
  auto r = run({"gen-data", "--out", data.string(), "--seed", "4"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("seed=4") != std::string::npos);
  CHECK(fs::exists(data / "manifest.json"));
  CHECK(fs::exists(data / "R.Upper.csv"));

  const auto ckpt = dir / "ckpt.json";
  r = run({"train", "--data", (data / "manifest.json").string(), "--out", ckpt.string(),
           "--epochs", "5", "--seed", "7", "--gamma", "0.5", "--log-every", "0"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("seed=7") != std::string::npos);
  CHECK(r.out.find("gamma=0.5") != std::string::npos);
  CHECK(fs::exists(ckpt));
  const auto curve = slurp(dir / "ckpt.curve.csv");
  CHECK(curve.rfind("epoch,loss\n", 0) == 0);
  CHECK(std::count(curve.begin(), curve.end(), '\n') == 6);

  const auto sweep_dir = dir / "sweep";
  r = run({"sweep", "--ckpt", ckpt.string(), "--out", sweep_dir.string(), "--resolution", "3",
           "--sample-size", "2", "--iterations", "3", "--pool", "all"});
  REQUIRE(r.code == 0);
  for (const char* f : {"cells.jsonl", "sweep.json", "report.json", "map.png", "map.legend.json"}) {
    CHECK(fs::exists(sweep_dir / f));
  }
  const auto report = nlohmann::json::parse(slurp(sweep_dir / "report.json"));
  CHECK(report["cells"] == 9);
  CHECK(report["config"]["pool"] == "all");

  r = run({"measure", "--ckpt", ckpt.string(), "--sweep", sweep_dir.string(), "--sample-size", "2",
           "--iterations", "3", "--pool", "all"});
  REQUIRE(r.code == 0);
  const auto json_start = r.out.find("{\n");
  REQUIRE(json_start != std::string::npos);
  CHECK(nlohmann::json::parse(r.out.substr(json_start)) == report);

  r = run({"render-map", "--ckpt", ckpt.string(), "--sweep", sweep_dir.string(), "--out",
           (dir / "m.ppm").string()});
  REQUIRE(r.code == 0);
  CHECK(slurp(dir / "m.ppm").rfind("P6\n3 3\n255\n", 0) == 0);
  CHECK(fs::exists(dir / "m.legend.json"));

  r = run({"generate", "--ckpt", ckpt.string(), "--pb", "0.1", "-0.4", "--steps", "12", "--out",
           (dir / "g.csv").string()});
  REQUIRE(r.code == 0);
  const auto traj = read_trajectory_csv(dir / "g.csv");
  CHECK(traj.steps() == 12);
  const auto cp = load_checkpoint(ckpt);
  CHECK(traj.values == generate_action(cp, Eigen::Vector2d(0.1, -0.4), 12).values);

  CHECK(run({"generate", "--ckpt", ckpt.string(), "--pb", "1.5", "0"}).code == cli::kExitUsage);
}

TEST_CASE("measure can relabel with a literal threshold") {
  const auto dir = scratch("relabel");
  REQUIRE(run({"gen-data", "--out", (dir / "d").string()}).code == 0);
  REQUIRE(run({"train", "--data", (dir / "d/manifest.json").string(), "--out",
               (dir / "c.json").string(), "--epochs", "3", "--log-every", "0"})
              .code == 0);
  REQUIRE(run({"sweep", "--ckpt", (dir / "c.json").string(), "--out", (dir / "s").string(),
               "--resolution", "2", "--no-map", "--sample-size", "1", "--iterations", "1",
               "--pool", "all"})
              .code == 0);
  CHECK(!fs::exists(dir / "s/map.png"));
  const auto r = run({"measure", "--ckpt", (dir / "c.json").string(), "--sweep",
                      (dir / "s").string(), "--learned-threshold", "10.0", "--sample-size", "1",
                      "--iterations", "1", "--out", (dir / "m.json").string()});
  REQUIRE(r.code == 0);
  const auto m = nlohmann::json::parse(slurp(dir / "m.json"));
  CHECK(m["config"]["learned_threshold"] == 10.0);
}

TEST_CASE("runtime failures exit 2") {
  const auto dir = scratch("runtime");
  std::ofstream(dir / "junk.json") << "not json";
  const auto r = run({"generate", "--ckpt", (dir / "junk.json").string()});
  CHECK(r.code == cli::kExitRuntime);
  CHECK(r.err.find("CorruptCheckpoint") != std::string::npos);

  std::ofstream(dir / "manifest.json") << R"({"patterns":[{"label":"a","file":"missing.csv"}]})";
  CHECK(run({"train", "--data", (dir / "manifest.json").string(), "--out",
             (dir / "c.json").string(), "--epochs", "1"})
            .code == cli::kExitRuntime);
}

TEST_CASE("identical invocations give identical artifacts") {
  const auto dir = scratch("determinism");
  REQUIRE(run({"gen-data", "--out", (dir / "d").string()}).code == 0);
  for (const char* tag : {"a", "b"}) {
    const auto ckpt = (dir / (std::string(tag) + ".json")).string();
    REQUIRE(run({"train", "--data", (dir / "d/manifest.json").string(), "--out", ckpt, "--epochs",
                 "20", "--seed", "3", "--log-every", "0"})
                .code == 0);
    REQUIRE(run({"sweep", "--ckpt", ckpt, "--out", (dir / (std::string("s") + tag)).string(),
                 "--resolution", "4", "--sample-size", "3", "--iterations", "4", "--pool", "all"})
                .code == 0);
  }
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
  CHECK(slurp(dir / "a.curve.csv") == slurp(dir / "b.curve.csv"));
  for (const char* f : {"cells.jsonl", "sweep.json", "report.json", "map.png"}) {
    CHECK_MESSAGE(slurp(dir / "sa" / f) == slurp(dir / "sb" / f), f);
  }
}

TEST_CASE("thread count falls back to NOVACT_THREADS") {
  ::setenv("NOVACT_THREADS", "3", 1);
  CHECK(resolve_threads(0) == 3);
  CHECK(resolve_threads(2) == 2);
  ::setenv("NOVACT_THREADS", "garbage", 1);
  CHECK(resolve_threads(0) == 1);
  ::unsetenv("NOVACT_THREADS");
  CHECK(resolve_threads(0) == 1);
}
