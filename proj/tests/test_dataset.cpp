#include "novact/dataset.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace novact;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("novact_dataset_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

double arm_range(const JointTrajectory& t, int offset) {
  const auto block = t.values.middleCols(offset, 4);
  return (block.colwise().maxCoeff() - block.colwise().minCoeff()).maxCoeff();
}

}  // namespace

TEST_CASE("synthetic set has six labeled 8-joint actions") {
  const auto set = synthesize_boxing_set({});
  REQUIRE(set.patterns.size() == 6);
  CHECK(set.joints() == 8);
  CHECK(set.labels() == boxing_labels());
  CHECK(set.sample_period_s == doctest::Approx(0.05));
  for (const auto& p : set.patterns) {
    CHECK(p.steps() == 50);
    CHECK(p.values.allFinite());
  }
  CHECK_NOTHROW(set.validate());
}

TEST_CASE("synthesis is deterministic per seed") {
  SynthConfig cfg;
  cfg.seed = 9;
  const auto a = synthesize_boxing_set(cfg);
  const auto b = synthesize_boxing_set(cfg);
  for (std::size_t k = 0; k < a.patterns.size(); ++k) {
    CHECK(a.patterns[k].values == b.patterns[k].values);
  }
  cfg.seed = 10;
  const auto c = synthesize_boxing_set(cfg);
  CHECK(a.patterns[0].values != c.patterns[0].values);
}

TEST_CASE("actions start and end at the guard posture") {
  for (double noise : {0.0, 0.01}) {
    SynthConfig cfg;
    cfg.noise = noise;
    const auto set = synthesize_boxing_set(cfg);
    const VectorX<double> home = guard_posture();
    for (const auto& p : set.patterns) {
      CHECK((p.values.row(0).transpose() - home).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((p.values.row(p.steps() - 1).transpose() - home).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("the striking arm moves more than the guard arm") {
  const auto set = synthesize_boxing_set({});
  for (const auto& p : set.patterns) {
    const bool left = p.name.starts_with("L.");
    const double striking = arm_range(p, left ? 4 : 0);
    const double guard = arm_range(p, left ? 0 : 4);
    CHECK_MESSAGE(striking > 3.0 * guard, p.name);
  }
}

TEST_CASE("mirrored actions agree up to the left-arm sign convention") {
  SynthConfig cfg;
  cfg.noise = 0.0;
  const auto set = synthesize_boxing_set(cfg);
  const auto& lhook = set.patterns[2];
  const auto& rhook = set.patterns[3];
  REQUIRE(lhook.name == "L.Hook");
  REQUIRE(rhook.name == "R.Hook");
  const VectorX<double> home = guard_posture();
  const double signs[4] = {1.0, -1.0, -1.0, -1.0};
  for (Eigen::Index t = 0; t < lhook.steps(); ++t) {
    for (int j = 0; j < 4; ++j) {
      const double left = lhook.values(t, 4 + j) - home(4 + j);
      const double right = rhook.values(t, j) - home(j);
      CHECK(left == doctest::Approx(signs[j] * right).epsilon(1e-12));
    }
  }
}

TEST_CASE("amplitude scales stretch the excursion") {
  SynthConfig cfg;
  cfg.noise = 0.0;
  const auto base = synthesize_boxing_set(cfg);
  cfg.amplitudes[1] = 0.5;
  const auto half = synthesize_boxing_set(cfg);
  const VectorX<double> home = guard_posture();
  const auto dev = [&](const JointTrajectory& p) {
    return (p.values.rowwise() - home.transpose()).cwiseAbs().maxCoeff();
  };
  CHECK(dev(half.patterns[1]) == doctest::Approx(0.5 * dev(base.patterns[1])));
  CHECK(half.patterns[0].values == base.patterns[0].values);
}

TEST_CASE("synth config is validated") {
  SynthConfig cfg;
  cfg.amplitudes.pop_back();
  CHECK_THROWS_AS(synthesize_boxing_set(cfg), Error);
  cfg = {};
  cfg.steps = 3;
  CHECK_THROWS_AS(synthesize_boxing_set(cfg), Error);
}

TEST_CASE("save then load reproduces the set exactly") {
  const auto dir = scratch("roundtrip");
  const auto set = synthesize_boxing_set({});
  save_training_set(set, dir);
  const auto loaded = load_training_set(dir / "manifest.json");
  CHECK(loaded.joint_names == set.joint_names);
  CHECK(loaded.labels() == set.labels());
  CHECK(loaded.sample_period_s == set.sample_period_s);
  for (std::size_t k = 0; k < set.patterns.size(); ++k) {
    CHECK(loaded.patterns[k].values == set.patterns[k].values);
  }
}

TEST_CASE("NaN in a CSV is rejected as non-finite") {
  const auto dir = scratch("nan");
  write_text(dir / "a.csv", "j0,j1\n0.1,0.2\nnan,0.3\n");
  try {
    read_trajectory_csv(dir / "a.csv");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFinite);
  }
}

TEST_CASE("malformed CSV cells are parse errors") {
  const auto dir = scratch("parse");
  write_text(dir / "a.csv", "j0,j1\n0.1,abc\n0.2,0.3\n");
  try {
    read_trajectory_csv(dir / "a.csv");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ParseError);
  }
  write_text(dir / "b.csv", "j0,j1\n0.1\n0.2,0.3\n");
  CHECK_THROWS_AS(read_trajectory_csv(dir / "b.csv"), Error);
}

TEST_CASE("files with different joint counts are inconsistent") {
  const auto dir = scratch("dims");
  std::string eight = "a,b,c,d,e,f,g,h\n0,0,0,0,0,0,0,0\n1,1,1,1,1,1,1,1\n";
  std::string seven = "a,b,c,d,e,f,g\n0,0,0,0,0,0,0\n1,1,1,1,1,1,1\n";
  write_text(dir / "x.csv", eight);
  write_text(dir / "y.csv", seven);
  write_text(dir / "manifest.json",
             R"({"patterns":[{"label":"x","file":"x.csv"},{"label":"y","file":"y.csv"}]})");
  try {
    load_training_set(dir / "manifest.json");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InconsistentDims);
  }
}

TEST_CASE("missing manifest is an IO error") {
  try {
    load_training_set("/nonexistent/manifest.json");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::IOError);
  }
}

TEST_CASE("training stats") {
  TrainingSet set;
  set.joint_names = {"a", "b"};
  Sequence<double> p(3, 2), q(4, 2);
  p << 0.0, 1.0,  //
      0.5, 1.0,   //
      0.2, 1.1;
  q << 1.0, -1.0,  //
      1.0, -1.0,   //
      0.1, -1.0,   //
      1.0, -1.0;
  set.patterns = {{p, "p"}, {q, "q"}};
  const auto s = training_stats(set);
  CHECK(s.min(0) == 0.0);
  CHECK(s.max(0) == 1.0);
  CHECK(s.min(1) == -1.0);
  CHECK(s.max(1) == doctest::Approx(1.1));
  CHECK(s.home(0) == doctest::Approx(0.5));
  CHECK(s.home(1) == doctest::Approx(0.0));
  CHECK(s.max_velocity == doctest::Approx(0.9));
  CHECK(s.max_steps == 4);
  CHECK(s.range()(1) == doctest::Approx(2.1));
}
