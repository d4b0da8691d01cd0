// Acceptance suite: one PASS/FAIL line per primary criterion, with the
// measured quantities next to the pinned tolerance. Exit status is non-zero
// if any criterion fails. With --tolerate-known-gaps (used by ctest), a
// failure of a criterion marked as a known gap is still printed as FAIL but
// does not change the exit status.

#include "novact/cli.hpp"
#include "novact/explorer.hpp"
#include "novact/rng.hpp"

#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

using namespace novact;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;
int known_gap_failures = 0;

void report(const std::string& name, const std::function<Outcome()>& body,
            bool known_gap = false) {
  const auto started = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - started).count();
  if (!o.pass) ++(known_gap ? known_gap_failures : failures);
  char timing[32];
  std::snprintf(timing, sizeof timing, "%.1f s", secs);
  std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << "  [" << o.detail << "; " << timing
            << "]" << (known_gap && !o.pass ? "  (known gap)" : "") << std::endl;
}

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---- gradient check -------------------------------------------------------

double generation_loss(const NetworkSpec& spec, const Weights<double>& w, const VectorX<double>& rho,
                       const Sequence<double>& pattern, double gamma) {
  const int steps = static_cast<int>(pattern.rows()) - 1;
  const VectorX<double> init = pattern.row(0).transpose();
  const auto [pred, state] =
      generate<double>(spec, w, pb_activation(rho), steps, gamma, init, &pattern);
  return kl_loss(pred, pattern.bottomRows(steps));
}

Outcome gradient_check() {
  const auto started = Clock::now();
  const auto spec = testing::tiny_spec();
  const auto w = testing::random_weights(spec, 0.9, 2024);
  const std::vector<Sequence<double>> patterns{testing::random_softmax_sequence(spec, 5, 1),
                                               testing::random_softmax_sequence(spec, 5, 2)};
  MatrixX<double> rho(2, 2);
  rho << 0.3, -0.6, -0.8, 0.5;
  const double h = 1e-5;
  const auto rel = [](double a, double n) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
  };
  const auto total = [&](const Weights<double>& ww, const MatrixX<double>& r, double gamma) {
    double sum = 0.0;
    for (std::size_t k = 0; k < patterns.size(); ++k) {
      sum += generation_loss(spec, ww, r.col(static_cast<Eigen::Index>(k)), patterns[k], gamma);
    }
    return sum;
  };

  double worst = 0.0;
  std::size_t checked = 0;
  for (double gamma : {0.0, 0.5, 1.0}) {
    auto grads = Weights<double>::zeros(spec);
    MatrixX<double> rho_grad(2, 2);
    for (std::size_t k = 0; k < patterns.size(); ++k) {
      const auto g = bptt_gradients<double>(spec, w, rho.col(static_cast<Eigen::Index>(k)),
                                            patterns[k], gamma);
      auto acc = grads.tensors();
      const auto src = g.weights.tensors();
      for (std::size_t i = 0; i < Weights<double>::kCount; ++i) *acc[i] += *src[i];
      rho_grad.col(static_cast<Eigen::Index>(k)) = g.rho;
    }
    auto probe = w;
    auto tensors = probe.tensors();
    const auto analytic = grads.tensors();
    for (std::size_t i = 0; i < Weights<double>::kCount; ++i) {
      for (Eigen::Index e = 0; e < tensors[i]->size(); ++e) {
        double& x = tensors[i]->data()[e];
        const double saved = x;
        x = saved + h;
        const double up = total(probe, rho, gamma);
        x = saved - h;
        const double down = total(probe, rho, gamma);
        x = saved;
        worst = std::max(worst, rel(analytic[i]->data()[e], (up - down) / (2 * h)));
        ++checked;
      }
    }
    for (Eigen::Index e = 0; e < rho.size(); ++e) {
      MatrixX<double> r = rho;
      r.data()[e] += h;
      const double up = total(w, r, gamma);
      r.data()[e] -= 2 * h;
      const double down = total(w, r, gamma);
      worst = std::max(worst, rel(rho_grad.data()[e], (up - down) / (2 * h)));
      ++checked;
    }
  }
  const double secs = std::chrono::duration<double>(Clock::now() - started).count();
  return {worst <= 1e-4 && secs < 10.0, std::to_string(checked) +
                                            " partials, worst relative error " +
                                            fmt("%.3g", worst) + " <= 1e-4, under 10 s"};
}

// ---- DTW oracle -----------------------------------------------------------

double dtw_memo(const Sequence<double>& a, const Sequence<double>& b) {
  std::map<std::pair<long, long>, double> memo;
  std::function<double(long, long)> d = [&](long i, long j) -> double {
    if (auto it = memo.find({i, j}); it != memo.end()) return it->second;
    double sq = 0.0;
    for (long k = 0; k < a.cols(); ++k) sq += (a(i, k) - b(j, k)) * (a(i, k) - b(j, k));
    double v = std::sqrt(sq);
    if (i > 0 && j > 0) {
      v += std::min({d(i - 1, j), d(i, j - 1), d(i - 1, j - 1)});
    } else if (i > 0) {
      v += d(i - 1, 0);
    } else if (j > 0) {
      v += d(0, j - 1);
    }
    memo[{i, j}] = v;
    return v;
  };
  return d(a.rows() - 1, b.rows() - 1);
}

Outcome dtw_oracle() {
  Rng rng(99);
  int equal = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const long dims = 1 + static_cast<long>(rng.below(3));
    Sequence<double> a(1 + static_cast<long>(rng.below(8)), dims);
    Sequence<double> b(1 + static_cast<long>(rng.below(8)), dims);
    for (long i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
    for (long i = 0; i < b.size(); ++i) b.data()[i] = rng.normal();
    equal += dtw_distance(a, b) == dtw_memo(a, b) ? 1 : 0;
  }
  return {equal == 200, std::to_string(equal) + "/200 bitwise equal"};
}

// ---- codec roundtrip ------------------------------------------------------

Outcome codec_roundtrip() {
  const auto set = synthesize_boxing_set({});
  const auto codec = build_reference_points(set.patterns, 10, 0.5);
  const auto stats = training_stats(set);
  Rng rng(5);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < codec.joints(); ++j) {
    const auto refs = codec.references.row(j);
    for (int s = 0; s < 1000; ++s) {
      const double x = rng.uniform(stats.min(j), stats.max(j));
      const double back = decode_softmax(encode_analog(x, refs, codec.sigma), refs, codec.sigma);
      worst = std::max(worst, std::abs(back - x));
    }
  }
  return {worst <= 1e-2, std::to_string(codec.joints()) +
                             " joints x 1000 samples, J=10, sigma=0.5, max |error| " +
                             fmt("%.2e", worst) + " rad <= 1e-2"};
}

// ---- convergence ----------------------------------------------------------

/// Mean absolute joint error of closed-loop regeneration from each learned PB,
/// worst over patterns.
double regeneration_error(const Checkpoint& cp) {
  double worst = 0.0;
  const auto pb = learned_pb_points(cp);
  for (std::size_t k = 0; k < cp.training.patterns.size(); ++k) {
    const auto& target = cp.training.patterns[k];
    const auto action = generate_action(cp, pb[k], static_cast<int>(target.steps()));
    worst = std::max(worst, (action.values - target.values).cwiseAbs().mean());
  }
  return worst;
}

Checkpoint train_desk(double gamma, std::uint64_t seed, int epochs) {
  TrainingConfig cfg;
  cfg.gamma = gamma;
  cfg.seed = seed;
  cfg.epochs = epochs;
  return train(synthesize_boxing_set({}), NetworkSpec{}, cfg).best;
}

constexpr int kConvergenceEpochs = 10000;
constexpr int kTrendEpochs = 5000;
constexpr int kTrendResolution = 50;

// ---- equation-level suite ------------------------------------------------------

Outcome equation_suite() {
  std::vector<std::string> failed;
  const auto expect = [&](bool ok, const char* what) {
    if (!ok) failed.emplace_back(what);
  };
  Rng rng(17);

  Sequence<double> p(3, 4), q(3, 4);
  for (int t = 0; t < 3; ++t) {
    VectorX<double> a(4), b(4);
    for (int i = 0; i < 4; ++i) {
      a(i) = rng.normal();
      b(i) = rng.normal();
    }
    p.row(t) = group_softmax(a, 2).transpose();
    q.row(t) = group_softmax(b, 2).transpose();
  }
  expect(kl_loss(p, p) == 0.0, "kl identity");
  expect(kl_loss(q, p) > 0.0 && kl_loss(p, q) > 0.0, "kl positivity");

  VectorX<double> teacher(4), pred(4);
  teacher << 0.1, 0.9, 0.3, 0.7;
  pred << 0.6, 0.4, 0.2, 0.8;
  expect(mix_input<double>(&teacher, pred, 0.0) == teacher, "mix gamma=0 is the teacher");
  expect(mix_input<double>(&teacher, pred, 1.0) == pred, "mix gamma=1 is the prediction");
  expect(mix_input<double>(nullptr, pred, 1.0) == pred, "mix gamma=1 needs no teacher");

  VectorX<double> u(3), net(3);
  u << -1.0, 0.5, 2.0;
  net << 3.0, 0.5, -4.0;
  expect(leaky_update(u, net, 1.0) == net, "tau=1 reduces to the net input");
  for (double tau : {2.0, 4.0, 8.0, 70.0}) {
    const VectorX<double> next = leaky_update(u, net, tau);
    const VectorX<double> lo = u.cwiseMin(net), hi = u.cwiseMax(net);
    expect((next.array() >= lo.array()).all() && (next.array() <= hi.array()).all(),
           "leaky update is a convex combination");
  }

  VectorX<double> rho(5);
  rho << -50.0, -1.0, 0.0, 1.0, 50.0;
  const VectorX<double> act = pb_activation(rho);
  expect((act.array().abs() <= 1.0).all() && act(2) == 0.0, "PB activation range");

  VectorX<double> logits(80);
  for (Eigen::Index i = 0; i < logits.size(); ++i) logits(i) = 30.0 * rng.normal();
  const VectorX<double> out = group_softmax(logits, 10);
  bool normalized = true;
  for (int g = 0; g < 8; ++g) normalized &= std::abs(out.segment(g * 10, 10).sum() - 1.0) <= 1e-12;
  expect(normalized && (out.array() >= 0.0).all(), "per-group output normalization");

  std::string detail = failed.empty() ? "kl, mix endpoints, leaky convexity/tau=1, PB range, "
                                        "group normalization all exact"
                                      : "failed:";
  for (const auto& f : failed) detail += " " + f + ";";
  return {failed.empty(), detail};
}

// ---- determinism ----------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome cli_determinism() {
  const auto root = fs::temp_directory_path() / "novact_acceptance_determinism";
  fs::remove_all(root);
  std::ostringstream sink;
  const auto invoke = [&](std::vector<std::string> args) {
    const int code = cli::run(args, sink, sink);
    require(code == 0, ErrorKind::InvalidArgument, "CLI invocation failed:\n" + sink.str());
  };
  for (const char* tag : {"a", "b"}) {
    const auto dir = root / tag;
    invoke({"gen-data", "--out", (dir / "data").string(), "--seed", "11"});
    invoke({"train", "--data", (dir / "data/manifest.json").string(), "--out",
            (dir / "ckpt.json").string(), "--epochs", "300", "--seed", "5", "--log-every", "0"});
    invoke({"sweep", "--ckpt", (dir / "ckpt.json").string(), "--out", (dir / "sweep").string(),
            "--resolution", "12", "--sample-size", "10", "--pool", "all"});
  }
  const std::vector<fs::path> artifacts{"data/manifest.json", "data/L.Jab.csv", "ckpt.json",
                                        "ckpt.curve.csv",     "sweep/cells.jsonl", "sweep/sweep.json",
                                        "sweep/report.json",  "sweep/map.png"};
  std::size_t same = 0;
  for (const auto& a : artifacts) same += slurp(root / "a" / a) == slurp(root / "b" / a) ? 1 : 0;
  return {same == artifacts.size(),
          std::to_string(same) + "/" + std::to_string(artifacts.size()) +
              " artifacts bit-identical (data, checkpoint, curve, records, meta, report, map)"};
}

}  // namespace

int main(int argc, char** argv) {
  const bool tolerate_known_gaps =
      argc > 1 && std::string_view(argv[1]) == "--tolerate-known-gaps";
  std::cout << "novact acceptance suite" << std::endl;

  report("gradient correctness (BPTT vs central differences, tiny net, gamma 0/0.5/1)",
         gradient_check);
  report("DTW oracle equivalence (200 random instances, T<=8, D<=3)", dtw_oracle);
  report("codec roundtrip", codec_roundtrip);
  report("equation-level unit suite", equation_suite);

  Checkpoint desk;
  report("learning convergence (6 patterns, T=50, gamma=0.5, " +
             std::to_string(kConvergenceEpochs) + " epochs)",
         [&]() -> Outcome {
           desk = train_desk(0.5, 1, kConvergenceEpochs);
           const double kl = mean_group_kl(desk.loss, desk.training);
           const double regen = regeneration_error(desk);
           return {kl <= 0.05 && regen <= 0.1,
                   "mean KL per step per group " + fmt("%.2e", kl) + " <= 0.05, worst regeneration "
                   "error " + fmt("%.4f", regen) + " rad <= 0.1"};
         });

  report("learned PB points recall their own pattern (desk checkpoint)", [&]() -> Outcome {
    const auto classify = Classifier::from_checkpoint(desk);
    const auto pb = learned_pb_points(desk);
    int ok = 0;
    for (std::size_t k = 0; k < pb.size(); ++k) {
      const auto label = classify(generate_action(desk, pb[k], desk.stats.max_steps), desk.training);
      ok += label.cls == PatternClass::AppropriateLearned &&
                    label.nearest == desk.training.patterns[k].name
                ? 1
                : 0;
    }
    return {ok == static_cast<int>(pb.size()),
            std::to_string(ok) + "/" + std::to_string(pb.size()) +
                " learned PB points generate appropriate-learned actions nearest their own pattern"};
  });

  report("sweep smoke (50x50 within 30 s)", [&]() -> Outcome {
    const auto started = Clock::now();
    SweepConfig cfg;
    cfg.grid.resolution = 50;
    const auto r = sweep(desk, cfg);
    const auto rep = summarize(r, desk, {});
    const double secs = std::chrono::duration<double>(Clock::now() - started).count();
    std::size_t n = 0;
    for (auto c : kAllClasses) n += rep.counts.at(c);
    return {n == 2500 && secs <= 30.0,
            std::to_string(n) + "/2500 cells classified, " + fmt("%.1f s incl. report", secs)};
  });

  report("sweep integrity (200x200)", [&]() -> Outcome {
    SweepConfig cfg;
    cfg.grid.resolution = 200;
    const auto r = sweep(desk, cfg);
    const auto rep = summarize(r, desk, {});
    std::size_t n = 0;
    double pct = 0.0;
    for (auto c : kAllClasses) {
      n += rep.counts.at(c);
      pct += rep.percent.at(c);
    }
    std::size_t regions = 0;
    for (const auto& reg : rep.regions) regions += reg.appropriate;
    const std::size_t appropriate = rep.counts.at(PatternClass::AppropriateLearned) +
                                    rep.counts.at(PatternClass::AppropriateUnlearned);
    const bool ok = n == 40000 && std::abs(pct - 100.0) <= 0.01 && regions == appropriate;
    return {ok, std::to_string(n) + "/40000 cells partitioned, percentages sum to " +
                    fmt("%.6f", pct) + ", region counts sum to appropriate count; learned " +
                    fmt("%.2f%%", rep.percent.at(PatternClass::AppropriateLearned)) +
                    ", unlearned " +
                    fmt("%.2f%%", rep.percent.at(PatternClass::AppropriateUnlearned)) +
                    ", fluctuating " + fmt("%.2f%%", rep.percent.at(PatternClass::Fluctuating)) +
                    ", non-moving " + fmt("%.2f%%", rep.percent.at(PatternClass::NonMoving))};
  });

  report("closed-loop ratio trend (3 seeds x gamma {0, 0.5, 1}, " + std::to_string(kTrendEpochs) +
             " epochs, " + std::to_string(kTrendResolution) + "x" +
             std::to_string(kTrendResolution) + " sweeps)",
         []() -> Outcome {
           int learned_wins = 0, novelty_wins = 0, diversity_wins = 0;
           std::ostringstream rows;
           for (std::uint64_t seed : {1, 2, 3}) {
             std::map<double, SweepReport> by_gamma;
             for (double gamma : {0.0, 0.5, 1.0}) {
               const auto cp = train_desk(gamma, seed, kTrendEpochs);
               SweepConfig cfg;
               cfg.grid.resolution = kTrendResolution;
               by_gamma[gamma] = summarize(sweep(cp, cfg), cp, {});
               const auto& r = by_gamma[gamma];
               rows << "\n      seed " << seed << " gamma " << fmt("%.1f", gamma)
                    << ": appropriate " << fmt("%.2f%%", r.appropriate_percent)
                    << ", learned/appropriate " << fmt("%.4f", r.learned_fraction)
                    << ", novelty "
                    << (r.novelty ? fmt("%.3f", r.novelty->mean) : std::string("n/a"))
                    << ", diversity "
                    << (r.diversity ? fmt("%.3f", r.diversity->mean) : std::string("n/a"));
             }
             const auto& g0 = by_gamma[0.0];
             const auto& g5 = by_gamma[0.5];
             const auto& g1 = by_gamma[1.0];
             learned_wins += g1.learned_fraction > g0.learned_fraction &&
                                     g1.learned_fraction > g5.learned_fraction
                                 ? 1
                                 : 0;
             const auto top = [](const std::optional<ResampledStat>& mid,
                                 const std::optional<ResampledStat>& a,
                                 const std::optional<ResampledStat>& b) {
               return mid && (!a || mid->mean > a->mean) && (!b || mid->mean > b->mean);
             };
             novelty_wins += top(g5.novelty, g0.novelty, g1.novelty) ? 1 : 0;
             diversity_wins += top(g5.diversity, g0.diversity, g1.diversity) ? 1 : 0;
           }
           const bool ok = learned_wins >= 2 && novelty_wins >= 2 && diversity_wins >= 2;
           return {ok, "learned fraction highest at gamma=1 in " + std::to_string(learned_wins) +
                           "/3 seeds, novelty highest at gamma=0.5 in " +
                           std::to_string(novelty_wins) + "/3, diversity highest at gamma=0.5 in " +
                           std::to_string(diversity_wins) + "/3 (need >= 2 each)" + rows.str()};
         },
         /*known_gap=*/true);

  report("determinism (identical CLI invocations)", cli_determinism);

  const int total = failures + known_gap_failures;
  std::cout << (total == 0 ? std::string("all criteria passed")
                           : std::to_string(total) + " failed, " +
                                 std::to_string(known_gap_failures) + " of them known gaps")
            << std::endl;
  if (failures > 0) return 1;
  return known_gap_failures > 0 && !tolerate_known_gaps ? 1 : 0;
}
