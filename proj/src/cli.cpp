#include "novact/cli.hpp"

#include "novact/service.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace novact::cli {

namespace {

struct GenDataOptions {
  std::string out;
  SynthConfig synth;
};

struct TrainOptions {
  std::string data;
  std::string out;
  std::string curve;
  bool curve_timing = false;
  NetworkSpec spec;
  double sigma = kDefaultSigma;
  TrainingConfig config = [] {
    TrainingConfig c;
    c.threads = 0;  // defer to NOVACT_THREADS
    return c;
  }();
  int log_every = 1000;
};

struct ResampleOptions {
  ResampleConfig resample;
  std::string pool = "appropriate";
};

struct SweepOptions {
  std::string ckpt;
  std::string out;
  SweepConfig sweep;
  double learned_threshold = -1.0;  // < 0: calibrated
  ResampleOptions resample;
  bool map = true;
};

struct MeasureOptions {
  std::string ckpt;
  std::string sweep;
  std::string out;
  double learned_threshold = -1.0;
  ResampleOptions resample;
  int threads = 0;
};

struct RenderOptions {
  std::string ckpt;
  std::string sweep;
  std::string out;
};

struct GenerateOptions {
  std::string ckpt;
  std::vector<double> pb{0.0, 0.0};
  int steps = 0;
  std::string out;
};

void add_threads(CLI::App* sub, int& threads) {
  sub->add_option("--threads", threads, "Worker threads (0: NOVACT_THREADS, else 1)")
      ->check(CLI::NonNegativeNumber);
}

void add_resample(CLI::App* sub, ResampleOptions& o) {
  sub->add_option("--iterations", o.resample.iterations, "Resampling iterations")
      ->check(CLI::PositiveNumber);
  sub->add_option("--sample-size", o.resample.sample_size, "Patterns per resampling iteration")
      ->check(CLI::PositiveNumber);
  sub->add_option("--sample-seed", o.resample.seed, "Seed of the resampling draws");
  sub->add_option("--pool", o.pool, "Patterns eligible for resampling")
      ->check(CLI::IsMember({"appropriate", "all"}));
}

SummaryConfig summary_config(const ResampleOptions& o, int threads) {
  SummaryConfig sc;
  sc.resample = o.resample;
  sc.pool = o.pool == "all" ? SamplePool::All : SamplePool::Appropriate;
  sc.threads = threads;
  return sc;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::IOError, "cannot write " + path.string());
  out << text;
  require(static_cast<bool>(out), ErrorKind::IOError, "write failed: " + path.string());
}

std::filesystem::path legend_path(const std::filesystem::path& image) {
  auto p = image;
  p.replace_extension(".legend.json");
  return p;
}

void write_map(const MapImage& image, const std::filesystem::path& path) {
  if (path.extension() == ".ppm") {
    write_ppm(image, path);
  } else {
    write_png(image, path);
  }
  write_text(legend_path(path), legend_json(image).dump(2) + "\n");
}

void print_report(std::ostream& out, const SweepReport& r) {
  const auto pct = [&](PatternClass c) { return r.percent.at(c); };
  out << std::fixed << std::setprecision(2);
  out << "cells " << r.total << " (" << r.resolution << "x" << r.resolution << "), " << r.steps
      << " frames, learned threshold " << std::setprecision(4) << r.learned_threshold
      << std::setprecision(2) << '\n';
  out << "  appropriate unlearned  " << pct(PatternClass::AppropriateUnlearned) << "%\n";
  out << "  appropriate learned    " << pct(PatternClass::AppropriateLearned) << "%\n";
  out << "  appropriate subtotal   " << r.appropriate_percent << "%\n";
  out << "  fluctuating            " << pct(PatternClass::Fluctuating) << "%\n";
  out << "  non-moving             " << pct(PatternClass::NonMoving) << "%\n";
  const auto stat = [&](const char* name, const std::optional<ResampledStat>& s) {
    out << "  " << name;
    if (s) {
      out << std::setprecision(3) << s->mean << " +/- " << s->stdev << std::setprecision(2) << '\n';
    } else {
      out << "n/a (" << r.resample_note << ")\n";
    }
  };
  stat("novelty                ", r.novelty);
  stat("diversity              ", r.diversity);
  out << "  regions (appropriate / learned cells):\n";
  for (const auto& reg : r.regions) {
    out << "    " << std::left << std::setw(12) << reg.label << std::right << reg.appropriate
        << " / " << reg.learned << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

/// Relabels appropriate cells against a new threshold using their stored distance.
void apply_threshold(SweepResult& result, double threshold) {
  result.learned_threshold = threshold;
  for (auto& cell : result.cells) {
    if (!is_appropriate(cell.label.cls)) continue;
    cell.label.cls = *cell.label.min_dtw <= threshold ? PatternClass::AppropriateLearned
                                                      : PatternClass::AppropriateUnlearned;
  }
}

int cmd_gen_data(const GenDataOptions& o, std::ostream& out) {
  const auto set = synthesize_boxing_set(o.synth);
  save_training_set(set, o.out);
  out << "wrote " << set.patterns.size() << " patterns to "
      << (std::filesystem::path(o.out) / "manifest.json").string() << '\n';
  return kExitOk;
}

int cmd_train(TrainOptions o, std::ostream& out) {
  const auto set = load_training_set(o.data);
  o.spec.joints = static_cast<int>(set.joints());
  const auto codec = build_reference_points(set.patterns, o.spec.units, o.sigma);
  const std::filesystem::path ckpt_path = o.out;
  const std::filesystem::path curve_path =
      o.curve.empty() ? std::filesystem::path(o.out).replace_extension(".curve.csv")
                      : std::filesystem::path(o.curve);

  const auto started = std::chrono::steady_clock::now();
  const auto on_checkpoint = [&](const Checkpoint& best, const LearningCurve& curve) {
    save_checkpoint(best, ckpt_path);
    if (o.log_every > 0) {
      out << "epoch " << curve.loss.size() << " snapshot saved (best epoch " << best.epoch
          << ", loss " << best.loss << ")\n";
    }
  };
  auto cfg = o.config;
  auto result = train_with_codec(set, o.spec, cfg, codec, on_checkpoint);
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;

  if (o.log_every > 0) {
    for (std::size_t e = 0; e < result.curve.loss.size(); ++e) {
      if ((e + 1) % static_cast<std::size_t>(o.log_every) == 0) {
        out << "epoch " << (e + 1) << " loss " << result.curve.loss[e] << '\n';
      }
    }
  }
  save_checkpoint(result.best, ckpt_path);
  write_learning_curve(result.curve, curve_path, o.curve_timing);
  out << "best epoch " << result.best.epoch << ", loss " << result.best.loss
      << ", mean KL per step and joint " << mean_group_kl(result.best.loss, set) << '\n';
  out << "trained " << cfg.epochs << " epochs in " << elapsed.count() << " s\n";
  out << "wrote " << ckpt_path.string() << " and " << curve_path.string() << '\n';
  return kExitOk;
}

int cmd_sweep(SweepOptions o, std::ostream& out) {
  const auto cp = load_checkpoint(o.ckpt);
  if (o.learned_threshold >= 0.0) o.sweep.learned_threshold = o.learned_threshold;
  const std::filesystem::path dir = o.out;
  const auto started = std::chrono::steady_clock::now();
  const auto result = sweep_to_directory(cp, o.sweep, dir);
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;

  const auto report = summarize(result, cp, summary_config(o.resample, o.sweep.threads));
  write_text(dir / SweepFiles::kReport, to_json(report).dump(2) + "\n");
  if (o.map) write_map(render_map(result, cp.params.pb.labels), dir / SweepFiles::kMap);
  print_report(out, report);
  out << "swept " << result.cells.size() << " cells in " << elapsed.count() << " s; wrote "
      << dir.string() << '\n';
  return kExitOk;
}

int cmd_measure(const MeasureOptions& o, std::ostream& out) {
  const auto cp = load_checkpoint(o.ckpt);
  auto result = load_sweep(o.sweep);
  if (o.learned_threshold >= 0.0) apply_threshold(result, o.learned_threshold);
  const auto report = summarize(result, cp, summary_config(o.resample, o.threads));
  const auto text = to_json(report).dump(2) + "\n";
  if (o.out.empty()) {
    out << text;
  } else {
    write_text(o.out, text);
    print_report(out, report);
    out << "wrote " << o.out << '\n';
  }
  return kExitOk;
}

int cmd_render(const RenderOptions& o, std::ostream& out) {
  const auto cp = load_checkpoint(o.ckpt);
  const auto result = load_sweep(o.sweep);
  const auto image = render_map(result, cp.params.pb.labels);
  write_map(image, o.out);
  out << "wrote " << o.out << " and " << legend_path(o.out).string() << '\n';
  return kExitOk;
}

int cmd_generate(const GenerateOptions& o, std::ostream& out) {
  const auto cp = load_checkpoint(o.ckpt);
  const VectorX<double> pb = Eigen::Vector2d(o.pb[0], o.pb[1]);
  const int steps = o.steps > 0 ? o.steps : cp.stats.max_steps;
  auto traj = generate_action(cp, pb, steps);
  const auto label = Classifier::from_checkpoint(cp)(traj, cp.training);
  if (!o.out.empty()) {
    traj.name = "generated";
    write_trajectory_csv(traj, cp.training.joint_names, o.out);
  }
  out << "class " << to_string(label.cls);
  if (label.nearest) out << ", nearest " << *label.nearest << " (DTW " << *label.min_dtw << ")";
  out << '\n';
  if (!o.out.empty()) out << "wrote " << o.out << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Train, sweep and explore a parametric-bias recurrent action model", "novact"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", "novact 0.1.0");

  GenDataOptions gen_data;
  auto* gd = app.add_subcommand("gen-data", "Synthesize the six boxing training actions");
  gd->add_option("--out", gen_data.out, "Output directory (CSV files + manifest.json)")->required();
  gd->add_option("--steps", gen_data.synth.steps, "Frames per action")->check(CLI::Range(10, 100000));
  gd->add_option("--noise", gen_data.synth.noise, "Gaussian noise amplitude, rad")
      ->check(CLI::NonNegativeNumber);
  gd->add_option("--seed", gen_data.synth.seed, "Noise seed");
  gd->add_option("--amplitudes", gen_data.synth.amplitudes, "Per-action excursion scales (6)")
      ->expected(6);

  TrainOptions train;
  auto* tr = app.add_subcommand("train", "Train the network on a training manifest");
  tr->add_option("--data", train.data, "Training manifest.json")->required()->check(CLI::ExistingFile);
  tr->add_option("--out", train.out, "Checkpoint output path")->required();
  tr->add_option("--curve", train.curve, "Learning curve CSV (default: <out>.curve.csv)");
  tr->add_flag("--curve-timing", train.curve_timing, "Add per-epoch seconds to the curve");
  tr->add_option("--gamma", train.config.gamma, "Closed-loop ratio")->check(CLI::Range(0.0, 1.0));
  tr->add_option("--epochs", train.config.epochs, "Training epochs")->check(CLI::PositiveNumber);
  tr->add_option("--lr", train.config.adam.learning_rate, "Adam learning rate")
      ->check(CLI::PositiveNumber);
  tr->add_option("--beta1", train.config.adam.beta1, "Adam beta1")->check(CLI::Range(0.0, 0.999999));
  tr->add_option("--beta2", train.config.adam.beta2, "Adam beta2")->check(CLI::Range(0.0, 0.999999));
  tr->add_option("--adam-eps", train.config.adam.epsilon, "Adam epsilon")->check(CLI::PositiveNumber);
  tr->add_option("--seed", train.config.seed, "Weight initialization seed");
  tr->add_option("--init-scale", train.config.init_scale, "Uniform init bound times 1/sqrt(fan-in)")
      ->check(CLI::NonNegativeNumber);
  tr->add_option("--checkpoint-every", train.config.checkpoint_interval,
                 "Save the best-so-far checkpoint every N epochs (0: only at the end)")
      ->check(CLI::NonNegativeNumber);
  tr->add_option("--log-every", train.log_every, "Print the loss every N epochs (0: quiet)")
      ->check(CLI::NonNegativeNumber);
  tr->add_option("--fast", train.spec.fast, "Fast context neurons")->check(CLI::PositiveNumber);
  tr->add_option("--middle", train.spec.middle, "Middle context neurons")->check(CLI::PositiveNumber);
  tr->add_option("--slow", train.spec.slow, "Slow context neurons")->check(CLI::PositiveNumber);
  tr->add_option("--tau-fast", train.spec.tau_fast, "Fast time constant")->check(CLI::Range(1.0, 1e6));
  tr->add_option("--tau-middle", train.spec.tau_middle, "Middle time constant")
      ->check(CLI::Range(1.0, 1e6));
  tr->add_option("--tau-slow", train.spec.tau_slow, "Slow time constant")->check(CLI::Range(1.0, 1e6));
  tr->add_option("--pb-dim", train.spec.pb_dim, "PB dimensions")->check(CLI::PositiveNumber);
  tr->add_option("--units", train.spec.units, "Softmax units per joint")->check(CLI::Range(2, 1000));
  tr->add_option("--sigma", train.sigma, "Softmax encoding width")->check(CLI::PositiveNumber);
  add_threads(tr, train.config.threads);

  SweepOptions sw;
  auto* sp = app.add_subcommand("sweep", "Generate and classify an action at every PB grid cell");
  sp->add_option("--ckpt", sw.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  sp->add_option("--out", sw.out, "Output directory")->required();
  sp->add_option("--resolution", sw.sweep.grid.resolution, "Grid points per PB axis")
      ->check(CLI::Range(2, 100000));
  sp->add_option("--steps", sw.sweep.steps, "Frames per action (0: longest training pattern)")
      ->check(CLI::NonNegativeNumber);
  sp->add_option("--learned-threshold", sw.learned_threshold,
                 "DTW threshold for learned actions (negative: 25% of the closest training pair)");
  sp->add_flag("!--no-map", sw.map, "Skip rendering map.png");
  add_resample(sp, sw.resample);
  add_threads(sp, sw.sweep.threads);

  MeasureOptions me;
  auto* ms = app.add_subcommand("measure", "Recompute the report from an existing sweep");
  ms->add_option("--ckpt", me.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  ms->add_option("--sweep", me.sweep, "Sweep directory or records file")->required()
      ->check(CLI::ExistingPath);
  ms->add_option("--out", me.out, "Report JSON path (default: print to stdout)");
  ms->add_option("--learned-threshold", me.learned_threshold,
                 "Relabel learned/unlearned with this DTW threshold (negative: keep the sweep's)");
  add_resample(ms, me.resample);
  add_threads(ms, me.threads);

  RenderOptions re;
  auto* rm = app.add_subcommand("render-map", "Render the PB map of a sweep (PNG, or PPM by extension)");
  rm->add_option("--ckpt", re.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  rm->add_option("--sweep", re.sweep, "Sweep directory or records file")->required()
      ->check(CLI::ExistingPath);
  rm->add_option("--out", re.out, "Image path (.png or .ppm)")->required();

  ServeConfig serve_cfg;
  std::string serve_ckpt, serve_sweep;
  auto* sv = app.add_subcommand("serve", "Serve a checkpoint and sweep over HTTP");
  sv->add_option("--ckpt", serve_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  sv->add_option("--sweep", serve_sweep, "Sweep directory or records file")->check(CLI::ExistingPath);
  sv->add_option("--host", serve_cfg.host, "Bind address");
  sv->add_option("--port", serve_cfg.port, "Port (0: any free port)")->check(CLI::Range(0, 65535));
  sv->add_option("--max-steps", serve_cfg.max_steps, "Longest action a request may ask for")
      ->check(CLI::PositiveNumber);

  GenerateOptions ge;
  auto* gn = app.add_subcommand("generate", "Generate one action at a PB point");
  gn->add_option("--ckpt", ge.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  gn->add_option("--pb", ge.pb, "PB point x y")->expected(2)->check(CLI::Range(-1.0, 1.0));
  gn->add_option("--steps", ge.steps, "Frames (0: longest training pattern)")
      ->check(CLI::NonNegativeNumber);
  gn->add_option("--out", ge.out, "Trajectory CSV path");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const CLI::App* target = &app;
    for (auto* sub : app.get_subcommands()) target = sub;
    out << target->help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << "novact 0.1.0\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* target = &app;
    for (auto* sub : app.get_subcommands()) target = sub;
    err << target->help();
    return kExitUsage;
  }

  CLI::App* chosen = app.get_subcommands().front();
  out << "# effective config: novact " << chosen->get_name() << '\n'
      << chosen->config_to_str(true, false) << '\n';

  try {
    if (chosen == gd) return cmd_gen_data(gen_data, out);
    if (chosen == tr) return cmd_train(train, out);
    if (chosen == sp) return cmd_sweep(sw, out);
    if (chosen == ms) return cmd_measure(me, out);
    if (chosen == rm) return cmd_render(re, out);
    if (chosen == gn) return cmd_generate(ge, out);
    if (chosen == sv) {
      serve_cfg.checkpoint = serve_ckpt;
      if (!serve_sweep.empty()) serve_cfg.sweep = serve_sweep;
      serve(serve_cfg);
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace novact::cli
