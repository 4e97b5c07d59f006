#include "colloc/error.hpp"
#include "colloc/eval/metrics.hpp"
#include "colloc/eval/report_io.hpp"
#include "colloc/eval/sweep.hpp"
#include "colloc/io.hpp"
#include "colloc/sim/config_io.hpp"
#include "colloc/sim/datasets.hpp"
#include "colloc/sim/run_log.hpp"
#include "colloc/stgl/bundle.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace colloc;

namespace {

enum Exit { kOk = 0, kUsage = 1, kConfig = 2, kRuntime = 3 };

struct Args {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string baseline = "full";
  std::string var = "latency";
  std::string grid;
  int threads = 1;
  bool json = false;
  std::optional<int> k;
  std::string models;
  std::string run;
};

sim::ProjectConfig load(const Args& a) {
  if (a.config.empty()) throw ConfigError("--config is required");
  return sim::validate_config(a.config);
}

void note(const Args& a, const std::string& s) {
  if (!a.json) std::cerr << s << '\n';
}

void emit(const Args& a, const nlohmann::json& j, const std::string& human) {
  if (a.json) std::cout << j.dump() << '\n';
  else std::cout << human << '\n';
}

sim::PipelineMode parse_mode(const std::string& name) {
  auto m = sim::parse_pipeline_mode(name);
  if (!m) throw ConfigError(fmt::format("--baseline: unknown kind '{}' (full, measurement-only, model-only, learning-only)", name));
  return *m;
}

std::optional<stgl::ModelBundle> maybe_bundle(const Args& a, sim::PipelineMode mode) {
  const bool needed = mode == sim::PipelineMode::Full || mode == sim::PipelineMode::LearningOnly;
  if (a.models.empty()) {
    if (needed) throw ConfigError(fmt::format("--models is required for '{}'", sim::to_string(mode)));
    return std::nullopt;
  }
  return stgl::load_bundle(a.models);
}

int cmd_gen(const Args& a) {
  auto cfg = load(a);
  if (a.seed) cfg.scenario.seed = *a.seed;
  if (a.out.empty()) throw ConfigError("--out is required");
  const sim::World world = sim::generate_scenario(cfg.scenario);
  fs::create_directories(a.out);
  write_file_atomic(fs::path(a.out) / "scenario.yaml", sim::dump_config(cfg));
  write_file_atomic(fs::path(a.out) / "truth.csv", [&](std::ostream& out) {
    out << "tick,object,kind,x,y,z\n";
    for (int t = 0; t < cfg.scenario.duration; ++t) {
      for (const auto& tr : world.trajectories) {
        const Vec3& p = tr.positions[static_cast<std::size_t>(t)];
        out << fmt::format("{},{},{},{},{},{}\n", t, tr.id, sim::to_string(tr.kind), p.x(), p.y(), p.z());
      }
    }
  });
  write_file_atomic(fs::path(a.out) / "robots.csv", [&](std::ostream& out) {
    out << "robot,r00,r01,r02,r10,r11,r12,r20,r21,r22,tx,ty,tz,latency_min,latency_max\n";
    for (const auto& r : world.robots) {
      out << r.id;
      const Mat3& R = r.extrinsics.rotation();
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) out << fmt::format(",{}", R(i, j));
      }
      const Vec3& t = r.extrinsics.translation();
      out << fmt::format(",{},{},{},{},{}\n", t.x(), t.y(), t.z(), r.latency.min, r.latency.max);
    }
  });
  emit(a, {{"out", a.out}, {"objects", world.trajectories.size()}, {"robots", world.robots.size()}},
       fmt::format("wrote scenario with {} objects and {} robots to {}", world.trajectories.size(), world.robots.size(), a.out));
  return kOk;
}

int cmd_train(const Args& a) {
  auto cfg = load(a);
  if (a.seed) cfg.training.seed = *a.seed;
  if (a.k) cfg.training.ensemble_size = *a.k;
  if (a.out.empty()) throw ConfigError("--out is required");
  sim::TrainingReport report;
  const auto bundle = sim::train_bundle(cfg.scenario, cfg.training, a.threads, &report,
                                        [&](const std::string& s) { note(a, s); });
  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  stgl::save_bundle(out, bundle);
  fs::path losses = out;
  losses += ".loss.csv";
  write_file_atomic(losses, [&](std::ostream& os) {
    os << "ensemble,member,epoch,nll\n";
    auto dump = [&](const char* role, const std::vector<stgl::TrainedMember>& members) {
      for (std::size_t k = 0; k < members.size(); ++k) {
        os << fmt::format("{},{},0,{}\n", role, k, members[k].initial_loss);
        for (std::size_t e = 0; e < members[k].loss_curve.size(); ++e) {
          os << fmt::format("{},{},{},{}\n", role, k, e + 1, members[k].loss_curve[e]);
        }
      }
    };
    dump("learner", report.learner);
    dump("compensator", report.compensator);
  });
  nlohmann::json j{{"bundle", a.out},
                   {"learner_samples", report.learner_samples},
                   {"compensator_samples", report.compensator_samples}};
  for (const auto& m : report.learner) j["learner_final_nll"].push_back(m.final_loss);
  for (const auto& m : report.compensator) j["compensator_final_nll"].push_back(m.final_loss);
  emit(a, j, fmt::format("wrote bundle {} (K = {})", a.out, bundle.learner.size()));
  return kOk;
}

sim::PipelineOptions options_for(const sim::ProjectConfig& cfg, sim::PipelineMode mode) {
  sim::PipelineOptions o = cfg.pipeline;
  o.mode = mode;
  return o;
}

int cmd_run(const Args& a) {
  auto cfg = load(a);
  if (a.seed) cfg.scenario.seed = *a.seed;
  if (a.out.empty()) throw ConfigError("--out is required");
  const auto mode = parse_mode(a.baseline);
  const auto bundle = maybe_bundle(a, mode);
  const auto log = sim::run_scenario(cfg.scenario, bundle ? &*bundle : nullptr, options_for(cfg, mode));
  sim::save_run_log(a.out, log);
  emit(a, {{"out", a.out}, {"rows", log.row_count()}, {"messages", log.messages_sent}},
       fmt::format("wrote run log ({} rows) to {}", log.row_count(), a.out));
  return kOk;
}

int cmd_eval(const Args& a) {
  eval::MetricsReport report;
  if (!a.run.empty()) {
    report = eval::compute_metrics(sim::load_run_log(a.run));
  } else {
    auto cfg = load(a);
    if (a.seed) cfg.scenario.seed = *a.seed;
    const auto mode = parse_mode(a.baseline);
    const auto bundle = maybe_bundle(a, mode);
    report = eval::run_baseline(mode, cfg.scenario, bundle ? &*bundle : nullptr, options_for(cfg, mode));
  }
  if (!a.out.empty()) eval::save_metrics(a.out, report);
  emit(a, nlohmann::json::parse(eval::metrics_json(report, -1)),
       fmt::format("DE {:.4f} m  Rel-DE {:.4f}  ({} samples)", report.de, report.rel_de, report.samples));
  return kOk;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (end == item.c_str() || *end != '\0') throw ConfigError(fmt::format("--grid: bad value '{}'", item));
    out.push_back(v);
  }
  return out;
}

int cmd_sweep(const Args& a) {
  auto cfg = load(a);
  if (a.out.empty()) throw ConfigError("--out is required");
  const auto var = eval::parse_sweep_variable(a.var);
  if (!var) throw ConfigError(fmt::format("--var: unknown variable '{}' (latency, robots, noise)", a.var));
  const std::string key(eval::to_string(*var));
  const std::vector<double> grid = a.grid.empty() ? cfg.sweep.grids.at(key) : parse_grid(a.grid);
  std::vector<std::uint64_t> seeds = cfg.sweep.seed_list();
  if (a.seed) {
    for (auto& s : seeds) s = s - cfg.sweep.seed_list().front() + *a.seed;
  }
  const auto mode = parse_mode(a.baseline);
  const auto bundle = maybe_bundle(a, mode);
  const auto result =
      eval::sweep(*var, grid, cfg.scenario, bundle ? &*bundle : nullptr, seeds, options_for(cfg, mode), a.threads);
  eval::save_sweep(a.out, result);
  std::string human = fmt::format("{} sweep ({}), area {:.4f}\n", key, sim::to_string(mode), result.area);
  for (const auto& p : result.points) human += fmt::format("  {:>6.3f}  DE {:.4f} +- {:.4f}\n", p.x, p.mean_de, p.std_de);
  emit(a, nlohmann::json::parse(eval::sweep_json(result, -1)), human);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaborative multi-robot object localisation: simulate, train, run, evaluate, sweep."};
  app.require_subcommand(1);
  Args a;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", a.config, "YAML configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", a.seed, "Override the seed from the config");
    sub->add_option("--out", a.out, "Output path");
    sub->add_option("--threads", a.threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--json", a.json, "Machine-readable output on stdout");
  };
  auto* gen = app.add_subcommand("gen", "Generate a scenario and its ground truth");
  common(gen);
  auto* train = app.add_subcommand("train", "Train the learner and compensation ensembles");
  common(train);
  train->add_option("--k", a.k, "Ensemble size")->check(CLI::PositiveNumber);
  auto* run = app.add_subcommand("run", "Run the pipeline and write per-robot logs");
  common(run);
  auto* ev = app.add_subcommand("eval", "Compute DE / Rel-DE for a run log or a fresh run");
  common(ev);
  ev->add_option("--run", a.run, "Run log directory to score")->check(CLI::ExistingDirectory);
  auto* sw = app.add_subcommand("sweep", "Sweep latency, robot count or noise scale");
  common(sw);
  sw->add_option("--var", a.var, "latency | robots | noise");
  sw->add_option("--grid", a.grid, "Comma-separated grid values (default: from config)");
  for (auto* sub : {run, ev, sw}) {
    sub->add_option("--models", a.models, "Model bundle")->check(CLI::ExistingFile);
    sub->add_option("--baseline", a.baseline, "full | measurement-only | model-only | learning-only");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*gen) return cmd_gen(a);
    if (*train) return cmd_train(a);
    if (*run) return cmd_run(a);
    if (*ev) return cmd_eval(a);
    if (*sw) return cmd_sweep(a);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
