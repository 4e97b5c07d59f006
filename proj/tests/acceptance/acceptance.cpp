#include "colloc/eval/metrics.hpp"
#include "colloc/eval/sweep.hpp"
#include "colloc/fusion/estimation.hpp"
#include "colloc/io.hpp"
#include "colloc/nn/tape.hpp"
#include "colloc/sim/config_io.hpp"
#include "colloc/sim/datasets.hpp"
#include "colloc/sim/runner.hpp"
#include "colloc/stgl/bundle.hpp"
#include "colloc/stgl/ensemble.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>

namespace fs = std::filesystem;
using namespace colloc;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

nn::Matrix uniform(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  nn::Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = u(rng);
  return m;
}

Mat3 random_pd(std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  Mat3 a;
  for (int i = 0; i < 9; ++i) a(i) = d(rng);
  return a * a.transpose() + 1e-3 * Mat3::Identity();
}

Vec3 random_vec(std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  return Vec3(d(rng), d(rng), d(rng));
}

double mean_de(sim::PipelineMode mode, const sim::ScenarioConfig& base, const stgl::ModelBundle& bundle,
               std::span<const std::uint64_t> seeds, sim::PipelineOptions opt) {
  opt.mode = mode;
  std::vector<eval::MetricsReport> runs;
  for (auto s : seeds) {
    auto cfg = base;
    cfg.seed = s;
    runs.push_back(eval::run_baseline(mode, cfg, &bundle, opt));
  }
  return eval::combine_reports(runs).de;
}

std::string curve(const eval::SweepResult& r) {
  std::string s;
  for (const auto& p : r.points) s += fmt::format(" {:.4f}", p.mean_de);
  return s;
}

// 1
Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t checked = 0;
  for (int instance = 0; instance < 50; ++instance) {
    std::mt19937_64 rng(5000 + instance);
    const int hidden = 2 + instance % 7;  // 2..8
    stgl::StglModel model(stgl::ModelDims::small(hidden), 7000 + instance);
    const Eigen::Index m = 1 + instance % 4;
    const int steps = 1 + instance % 3;
    std::vector<nn::Matrix> window;
    nn::Matrix pos = uniform(3, m, rng, 1.0);
    for (int t = 0; t < 4 + instance % 5; ++t) {
      window.push_back(pos);
      pos += uniform(3, m, rng, 0.1);
    }
    const nn::Matrix target = pos;
    const nn::Adjacency adj = nn::Adjacency::Constant(m, m, true);
    const auto loss = [&](bool differentiate) {
      nn::Tape tape(differentiate);
      stgl::StglNetwork net(tape, model);
      auto roll = net.rollout(window, adj, steps);
      nn::Var l = nn::diag_gaussian_nll(roll.means.back(), roll.variances.back(), target);
      if (differentiate) tape.backward(l);
      return l.value()(0, 0);
    };
    model.params().zero_grad();
    loss(true);
    for (const auto& name : model.params().names()) {
      nn::Matrix& value = model.params().value(name);
      const nn::Matrix grad = model.params().grad(name);
      for (Eigen::Index i = 0; i < value.size(); ++i) {
        const double saved = value(i);
        const double h = 1e-5 * std::max(1.0, std::abs(saved));
        value(i) = saved + h;
        const double up = loss(false);
        value(i) = saved - h;
        const double down = loss(false);
        value(i) = saved;
        const double fd = (up - down) / (2 * h);
        const double scale = std::max({std::abs(fd), std::abs(grad(i)), 1e-3});
        worst = std::max(worst, std::abs(fd - grad(i)) / scale);
        ++checked;
      }
    }
  }
  const double elapsed = seconds_since(t0);
  return {worst < 1e-4 && elapsed < 60.0,
          fmt::format("50 instances, {} parameters, max rel err {:.2e}, {:.1f} s", checked, worst, elapsed)};
}

// 2
Outcome gain_constraint() {
  std::mt19937_64 rng(2);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<Mat3> covs;
    const int n = 1 + i % 6;
    for (int k = 0; k < n; ++k) covs.push_back(random_pd(rng));
    worst = std::max(worst, (fusion::fusion_gain(covs).sum() - Mat3::Identity()).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-9, fmt::format("1000 lists, max |sum E - I| {:.2e}", worst)};
}

// 3
Outcome ensemble_degeneracy(const stgl::ModelBundle& bundle, const sim::ScenarioConfig& base) {
  const auto world = sim::generate_scenario(base);
  std::mt19937_64 rng(3);
  stgl::SpatioTemporalGraph history;
  history.dt = base.dt;
  for (int t = 0; t < static_cast<int>(bundle.history_length); ++t) {
    history.push(sim::observe(world.trajectories, world.robots[0], t, base.dt, rng));
  }
  std::vector<stgl::StglModel> same(5, bundle.learner.front());
  const auto out = stgl::ensemble_predict_all(same, history, bundle.history_length);
  const auto single = stgl::rollout(bundle.learner.front(), history, 1, bundle.history_length);
  double model_term = 0.0, q_gap = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    model_term = std::max(model_term, out[i].output.model_uncertainty.cwiseAbs().maxCoeff());
    q_gap = std::max(q_gap, (out[i].output.process_noise - single[i].steps[0].covariance).cwiseAbs().maxCoeff());
  }
  return {!out.empty() && model_term < 1e-12 && q_gap < 1e-12,
          fmt::format("{} objects, K = 5, max model term {:.1e}, max |Q - Sigma| {:.1e}", out.size(), model_term,
                      q_gap)};
}

// 4
Outcome kalman_contracts() {
  std::mt19937_64 rng(4);
  int violations = 0;
  double worst_dev = 0.0;
  for (int i = 0; i < 1000; ++i) {
    fusion::StateBelief prior;
    prior.x = random_vec(rng);
    prior.P = random_pd(rng);
    const Mat3 Q = random_pd(rng);
    const Vec3 learned = random_vec(rng);
    const auto out = fusion::predict_and_update(prior, Q, learned, {random_vec(rng), random_pd(rng)});
    if (!stgl::is_psd(out.P, 1e-9) || out.P.trace() > (prior.P + Q).trace() + 1e-9) ++violations;
    const auto vague = fusion::predict_and_update(prior, Q, learned, {random_vec(rng), 1e9 * Mat3::Identity()});
    worst_dev = std::max(worst_dev, (vague.x - learned).norm());
  }
  return {violations == 0 && worst_dev < 1e-6,
          fmt::format("1000 updates, {} PSD/trace violations, R = 1e9 I max shift {:.1e}", violations, worst_dev)};
}

// 5
Outcome compensation_benefit(const stgl::ModelBundle& bundle, sim::ScenarioConfig base,
                             const sim::PipelineOptions& pipeline) {
  base.latency = sim::LatencySpec::constant(0.3);
  base.robot_count = 4;
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 1; s <= 20; ++s) seeds.push_back(s);
  auto opt = pipeline;
  opt.compensate = true;
  const double with = mean_de(sim::PipelineMode::Full, base, bundle, seeds, opt);
  opt.compensate = false;
  const double without = mean_de(sim::PipelineMode::Full, base, bundle, seeds, opt);
  const double gain = (without - with) / without;
  return {gain >= 0.10, fmt::format("20 seeds, DE {:.4f} compensated vs {:.4f} uncompensated ({:.1f}% lower)", with,
                                    without, 100 * gain)};
}

// 6
Outcome latency_trend(const stgl::ModelBundle& bundle, const sim::ProjectConfig& cfg) {
  const auto seeds = cfg.sweep.seed_list();
  const std::vector<double> grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  const auto r = eval::sweep(eval::SweepVariable::Latency, grid, cfg.scenario, &bundle, seeds, cfg.pipeline);
  auto solo = cfg.pipeline;
  solo.collaborate = false;
  const double single = mean_de(sim::PipelineMode::Full, cfg.scenario, bundle, seeds, solo);
  const double residual = eval::isotonic_residual(r.means(), true);
  const double gap = std::abs(r.points.back().mean_de - single) / single;
  return {residual < 0.10 && gap <= 0.15,
          fmt::format("DE{} ; isotonic residual {:.1f}%, DE(0.7) {:.4f} vs single-robot {:.4f} ({:.1f}%)", curve(r),
                      100 * residual, r.points.back().mean_de, single, 100 * gap)};
}

// 7
Outcome robot_trend(const stgl::ModelBundle& bundle, const sim::ProjectConfig& cfg) {
  const std::vector<double> grid{1, 2, 3, 4, 5, 6};
  const auto r = eval::sweep(eval::SweepVariable::Robots, grid, cfg.scenario, &bundle, cfg.sweep.seed_list(),
                             cfg.pipeline);
  const auto y = r.means();
  const double residual = eval::isotonic_residual(y, false);
  const double drop = y.front() - y.back();
  const double tail = y[4] - y[5];
  const bool plateau = drop > 0 && tail <= 0.1 * drop;
  return {residual < 0.10 && plateau,
          fmt::format("DE{} ; isotonic residual {:.1f}%, DE5 - DE6 = {:.1f}% of DE1 - DE6", curve(r), 100 * residual,
                      drop > 0 ? 100 * tail / drop : 0.0)};
}

// 8
Outcome robustness_ordering(const stgl::ModelBundle& bundle, const sim::ProjectConfig& cfg) {
  const auto& grid = cfg.sweep.grids.at("noise");
  const sim::PipelineMode modes[] = {sim::PipelineMode::Full, sim::PipelineMode::LearningOnly,
                                     sim::PipelineMode::ModelOnly, sim::PipelineMode::MeasurementOnly};
  std::vector<double> areas;
  std::string detail = "areas";
  for (auto mode : modes) {
    auto opt = cfg.pipeline;
    opt.mode = mode;
    const auto r = eval::sweep(eval::SweepVariable::Noise, grid, cfg.scenario, &bundle, cfg.sweep.seed_list(), opt);
    areas.push_back(r.area);
    detail += fmt::format(" {} {:.4f}", sim::to_string(mode), r.area);
  }
  const bool ordered = areas[0] < areas[1] && areas[1] < areas[2] && areas[2] < areas[3];
  return {ordered, detail};
}

// 9
Outcome throughput(const stgl::ModelBundle& bundle, sim::ScenarioConfig base, const sim::PipelineOptions& pipeline) {
  base.object_count = 10;
  base.robot_count = 4;
  auto opt = pipeline;
  opt.mode = sim::PipelineMode::Full;
  sim::Pipeline p(base, &bundle, opt);
  std::vector<double> ms;
  while (!p.done()) {
    const auto t0 = Clock::now();
    p.step();
    ms.push_back(1e3 * seconds_since(t0));
  }
  const double mean = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(ms.size());
  const double worst = *std::max_element(ms.begin(), ms.end());
  return {worst <= 100.0 && bundle.learner.size() == 5,
          fmt::format("M = 10, N = 4, K = {}, {} ticks, mean {:.1f} ms, max {:.1f} ms", bundle.learner.size(),
                      ms.size(), mean, worst)};
}

// 10
Outcome cli_determinism(const std::string& cli, const std::string& config, const std::string& bundle,
                        const fs::path& work) {
  fs::remove_all(work);
  fs::create_directories(work);
  const auto run = [&](const std::string& args) {
    const std::string cmd = fmt::format("\"{}\" {} > /dev/null 2>&1", cli, args);
    return std::system(cmd.c_str()) == 0;
  };
  std::vector<std::pair<fs::path, fs::path>> pairs;
  bool ok = true;
  for (const char* tag : {"a", "b"}) {
    const fs::path dir = work / tag;
    ok = ok && run(fmt::format("gen --config \"{}\" --out \"{}\"", config, (dir / "gen").string()));
    ok = ok && run(fmt::format("run --config \"{}\" --models \"{}\" --out \"{}\"", config, bundle,
                               (dir / "run").string()));
    ok = ok && run(fmt::format("eval --config \"{}\" --run \"{}\" --out \"{}\"", config, (dir / "run").string(),
                               (dir / "metrics.json").string()));
  }
  if (!ok) return {false, "a CLI invocation failed"};
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(work / "a")) {
    if (!entry.is_regular_file()) continue;
    const fs::path other = work / "b" / fs::relative(entry.path(), work / "a");
    if (!fs::exists(other) || read_file(entry.path()) != read_file(other)) {
      return {false, fmt::format("{} differs", fs::relative(entry.path(), work / "a").string())};
    }
    ++files;
  }
  return {files > 0, fmt::format("gen/run/eval twice, {} files byte-identical", files)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string config, bundle_path, cli, work = "acceptance_work";
  std::vector<int> only;
  app.add_option("--config", config, "Project configuration")->required()->check(CLI::ExistingFile);
  app.add_option("--bundle", bundle_path, "Model bundle; trained from the config when missing")->required();
  app.add_option("--cli", cli, "colloc executable")->required()->check(CLI::ExistingFile);
  app.add_option("--work", work, "Scratch directory");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = sim::validate_config(config);
    stgl::ModelBundle bundle;
    if (fs::exists(bundle_path)) {
      bundle = stgl::load_bundle(bundle_path);
    } else {
      std::cout << "training bundle " << bundle_path << std::endl;
      bundle = sim::train_bundle(cfg.scenario, cfg.training);
      stgl::save_bundle(bundle_path, bundle);
    }

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gradient fidelity", [] { return gradient_fidelity(); }},
        {"fusion-gain constraint", [] { return gain_constraint(); }},
        {"ensemble degeneracy", [&] { return ensemble_degeneracy(bundle, cfg.scenario); }},
        {"kalman contracts", [] { return kalman_contracts(); }},
        {"delay compensation benefit", [&] { return compensation_benefit(bundle, cfg.scenario, cfg.pipeline); }},
        {"latency trend", [&] { return latency_trend(bundle, cfg); }},
        {"collaborator trend", [&] { return robot_trend(bundle, cfg); }},
        {"robustness ordering", [&] { return robustness_ordering(bundle, cfg); }},
        {"throughput", [&] { return throughput(bundle, cfg.scenario, cfg.pipeline); }},
        {"cli determinism", [&] { return cli_determinism(cli, config, bundle_path, work); }},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
      const int id = static_cast<int>(i) + 1;
      if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
      const auto t0 = Clock::now();
      Outcome o;
      try {
        o = criteria[i].second();
      } catch (const std::exception& e) {
        o = {false, fmt::format("error: {}", e.what())};
      }
      if (!o.pass) ++failed;
      std::cout << fmt::format("{} {:>2} {}: {} [{:.1f} s]", o.pass ? "PASS" : "FAIL", id, criteria[i].first,
                               o.detail, seconds_since(t0))
                << std::endl;
    }
    return failed == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "acceptance: " << e.what() << '\n';
    return 2;
  }
}
