// Command-line front end: single evaluations, parameter sweeps, the four
// optimizers, Monte Carlo validation, and config inspection. Configuration
// comes from defaults, overridden by --config JSON, overridden by flags.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aoiopt/config.hpp"
#include "aoiopt/simval.hpp"

namespace {

using aoiopt::config::RunConfig;

std::vector<double> axis_points(double lo, double hi, double step) {
  std::vector<double> v;
  for (double x = lo; x <= hi + 1e-9; x += step) v.push_back(std::min(x, hi));
  if (v.empty() || v.back() < hi - 1e-9) v.push_back(hi);
  return v;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw aoiopt::Error("cannot write " + path.string());
  out << content;
}

nlohmann::json summary_json(const std::string& method, double best_aoi,
                            const aoiopt::model::Decision& d, long evaluations,
                            double wall_s) {
  return {{"method", method},          {"best_aoi_ms", best_aoi},
          {"speed_kmh", d.speed_kmh},  {"rri_ms", d.rri_ms},
          {"evaluations", evaluations}, {"wall_time_s", wall_s}};
}

void emit_optimizer_outputs(const RunConfig& cfg, const std::string& method,
                            const nlohmann::json& summary,
                            const aoiopt::OptimizerTrace& trace) {
  std::filesystem::create_directories(cfg.output_dir);
  write_file(std::filesystem::path(cfg.output_dir) / ("trace_" + method + ".csv"),
             trace.to_csv());
  write_file(std::filesystem::path(cfg.output_dir) / ("summary_" + method + ".json"),
             summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
}

int cmd_eval(const RunConfig& cfg, double speed, double rri) {
  const auto b = aoiopt::model::aoi({speed, rri}, cfg.scenario, cfg.channel, cfg.radio);
  std::cout << b.to_json().dump(2) << "\n";
  return 0;
}

int cmd_sweep(const RunConfig& cfg, const std::string& vary,
              std::vector<double> fixed_list, double step) {
  const bool vary_speed = vary == "speed";
  if (fixed_list.empty())
    fixed_list = vary_speed ? std::vector<double>{20.0, 50.0, 100.0}
                            : std::vector<double>{30.0, 60.0, 120.0};
  const aoiopt::model::Bounds varied_bounds =
      vary_speed ? cfg.scenario.speed_kmh : cfg.scenario.rri_ms;
  const auto varied = axis_points(varied_bounds.lo, varied_bounds.hi, step);

  std::string csv = aoiopt::model::AoiBreakdown::csv_header() + ",infeasible\n";
  for (const double fixed : fixed_list) {
    for (const double x : varied) {
      const double speed = vary_speed ? x : fixed;
      const double rri = vary_speed ? fixed : x;
      try {
        const auto b =
            aoiopt::model::aoi({speed, rri}, cfg.scenario, cfg.channel, cfg.radio);
        csv += b.csv_row() + ",0\n";
      } catch (const aoiopt::Error&) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,,,,,,,,1\n", speed, rri,
                      cfg.scenario.flow_veh_h / speed);
        csv += buf;
      }
    }
  }
  std::filesystem::create_directories(cfg.output_dir);
  const auto path = std::filesystem::path(cfg.output_dir) / ("sweep_" + vary + ".csv");
  write_file(path, csv);
  std::cout << path.string() << "\n";
  return 0;
}

int cmd_optimize(const RunConfig& cfg, const std::string& method, bool mock,
                 bool write_checkpoint) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto wall = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  if (method == "grid") {
    const auto [best, trace] =
        aoiopt::optimize::grid_search(cfg.search_space(), cfg.channel, cfg.radio);
    emit_optimizer_outputs(cfg, method,
                           summary_json(method, best.aoi_ms, best.decision,
                                        trace.evaluations, wall()),
                           trace);
    return 0;
  }
  if (method == "ga") {
    const auto [best, trace] = aoiopt::optimize::ga_optimize(cfg.search_space(), cfg.ga,
                                                             cfg.channel, cfg.radio);
    emit_optimizer_outputs(cfg, method,
                           summary_json(method, best.aoi_ms, best.decision,
                                        trace.evaluations, wall()),
                           trace);
    return 0;
  }
  if (method == "ddpg") {
    const auto result =
        aoiopt::rl::train(cfg.ddpg, cfg.reward, cfg.scenario, cfg.channel, cfg.radio);
    if (write_checkpoint) {
      std::filesystem::create_directories(cfg.output_dir);
      const auto path = std::filesystem::path(cfg.output_dir) / "policy.json";
      write_file(path, result.actor.to_json().dump() + "\n");
      std::cerr << "policy checkpoint: " << path.string() << "\n";
    }
    emit_optimizer_outputs(
        cfg, method,
        summary_json(method, result.final_greedy_aoi, result.final_decision,
                     result.trace.evaluations, wall()),
        result.trace);
    return 0;
  }
  if (method == "llm") {
    std::filesystem::create_directories(std::filesystem::path(cfg.output_dir) /
                                        "prompts");
    const auto sink = [&](int iteration, const std::string& prompt) {
      char name[32];
      std::snprintf(name, sizeof(name), "iter_%03d.txt", iteration);
      write_file(std::filesystem::path(cfg.output_dir) / "prompts" / name, prompt);
    };
    aoiopt::llm::LlmEndpointConfig endpoint = cfg.llm;
    aoiopt::llm::LlmResult result;
    if (mock) {
      aoiopt::llm::MockLlmServer server;
      server.start();
      endpoint.base_url = server.base_url();
      endpoint.api_key_env.clear();  // loopback mock needs no credentials
      result = aoiopt::llm::llm_optimize(cfg.scenario, cfg.channel, cfg.radio, endpoint,
                                         cfg.convergence, sink);
      server.stop();
    } else {
      result = aoiopt::llm::llm_optimize(cfg.scenario, cfg.channel, cfg.radio, endpoint,
                                         cfg.convergence, sink);
    }
    auto summary = summary_json(method, result.best.aoi_ms, result.best.decision,
                                result.trace.evaluations, wall());
    switch (result.status) {
      case aoiopt::llm::LlmStatus::converged: summary["status"] = "converged"; break;
      case aoiopt::llm::LlmStatus::max_iters: summary["status"] = "max_iters"; break;
      case aoiopt::llm::LlmStatus::endpoint_error:
        summary["status"] = "endpoint_error";
        break;
    }
    emit_optimizer_outputs(cfg, method, summary, result.trace);
    return result.status == aoiopt::llm::LlmStatus::endpoint_error ? 1 : 0;
  }
  std::cerr << "unknown method: " << method << "\n";
  return 2;
}

int cmd_validate_mc(const RunConfig& cfg, std::uint64_t samples) {
  aoiopt::simval::McConfig mc;
  mc.samples = samples;
  nlohmann::json cases = nlohmann::json::array();
  bool all_pass = true;
  std::uint64_t case_idx = 0;

  const auto record = [&](const std::string& quantity, double analytic,
                          double estimate, double tol, std::uint64_t seed) {
    const double rel =
        analytic == 0.0 ? std::fabs(estimate) : std::fabs(estimate / analytic - 1.0);
    const bool ok = rel <= tol;
    all_pass = all_pass && ok;
    cases.push_back({{"quantity", quantity},
                     {"analytic", analytic},
                     {"monte_carlo", estimate},
                     {"rel_err", rel},
                     {"tolerance", tol},
                     {"samples", samples},
                     {"seed", seed},
                     {"pass", ok}});
  };

  for (const double p : {0.1, 0.5, 0.9}) {
    mc.seed = cfg.seed + case_idx++;
    const double analytic = 20.0 * p / (1.0 - p);
    const double est = aoiopt::simval::mc_extra_delay(20.0, p, mc);
    record("extra_delay_p" + std::to_string(p).substr(0, 3), analytic, est, 0.01,
           mc.seed);
  }
  const std::vector<std::pair<double, double>> chains = {
      {0.30, 0.70}, {0.45, 0.80}, {0.55, 0.85}};
  for (const auto& [pp, pi] : chains) {
    mc.seed = cfg.seed + case_idx++;
    aoiopt::model::MarkovChannel ch;
    ch.stay_adverse = pp;
    ch.stay_ideal = pi;
    const auto est = aoiopt::simval::mc_gilbert(ch, 10, mc);
    const double stationary = (1.0 - pi) / (2.0 - pp - pi);
    double l = 0.0;
    for (int i = 0; i < 10; ++i) l = pi * l + (1.0 - pi);
    char tag[64];
    std::snprintf(tag, sizeof(tag), "pp%.2f_pi%.2f", pp, pi);
    record(std::string("gilbert_stationary_") + tag, stationary,
           est.stationary_adverse, 0.005, mc.seed);
    record(std::string("gilbert_first_failure_") + tag, l, est.first_failure, 0.01,
           mc.seed);
  }

  const nlohmann::json report = {{"cases", cases}, {"pass", all_pass}};
  std::cout << report.dump(2) << "\n";
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Age-of-information modeling and optimization for SPS sidelink "
               "broadcast"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed_flag;
  std::string out_flag;
  bool mock = false;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed_flag, "override every configured seed");
  app.add_option("--out", out_flag, "output directory");
  app.add_flag("--mock", mock, "use the built-in loopback model endpoint (llm only)");

  auto* show = app.add_subcommand("show-config", "print the merged configuration");

  double eval_speed = 0.0, eval_rri = 0.0;
  auto* eval = app.add_subcommand("eval", "evaluate one (speed, rri) decision");
  eval->add_option("--speed", eval_speed, "vehicle speed, km/h")->required();
  eval->add_option("--rri", eval_rri, "reservation interval, ms")->required();

  std::string sweep_vary = "speed";
  std::vector<double> sweep_fixed;
  double sweep_step = 5.0;
  auto* sweep = app.add_subcommand("sweep", "write a CSV sweep of the model");
  sweep->add_option("--vary", sweep_vary, "axis to vary: speed or rri")
      ->check(CLI::IsMember({"speed", "rri"}));
  sweep->add_option("--fixed", sweep_fixed,
                    "values of the other axis (one curve per value)")
      ->delimiter(',');
  sweep->add_option("--step", sweep_step, "step along the varied axis");

  std::string opt_method;
  auto* optimize = app.add_subcommand("optimize", "run one optimizer");
  optimize->add_option("--method", opt_method, "grid | ga | ddpg | llm")
      ->required()
      ->check(CLI::IsMember({"grid", "ga", "ddpg", "llm"}));

  auto* train = app.add_subcommand("train", "train the policy (ddpg) and save a "
                                            "checkpoint");

  std::uint64_t mc_samples = 1000000;
  auto* validate = app.add_subcommand("validate-mc", "Monte Carlo vs analytic checks");
  validate->add_option("--samples", mc_samples, "samples per estimate");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg =
        config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
    if (seed_flag.has_value()) {
      cfg.seed = *seed_flag;
      cfg.ga.seed = *seed_flag;
      cfg.ddpg.seed = *seed_flag;
    }
    if (!out_flag.empty()) cfg.output_dir = out_flag;
    cfg.validate();

    if (show->parsed()) {
      std::cout << cfg.to_json().dump(2) << "\n";
      return 0;
    }
    if (eval->parsed()) return cmd_eval(cfg, eval_speed, eval_rri);
    if (sweep->parsed()) return cmd_sweep(cfg, sweep_vary, sweep_fixed, sweep_step);
    if (optimize->parsed()) return cmd_optimize(cfg, opt_method, mock, false);
    if (train->parsed()) return cmd_optimize(cfg, "ddpg", mock, true);
    if (validate->parsed()) return cmd_validate_mc(cfg, mc_samples);
  } catch (const aoiopt::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
