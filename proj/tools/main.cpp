// msmic command line: model selection for weighted causal-effect estimation.
//
// Subcommands:
//   init         write an annotated config template
//   ingest-check validate a data file against the config schema
//   select       fit candidate structures and rank them per criterion
//   simulate     draw a frame from the configured process and write it
//   bias-match   Monte Carlo optimism vs the analytic penalty
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 fit/experiment
// failure, 1 anything else.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "msmic/driver.hpp"
#include "msmic/ingest.hpp"
#include "msmic/simulate.hpp"

namespace {

namespace fs = std::filesystem;

int cmd_init(const std::string& path) {
  if (fs::exists(path)) {
    std::cerr << "refusing to overwrite existing " << path << "\n";
    return 2;
  }
  std::ofstream out(path);
  out << msmic::config_template();
  std::cout << "wrote config template to " << path << "\n";
  return 0;
}

int cmd_ingest_check(const msmic::RunConfig& config) {
  if (config.data_path.empty())
    throw msmic::ConfigError("ingest-check: config has no input data file");
  const msmic::TreatmentFrame frame =
      msmic::ingest_csv(config.data_path, config.schema);
  std::cout << "ok: " << frame.size() << " records, " << frame.arms()
            << " arms, " << frame.dim_x() << " regressors, " << frame.dim_z()
            << " confounders\n";
  const auto counts = frame.arm_counts();
  for (int h = 0; h < frame.arms(); ++h)
    std::cout << "  arm " << (h + 1) << ": " << counts[h] << " records\n";
  return 0;
}

int cmd_select(const msmic::RunConfig& config) {
  const msmic::SelectReport report = msmic::run_select(config);
  msmic::write_select_report(report, config);
  std::cout << msmic::format_select_report(report);
  std::cout << "reports written to " << config.output_dir << "\n";
  return report.any_failed ? 4 : 0;
}

int cmd_simulate(const msmic::RunConfig& config, const std::string& out_path) {
  if (!config.dgp)
    throw msmic::ConfigError("simulate: config has no dgp block");
  const msmic::TreatmentFrame frame =
      msmic::generate(*config.dgp, config.n, config.seed);
  const std::string path =
      out_path.empty()
          ? (fs::path(config.output_dir) / "simulated.csv").string()
          : out_path;
  fs::create_directories(fs::path(path).parent_path().empty()
                             ? "."
                             : fs::path(path).parent_path().string());
  msmic::write_frame_csv(path, frame);
  std::cout << "wrote " << frame.size() << " records to " << path
            << " (seed " << config.seed << ")\n";
  return 0;
}

msmic::FitRecipe parse_recipe(const std::string& name) {
  if (name == "ipw-known") return msmic::FitRecipe::IPWKnown;
  if (name == "ipw-unknown") return msmic::FitRecipe::IPWUnknown;
  if (name == "dr") return msmic::FitRecipe::DR;
  if (name == "cb") return msmic::FitRecipe::CB;
  throw msmic::ConfigError("bias-match: unknown recipe '" + name + "'");
}

int cmd_bias_match(const msmic::RunConfig& config) {
  if (!config.dgp)
    throw msmic::ConfigError("bias-match: config has no dgp block");
  msmic::RecipeSpec recipe;
  recipe.recipe = parse_recipe(config.recipe);
  if (config.loss == "density-power") {
    recipe.loss.kind = msmic::LossKind::DensityPower;
    recipe.loss.gamma = config.loss_gamma;
  }
  recipe.marginal_variance = config.marginal_variance;
  recipe.conditional_variance = config.conditional_variance;
  recipe.policy.propensity_floor = config.propensity_floor;
  if (config.contrast.size() > 0)
    recipe.contrast.emplace(config.contrast);

  const msmic::TargetPopulation d =
      config.target_d.size() == 0
          ? msmic::TargetPopulation::uniform(config.dgp->arms)
          : msmic::TargetPopulation(config.target_d);

  const msmic::BiasMatchReport report = msmic::mc_bias(
      *config.dgp, recipe, d, config.n, config.reps, config.seed);

  fs::create_directories(config.output_dir);
  const std::string path =
      (fs::path(config.output_dir) / "bias_match.csv").string();
  std::ofstream out(path);
  out.precision(17);
  out << "rep,optimism,penalty,d2,d3\n";
  for (std::size_t i = 0; i < report.optimism.size(); ++i)
    out << i << "," << report.optimism[i] << "," << report.penalty[i] << ","
        << report.d2[i] << "," << report.d3[i] << "\n";
  out << "summary,mc_bias=" << report.mc_bias << ",penalty_mean="
      << report.penalty_mean << ",se=" << report.mc_se << ",z=" << report.z
      << "\n";

  std::cout << "bias-match: n=" << report.n << " reps=" << report.reps
            << " failures=" << report.failures << " (seed " << config.seed
            << ")\n";
  std::cout << "  MC optimism  " << report.mc_bias << " +- " << report.mc_se
            << "\n";
  std::cout << "  penalty mean " << report.penalty_mean << "\n";
  std::cout << "  z(penalty - optimism) = " << report.z << "\n";
  std::cout << "per-replication table written to " << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"model selection for weighted causal-effect estimation"};
  app.require_subcommand(1);

  std::string config_path = "msmic.json";
  std::string init_path = "msmic.json";
  std::string simulate_out;

  auto* init = app.add_subcommand("init", "write an annotated config template");
  init->add_option("path", init_path, "where to write the template");

  auto* ingest = app.add_subcommand("ingest-check", "validate an input file");
  ingest->add_option("-c,--config", config_path, "config file")->required();

  auto* select = app.add_subcommand("select", "rank candidate structures");
  select->add_option("-c,--config", config_path, "config file")->required();

  auto* simulate = app.add_subcommand("simulate", "draw and write a frame");
  simulate->add_option("-c,--config", config_path, "config file")->required();
  simulate->add_option("-o,--out", simulate_out, "output csv path");

  auto* bias = app.add_subcommand("bias-match",
                                  "Monte Carlo optimism vs analytic penalty");
  bias->add_option("-c,--config", config_path, "config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (init->parsed()) return cmd_init(init_path);
    const msmic::RunConfig config = msmic::load_config(config_path);
    if (ingest->parsed()) return cmd_ingest_check(config);
    if (select->parsed()) return cmd_select(config);
    if (simulate->parsed()) return cmd_simulate(config, simulate_out);
    if (bias->parsed()) return cmd_bias_match(config);
  } catch (const msmic::ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return 2;
  } catch (const msmic::DataError& err) {
    std::cerr << "data error: " << err.what() << "\n";
    return 3;
  } catch (const msmic::Error& err) {
    std::cerr << "fit error: " << err.what() << "\n";
    return 4;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
