#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "msmic/criteria.hpp"
#include "msmic/ingest.hpp"
#include "msmic/simulate.hpp"

namespace msmic {

enum class EstimatorMode { IPWKnown, IPWUnknown, DR, CB };

// One batch run: where the data comes from, what to fit, which criteria to
// evaluate over which candidate marginal structures, and where reports go.
struct RunConfig {
  // input: a delimited data file with a schema, or a data-generating process
  std::string data_path;
  ColumnSchema schema;
  std::optional<DGPSpec> dgp;
  int n = 1000;

  Eigen::VectorXd target_d;  // empty = all-ones
  EstimatorMode estimator = EstimatorMode::IPWUnknown;
  std::vector<CriterionKind> criteria{CriterionKind::IPWIC2};

  std::vector<std::vector<int>> candidates;  // explicit column subsets (0-based)
  int all_subsets_max_size = 0;              // or enumerate subsets up to size k

  std::string outcome_kind = "gaussian";       // gaussian | bernoulli
  std::string loss = "log-likelihood";         // log-likelihood | density-power
  double loss_gamma = 0.5;
  double marginal_variance = 1.0;
  double conditional_variance = 1.0;
  Eigen::MatrixXd known_alpha;   // ipw-known with file input
  Eigen::VectorXd contrast;      // cb
  double propensity_floor = 0.0;
  NewtonOptions solver;
  std::uint64_t seed = 1;
  std::string output_dir = ".";

  // experiment sizes (simulate / bias-match)
  int reps = 1000;
  std::string recipe = "ipw-unknown";
};

RunConfig load_config(const std::string& path);

// annotated template config written by the init subcommand
std::string config_template();

struct CandidateResult {
  int id = 0;
  std::vector<int> columns;
  bool converged = false;
  std::string error;
  std::map<CriterionKind, CriterionReport> reports;
};

struct SelectReport {
  std::vector<CandidateResult> candidates;           // ordered by id
  std::map<CriterionKind, int> argmin;               // candidate id per criterion
  bool any_failed = false;
  std::uint64_t seed = 0;
  int n = 0;
  int arms = 0;
};

// Fits every candidate under the configured estimator, evaluates every
// requested criterion, and ranks candidates per criterion. Candidate failures
// are carried as rows, not thrown.
SelectReport run_select(const RunConfig& config);

// report.csv (machine readable) and report.txt (aligned table) in output_dir
void write_select_report(const SelectReport& report, const RunConfig& config);

// human-readable table, also embedded in report.txt
std::string format_select_report(const SelectReport& report);

}  // namespace msmic
