#include "msmic/driver.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "msmic/parallel.hpp"

namespace msmic {

using nlohmann::json;

namespace {

Eigen::VectorXd to_vector(const json& j) {
  Eigen::VectorXd v(j.size());
  int i = 0;
  for (const auto& value : j) v[i++] = value.get<double>();
  return v;
}

Eigen::MatrixXd to_matrix(const json& j) {
  const int rows = static_cast<int>(j.size());
  if (rows == 0) return Eigen::MatrixXd(0, 0);
  const int cols = static_cast<int>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(j.at(i).size()) != cols)
      throw ConfigError("config: ragged matrix");
    for (int c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
  }
  return m;
}

CriterionKind parse_criterion(const std::string& name) {
  if (name == "QICW" || name == "QICw" || name == "qicw") return CriterionKind::QICW;
  if (name == "IPWIC1" || name == "ipwic1") return CriterionKind::IPWIC1;
  if (name == "IPWIC2" || name == "ipwic2") return CriterionKind::IPWIC2;
  if (name == "DRIC" || name == "dric") return CriterionKind::DRIC;
  if (name == "CB-IC" || name == "CBIC" || name == "cbic") return CriterionKind::CBIC;
  if (name == "ObsWeightIC" || name == "obs-weight" || name == "OBS-WEIGHT-IC")
    return CriterionKind::ObsWeightIC;
  throw ConfigError("config: unknown criterion '" + name + "'");
}

EstimatorMode parse_estimator(const std::string& name) {
  if (name == "ipw-known") return EstimatorMode::IPWKnown;
  if (name == "ipw-unknown") return EstimatorMode::IPWUnknown;
  if (name == "dr") return EstimatorMode::DR;
  if (name == "cb") return EstimatorMode::CB;
  throw ConfigError("config: unknown estimator '" + name + "'");
}

DGPSpec parse_dgp(const json& j) {
  DGPSpec dgp;
  dgp.arms = j.value("arms", 2);
  dgp.dim_z = j.value("dim_z", 1);
  if (j.contains("alpha0")) dgp.alpha0 = to_matrix(j.at("alpha0"));
  else dgp.alpha0 = Eigen::MatrixXd::Zero(std::max(dgp.arms - 1, 0), dgp.dim_z + 1);
  if (j.contains("arm_design")) dgp.arm_design = to_matrix(j.at("arm_design"));
  dgp.n_random_x = j.value("n_random_x", 0);
  dgp.fit_propensity_drop_z = j.value("fit_propensity_drop_z", false);
  dgp.fit_outcome_drop_z = j.value("fit_outcome_drop_z", false);
  if (j.contains("true_support"))
    dgp.true_support = j.at("true_support").get<std::vector<int>>();
  for (const auto& law_json : j.at("outcome")) {
    ArmLaw law;
    const std::string kind = law_json.value("kind", "gaussian");
    if (kind == "gaussian") law.kind = OutcomeKind::GaussianLinear;
    else if (kind == "bernoulli") law.kind = OutcomeKind::BernoulliLogit;
    else throw ConfigError("config: unknown outcome kind '" + kind + "'");
    law.intercept = law_json.value("intercept", 0.0);
    if (law_json.contains("z_coef")) law.z_coef = to_vector(law_json.at("z_coef"));
    if (law_json.contains("x_coef")) law.x_coef = to_vector(law_json.at("x_coef"));
    law.sd = law_json.value("sd", 1.0);
    dgp.outcome.push_back(law);
  }
  return dgp;
}

ColumnSchema parse_schema(const json& j) {
  ColumnSchema schema;
  schema.outcome = j.value("outcome", "");
  schema.arm_column = j.value("arm", "");
  if (j.contains("one_hot"))
    schema.one_hot = j.at("one_hot").get<std::vector<std::string>>();
  if (j.contains("confounders"))
    schema.confounders = j.at("confounders").get<std::vector<std::string>>();
  if (j.contains("shared_regressors"))
    schema.shared_regressors =
        j.at("shared_regressors").get<std::vector<std::string>>();
  if (j.contains("per_arm_regressors"))
    schema.per_arm_regressors =
        j.at("per_arm_regressors").get<std::vector<std::vector<std::string>>>();
  schema.arms = j.value("arms", 0);
  return schema;
}

}  // namespace

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in, nullptr, /*allow_exceptions=*/true,
                    /*ignore_comments=*/true);
  } catch (const json::parse_error& err) {
    throw ConfigError(std::string("config: ") + err.what());
  }

  RunConfig config;
  if (j.contains("input")) {
    const auto& input = j.at("input");
    if (input.contains("data")) {
      config.data_path = input.at("data").get<std::string>();
      if (input.contains("schema")) config.schema = parse_schema(input.at("schema"));
    }
    if (input.contains("dgp")) config.dgp = parse_dgp(input.at("dgp"));
    config.n = input.value("n", 1000);
  }
  if (j.contains("target_d")) config.target_d = to_vector(j.at("target_d"));
  if (j.contains("estimator"))
    config.estimator = parse_estimator(j.at("estimator").get<std::string>());
  if (j.contains("criteria")) {
    config.criteria.clear();
    for (const auto& name : j.at("criteria"))
      config.criteria.push_back(parse_criterion(name.get<std::string>()));
  }
  if (j.contains("candidates")) {
    const auto& cand = j.at("candidates");
    if (cand.contains("explicit"))
      config.candidates = cand.at("explicit").get<std::vector<std::vector<int>>>();
    config.all_subsets_max_size = cand.value("all_subsets_max_size", 0);
  }
  config.outcome_kind = j.value("outcome_kind", std::string("gaussian"));
  config.loss = j.value("loss", std::string("log-likelihood"));
  config.loss_gamma = j.value("loss_gamma", 0.5);
  config.marginal_variance = j.value("marginal_variance", 1.0);
  config.conditional_variance = j.value("conditional_variance", 1.0);
  if (j.contains("known_alpha")) config.known_alpha = to_matrix(j.at("known_alpha"));
  if (j.contains("contrast")) config.contrast = to_vector(j.at("contrast"));
  config.propensity_floor = j.value("propensity_floor", 0.0);
  if (j.contains("solver")) {
    config.solver.max_iter = j.at("solver").value("max_iter", 100);
    config.solver.tol = j.at("solver").value("tol", 1e-8);
  }
  config.seed = j.value("seed", 1ULL);
  config.output_dir = j.value("output_dir", std::string("."));
  config.reps = j.value("reps", 1000);
  config.recipe = j.value("recipe", std::string("ipw-unknown"));
  return config;
}

std::string config_template() {
  return R"({
  // msmic run configuration. Comments are allowed and stripped on load.
  "input": {
    // Either a delimited data file with a column schema ...
    "data": "data.csv",
    "schema": {
      "outcome": "y",
      // assignment: a 1..H integer column ("arm") or one-hot columns
      "arm": "arm",
      // "one_hot": ["t1", "t2"],
      "confounders": ["z1"],
      // regressors: shared across arms or listed per arm
      "per_arm_regressors": [["x1_a1", "x2_a1"], ["x1_a2", "x2_a2"]],
      // "shared_regressors": ["x1", "x2"],
      "arms": 2
    },
    // ... or a data-generating process (used by simulate/bias-match and
    // by select when no data file is given)
    // "dgp": {
    //   "arms": 2, "dim_z": 1,
    //   "alpha0": [[0.3, 0.8]],
    //   "outcome": [
    //     {"kind": "gaussian", "intercept": 1.0, "z_coef": [0.8], "sd": 1.0},
    //     {"kind": "gaussian", "intercept": 2.0, "z_coef": [0.8], "sd": 1.0}
    //   ],
    //   "arm_design": [[1, 0], [0, 1]],
    //   "n_random_x": 0,
    //   "fit_propensity_drop_z": false,
    //   "fit_outcome_drop_z": false
    // },
    "n": 1000
  },

  // target population multipliers per arm; all-ones = the actual population
  "target_d": [1, 1],

  // ipw-known | ipw-unknown | dr | cb
  "estimator": "ipw-unknown",

  // QICW | IPWIC1 | IPWIC2 | DRIC | CB-IC | ObsWeightIC
  "criteria": ["QICW", "IPWIC2"],

  // candidate marginal structures: explicit 0-based regressor column subsets,
  // or every nonempty subset up to the given size (at most 4096 subsets)
  "candidates": {
    "explicit": [[0], [0, 1]]
    // "all_subsets_max_size": 2
  },

  "outcome_kind": "gaussian",       // gaussian | bernoulli
  "loss": "log-likelihood",         // log-likelihood | density-power
  "loss_gamma": 0.5,                // density-power exponent
  "marginal_variance": 1.0,         // gaussian marginal variance (fixed, known)
  "conditional_variance": 1.0,      // dr: gaussian conditional variance
  // "known_alpha": [[0.3, 0.8]],   // ipw-known: propensity parameters
  // "contrast": [1, -1],           // cb: contrast over arms
  "propensity_floor": 0.0,          // 0 disables clipping (recommended)
  "solver": {"max_iter": 100, "tol": 1e-8},
  "seed": 1,
  "output_dir": ".",

  // experiment sizes for simulate / bias-match
  "reps": 1000,
  "recipe": "ipw-unknown"           // ipw-known | ipw-unknown | dr | cb
}
)";
}

namespace {

std::vector<std::vector<int>> enumerate_candidates(const RunConfig& config,
                                                   int dim_x) {
  if (!config.candidates.empty()) {
    if (config.candidates.size() > 4096)
      throw ConfigError("candidates: more than 4096 explicit subsets");
    return config.candidates;
  }
  const int k = config.all_subsets_max_size;
  if (k <= 0) {
    // default: the full structure only
    std::vector<int> all(dim_x);
    for (int j = 0; j < dim_x; ++j) all[j] = j;
    return {all};
  }
  if (dim_x > 12)
    throw ConfigError("candidates: all-subsets enumeration capped at 4096 "
                      "subsets; give an explicit list");
  std::vector<std::vector<int>> out;
  for (unsigned mask = 1; mask < (1u << dim_x); ++mask) {
    std::vector<int> cols;
    for (int j = 0; j < dim_x; ++j)
      if (mask & (1u << j)) cols.push_back(j);
    if (static_cast<int>(cols.size()) <= k) out.push_back(cols);
  }
  std::sort(out.begin(), out.end(),
            [](const std::vector<int>& a, const std::vector<int>& b) {
              if (a.size() != b.size()) return a.size() < b.size();
              return a < b;
            });
  if (out.size() > 4096)
    throw ConfigError("candidates: enumeration yields more than 4096 subsets");
  return out;
}

OutcomeKind parse_outcome_kind(const std::string& name) {
  if (name == "gaussian") return OutcomeKind::GaussianLinear;
  if (name == "bernoulli") return OutcomeKind::BernoulliLogit;
  throw ConfigError("config: unknown outcome kind '" + name + "'");
}

LossSpec parse_loss(const RunConfig& config) {
  LossSpec loss;
  if (config.loss == "log-likelihood") {
    loss.kind = LossKind::LogLikelihood;
  } else if (config.loss == "density-power") {
    loss.kind = LossKind::DensityPower;
    loss.gamma = config.loss_gamma;
  } else {
    throw ConfigError("config: unknown loss '" + config.loss + "'");
  }
  return loss;
}

void check_criteria_against_estimator(const RunConfig& config) {
  for (const CriterionKind kind : config.criteria) {
    const EstimatorMode mode = config.estimator;
    bool ok = false;
    switch (kind) {
      case CriterionKind::QICW:
      case CriterionKind::ObsWeightIC:
        ok = mode != EstimatorMode::CB;
        break;
      case CriterionKind::IPWIC1: ok = mode == EstimatorMode::IPWKnown; break;
      case CriterionKind::IPWIC2: ok = mode == EstimatorMode::IPWUnknown; break;
      case CriterionKind::DRIC: ok = mode == EstimatorMode::DR; break;
      case CriterionKind::CBIC: ok = mode == EstimatorMode::CB; break;
    }
    if (!ok)
      throw ConfigError("config: criterion " + criterion_name(kind) +
                        " is incompatible with the configured estimator");
  }
}

Eigen::VectorXd flatten_matrix(const Eigen::MatrixXd& a) {
  Eigen::VectorXd flat(a.rows() * a.cols());
  for (int i = 0; i < a.rows(); ++i)
    flat.segment(i * a.cols(), a.cols()) = a.row(i);
  return flat;
}

}  // namespace

SelectReport run_select(const RunConfig& config) {
  TreatmentFrame frame = [&] {
    if (!config.data_path.empty())
      return ingest_csv(config.data_path, config.schema);
    if (config.dgp) return generate(*config.dgp, config.n, config.seed);
    throw ConfigError("config: no input (data file or dgp) given");
  }();

  const TargetPopulation d =
      config.target_d.size() == 0
          ? TargetPopulation::uniform(frame.arms())
          : TargetPopulation(config.target_d);
  if (d.arms() != frame.arms())
    throw ConfigError("config: target_d length " + std::to_string(d.arms()) +
                      " differs from arm count " + std::to_string(frame.arms()));
  check_criteria_against_estimator(config);

  const OutcomeMarginalFamily family(parse_outcome_kind(config.outcome_kind),
                                     parse_loss(config),
                                     config.marginal_variance);
  const PropensityModel prop_model(frame.arms(), frame.dim_z());
  const WeightPolicy policy{config.propensity_floor};

  Eigen::VectorXd known_alpha;
  if (config.estimator == EstimatorMode::IPWKnown) {
    if (config.known_alpha.size() > 0) {
      known_alpha = flatten_matrix(config.known_alpha);
    } else if (config.dgp) {
      known_alpha = flatten_matrix(config.dgp->alpha0);
    } else {
      throw ConfigError("config: ipw-known needs known_alpha");
    }
    if (known_alpha.size() != prop_model.param_dim())
      throw ConfigError("config: known_alpha dimension mismatch");
  }
  std::optional<ContrastSpec> contrast;
  if (config.estimator == EstimatorMode::CB) {
    if (config.contrast.size() == 0)
      throw ConfigError("config: cb needs a contrast");
    contrast.emplace(config.contrast);
  }

  const auto candidates = enumerate_candidates(config, frame.dim_x());

  SelectReport report;
  report.seed = config.seed;
  report.n = frame.size();
  report.arms = frame.arms();
  report.candidates.resize(candidates.size());

  parallel_for(static_cast<int>(candidates.size()), [&](int c) {
    CandidateResult& result = report.candidates[c];
    result.id = c;
    result.columns = candidates[c];
    try {
      const TreatmentFrame sub = frame.select_regressors(candidates[c]);
      Eigen::VectorXd theta, alpha, beta;
      OutcomeConditionalFamily conditional =
          OutcomeConditionalFamily::degenerate(frame.arms(), frame.dim_z());
      switch (config.estimator) {
        case EstimatorMode::IPWKnown:
          alpha = known_alpha;
          theta = solve_ipw(sub, family, prop_model, alpha, d, policy,
                            config.solver)
                      .params;
          break;
        case EstimatorMode::IPWUnknown:
          alpha = fit_propensity(sub, prop_model, config.solver).params;
          theta = solve_ipw(sub, family, prop_model, alpha, d, policy,
                            config.solver)
                      .params;
          break;
        case EstimatorMode::DR: {
          conditional = OutcomeConditionalFamily(
              family.kind() == OutcomeKind::GaussianLinear
                  ? ConditionalKind::GaussianLinear
                  : ConditionalKind::BernoulliLogit,
              frame.arms(), frame.dim_z(), config.conditional_variance);
          alpha = fit_propensity(sub, prop_model, config.solver).params;
          beta = fit_outcome_conditional(sub, conditional, config.solver).params;
          theta = solve_dr(sub, family, prop_model, alpha, conditional, beta, d,
                           policy, config.solver)
                      .params;
          break;
        }
        case EstimatorMode::CB:
          alpha = solve_cb_alpha(sub, *contrast, config.solver);
          theta = cb_estimate(sub, alpha, *contrast);
          break;
      }
      for (const CriterionKind kind : config.criteria) {
        switch (kind) {
          case CriterionKind::QICW:
            result.reports[kind] =
                qicw(sub, family, prop_model, theta, alpha, d, policy);
            break;
          case CriterionKind::IPWIC1:
            result.reports[kind] = ipwic(sub, family, prop_model, theta, alpha,
                                         d, /*alpha_known=*/true, policy);
            break;
          case CriterionKind::IPWIC2:
            result.reports[kind] = ipwic(sub, family, prop_model, theta, alpha,
                                         d, /*alpha_known=*/false, policy);
            break;
          case CriterionKind::ObsWeightIC:
            result.reports[kind] = observed_weight_variant(
                sub, family, prop_model, theta, alpha, d, policy);
            break;
          case CriterionKind::DRIC:
            result.reports[kind] = dric(sub, family, prop_model, alpha,
                                        conditional, beta, theta, d, policy);
            break;
          case CriterionKind::CBIC:
            result.reports[kind] = cb_criterion(sub, theta, alpha, *contrast);
            break;
        }
      }
      result.converged = true;
    } catch (const Error& err) {
      result.error = err.what();
    }
  });

  for (const auto& candidate : report.candidates)
    if (!candidate.converged) report.any_failed = true;
  for (const CriterionKind kind : config.criteria) {
    int best = -1;
    double best_value = 0.0;
    for (const auto& candidate : report.candidates) {
      if (!candidate.converged) continue;
      const double value = candidate.reports.at(kind).value;
      if (best < 0 || value < best_value) {
        best = candidate.id;
        best_value = value;
      }
    }
    if (best >= 0) report.argmin[kind] = best;
  }
  return report;
}

namespace {

std::string columns_label(const std::vector<int>& cols) {
  std::string label;
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (j) label += ";";
    label += std::to_string(cols[j]);
  }
  return label;
}

}  // namespace

std::string format_select_report(const SelectReport& report) {
  std::ostringstream os;
  os << std::setprecision(6);
  os << "candidate  columns      criterion    fit_term       penalty        "
        "value          status\n";
  for (const auto& candidate : report.candidates) {
    if (!candidate.converged) {
      os << std::left << std::setw(11) << candidate.id << std::setw(13)
         << columns_label(candidate.columns) << "-            -              -"
         << "              -              FAILED: " << candidate.error << "\n";
      continue;
    }
    for (const auto& [kind, rep] : candidate.reports) {
      os << std::left << std::setw(11) << candidate.id << std::setw(13)
         << columns_label(candidate.columns) << std::setw(13)
         << criterion_name(kind) << std::setw(15) << rep.fit_term
         << std::setw(15) << rep.penalty << std::setw(15) << rep.value
         << "ok\n";
    }
  }
  os << "\n";
  for (const auto& [kind, id] : report.argmin)
    os << "best by " << criterion_name(kind) << ": candidate " << id << " (columns "
       << columns_label(report.candidates[id].columns) << ")\n";
  os << "seed: " << report.seed << "\n";
  return os.str();
}

void write_select_report(const SelectReport& report, const RunConfig& config) {
  namespace fs = std::filesystem;
  fs::create_directories(config.output_dir);

  std::ofstream csv(fs::path(config.output_dir) / "report.csv");
  if (!csv) throw DataError("report: cannot open report.csv for writing");
  csv.precision(17);
  csv << "candidate,columns,criterion,fit_term,penalty,value,converged,"
         "min_propensity,cond_A,floored_records,error\n";
  for (const auto& candidate : report.candidates) {
    if (!candidate.converged) {
      std::string msg = candidate.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      csv << candidate.id << "," << columns_label(candidate.columns)
          << ",,,,,0,,,," << msg << "\n";
      continue;
    }
    for (const auto& [kind, rep] : candidate.reports) {
      csv << candidate.id << "," << columns_label(candidate.columns) << ","
          << criterion_name(kind) << "," << rep.fit_term << "," << rep.penalty
          << "," << rep.value << ",1," << rep.diagnostics.min_propensity << ","
          << rep.diagnostics.cond_A << "," << rep.diagnostics.floored_records
          << ",\n";
    }
  }

  std::ofstream txt(fs::path(config.output_dir) / "report.txt");
  if (!txt) throw DataError("report: cannot open report.txt for writing");
  txt << format_select_report(report);
}

}  // namespace msmic
