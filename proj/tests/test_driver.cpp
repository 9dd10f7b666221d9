#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "msmic/criteria.hpp"
#include "msmic/driver.hpp"
#include "msmic/ingest.hpp"
#include "msmic/simulate.hpp"
#include "testdgp.hpp"

using namespace msmic;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("msmic_test_" + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("ingest: arm column becomes one-hot assignment") {
  TempDir dir;
  const fs::path file = dir.path / "three.csv";
  write_file(file,
             "y,arm,z1,x1\n"
             "1.5,1,0.2,1\n"
             "2.5,2,-0.1,1\n"
             "0.5,1,0.4,1\n");
  ColumnSchema schema;
  schema.outcome = "y";
  schema.arm_column = "arm";
  schema.confounders = {"z1"};
  schema.shared_regressors = {"x1"};
  schema.arms = 2;
  const TreatmentFrame frame = ingest_csv(file.string(), schema);
  REQUIRE(frame.size() == 3);
  CHECK(frame.t(0, 0) == 1.0);
  CHECK(frame.t(0, 1) == 0.0);
  CHECK(frame.t(1, 0) == 0.0);
  CHECK(frame.t(1, 1) == 1.0);
  CHECK(frame.t(2, 0) == 1.0);
}

TEST_CASE("ingest: one-hot violations cite the data row") {
  TempDir dir;
  const fs::path file = dir.path / "bad.csv";
  std::string text = "y,t1,t2,z1,x1\n";
  for (int i = 1; i <= 6; ++i) text += "1.0,1,0,0.1,1\n";
  text += "1.0,1,1,0.1,1\n";  // row 7: both arms set
  write_file(file, text);
  ColumnSchema schema;
  schema.outcome = "y";
  schema.one_hot = {"t1", "t2"};
  schema.confounders = {"z1"};
  schema.shared_regressors = {"x1"};
  CHECK_THROWS_WITH_AS(ingest_csv(file.string(), schema),
                       doctest::Contains("row 7"), DataError);
}

TEST_CASE("ingest: unassigned and out-of-range rows cite their position") {
  TempDir dir;
  const fs::path none_set = dir.path / "none.csv";
  write_file(none_set,
             "y,t1,t2,x1\n"
             "1.0,1,0,1\n"
             "1.0,0,0,1\n");
  ColumnSchema schema;
  schema.outcome = "y";
  schema.one_hot = {"t1", "t2"};
  schema.shared_regressors = {"x1"};
  CHECK_THROWS_WITH_AS(ingest_csv(none_set.string(), schema),
                       doctest::Contains("row 2"), DataError);

  const fs::path bad_arm = dir.path / "badarm.csv";
  write_file(bad_arm,
             "y,arm,x1\n"
             "1.0,1,1\n"
             "1.0,3,1\n");
  ColumnSchema schema2;
  schema2.outcome = "y";
  schema2.arm_column = "arm";
  schema2.shared_regressors = {"x1"};
  schema2.arms = 2;
  CHECK_THROWS_WITH_AS(ingest_csv(bad_arm.string(), schema2),
                       doctest::Contains("row 2"), DataError);
}

TEST_CASE("ingest: named errors for schema problems") {
  TempDir dir;
  const fs::path file = dir.path / "missing.csv";
  write_file(file, "y,arm,x1\n1.0,1,1\n2.0,2,1\n");
  ColumnSchema schema;
  schema.outcome = "y";
  schema.arm_column = "arm";
  schema.confounders = {"z9"};
  schema.shared_regressors = {"x1"};
  schema.arms = 2;
  CHECK_THROWS_WITH_AS(ingest_csv(file.string(), schema),
                       doctest::Contains("z9"), DataError);

  // an arm with zero records is rejected
  const fs::path file2 = dir.path / "gap.csv";
  write_file(file2, "y,arm,x1\n1.0,1,1\n2.0,1,1\n");
  ColumnSchema schema2;
  schema2.outcome = "y";
  schema2.arm_column = "arm";
  schema2.shared_regressors = {"x1"};
  schema2.arms = 2;
  CHECK_THROWS_WITH_AS(ingest_csv(file2.string(), schema2),
                       doctest::Contains("arm 2"), DataError);
}

TEST_CASE("frame csv round trip is exact") {
  TempDir dir;
  const DGPSpec dgp = testutil::two_arm_confounded();
  const TreatmentFrame frame = generate(dgp, 200, 999);
  const fs::path file = dir.path / "frame.csv";
  write_frame_csv(file.string(), frame);
  const TreatmentFrame back = read_frame_csv(file.string());
  REQUIRE(back.size() == frame.size());
  CHECK(back.outcomes() == frame.outcomes());
  CHECK(back.assignments() == frame.assignments());
  CHECK(back.z_matrix() == frame.z_matrix());
  CHECK(back.x_matrix(0) == frame.x_matrix(0));
  CHECK(back.x_matrix(1) == frame.x_matrix(1));
}

TEST_CASE("run_select: orchestration is bit-identical to direct calls") {
  TempDir dir;
  RunConfig config;
  config.dgp = testutil::two_arm_confounded();
  config.n = 1500;
  config.seed = 31;
  config.estimator = EstimatorMode::IPWUnknown;
  config.criteria = {CriterionKind::QICW};
  config.candidates = {{0, 1}};
  config.output_dir = (dir.path / "out").string();

  const SelectReport report = run_select(config);
  REQUIRE(report.candidates.size() == 1);
  REQUIRE(report.candidates[0].converged);
  const double via_driver =
      report.candidates[0].reports.at(CriterionKind::QICW).value;

  const TreatmentFrame frame = generate(*config.dgp, config.n, config.seed);
  const OutcomeMarginalFamily family(OutcomeKind::GaussianLinear);
  const PropensityModel model(2, 1);
  const TargetPopulation d = TargetPopulation::uniform(2);
  const Eigen::VectorXd alpha = fit_propensity(frame, model).params;
  const Eigen::VectorXd theta = solve_ipw(frame, family, model, alpha, d).params;
  const CriterionReport direct = qicw(frame, family, model, theta, alpha, d);
  CHECK(via_driver == direct.value);  // bitwise

  write_select_report(report, config);
  CHECK(fs::exists(dir.path / "out" / "report.csv"));
  CHECK(fs::exists(dir.path / "out" / "report.txt"));
}

TEST_CASE("run_select: nested candidates are ranked with an argmin") {
  TempDir dir;
  RunConfig config;
  config.dgp = testutil::two_arm_confounded(1.0, 2.0);
  config.dgp->arm_design.resize(2, 2);
  config.dgp->arm_design << 1.0, 0.0, 1.0, 1.0;
  config.n = 3000;
  config.seed = 37;
  config.criteria = {CriterionKind::QICW, CriterionKind::IPWIC2};
  config.candidates = {{0}, {0, 1}};
  config.output_dir = (dir.path / "out").string();

  const SelectReport report = run_select(config);
  REQUIRE(report.candidates.size() == 2);
  CHECK(report.argmin.count(CriterionKind::IPWIC2) == 1);
  // the distinct-intercept truth needs both columns
  CHECK(report.argmin.at(CriterionKind::IPWIC2) == 1);
  CHECK(!report.any_failed);
  const std::string table = format_select_report(report);
  CHECK(table.find("best by IPWIC2") != std::string::npos);
}

TEST_CASE("run_select: bad target length fails before any fitting") {
  RunConfig config;
  config.dgp = testutil::two_arm_confounded();
  config.target_d = Eigen::VectorXd::Ones(3);
  CHECK_THROWS_AS(run_select(config), ConfigError);
}

TEST_CASE("run_select: criterion/estimator compatibility is validated") {
  RunConfig config;
  config.dgp = testutil::two_arm_confounded();
  config.estimator = EstimatorMode::IPWUnknown;
  config.criteria = {CriterionKind::DRIC};
  CHECK_THROWS_AS(run_select(config), ConfigError);
}

TEST_CASE("candidate enumeration caps and subsets") {
  RunConfig config;
  config.dgp = testutil::two_arm_confounded();
  config.n = 400;
  config.seed = 3;
  config.all_subsets_max_size = 2;
  const SelectReport report = run_select(config);
  CHECK(report.candidates.size() == 3);  // {0},{1},{0,1}
}

TEST_CASE("config template parses and loads") {
  TempDir dir;
  const fs::path file = dir.path / "msmic.json";
  write_file(file, config_template());
  const RunConfig config = load_config(file.string());
  CHECK(config.estimator == EstimatorMode::IPWUnknown);
  CHECK(config.criteria.size() == 2);
  CHECK(config.n == 1000);
  CHECK(config.seed == 1);
  CHECK(config.candidates.size() == 2);
}

TEST_CASE("config: json dgp block round-trips through run_select") {
  TempDir dir;
  const fs::path file = dir.path / "cfg.json";
  write_file(file, R"({
    "input": {
      "dgp": {
        "arms": 2, "dim_z": 1,
        "alpha0": [[0.3, 0.8]],
        "outcome": [
          {"kind": "gaussian", "intercept": 1.0, "z_coef": [0.8], "sd": 1.0},
          {"kind": "gaussian", "intercept": 2.0, "z_coef": [0.8], "sd": 1.0}
        ],
        "arm_design": [[1, 0], [0, 1]]
      },
      "n": 800
    },
    "target_d": [1, 1],
    "estimator": "ipw-unknown",
    "criteria": ["QICW", "IPWIC2"],
    "candidates": {"explicit": [[0, 1]]},
    "seed": 11,
    "output_dir": ")" + (dir.path / "out").string() + R"("
  })");
  const RunConfig config = load_config(file.string());
  const SelectReport report = run_select(config);
  CHECK(report.candidates.size() == 1);
  CHECK(report.candidates[0].converged);
  CHECK(report.seed == 11);
}
