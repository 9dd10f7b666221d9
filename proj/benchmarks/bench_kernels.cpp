#include <benchmark/benchmark.h>

#include "msmic/criteria.hpp"
#include "msmic/estimators.hpp"
#include "msmic/simulate.hpp"

namespace {

using namespace msmic;

DGPSpec benchmark_dgp() {
  DGPSpec dgp;
  dgp.arms = 2;
  dgp.dim_z = 1;
  dgp.alpha0 = Eigen::MatrixXd(1, 2);
  dgp.alpha0 << 0.3, 0.8;
  ArmLaw law1, law2;
  law1.intercept = 1.0;
  law1.z_coef = Eigen::VectorXd::Constant(1, 0.8);
  law2.intercept = 2.0;
  law2.z_coef = Eigen::VectorXd::Constant(1, 0.8);
  dgp.outcome = {law1, law2};
  dgp.arm_design = Eigen::MatrixXd::Identity(2, 2);
  return dgp;
}

void BM_PropensityEval(benchmark::State& state) {
  const PropensityModel model(3, 2);
  Eigen::VectorXd z(2);
  z << 0.4, -1.1;
  Eigen::VectorXd alpha(6);
  alpha << 0.2, 0.5, -0.3, 0.1, 0.4, -0.2;
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.probs(z, alpha));
  }
}
BENCHMARK(BM_PropensityEval);

void BM_TargetWeights(benchmark::State& state) {
  const PropensityModel model(3, 2);
  const TargetPopulation d(Eigen::Vector3d(1.0, 0.5, 0.2));
  Eigen::VectorXd z(2);
  z << 0.4, -1.1;
  Eigen::VectorXd alpha(6);
  alpha << 0.2, 0.5, -0.3, 0.1, 0.4, -0.2;
  const Eigen::VectorXd e = model.probs(z, alpha);
  for (auto _ : state) {
    benchmark::DoNotOptimize(target_weights(e, d));
    benchmark::DoNotOptimize(dweights_dalpha(model, z, e, d));
  }
}
BENCHMARK(BM_TargetWeights);

void BM_Generate(benchmark::State& state) {
  const DGPSpec dgp = benchmark_dgp();
  dgp.validate();
  const int n = static_cast<int>(state.range(0));
  std::uint64_t seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate(dgp, n, seed++));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_Generate)->Arg(1000)->Arg(10000);

void BM_FitPropensity(benchmark::State& state) {
  const DGPSpec dgp = benchmark_dgp();
  const int n = static_cast<int>(state.range(0));
  const TreatmentFrame frame = generate(dgp, n, 7);
  const PropensityModel model(2, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_propensity(frame, model));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_FitPropensity)->Arg(1000)->Arg(10000);

void BM_SolveIpw(benchmark::State& state) {
  const DGPSpec dgp = benchmark_dgp();
  const int n = static_cast<int>(state.range(0));
  const TreatmentFrame frame = generate(dgp, n, 7);
  const OutcomeMarginalFamily family(OutcomeKind::GaussianLinear);
  const PropensityModel model(2, 1);
  const TargetPopulation d = TargetPopulation::uniform(2);
  const Eigen::VectorXd alpha = fit_propensity(frame, model).params;
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_ipw(frame, family, model, alpha, d));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_SolveIpw)->Arg(1000)->Arg(10000);

void BM_PenaltyMatricesIpw(benchmark::State& state) {
  const DGPSpec dgp = benchmark_dgp();
  const int n = static_cast<int>(state.range(0));
  const TreatmentFrame frame = generate(dgp, n, 7);
  const OutcomeMarginalFamily family(OutcomeKind::GaussianLinear);
  const PropensityModel model(2, 1);
  const TargetPopulation d = TargetPopulation::uniform(2);
  const Eigen::VectorXd alpha = fit_propensity(frame, model).params;
  const Eigen::VectorXd theta = solve_ipw(frame, family, model, alpha, d).params;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        penalty_matrices_ipw(frame, family, model, theta, alpha, d, false));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_PenaltyMatricesIpw)->Arg(1000)->Arg(10000);

void BM_PenaltyMatricesDr(benchmark::State& state) {
  const DGPSpec dgp = benchmark_dgp();
  const int n = static_cast<int>(state.range(0));
  const TreatmentFrame frame = generate(dgp, n, 7);
  const OutcomeMarginalFamily family(OutcomeKind::GaussianLinear);
  const OutcomeConditionalFamily cond(ConditionalKind::GaussianLinear, 2, 1);
  const PropensityModel model(2, 1);
  const TargetPopulation d = TargetPopulation::uniform(2);
  const Eigen::VectorXd alpha = fit_propensity(frame, model).params;
  const Eigen::VectorXd beta = fit_outcome_conditional(frame, cond).params;
  const Eigen::VectorXd theta =
      solve_dr(frame, family, model, alpha, cond, beta, d).params;
  for (auto _ : state) {
    benchmark::DoNotOptimize(penalty_matrices_dr(frame, family, model, alpha,
                                                 cond, beta, theta, d));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_PenaltyMatricesDr)->Arg(1000)->Arg(5000);

}  // namespace

BENCHMARK_MAIN();
