#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "survaudit/cox.hpp"
#include "survaudit/model_io.hpp"

using namespace survaudit;

namespace {

// two groups with true log hazard ratio `loghr`: exponential event times,
// light uniform-ish censoring via a fixed horizon
Dataset two_group_exponential(std::size_t n, double loghr, std::uint64_t seed) {
  std::vector<SurvivalRecord> recs;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(seed, i);
    const double x = i % 2 == 0 ? 0.0 : 1.0;
    const double rate = std::exp(loghr * x);
    const double event_time = -std::log(rng.uniform01()) / rate;
    const double censor_time = 3.0 * rng.uniform01() + 1.0;
    recs.push_back({std::min(event_time, censor_time) + 1e-9, event_time <= censor_time ? 1 : 0, {x}});
  }
  return Dataset(std::move(recs), {"group"});
}

std::vector<std::vector<double>> covariate_rows(const Dataset& d) {
  std::vector<std::vector<double>> x;
  for (const auto& r : d.records()) x.push_back(r.covariates);
  return x;
}

}  // namespace

TEST_CASE("cox likelihood matches the naive enumeration") {
  const Dataset d = simulate_weibull_ph(80, {0.5, -0.4}, 1.4, 2.0, 0.3, 3);
  const auto x = covariate_rows(d);
  for (const std::vector<double>& beta : {std::vector<double>{0.0, 0.0}, {0.3, -0.2}, {-1.0, 0.7}}) {
    const double lib = cox_log_partial_likelihood(d, beta);
    const double naive = oracles::cox_loglik(d.times(), d.statuses(), x, beta);
    CHECK(lib == doctest::Approx(naive).epsilon(1e-10));
    // the sweep variant used for dense grid searches agrees with the naive scan
    CHECK(oracles::cox_loglik_fast(d.times(), d.statuses(), x, beta) ==
          doctest::Approx(naive).epsilon(1e-10));
  }
}

TEST_CASE("cox analytic gradient agrees with central finite differences") {
  const Dataset d = simulate_weibull_ph(120, {0.6, -0.3}, 1.3, 2.0, 0.25, 9);
  const double h = 1e-5;
  for (const std::vector<double>& beta : {std::vector<double>{0.0, 0.0}, {0.4, 0.1}, {-0.5, 0.8}}) {
    const auto grad = cox_partial_gradient(d, beta);
    for (std::size_t j = 0; j < beta.size(); ++j) {
      auto shifted = beta;
      shifted[j] = beta[j] + h;
      const double up = cox_log_partial_likelihood(d, shifted);
      shifted[j] = beta[j] - h;
      const double down = cox_log_partial_likelihood(d, shifted);
      const double fd = (up - down) / (2.0 * h);
      CHECK(std::fabs(fd - grad[j]) / std::max({1.0, std::fabs(fd), std::fabs(grad[j])}) < 1e-4);
    }
  }
}

TEST_CASE("cox_fit recovers the two-group estimate found by grid search") {
  const Dataset d = two_group_exponential(2000, 0.7, 17);
  const CoxModel model = cox_fit(d);
  CHECK(model.gradient_norm < 1e-8);

  const double grid_best = oracles::cox_grid_search_1d(d.times(), d.statuses(), covariate_rows(d), -0.5,
                                                       1.5, 1e-3, 1e-5);
  CHECK(std::fabs(model.beta[0] - grid_best) < 1e-3);
  CHECK(std::fabs(model.beta[0] - 0.7) < 0.2);  // statistical sanity at n = 2000
}

TEST_CASE("cox_fit recovers a unit coefficient at n = 5000") {
  const Dataset d = simulate_weibull_ph(5000, {1.0}, 1.5, 2.0, 0.2, 55);
  const CoxModel model = cox_fit(d);
  CHECK(std::fabs(model.beta[0] - 1.0) < 0.1);
}

TEST_CASE("single positive coefficient orders risks like the covariate") {
  CoxModel model;
  model.beta = {1.0};
  model.train_feature_means = {0.0};
  model.baseline = {{1.0}, {0.1}};
  std::vector<SurvivalRecord> recs;
  for (double x : {0.3, -1.2, 2.0, 0.7}) recs.push_back({1.0, 1, {x}});
  const Dataset test(std::move(recs), {"x"});
  const RiskVector r = cox_predict_risk(model, test);
  for (std::size_t i = 0; i < r.values.size(); ++i)
    for (std::size_t j = 0; j < r.values.size(); ++j)
      CHECK((r.values[i] < r.values[j]) == (test[i].covariates[0] < test[j].covariates[0]));
}

TEST_CASE("cox_fit on simulated PH data recovers coefficients across seeds") {
  double err0 = 0.0, err1 = 0.0;
  const int n_seeds = 10;
  for (int s = 0; s < n_seeds; ++s) {
    const Dataset d = simulate_weibull_ph(2000, {0.5, -0.5}, 1.5, 2.0, 0.2, 100 + s);
    const CoxModel model = cox_fit(d);
    err0 += model.beta[0] - 0.5;
    err1 += model.beta[1] + 0.5;
  }
  CHECK(std::fabs(err0 / n_seeds) < 0.1);
  CHECK(std::fabs(err1 / n_seeds) < 0.1);
}

TEST_CASE("cox_fit holds zero-variance covariates at zero with a warning") {
  std::vector<SurvivalRecord> recs;
  Rng rng(5, 0);
  for (int i = 0; i < 40; ++i)
    recs.push_back({rng.uniform01() * 5.0 + 0.1, i % 3 == 0 ? 0 : 1, {1.0, rng.normal()}});
  const Dataset d(std::move(recs), {"constant", "signal"});
  const CoxModel model = cox_fit(d);
  CHECK(model.beta[0] == 0.0);
  REQUIRE(model.warnings.size() == 1);
  CHECK(model.warnings[0].find("constant") != std::string::npos);

  // all covariates constant: flat likelihood, zero vector, warning per column
  std::vector<SurvivalRecord> flat;
  for (int i = 0; i < 10; ++i) flat.push_back({1.0 + i, 1, {2.0}});
  const CoxModel m2 = cox_fit(Dataset(std::move(flat), {"c"}));
  CHECK(m2.beta == std::vector<double>{0.0});
  CHECK(m2.warnings.size() == 1);
}

TEST_CASE("cox_fit reports separation on perfectly separated data") {
  std::vector<SurvivalRecord> recs;
  for (int i = 0; i < 30; ++i) {
    const bool early = i < 15;
    // half-unit covariate: the diverging coefficient crosses the bound while
    // the information matrix is still well conditioned
    recs.push_back({early ? 1.0 + i * 0.01 : 10.0 + i * 0.01, 1, {early ? 0.5 : 0.0}});
  }
  const Dataset d(std::move(recs), {"x"});
  // the likelihood plateaus as beta grows roughly one unit per Newton step;
  // an unreachable tolerance keeps the iterates climbing until the divergence
  // bound trips
  CoxFitOptions opts;
  opts.tol = 0.0;
  opts.max_iter = 500;
  CHECK_THROWS_AS(static_cast<void>(cox_fit(d, opts)), separation_error);
}

TEST_CASE("cox partial likelihood is non-decreasing across newton iterations") {
  const Dataset d = simulate_weibull_ph(300, {0.7, 0.2, -0.9}, 1.2, 1.5, 0.3, 77);
  const CoxModel model = cox_fit(d);
  REQUIRE(model.loglik_trace.size() >= 2);
  for (std::size_t k = 0; k + 1 < model.loglik_trace.size(); ++k) {
    const double slack = 1e-10 * (1.0 + std::fabs(model.loglik_trace[k]));
    CHECK(model.loglik_trace[k + 1] >= model.loglik_trace[k] - slack);
  }
  // the optimum dominates nearby points
  const double ll_opt = model.log_likelihood;
  for (double eps : {0.05, -0.05}) {
    auto b = model.beta;
    b[0] += eps;
    CHECK(cox_log_partial_likelihood(d, b) <= ll_opt + 1e-9);
  }
}

TEST_CASE("cox_predict_risk is the centered dot product") {
  CoxModel model;
  model.beta = {2.0, -1.0};
  model.train_feature_means = {1.0, 1.0};
  model.baseline = {{1.0}, {0.1}};
  std::vector<SurvivalRecord> recs{{1.0, 1, {1.0, 1.0}}, {2.0, 1, {2.0, 3.0}}, {3.0, 1, {0.0, 0.0}}};
  const Dataset test(std::move(recs), {"a", "b"});
  const RiskVector r = cox_predict_risk(model, test);
  CHECK(r.orientation == Orientation::higher_is_riskier);
  CHECK(r.values[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.values[1] == doctest::Approx(2.0 * 1.0 - 1.0 * 2.0).epsilon(1e-12));
  CHECK(r.values[2] == doctest::Approx(-2.0 + 1.0).epsilon(1e-12));

  std::vector<SurvivalRecord> bad{{1.0, 1, {1.0}}};
  CHECK_THROWS_AS(static_cast<void>(cox_predict_risk(model, Dataset(std::move(bad), {"a"}))),
                  validation_error);
}

TEST_CASE("cox_predict_risk with zero coefficients ties everyone") {
  const Dataset d = simulate_weibull_ph(20, {0.0}, 1.0, 1.0, 0.5, 2);
  CoxModel model;
  model.beta = {0.0};
  model.train_feature_means = {0.0};
  model.baseline = {{1.0}, {0.1}};
  const RiskVector r = cox_predict_risk(model, d);
  for (double v : r.values) CHECK(v == 0.0);
}

TEST_CASE("cox_predict_distribution: baseline identity, non-crossing, log-ratio identity") {
  const Dataset train = simulate_weibull_ph(200, {0.6}, 1.5, 2.0, 0.3, 41);
  const CoxModel model = cox_fit(train);

  // eta = 0 row equals baseline survival: feed the training means
  std::vector<SurvivalRecord> at_mean{SurvivalRecord{1.0, 1, model.train_feature_means}};
  const Dataset mean_ds(std::move(at_mean), train.feature_names());
  const CurveMatrix base_row = cox_predict_distribution(model, mean_ds);
  for (std::size_t k = 0; k < base_row.times.size(); ++k)
    CHECK(base_row.probs[0][k] == doctest::Approx(std::exp(-model.baseline.cumhaz[k])).epsilon(1e-12));

  const Dataset test = simulate_weibull_ph(40, {0.6}, 1.5, 2.0, 0.3, 42);
  const CurveMatrix m = cox_predict_distribution(model, test);
  m.validate();
  const RiskVector eta = cox_predict_risk(model, test);

  for (std::size_t i = 0; i < m.n_rows(); ++i) {
    for (std::size_t j = 0; j < m.n_rows(); ++j) {
      if (eta.values[i] <= eta.values[j]) continue;
      for (std::size_t k = 0; k < m.n_times(); ++k) {
        const double si = m.probs[i][k], sj = m.probs[j][k];
        if (sj > 0.0 && sj < 1.0) CHECK(si < sj);  // curves never cross
      }
    }
  }

  // -log S_i / -log S_j = exp(eta_i - eta_j) at interior grid points
  for (std::size_t k = 0; k < m.n_times(); ++k) {
    const double s0 = m.probs[0][k], s1 = m.probs[1][k];
    if (s0 <= 0.0 || s0 >= 1.0 || s1 <= 0.0 || s1 >= 1.0) continue;
    const double ratio = std::log(s0) / std::log(s1);
    CHECK(ratio == doctest::Approx(std::exp(eta.values[0] - eta.values[1])).epsilon(1e-9));
  }
}

TEST_CASE("harrell on cox risk is invariant under strictly monotone transforms of eta") {
  const Dataset train = simulate_weibull_ph(150, {0.5, 0.3}, 1.4, 2.0, 0.3, 51);
  const Dataset test = simulate_weibull_ph(70, {0.5, 0.3}, 1.4, 2.0, 0.3, 52);
  const CoxModel model = cox_fit(train);
  const RiskVector eta = cox_predict_risk(model, test);
  const OutcomeView out = OutcomeView::from(test);
  const double base = harrell_c(eta, out).estimate;

  RiskVector expd = eta;
  for (auto& v : expd.values) v = std::exp(v);
  CHECK(harrell_c(expd, out).estimate == base);
  RiskVector scaled = eta;
  for (auto& v : scaled.values) v *= 10.0;
  CHECK(harrell_c(scaled, out).estimate == base);
}

TEST_CASE("model files reject wrong magic, version and kind") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto magic = (dir / "survaudit_bad_magic.txt").string();
  {
    std::ofstream out(magic);
    out << "something-else 1\nkind cox\n";
  }
  CHECK_THROWS_AS(static_cast<void>(load_model(magic)), validation_error);

  const auto version = (dir / "survaudit_bad_version.txt").string();
  {
    std::ofstream out(version);
    out << "survaudit-model 99\nkind cox\n";
  }
  CHECK_THROWS_AS(static_cast<void>(load_model(version)), validation_error);

  const auto kind = (dir / "survaudit_bad_kind.txt").string();
  {
    std::ofstream out(kind);
    out << "survaudit-model 1\nkind boosted\n";
  }
  CHECK_THROWS_AS(static_cast<void>(load_model(kind)), validation_error);

  CHECK_THROWS_AS(static_cast<void>(load_model((dir / "survaudit_missing.txt").string())),
                  validation_error);
}

TEST_CASE("cox model round trips through the text format") {
  const Dataset train = simulate_weibull_ph(120, {0.4, -0.6}, 1.3, 2.0, 0.25, 61);
  const Dataset test = simulate_weibull_ph(30, {0.4, -0.6}, 1.3, 2.0, 0.25, 62);
  const FittedModel fm{cox_fit(train)};
  const auto path = (std::filesystem::temp_directory_path() / "survaudit_cox_model.txt").string();
  save_model(fm, path);
  const FittedModel back = load_model(path);
  REQUIRE(back.kind() == "cox");

  const auto r1 = fm.native_risk(test);
  const auto r2 = back.native_risk(test);
  for (std::size_t i = 0; i < r1.values.size(); ++i)
    CHECK(r1.values[i] == doctest::Approx(r2.values[i]).epsilon(1e-12));
  const auto m1 = fm.distribution(test);
  const auto m2 = back.distribution(test);
  for (std::size_t i = 0; i < m1.n_rows(); ++i)
    for (std::size_t k = 0; k < m1.n_times(); ++k)
      CHECK(m1.probs[i][k] == doctest::Approx(m2.probs[i][k]).epsilon(1e-12));
}
