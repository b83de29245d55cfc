#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "survaudit/concordance.hpp"
#include "survaudit/curves.hpp"
#include "survaudit/forest.hpp"
#include "survaudit/model_io.hpp"
#include "survaudit/reductions.hpp"

using namespace survaudit;

namespace {

double expmort_harrell(const ForestModel& model, const Dataset& test) {
  const CurveMatrix m = rsf_predict(model, test);
  return harrell_c(expected_mortality(m), OutcomeView::from(test)).estimate;
}

}  // namespace

TEST_CASE("depth-0 single tree without bootstrap reproduces the training nelson-aalen curve") {
  // censoring-free so the event count satisfies the min_node_size = n precondition
  const Dataset train = simulate_weibull_ph(80, {0.5}, 1.4, 2.0, 1e-9, 7);
  RsfHyperparameters hp;
  hp.n_trees = 1;
  hp.min_node_size = train.size();  // no split admissible
  hp.bootstrap = false;
  hp.seed = 1;
  const ForestModel model = rsf_fit(train, hp);
  REQUIRE(model.trees.size() == 1);
  REQUIRE(model.trees[0].nodes.size() == 1);

  const HazardCurve na = na_fit(train);
  const CurveMatrix pred = rsf_predict(model, train);
  // the shared grid holds event times only; match the NA estimate there
  for (std::size_t k = 0; k < model.grid.size(); ++k) {
    const double expected = na.value_at(model.grid[k]);
    for (std::size_t i = 0; i < 3; ++i)
      CHECK(pred.probs[i][k] == doctest::Approx(std::exp(-expected)).epsilon(1e-12));
  }
}

TEST_CASE("hand-built two-tree forest averages leaf hazards exactly") {
  ForestModel model;
  model.grid = {1.0, 2.0, 3.0};
  model.n_features = 1;
  model.hp.n_trees = 2;
  SurvivalTree t1, t2;
  t1.nodes.push_back({-1, 0.0, -1, -1, {0.1, 0.4, 0.9}});
  t2.nodes.push_back({-1, 0.0, -1, -1, {0.3, 0.6, 1.1}});
  model.trees = {t1, t2};

  std::vector<SurvivalRecord> recs{{1.0, 1, {0.0}}};
  const Dataset test(std::move(recs), {"x"});
  const CurveMatrix pred = rsf_predict(model, test);
  CHECK(pred.probs[0][0] == doctest::Approx(std::exp(-0.2)).epsilon(1e-12));
  CHECK(pred.probs[0][1] == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK(pred.probs[0][2] == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

  // duplicating every tree leaves the mean unchanged
  ForestModel doubled = model;
  doubled.trees = {t1, t2, t1, t2};
  doubled.hp.n_trees = 4;
  std::vector<SurvivalRecord> recs2{{1.0, 1, {0.0}}};
  const CurveMatrix pred2 = rsf_predict(doubled, Dataset(std::move(recs2), {"x"}));
  for (std::size_t k = 0; k < 3; ++k)
    CHECK(pred2.probs[0][k] == doctest::Approx(pred.probs[0][k]).epsilon(1e-15));
}

TEST_CASE("single-tree routing follows the split to the terminal curve") {
  ForestModel model;
  model.grid = {1.0};
  model.n_features = 1;
  model.hp.n_trees = 1;
  SurvivalTree t;
  t.nodes.push_back({0, 0.5, 1, 2, {}});     // root: x <= 0.5 -> left
  t.nodes.push_back({-1, 0.0, -1, -1, {0.2}});
  t.nodes.push_back({-1, 0.0, -1, -1, {0.8}});
  model.trees = {t};

  std::vector<SurvivalRecord> recs{{1.0, 1, {0.0}}, {1.0, 1, {1.0}}};
  const CurveMatrix pred = rsf_predict(model, Dataset(std::move(recs), {"x"}));
  CHECK(pred.probs[0][0] == doctest::Approx(std::exp(-0.2)).epsilon(1e-15));
  CHECK(pred.probs[1][0] == doctest::Approx(std::exp(-0.8)).epsilon(1e-15));
}

TEST_CASE("rsf predictions are valid step curves") {
  const Dataset train = simulate_weibull_ph(300, {0.8, -0.4}, 1.5, 2.0, 0.3, 11);
  const Dataset test = simulate_weibull_ph(50, {0.8, -0.4}, 1.5, 2.0, 0.3, 12);
  RsfHyperparameters hp;
  hp.n_trees = 40;
  hp.seed = 3;
  const ForestModel model = rsf_fit(train, hp);
  const CurveMatrix pred = rsf_predict(model, test);
  CHECK_NOTHROW(pred.validate());
  CHECK(pred.n_rows() == test.size());

  std::vector<SurvivalRecord> bad{{1.0, 1, {0.0}}};
  CHECK_THROWS_AS(static_cast<void>(rsf_predict(model, Dataset(std::move(bad), {"a"}))), validation_error);
}

TEST_CASE("rsf fits are deterministic per seed and invariant to thread count") {
  const Dataset train = simulate_weibull_ph(250, {0.7, -0.7}, 1.4, 2.0, 0.3, 23);
  const Dataset test = simulate_weibull_ph(40, {0.7, -0.7}, 1.4, 2.0, 0.3, 24);

  RsfHyperparameters hp;
  hp.n_trees = 30;
  hp.seed = 99;
  const ForestModel a = rsf_fit(train, hp);
  const ForestModel b = rsf_fit(train, hp);
  hp.n_threads = 4;
  const ForestModel c = rsf_fit(train, hp);

  const CurveMatrix pa = rsf_predict(a, test);
  const CurveMatrix pb = rsf_predict(b, test);
  const CurveMatrix pc = rsf_predict(c, test);
  for (std::size_t i = 0; i < pa.n_rows(); ++i) {
    CHECK(pa.probs[i] == pb.probs[i]);
    CHECK(pa.probs[i] == pc.probs[i]);
  }

  hp.seed = 100;
  hp.n_threads = 1;
  const ForestModel d = rsf_fit(train, hp);
  const CurveMatrix pd = rsf_predict(d, test);
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.n_rows() && !any_diff; ++i) any_diff = pa.probs[i] != pd.probs[i];
  CHECK(any_diff);
}

TEST_CASE("pure-noise forest scores near chance out of sample") {
  const Dataset train = simulate_weibull_ph(700, {0.0, 0.0}, 1.5, 2.0, 0.25, 31);
  const Dataset test = simulate_weibull_ph(300, {0.0, 0.0}, 1.5, 2.0, 0.25, 32);
  RsfHyperparameters hp;
  hp.n_trees = 100;
  hp.seed = 5;
  const ForestModel model = rsf_fit(train, hp);
  const double c = expmort_harrell(model, test);
  CHECK(std::fabs(c - 0.5) < 0.05);
}

TEST_CASE("strong two-group separation is learned") {
  // well separated Weibull groups via a large coefficient
  const Dataset train = simulate_weibull_ph(800, {2.0}, 1.5, 2.0, 0.15, 41);
  const Dataset test = simulate_weibull_ph(300, {2.0}, 1.5, 2.0, 0.15, 42);
  RsfHyperparameters hp;
  hp.n_trees = 100;
  hp.seed = 6;
  const ForestModel model = rsf_fit(train, hp);
  CHECK(expmort_harrell(model, test) >= 0.8);
}

TEST_CASE("degenerate covariates give a root-leaf tree rather than an error") {
  std::vector<SurvivalRecord> recs;
  Rng rng(1, 0);
  for (int i = 0; i < 30; ++i) recs.push_back({0.5 + rng.uniform01() * 4.0, 1, {1.0}});
  const Dataset train(std::move(recs), {"constant"});
  RsfHyperparameters hp;
  hp.n_trees = 3;
  hp.seed = 0;
  const ForestModel model = rsf_fit(train, hp);
  for (const auto& tree : model.trees) CHECK(tree.nodes.size() == 1);
}

TEST_CASE("rsf model round trips through the text format") {
  const Dataset train = simulate_weibull_ph(150, {0.9}, 1.4, 2.0, 0.3, 51);
  const Dataset test = simulate_weibull_ph(25, {0.9}, 1.4, 2.0, 0.3, 52);
  RsfHyperparameters hp;
  hp.n_trees = 12;
  hp.seed = 8;
  const FittedModel fm{rsf_fit(train, hp)};
  const auto path = (std::filesystem::temp_directory_path() / "survaudit_rsf_model.txt").string();
  save_model(fm, path);
  const FittedModel back = load_model(path);
  REQUIRE(back.kind() == "rsf");
  CHECK_FALSE(back.predicts_risk());

  const auto m1 = fm.distribution(test);
  const auto m2 = back.distribution(test);
  for (std::size_t i = 0; i < m1.n_rows(); ++i)
    for (std::size_t k = 0; k < m1.n_times(); ++k)
      CHECK(m1.probs[i][k] == doctest::Approx(m2.probs[i][k]).epsilon(1e-12));
}
