#pragma once

#include <cmath>
#include <vector>

#include "survaudit/common.hpp"
#include "survaudit/concordance.hpp"
#include "survaudit/data.hpp"
#include "survaudit/reductions.hpp"

namespace survaudit {

struct SmoothCOptions {
  double sigma = 0.1;    // smoothing bandwidth of the sigmoid
  std::size_t steps = 2000;
  double lr = 1.0;
  double grad_tol = 1e-6;
};

// Linear risk scorer fitted by direct gradient ascent on a sigmoid-smoothed
// Harrell's C. This is a deliberately simple stand-in for C-index boosting:
// it produces the same prediction type (a native risk score and nothing
// else), which is all the evaluation grid needs.
struct SmoothCModel {
  std::vector<double> weights;
  double sigma = 0.1;
  bool converged = false;
  int iterations = 0;
  double objective = 0.0;
};

namespace detail {

struct PairList {
  std::vector<std::size_t> earlier;
  std::vector<std::size_t> later;
};

inline PairList comparable_pairs(const OutcomeView& o) {
  PairList pl;
  for_each_comparable_pair(o, [&](std::size_t e, std::size_t l) {
    pl.earlier.push_back(e);
    pl.later.push_back(l);
  });
  return pl;
}

}  // namespace detail

// Mean over comparable pairs of sigmoid((eta_e - eta_l) / sigma) with
// eta = X * w. Exposed for finite-difference checks.
inline double smoothc_objective(const Dataset& data, const std::vector<double>& weights, double sigma) {
  if (weights.size() != data.n_features()) throw validation_error("smoothc_objective: dimension mismatch");
  const auto outcomes = OutcomeView::from(data);
  const auto pairs = detail::comparable_pairs(outcomes);
  if (pairs.earlier.empty()) throw validation_error("smoothc_objective: no comparable pairs");

  std::vector<double> eta(data.size(), 0.0);
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t j = 0; j < weights.size(); ++j) eta[i] += data[i].covariates[j] * weights[j];

  double total = 0.0;
  for (std::size_t k = 0; k < pairs.earlier.size(); ++k) {
    const double z = (eta[pairs.earlier[k]] - eta[pairs.later[k]]) / sigma;
    total += 1.0 / (1.0 + std::exp(-z));
  }
  return total / static_cast<double>(pairs.earlier.size());
}

inline std::vector<double> smoothc_gradient(const Dataset& data, const std::vector<double>& weights,
                                            double sigma) {
  if (weights.size() != data.n_features()) throw validation_error("smoothc_gradient: dimension mismatch");
  const auto outcomes = OutcomeView::from(data);
  const auto pairs = detail::comparable_pairs(outcomes);
  if (pairs.earlier.empty()) throw validation_error("smoothc_gradient: no comparable pairs");

  const std::size_t p = weights.size();
  std::vector<double> eta(data.size(), 0.0);
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t j = 0; j < p; ++j) eta[i] += data[i].covariates[j] * weights[j];

  std::vector<double> grad(p, 0.0);
  for (std::size_t k = 0; k < pairs.earlier.size(); ++k) {
    const std::size_t e = pairs.earlier[k], l = pairs.later[k];
    const double z = (eta[e] - eta[l]) / sigma;
    const double s = 1.0 / (1.0 + std::exp(-z));
    const double f = s * (1.0 - s) / sigma;
    for (std::size_t j = 0; j < p; ++j) grad[j] += f * (data[e].covariates[j] - data[l].covariates[j]);
  }
  const double m = static_cast<double>(pairs.earlier.size());
  for (auto& g : grad) g /= m;
  return grad;
}

inline SmoothCModel smoothc_fit(const Dataset& train, const SmoothCOptions& opts = {}) {
  if (!(opts.sigma > 0.0)) throw validation_error("smoothc_fit: sigma must be positive");
  const auto outcomes = OutcomeView::from(train);
  const auto pairs = detail::comparable_pairs(outcomes);
  if (pairs.earlier.empty()) throw validation_error("smoothc_fit: no comparable pairs in training data");

  SmoothCModel model;
  model.sigma = opts.sigma;
  model.weights.assign(train.n_features(), 0.0);

  for (std::size_t step = 1; step <= opts.steps; ++step) {
    const auto grad = smoothc_gradient(train, model.weights, opts.sigma);
    double gnorm = 0.0;
    for (double g : grad) gnorm = std::max(gnorm, std::fabs(g));
    model.iterations = static_cast<int>(step);
    if (gnorm < opts.grad_tol) {
      model.converged = true;
      break;
    }
    for (std::size_t j = 0; j < model.weights.size(); ++j) model.weights[j] += opts.lr * grad[j];
  }
  model.objective = smoothc_objective(train, model.weights, opts.sigma);
  return model;
}

// Linear score X * w, higher is riskier. No distribution prediction exists
// for this model by construction.
inline RiskVector smoothc_predict(const SmoothCModel& model, const Dataset& test) {
  if (test.n_features() != model.weights.size())
    throw validation_error("smoothc_predict: feature dimension mismatch");
  RiskVector out;
  out.orientation = Orientation::higher_is_riskier;
  out.source.label = "native:smoothc_score";
  out.values.reserve(test.size());
  for (const auto& r : test.records()) {
    double e = 0.0;
    for (std::size_t j = 0; j < model.weights.size(); ++j) e += r.covariates[j] * model.weights[j];
    out.values.push_back(e);
  }
  return out;
}

}  // namespace survaudit
