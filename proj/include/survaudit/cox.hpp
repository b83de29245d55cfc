#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "survaudit/common.hpp"
#include "survaudit/curves.hpp"
#include "survaudit/data.hpp"
#include "survaudit/reductions.hpp"

namespace survaudit {

struct CoxFitOptions {
  double tol = 1e-9;     // sup-norm of the score at convergence
  int max_iter = 60;
  double separation_bound = 50.0;  // |beta| beyond this is treated as monotone likelihood
};

struct CoxModel {
  std::vector<double> beta;
  HazardCurve baseline;  // Breslow cumulative baseline hazard on the unique observed training times
  std::vector<double> train_feature_means;
  std::vector<std::string> warnings;
  double log_likelihood = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  std::vector<double> loglik_trace;  // partial likelihood at each accepted iterate
};

namespace detail {

// Covariates centered at the training means; rows ordered as the dataset.
struct CenteredDesign {
  std::vector<std::vector<double>> x;
  std::vector<double> times;
  std::vector<int> status;
  std::vector<double> means;
  std::vector<std::size_t> order;  // indices sorted by ascending time
};

inline CenteredDesign make_design(const Dataset& data, bool center) {
  CenteredDesign d;
  const std::size_t n = data.size(), p = data.n_features();
  d.means = center ? data.feature_means() : std::vector<double>(p, 0.0);
  d.x.resize(n, std::vector<double>(p));
  d.times = data.times();
  d.status = data.statuses();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) d.x[i][j] = data[i].covariates[j] - d.means[j];
  d.order.resize(n);
  std::iota(d.order.begin(), d.order.end(), 0);
  std::sort(d.order.begin(), d.order.end(), [&](std::size_t a, std::size_t b) { return d.times[a] < d.times[b]; });
  return d;
}

struct CoxEval {
  double loglik = 0.0;
  std::vector<double> gradient;
  std::vector<double> hessian;  // p x p, row-major
};

// Breslow-tie partial likelihood with score and observed information, one
// backwards sweep over the risk sets. `want` selects how much to compute:
// 0 = value, 1 = +gradient, 2 = +hessian.
inline CoxEval cox_eval(const CenteredDesign& d, const std::vector<double>& beta, int want) {
  const std::size_t n = d.times.size(), p = beta.size();
  CoxEval ev;
  ev.gradient.assign(p, 0.0);
  ev.hessian.assign(p * p, 0.0);

  std::vector<double> eta(n);
  for (std::size_t i = 0; i < n; ++i) {
    double e = 0.0;
    for (std::size_t j = 0; j < p; ++j) e += d.x[i][j] * beta[j];
    eta[i] = e;
  }

  double s0 = 0.0;
  std::vector<double> s1(p, 0.0), s2(p * p, 0.0);
  std::ptrdiff_t k = static_cast<std::ptrdiff_t>(n) - 1;
  while (k >= 0) {
    const double t = d.times[d.order[static_cast<std::size_t>(k)]];
    std::ptrdiff_t m = k;
    while (m >= 0 && d.times[d.order[static_cast<std::size_t>(m)]] == t) {
      const std::size_t i = d.order[static_cast<std::size_t>(m)];
      const double w = std::exp(eta[i]);
      s0 += w;
      if (want >= 1)
        for (std::size_t a = 0; a < p; ++a) s1[a] += w * d.x[i][a];
      if (want >= 2)
        for (std::size_t a = 0; a < p; ++a)
          for (std::size_t b = a; b < p; ++b) s2[a * p + b] += w * d.x[i][a] * d.x[i][b];
      --m;
    }

    std::size_t deaths = 0;
    for (std::ptrdiff_t q = m + 1; q <= k; ++q) {
      const std::size_t i = d.order[static_cast<std::size_t>(q)];
      if (d.status[i] == 1) {
        ++deaths;
        ev.loglik += eta[i];
        if (want >= 1)
          for (std::size_t a = 0; a < p; ++a) ev.gradient[a] += d.x[i][a];
      }
    }
    if (deaths > 0) {
      const double dd = static_cast<double>(deaths);
      ev.loglik -= dd * std::log(s0);
      if (want >= 1)
        for (std::size_t a = 0; a < p; ++a) ev.gradient[a] -= dd * s1[a] / s0;
      if (want >= 2) {
        for (std::size_t a = 0; a < p; ++a)
          for (std::size_t b = a; b < p; ++b) {
            const double v = dd * (s2[a * p + b] / s0 - (s1[a] / s0) * (s1[b] / s0));
            ev.hessian[a * p + b] -= v;
            if (a != b) ev.hessian[b * p + a] -= v;
          }
      }
    }
    k = m;
  }
  return ev;
}

// Solves A x = b for symmetric A via Gaussian elimination with partial
// pivoting; p is small here so this is plenty.
inline std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b) {
  const std::size_t p = b.size();
  for (std::size_t col = 0; col < p; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < p; ++r)
      if (std::fabs(a[r * p + col]) > std::fabs(a[piv * p + col])) piv = r;
    if (std::fabs(a[piv * p + col]) < 1e-300)
      throw numeric_error("cox_fit: singular information matrix");
    if (piv != col) {
      for (std::size_t c = 0; c < p; ++c) std::swap(a[col * p + c], a[piv * p + c]);
      std::swap(b[col], b[piv]);
    }
    for (std::size_t r = col + 1; r < p; ++r) {
      const double f = a[r * p + col] / a[col * p + col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < p; ++c) a[r * p + c] -= f * a[col * p + c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(p, 0.0);
  for (std::size_t r = p; r-- > 0;) {
    double s = b[r];
    for (std::size_t c = r + 1; c < p; ++c) s -= a[r * p + c] * x[c];
    x[r] = s / a[r * p + r];
  }
  return x;
}

inline double sup_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

}  // namespace detail

// Breslow-tie log partial likelihood at an arbitrary coefficient vector.
// Exposed for grid-search and finite-difference oracles.
inline double cox_log_partial_likelihood(const Dataset& data, const std::vector<double>& beta) {
  if (beta.size() != data.n_features()) throw validation_error("cox likelihood: dimension mismatch");
  const auto design = detail::make_design(data, false);
  return detail::cox_eval(design, beta, 0).loglik;
}

inline std::vector<double> cox_partial_gradient(const Dataset& data, const std::vector<double>& beta) {
  if (beta.size() != data.n_features()) throw validation_error("cox gradient: dimension mismatch");
  const auto design = detail::make_design(data, false);
  return detail::cox_eval(design, beta, 1).gradient;
}

// Newton-Raphson maximum of the Breslow partial likelihood with step-halving,
// started at beta = 0. Zero-variance covariates are held at 0 with a warning;
// runaway coefficients are reported as separation.
inline CoxModel cox_fit(const Dataset& data, const CoxFitOptions& opts = {}) {
  if (data.n_events() < 2) throw validation_error("cox_fit: at least two events required");
  const std::size_t n = data.size(), p = data.n_features();

  CoxModel model;
  model.train_feature_means = data.feature_means();
  model.beta.assign(p, 0.0);

  // active columns: positive variance on the training data
  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < p; ++j) {
    const double first = data[0].covariates[j];
    bool varies = false;
    for (std::size_t i = 1; i < n && !varies; ++i) varies = data[i].covariates[j] != first;
    if (varies) active.push_back(j);
    else
      model.warnings.push_back("covariate '" + data.feature_names()[j] +
                               "' has zero variance; coefficient fixed at 0");
  }

  auto full_design = detail::make_design(data, true);
  detail::CenteredDesign design;
  design.times = full_design.times;
  design.status = full_design.status;
  design.order = full_design.order;
  design.x.resize(n, std::vector<double>(active.size()));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < active.size(); ++j) design.x[i][j] = full_design.x[i][active[j]];

  std::vector<double> beta(active.size(), 0.0);
  double loglik = detail::cox_eval(design, beta, 0).loglik;
  double gnorm = 0.0;
  int iter = 0;
  model.loglik_trace.push_back(loglik);

  if (!active.empty()) {
    for (iter = 1; iter <= opts.max_iter; ++iter) {
      auto ev = detail::cox_eval(design, beta, 2);
      loglik = ev.loglik;
      gnorm = detail::sup_norm(ev.gradient);
      if (gnorm < opts.tol) break;

      // Newton direction: (-H) delta = g
      std::vector<double> neg_h(ev.hessian.size());
      for (std::size_t k = 0; k < neg_h.size(); ++k) neg_h[k] = -ev.hessian[k];
      std::vector<double> delta;
      try {
        delta = detail::solve_linear(std::move(neg_h), ev.gradient);
      } catch (const numeric_error&) {
        // the information matrix degenerates on a monotone-likelihood plateau
        if (detail::sup_norm(beta) > 10.0)
          throw separation_error(
              "cox_fit: information matrix degenerated far from the origin; "
              "monotone likelihood / perfect separation suspected");
        throw;
      }

      // accept any step that does not decrease the likelihood beyond
      // floating-point noise; near the optimum exact comparisons deadlock
      const double slack = 1e-10 * (1.0 + std::fabs(loglik));
      double lambda = 1.0;
      std::vector<double> cand(beta.size());
      double cand_ll = 0.0;
      bool accepted = false;
      for (int h = 0; h < 10; ++h) {
        for (std::size_t j = 0; j < beta.size(); ++j) cand[j] = beta[j] + lambda * delta[j];
        cand_ll = detail::cox_eval(design, cand, 0).loglik;
        if (std::isfinite(cand_ll) && cand_ll >= loglik - slack) {
          accepted = true;
          break;
        }
        lambda *= 0.5;
      }
      if (!accepted)
        throw convergence_error("cox_fit: step-halving failed to improve the partial likelihood", beta,
                                gnorm, iter);
      beta = cand;
      loglik = cand_ll;
      model.loglik_trace.push_back(loglik);
      if (detail::sup_norm(beta) > opts.separation_bound)
        throw separation_error("cox_fit: coefficients diverged (|beta| > " +
                               std::to_string(opts.separation_bound) +
                               "); monotone likelihood / perfect separation suspected");
    }
    if (gnorm >= opts.tol) {
      // iterations exhausted; check the final iterate before giving up
      auto ev = detail::cox_eval(design, beta, 1);
      loglik = ev.loglik;
      gnorm = detail::sup_norm(ev.gradient);
      if (gnorm >= opts.tol)
        throw convergence_error("cox_fit: no convergence in " + std::to_string(opts.max_iter) +
                                    " iterations (gradient sup-norm " + std::to_string(gnorm) + ")",
                                beta, gnorm, iter);
    }
  }

  for (std::size_t j = 0; j < active.size(); ++j) model.beta[active[j]] = beta[j];
  model.log_likelihood = loglik;
  model.gradient_norm = gnorm;
  model.iterations = iter;

  // Breslow baseline H0 on all unique observed times: jumps d_t / sum_{risk} exp(eta)
  std::vector<double> eta(n);
  for (std::size_t i = 0; i < n; ++i) {
    double e = 0.0;
    for (std::size_t j = 0; j < p; ++j) e += (data[i].covariates[j] - model.train_feature_means[j]) * model.beta[j];
    eta[i] = e;
  }
  const auto& order = full_design.order;
  std::vector<double> grid;
  std::vector<double> jumps;
  {
    std::size_t i = 0;
    double risk_sum = 0.0;
    for (std::size_t q = 0; q < n; ++q) risk_sum += std::exp(eta[order[q]]);
    while (i < n) {
      const double t = design.times[order[i]];
      std::size_t j = i, deaths = 0;
      double leaving = 0.0;
      while (j < n && design.times[order[j]] == t) {
        deaths += static_cast<std::size_t>(design.status[order[j]]);
        leaving += std::exp(eta[order[j]]);
        ++j;
      }
      grid.push_back(t);
      jumps.push_back(deaths > 0 ? static_cast<double>(deaths) / risk_sum : 0.0);
      risk_sum -= leaving;
      i = j;
    }
  }
  model.baseline.times = grid;
  model.baseline.cumhaz.resize(grid.size());
  double h = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    h += jumps[k];
    model.baseline.cumhaz[k] = h;
  }
  return model;
}

// Linear predictor eta = (X - train_means) * beta, higher is riskier.
inline RiskVector cox_predict_risk(const CoxModel& model, const Dataset& test) {
  if (test.n_features() != model.beta.size())
    throw validation_error("cox_predict_risk: feature dimension mismatch");
  RiskVector out;
  out.orientation = Orientation::higher_is_riskier;
  out.source.label = "native:cox_linear_predictor";
  out.values.reserve(test.size());
  for (const auto& r : test.records()) {
    double e = 0.0;
    for (std::size_t j = 0; j < model.beta.size(); ++j)
      e += (r.covariates[j] - model.train_feature_means[j]) * model.beta[j];
    out.values.push_back(e);
  }
  return out;
}

// S_i(t) = exp(-H0(t) * exp(eta_i)) on the baseline grid.
inline CurveMatrix cox_predict_distribution(const CoxModel& model, const Dataset& test) {
  if (test.n_features() != model.beta.size())
    throw validation_error("cox_predict_distribution: feature dimension mismatch");
  const auto risks = cox_predict_risk(model, test);
  CurveMatrix m;
  m.times = model.baseline.times;
  m.probs.resize(test.size(), std::vector<double>(m.times.size()));
  for (std::size_t i = 0; i < test.size(); ++i) {
    const double scale = std::exp(risks.values[i]);
    for (std::size_t k = 0; k < m.times.size(); ++k) {
      const double h0 = model.baseline.cumhaz[k];
      // h0 = 0 must give survival 1 even when exp(eta) overflows
      m.probs[i][k] = h0 == 0.0 ? 1.0 : std::exp(-h0 * scale);
    }
  }
  return m;
}

}  // namespace survaudit
