#pragma once

#include <algorithm>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "survaudit/common.hpp"
#include "survaudit/curves.hpp"
#include "survaudit/data.hpp"
#include "survaudit/reductions.hpp"

namespace survaudit {

// Outcome columns of a test set: observed times and event indicators.
struct OutcomeView {
  std::vector<double> times;
  std::vector<int> events;

  static OutcomeView from(const Dataset& data) { return {data.times(), data.statuses()}; }

  void validate() const {
    if (times.empty() || times.size() != events.size())
      throw validation_error("outcomes: times and events must be non-empty and equal length");
    if (std::none_of(events.begin(), events.end(), [](int e) { return e == 1; }))
      throw validation_error("outcomes: at least one event is required");
  }

  std::size_t size() const { return times.size(); }

  std::optional<double> max_event_time() const {
    std::optional<double> t;
    for (std::size_t i = 0; i < times.size(); ++i)
      if (events[i] == 1 && (!t || times[i] > *t)) t = times[i];
    return t;
  }
};

// estimate = (concordant + 0.5 * tied) / comparable. Counts are integers for
// the unweighted measures and IPCW-weighted sums for Uno's C.
struct ConcordanceResult {
  double estimate = 0.0;
  double comparable = 0.0;
  double concordant = 0.0;
  double tied_predictions = 0.0;
  std::string measure;
  std::string risk_source;
  std::optional<double> truncation;

  std::string to_csv_row() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%s,%.12g,%.12g,%.12g,%.12g,", measure.c_str(), risk_source.c_str(),
                  estimate, comparable, concordant, tied_predictions);
    std::string s(buf);
    if (truncation) {
      std::snprintf(buf, sizeof(buf), "%.12g", *truncation);
      s += buf;
    }
    return s;
  }
};

inline std::string concordance_csv_header() {
  return "measure,risk_source,estimate,comparable,concordant,tied,tau";
}

namespace detail {

// Enumerates comparable pairs as (earlier, later) indices. A pair is
// comparable when the earlier subject's time is strictly smaller and that
// subject had the event; at tied times the pair is comparable only when
// exactly one is an event, and the event subject is treated as earlier.
template <typename Fn>
inline void for_each_comparable_pair(const OutcomeView& o, Fn&& fn) {
  const std::size_t n = o.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (o.times[i] < o.times[j]) {
        if (o.events[i] == 1) fn(i, j);
      } else if (o.times[j] < o.times[i]) {
        if (o.events[j] == 1) fn(j, i);
      } else if (o.events[i] + o.events[j] == 1) {
        if (o.events[i] == 1) fn(i, j);
        else fn(j, i);
      }
    }
  }
}

// risk values normalized to the higher-is-riskier orientation
inline std::vector<double> oriented_risks(const RiskVector& r) {
  r.validate();
  std::vector<double> v = r.values;
  if (r.orientation == Orientation::higher_is_longer_lived)
    for (auto& x : v) x = -x;
  return v;
}

}  // namespace detail

// Harrell's concordance: proportion of comparable pairs whose risks order the
// same way as the outcome times; tied predictions count one half.
inline ConcordanceResult harrell_c(const RiskVector& risks, const OutcomeView& outcomes) {
  outcomes.validate();
  if (risks.values.size() != outcomes.size())
    throw validation_error("harrell_c: risk and outcome lengths differ");
  const auto phi = detail::oriented_risks(risks);

  std::size_t comparable = 0, concordant = 0, tied = 0;
  detail::for_each_comparable_pair(outcomes, [&](std::size_t e, std::size_t l) {
    ++comparable;
    if (phi[e] > phi[l]) ++concordant;
    else if (phi[e] == phi[l]) ++tied;
  });
  if (comparable == 0) throw validation_error("harrell_c: no comparable pairs");

  ConcordanceResult res;
  res.comparable = static_cast<double>(comparable);
  res.concordant = static_cast<double>(concordant);
  res.tied_predictions = static_cast<double>(tied);
  res.estimate = (res.concordant + 0.5 * res.tied_predictions) / res.comparable;
  res.measure = "harrell_c";
  res.risk_source = risks.source.label;
  return res;
}

// Uno's IPCW concordance. Comparable pairs are restricted to earlier times
// below tau and weighted by G(T-)^-2, where G is the Kaplan-Meier estimate of
// the censoring distribution computed on the training outcomes (events and
// censorings swap roles). tau defaults to the largest test event time.
inline ConcordanceResult uno_c(const RiskVector& risks, const OutcomeView& outcomes,
                               const OutcomeView& train_outcomes, std::optional<double> tau = {}) {
  outcomes.validate();
  if (risks.values.size() != outcomes.size())
    throw validation_error("uno_c: risk and outcome lengths differ");
  if (train_outcomes.times.empty()) throw validation_error("uno_c: empty training outcomes");
  const auto phi = detail::oriented_risks(risks);

  std::vector<int> censor_flags(train_outcomes.events.size());
  for (std::size_t i = 0; i < censor_flags.size(); ++i) censor_flags[i] = 1 - train_outcomes.events[i];
  const StepCurve censor_km = km_fit(train_outcomes.times, censor_flags);

  const double tau_used = tau ? *tau : outcomes.max_event_time().value();

  double comparable = 0.0, concordant = 0.0, tied = 0.0;
  detail::for_each_comparable_pair(outcomes, [&](std::size_t e, std::size_t l) {
    if (!(outcomes.times[e] < tau_used)) return;
    const double g = censor_km.value_before(outcomes.times[e]);
    if (g <= 0.0)
      throw numeric_error("uno_c: censoring survival is 0 just before t = " +
                          std::to_string(outcomes.times[e]) + "; weight undefined");
    const double w = 1.0 / (g * g);
    comparable += w;
    if (phi[e] > phi[l]) concordant += w;
    else if (phi[e] == phi[l]) tied += w;
  });
  if (comparable == 0.0) throw validation_error("uno_c: no comparable pairs below tau");

  ConcordanceResult res;
  res.comparable = comparable;
  res.concordant = concordant;
  res.tied_predictions = tied;
  res.estimate = (concordant + 0.5 * tied) / comparable;
  res.measure = "uno_c";
  res.risk_source = risks.source.label;
  res.truncation = tau_used;
  return res;
}

// Antolini's time-dependent concordance: a comparable pair is concordant when
// the predicted survival probabilities, evaluated at the earlier subject's
// outcome time, rank that subject as the less likely survivor.
inline ConcordanceResult antolini_c(const CurveMatrix& curves, const OutcomeView& outcomes) {
  outcomes.validate();
  if (curves.n_rows() != outcomes.size())
    throw validation_error("antolini_c: curve rows and outcome lengths differ");

  std::size_t comparable = 0, concordant = 0, tied = 0;
  detail::for_each_comparable_pair(outcomes, [&](std::size_t e, std::size_t l) {
    ++comparable;
    const double se = curves.value_at(e, outcomes.times[e]);
    const double sl = curves.value_at(l, outcomes.times[e]);
    if (se < sl) ++concordant;
    else if (se == sl) ++tied;
  });
  if (comparable == 0) throw validation_error("antolini_c: no comparable pairs");

  ConcordanceResult res;
  res.comparable = static_cast<double>(comparable);
  res.concordant = static_cast<double>(concordant);
  res.tied_predictions = static_cast<double>(tied);
  res.estimate = (res.concordant + 0.5 * res.tied_predictions) / res.comparable;
  res.measure = "antolini_c";
  res.risk_source = "distribution";
  return res;
}

struct RocPoint {
  double threshold = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
};

namespace detail {

struct CaseControlSplit {
  std::vector<double> cases;     // events with T <= t
  std::vector<double> controls;  // subjects with T > t
};

// Cumulative-cases / dynamic-controls split at horizon t. Subjects censored
// at or before t carry no usable label and are excluded; this naive handling
// is biased under heavy censoring.
inline CaseControlSplit split_cases_controls(const RiskVector& risks, const OutcomeView& outcomes, double t) {
  outcomes.validate();
  if (risks.values.size() != outcomes.size())
    throw validation_error("roc_at_time: risk and outcome lengths differ");
  const auto phi = oriented_risks(risks);
  CaseControlSplit s;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes.times[i] > t) s.controls.push_back(phi[i]);
    else if (outcomes.events[i] == 1) s.cases.push_back(phi[i]);
  }
  if (s.cases.empty()) throw validation_error("roc_at_time: no cases (events with T <= t)");
  if (s.controls.empty()) throw validation_error("roc_at_time: no controls (subjects with T > t)");
  return s;
}

}  // namespace detail

// Empirical sensitivity(c, t) = P(phi > c | case) and
// specificity(c, t) = P(phi <= c | control) per requested threshold.
inline std::vector<RocPoint> roc_at_time(const RiskVector& risks, const OutcomeView& outcomes, double t,
                                         const std::vector<double>& thresholds) {
  const auto s = detail::split_cases_controls(risks, outcomes, t);
  std::vector<RocPoint> out;
  out.reserve(thresholds.size());
  for (double c : thresholds) {
    RocPoint p;
    p.threshold = c;
    std::size_t se = 0, sp = 0;
    for (double v : s.cases) se += v > c ? 1 : 0;
    for (double v : s.controls) sp += v <= c ? 1 : 0;
    p.sensitivity = static_cast<double>(se) / static_cast<double>(s.cases.size());
    p.specificity = static_cast<double>(sp) / static_cast<double>(s.controls.size());
    out.push_back(p);
  }
  return out;
}

// Trapezoidal area under the ROC curve traced at all distinct risk values.
// Equal by construction to the case/control Mann-Whitney statistic with ties
// counting one half.
inline double auc_at_time(const RiskVector& risks, const OutcomeView& outcomes, double t) {
  const auto s = detail::split_cases_controls(risks, outcomes, t);

  std::vector<double> thresholds;
  thresholds.reserve(s.cases.size() + s.controls.size());
  thresholds.insert(thresholds.end(), s.cases.begin(), s.cases.end());
  thresholds.insert(thresholds.end(), s.controls.begin(), s.controls.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  // ROC points from c = -inf (1,1) through each distinct value; above the
  // maximum both rates are 0.
  std::vector<std::pair<double, double>> pts;  // (fpr, tpr), fpr decreasing
  pts.emplace_back(1.0, 1.0);
  for (double c : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (double v : s.cases) tp += v > c ? 1 : 0;
    for (double v : s.controls) fp += v > c ? 1 : 0;
    pts.emplace_back(static_cast<double>(fp) / static_cast<double>(s.controls.size()),
                     static_cast<double>(tp) / static_cast<double>(s.cases.size()));
  }

  double area = 0.0;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k)
    area += (pts[k].first - pts[k + 1].first) * 0.5 * (pts[k].second + pts[k + 1].second);
  return area;
}

}  // namespace survaudit
