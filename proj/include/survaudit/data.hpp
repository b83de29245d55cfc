#pragma once

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "survaudit/common.hpp"

namespace survaudit {

// One subject: observed time, event indicator (1 = event, 0 = censored),
// covariate vector of fixed length p.
struct SurvivalRecord {
  double time = 0.0;
  int status = 0;
  std::vector<double> covariates;
};

class Dataset {
public:
  Dataset(std::vector<SurvivalRecord> records, std::vector<std::string> feature_names)
      : records_(std::move(records)), feature_names_(std::move(feature_names)) {
    if (records_.empty()) throw validation_error("dataset: must contain at least one record");
    const std::size_t p = feature_names_.size();
    std::size_t events = 0;
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const auto& r = records_[i];
      if (!(r.time > 0.0) || !std::isfinite(r.time))
        throw validation_error("dataset: row " + std::to_string(i) + ": time must be positive and finite");
      if (r.status != 0 && r.status != 1)
        throw validation_error("dataset: row " + std::to_string(i) + ": status must be 0 or 1");
      if (r.covariates.size() != p)
        throw validation_error("dataset: row " + std::to_string(i) + ": expected " + std::to_string(p) +
                               " covariates, got " + std::to_string(r.covariates.size()));
      events += static_cast<std::size_t>(r.status);
    }
    if (events == 0) throw validation_error("dataset: must contain at least one event (status = 1)");
  }

  std::size_t size() const { return records_.size(); }
  std::size_t n_features() const { return feature_names_.size(); }
  std::size_t n_events() const {
    std::size_t e = 0;
    for (const auto& r : records_) e += static_cast<std::size_t>(r.status);
    return e;
  }

  const SurvivalRecord& operator[](std::size_t i) const { return records_[i]; }
  const std::vector<SurvivalRecord>& records() const { return records_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }

  std::vector<double> times() const {
    std::vector<double> t(size());
    for (std::size_t i = 0; i < size(); ++i) t[i] = records_[i].time;
    return t;
  }
  std::vector<int> statuses() const {
    std::vector<int> s(size());
    for (std::size_t i = 0; i < size(); ++i) s[i] = records_[i].status;
    return s;
  }

  std::vector<double> feature_means() const {
    std::vector<double> m(n_features(), 0.0);
    for (const auto& r : records_)
      for (std::size_t j = 0; j < m.size(); ++j) m[j] += r.covariates[j];
    for (auto& v : m) v /= static_cast<double>(size());
    return m;
  }

private:
  std::vector<SurvivalRecord> records_;
  std::vector<std::string> feature_names_;
};

struct SplitSpec {
  double train_fraction = 2.0 / 3.0;
  std::uint64_t seed = 0;
};

struct CsvSchema {
  std::string time_col = "time";
  std::string status_col = "status";
  std::vector<std::string> drop_cols;
};

namespace detail {

inline std::string strip_cell(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && (s[b] == ' ' || s[b] == '\t')) ++b;
  s = s.substr(b);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(strip_cell(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cells.push_back(strip_cell(cur));
  return cells;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* begin = s.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end == begin + s.size();
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// CSV ingestion. Requirements: UTF-8, header row, comma delimiter, '.' decimal
// point. Columns with an empty header name are ignored (R's write.csv row-name
// column). Non-numeric columns are encoded deterministically: two distinct
// levels map to {0,1} by lexicographic order; more than two levels are one-hot
// encoded with the lexicographically first level dropped.
inline Dataset load_csv(const std::string& path, const CsvSchema& schema = {}) {
  std::ifstream in(path);
  if (!in) throw validation_error("load_csv: cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw validation_error("load_csv: empty file: " + path);
  const std::vector<std::string> header = detail::split_line(line);

  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = detail::split_line(line);
    if (cells.size() != header.size())
      throw validation_error("load_csv: row " + std::to_string(rows.size() + 1) + ": expected " +
                             std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw validation_error("load_csv: no data rows in " + path);

  auto find_col = [&](const std::string& name) -> int {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return static_cast<int>(j);
    return -1;
  };

  const int time_idx = find_col(schema.time_col);
  if (time_idx < 0) throw validation_error("load_csv: missing time column '" + schema.time_col + "'");
  const int status_idx = find_col(schema.status_col);
  if (status_idx < 0) throw validation_error("load_csv: missing status column '" + schema.status_col + "'");

  std::vector<int> covariate_cols;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (static_cast<int>(j) == time_idx || static_cast<int>(j) == status_idx) continue;
    if (header[j].empty()) continue;
    if (std::find(schema.drop_cols.begin(), schema.drop_cols.end(), header[j]) != schema.drop_cols.end())
      continue;
    covariate_cols.push_back(static_cast<int>(j));
  }

  // per-column numeric detection and categorical level collection
  struct ColPlan {
    int src;
    bool numeric;
    std::vector<std::string> levels;  // sorted, categorical only
  };
  std::vector<ColPlan> plans;
  for (int j : covariate_cols) {
    ColPlan plan{j, true, {}};
    for (const auto& row : rows) {
      double v;
      if (!detail::parse_double(row[j], v)) {
        plan.numeric = false;
        break;
      }
    }
    if (!plan.numeric) {
      std::map<std::string, int> levels;
      for (const auto& row : rows) levels[row[j]] = 1;
      for (const auto& [lvl, _] : levels) plan.levels.push_back(lvl);
    }
    plans.push_back(std::move(plan));
  }

  std::vector<std::string> feature_names;
  for (const auto& plan : plans) {
    if (plan.numeric || plan.levels.size() <= 2) {
      feature_names.push_back(header[plan.src]);
    } else {
      for (std::size_t l = 1; l < plan.levels.size(); ++l)
        feature_names.push_back(header[plan.src] + "=" + plan.levels[l]);
    }
  }

  std::vector<SurvivalRecord> records;
  records.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    SurvivalRecord rec;
    if (!detail::parse_double(row[time_idx], rec.time))
      throw validation_error("load_csv: row " + std::to_string(i + 1) + ": non-numeric time '" + row[time_idx] + "'");
    if (!(rec.time > 0.0))
      throw validation_error("load_csv: row " + std::to_string(i + 1) + ": time must be positive, got " +
                             row[time_idx]);
    double st;
    if (!detail::parse_double(row[status_idx], st) || (st != 0.0 && st != 1.0))
      throw validation_error("load_csv: row " + std::to_string(i + 1) + ": status must be 0 or 1, got '" +
                             row[status_idx] + "'");
    rec.status = static_cast<int>(st);

    for (const auto& plan : plans) {
      const std::string& cell = row[plan.src];
      if (plan.numeric) {
        double v = 0.0;
        detail::parse_double(cell, v);
        if (!std::isfinite(v))
          throw validation_error("load_csv: row " + std::to_string(i + 1) + ": non-finite value '" + cell +
                                 "' in column '" + header[plan.src] + "'");
        rec.covariates.push_back(v);
      } else if (plan.levels.size() <= 2) {
        rec.covariates.push_back(cell == plan.levels.back() && plan.levels.size() == 2 ? 1.0 : 0.0);
      } else {
        for (std::size_t l = 1; l < plan.levels.size(); ++l)
          rec.covariates.push_back(cell == plan.levels[l] ? 1.0 : 0.0);
      }
    }
    records.push_back(std::move(rec));
  }

  return Dataset(std::move(records), std::move(feature_names));
}

// Writes time,status,<features...>; doubles at full precision so that a
// save/load round trip reproduces records bitwise.
inline void save_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw validation_error("save_csv: cannot open file for writing: " + path);
  out << "time,status";
  for (const auto& name : data.feature_names()) out << ',' << name;
  out << '\n';
  for (const auto& r : data.records()) {
    out << detail::format_double(r.time) << ',' << r.status;
    for (double v : r.covariates) out << ',' << detail::format_double(v);
    out << '\n';
  }
}

// Seeded holdout split. Train size = round(n * fraction), half-up; subsets
// keep the original row order. Pure function of (data, spec).
inline std::pair<Dataset, Dataset> holdout_split(const Dataset& data, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw validation_error("holdout_split: train_fraction must be in (0, 1)");
  const std::size_t n = data.size();
  const std::size_t n_train =
      static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.train_fraction + 0.5));
  if (n_train == 0 || n_train >= n)
    throw validation_error("holdout_split: split leaves an empty partition (n = " + std::to_string(n) +
                           ", fraction = " + std::to_string(spec.train_fraction) + ")");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(spec.seed, stream::holdout_split);
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = rng.uniform_below(i + 1);
    std::swap(idx[i], idx[j]);
  }

  std::vector<std::size_t> train_idx(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test_idx(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  auto gather = [&](const std::vector<std::size_t>& which) {
    std::vector<SurvivalRecord> recs;
    recs.reserve(which.size());
    for (std::size_t i : which) recs.push_back(data[i]);
    return recs;
  };

  auto train_recs = gather(train_idx);
  auto test_recs = gather(test_idx);
  const auto has_event = [](const std::vector<SurvivalRecord>& recs) {
    return std::any_of(recs.begin(), recs.end(), [](const SurvivalRecord& r) { return r.status == 1; });
  };
  if (!has_event(train_recs))
    throw validation_error("holdout_split: unusable split, train partition contains no events");
  if (!has_event(test_recs))
    throw validation_error("holdout_split: unusable split, test partition contains no events");

  return {Dataset(std::move(train_recs), data.feature_names()),
          Dataset(std::move(test_recs), data.feature_names())};
}

// Synthetic proportional-hazards data: Weibull event times with linear
// predictor X*beta over standard-normal covariates, independent exponential
// censoring. Each record draws from its own derived RNG stream, so the output
// is a pure function of (n, beta, shape, scale, censor_rate, seed).
inline Dataset simulate_weibull_ph(std::size_t n, const std::vector<double>& beta, double shape,
                                   double scale, double censor_rate, std::uint64_t seed) {
  if (n < 1) throw validation_error("simulate_weibull_ph: n must be >= 1");
  if (!(shape > 0.0) || !(scale > 0.0) || !(censor_rate > 0.0))
    throw validation_error("simulate_weibull_ph: shape, scale and censor_rate must be positive");

  const std::size_t p = beta.size();
  std::vector<SurvivalRecord> records;
  records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(seed, substream(stream::simulate, i));
    SurvivalRecord rec;
    rec.covariates.resize(p);
    double eta = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      rec.covariates[j] = rng.normal();
      eta += rec.covariates[j] * beta[j];
    }
    const double u = rng.uniform01();
    const double event_time = scale * std::pow(-std::log(u) / std::exp(eta), 1.0 / shape);
    const double censor_time = -std::log(rng.uniform01()) / censor_rate;
    rec.time = std::min(event_time, censor_time);
    rec.status = event_time <= censor_time ? 1 : 0;
    if (!(rec.time > 0.0)) rec.time = std::numeric_limits<double>::min();
    records.push_back(std::move(rec));
  }

  std::vector<std::string> names(p);
  for (std::size_t j = 0; j < p; ++j) names[j] = "x" + std::to_string(j + 1);
  return Dataset(std::move(records), std::move(names));
}

}  // namespace survaudit
