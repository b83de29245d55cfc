#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>
#include <vector>

#include "survaudit/common.hpp"
#include "survaudit/curves.hpp"
#include "survaudit/data.hpp"

namespace survaudit {

struct RsfHyperparameters {
  std::size_t n_trees = 250;
  std::size_t mtry = 0;  // 0 means ceil(sqrt(p))
  std::size_t min_node_size = 5;
  std::uint64_t seed = 0;
  bool bootstrap = true;
  std::size_t max_threshold_candidates = 32;
  std::size_t n_threads = 1;
};

struct SurvivalTreeNode {
  int split_var = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> cumhaz;  // terminal nodes only, on the shared grid

  bool is_leaf() const { return left < 0; }
};

struct SurvivalTree {
  std::vector<SurvivalTreeNode> nodes;

  const std::vector<double>& route(const std::vector<double>& covariates) const {
    int id = 0;
    while (!nodes[static_cast<std::size_t>(id)].is_leaf()) {
      const auto& nd = nodes[static_cast<std::size_t>(id)];
      id = covariates[static_cast<std::size_t>(nd.split_var)] <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(id)].cumhaz;
  }
};

struct ForestModel {
  std::vector<SurvivalTree> trees;
  std::vector<double> grid;  // unique training event times
  RsfHyperparameters hp;
  std::size_t n_features = 0;
};

namespace detail {

struct NodeSample {
  double time;
  int status;
};

// Standardized two-sample log-rank statistic |N| / sqrt(V) over the node's
// event times; samples must be sorted by time. `in_right` marks group
// membership. Returns -1 when the variance vanishes.
inline double logrank_statistic(const std::vector<NodeSample>& sorted, const std::vector<char>& in_right) {
  const std::size_t n = sorted.size();
  double num = 0.0, var = 0.0;
  std::size_t at_risk = n;
  std::size_t at_risk_right = 0;
  for (char r : in_right) at_risk_right += static_cast<std::size_t>(r);

  std::size_t i = 0;
  while (i < n) {
    const double t = sorted[i].time;
    std::size_t j = i, deaths = 0, deaths_right = 0, leaving = 0, leaving_right = 0;
    while (j < n && sorted[j].time == t) {
      deaths += static_cast<std::size_t>(sorted[j].status);
      deaths_right += static_cast<std::size_t>(sorted[j].status && in_right[j]);
      ++leaving;
      leaving_right += static_cast<std::size_t>(in_right[j]);
      ++j;
    }
    if (deaths > 0 && at_risk >= 2) {
      const double y = static_cast<double>(at_risk);
      const double y1 = static_cast<double>(at_risk_right);
      const double d = static_cast<double>(deaths);
      num += static_cast<double>(deaths_right) - y1 * d / y;
      var += (y1 / y) * (1.0 - y1 / y) * ((y - d) / (y - 1.0)) * d;
    }
    at_risk -= leaving;
    at_risk_right -= leaving_right;
    i = j;
  }
  if (var <= 0.0) return -1.0;
  return std::fabs(num) / std::sqrt(var);
}

// Nelson-Aalen cumulative hazard of the node sample evaluated on the shared
// grid of training event times.
inline std::vector<double> node_cumhaz(const std::vector<NodeSample>& sorted, const std::vector<double>& grid) {
  std::vector<double> ch(grid.size(), 0.0);
  double h = 0.0;
  std::size_t i = 0;
  const std::size_t n = sorted.size();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    while (i < n && sorted[i].time < grid[g]) ++i;
    std::size_t j = i, deaths = 0;
    while (j < n && sorted[j].time == grid[g]) {
      deaths += static_cast<std::size_t>(sorted[j].status);
      ++j;
    }
    const std::size_t at_risk = n - i;
    if (deaths > 0 && at_risk > 0) h += static_cast<double>(deaths) / static_cast<double>(at_risk);
    ch[g] = h;
  }
  return ch;
}

struct BestSplit {
  double statistic = -1.0;
  int var = -1;
  double threshold = 0.0;
};

inline SurvivalTree grow_tree(const Dataset& train, const std::vector<double>& grid,
                              const RsfHyperparameters& hp, std::uint64_t tree_index) {
  Rng rng(hp.seed, substream(stream::forest_tree, tree_index));
  const std::size_t n = train.size();
  const std::size_t p = train.n_features();
  const std::size_t mtry = hp.mtry > 0 ? std::min(hp.mtry, p)
                                       : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p))));

  std::vector<std::size_t> root;
  root.reserve(n);
  if (hp.bootstrap) {
    for (std::size_t i = 0; i < n; ++i) root.push_back(rng.uniform_below(n));
  } else {
    root.resize(n);
    std::iota(root.begin(), root.end(), 0);
  }

  SurvivalTree tree;
  tree.nodes.emplace_back();

  std::vector<std::pair<int, std::vector<std::size_t>>> stack;
  stack.emplace_back(0, std::move(root));
  std::vector<std::size_t> scratch_vars(p);

  while (!stack.empty()) {
    auto [node_id, samples] = std::move(stack.back());
    stack.pop_back();

    std::sort(samples.begin(), samples.end(),
              [&](std::size_t a, std::size_t b) { return train[a].time < train[b].time; });
    std::vector<NodeSample> node(samples.size());
    std::size_t node_events = 0;
    for (std::size_t k = 0; k < samples.size(); ++k) {
      node[k] = {train[samples[k]].time, train[samples[k]].status};
      node_events += static_cast<std::size_t>(node[k].status);
    }

    BestSplit best;
    if (samples.size() >= 2 * hp.min_node_size && node_events >= 4) {
      // draw mtry distinct covariates
      std::iota(scratch_vars.begin(), scratch_vars.end(), 0);
      for (std::size_t k = 0; k < mtry; ++k) {
        const std::size_t r = k + rng.uniform_below(p - k);
        std::swap(scratch_vars[k], scratch_vars[r]);
      }

      std::vector<double> values(samples.size());
      std::vector<char> in_right(samples.size());
      for (std::size_t vi = 0; vi < mtry; ++vi) {
        const std::size_t var = scratch_vars[vi];
        for (std::size_t k = 0; k < samples.size(); ++k)
          values[k] = train[samples[k]].covariates[var];

        std::vector<double> uniq = values;
        std::sort(uniq.begin(), uniq.end());
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        if (uniq.size() < 2) continue;

        std::vector<double> candidates;
        const std::size_t n_gaps = uniq.size() - 1;
        if (n_gaps <= hp.max_threshold_candidates) {
          for (std::size_t g = 0; g < n_gaps; ++g) candidates.push_back(0.5 * (uniq[g] + uniq[g + 1]));
        } else {
          for (std::size_t c = 1; c <= hp.max_threshold_candidates; ++c) {
            const std::size_t g = c * n_gaps / (hp.max_threshold_candidates + 1);
            candidates.push_back(0.5 * (uniq[g] + uniq[g + 1]));
          }
          candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
        }

        for (double thr : candidates) {
          std::size_t right_n = 0, right_events = 0;
          for (std::size_t k = 0; k < samples.size(); ++k) {
            in_right[k] = values[k] > thr ? 1 : 0;
            right_n += static_cast<std::size_t>(in_right[k]);
            right_events += static_cast<std::size_t>(in_right[k] && node[k].status);
          }
          const std::size_t left_n = samples.size() - right_n;
          const std::size_t left_events = node_events - right_events;
          if (left_n < hp.min_node_size || right_n < hp.min_node_size) continue;
          if (left_events < 2 || right_events < 2) continue;
          const double stat = logrank_statistic(node, in_right);
          if (stat > best.statistic) best = {stat, static_cast<int>(var), thr};
        }
      }
    }

    if (best.var < 0) {
      tree.nodes[static_cast<std::size_t>(node_id)].cumhaz = node_cumhaz(node, grid);
      continue;
    }

    std::vector<std::size_t> left, right;
    for (std::size_t s : samples) {
      if (train[s].covariates[static_cast<std::size_t>(best.var)] <= best.threshold) left.push_back(s);
      else right.push_back(s);
    }
    const int left_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    const int right_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    auto& nd = tree.nodes[static_cast<std::size_t>(node_id)];
    nd.split_var = best.var;
    nd.threshold = best.threshold;
    nd.left = left_id;
    nd.right = right_id;
    stack.emplace_back(right_id, std::move(right));
    stack.emplace_back(left_id, std::move(left));
  }
  return tree;
}

}  // namespace detail

// Random survival forest: trees grown on bootstrap resamples, each split
// maximizing the two-sample log-rank statistic over mtry randomly chosen
// covariates; terminal nodes hold Nelson-Aalen curves on the shared grid of
// unique training event times. Per-tree RNG streams are derived from the seed,
// so the fit is deterministic regardless of thread count.
inline ForestModel rsf_fit(const Dataset& train, const RsfHyperparameters& hp = {}) {
  if (hp.n_trees < 1) throw validation_error("rsf_fit: need at least one tree");
  if (hp.min_node_size < 1) throw validation_error("rsf_fit: min_node_size must be >= 1");
  if (train.n_events() < hp.min_node_size)
    throw validation_error("rsf_fit: training data has fewer events than min_node_size");

  ForestModel model;
  model.hp = hp;
  model.n_features = train.n_features();
  for (const auto& r : train.records())
    if (r.status == 1) model.grid.push_back(r.time);
  std::sort(model.grid.begin(), model.grid.end());
  model.grid.erase(std::unique(model.grid.begin(), model.grid.end()), model.grid.end());

  model.trees.resize(hp.n_trees);
  const std::size_t n_threads = std::max<std::size_t>(1, hp.n_threads);
  if (n_threads == 1) {
    for (std::size_t t = 0; t < hp.n_trees; ++t) model.trees[t] = detail::grow_tree(train, model.grid, hp, t);
  } else {
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < n_threads; ++w) {
      workers.emplace_back([&, w]() {
        for (std::size_t t = w; t < hp.n_trees; t += n_threads)
          model.trees[t] = detail::grow_tree(train, model.grid, hp, t);
      });
    }
    for (auto& th : workers) th.join();
  }
  return model;
}

// Ensemble prediction: average the terminal cumulative-hazard curves across
// trees, then S = exp(-mean H).
inline CurveMatrix rsf_predict(const ForestModel& model, const Dataset& test) {
  if (test.n_features() != model.n_features)
    throw validation_error("rsf_predict: feature dimension mismatch");
  CurveMatrix m;
  m.times = model.grid;
  m.probs.resize(test.size(), std::vector<double>(model.grid.size(), 0.0));
  const double inv_trees = 1.0 / static_cast<double>(model.trees.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    std::vector<double> mean_ch(model.grid.size(), 0.0);
    for (const auto& tree : model.trees) {
      const auto& ch = tree.route(test[i].covariates);
      for (std::size_t k = 0; k < mean_ch.size(); ++k) mean_ch[k] += ch[k];
    }
    for (std::size_t k = 0; k < mean_ch.size(); ++k) m.probs[i][k] = std::exp(-mean_ch[k] * inv_trees);
  }
  return m;
}

}  // namespace survaudit
