// Copyright the clinsim contributors. Licensed under the terms of the Apache 2.0 license.
// See LICENSE in the project root.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "clinsim/errors.hpp"
#include "clinsim/feature_pipeline.hpp"
#include "clinsim/forest.hpp"

namespace clinsim {

/// Sample Pearson correlation coefficient, the task's official metric.
inline double pearson(const std::vector<double>& pred, const std::vector<double>& gold) {
  if (pred.size() != gold.size()) {
    throw SizeMismatch("pearson: lengths " + std::to_string(pred.size()) + " vs " +
                       std::to_string(gold.size()));
  }
  if (pred.size() < 2) throw SizeMismatch("pearson: need at least 2 samples");
  const double n = static_cast<double>(pred.size());
  double mp = 0.0, mg = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    mp += pred[i];
    mg += gold[i];
  }
  mp /= n;
  mg /= n;
  double spg = 0.0, spp = 0.0, sgg = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    spg += (pred[i] - mp) * (gold[i] - mg);
    spp += (pred[i] - mp) * (pred[i] - mp);
    sgg += (gold[i] - mg) * (gold[i] - mg);
  }
  if (spp == 0.0 || sgg == 0.0) {
    throw DegenerateVariance("pearson: constant input vector");
  }
  return spg / std::sqrt(spp * sgg);
}

inline double mse(const std::vector<double>& pred, const std::vector<double>& gold) {
  if (pred.size() != gold.size()) throw SizeMismatch("mse: length mismatch");
  if (pred.empty()) throw SizeMismatch("mse: empty input");
  double se = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = pred[i] - gold[i];
    se += r * r;
  }
  return se / static_cast<double>(pred.size());
}

struct EvalReport {
  double pearson = 0.0;
  double mse = 0.0;
  std::size_t n = 0;
};

inline EvalReport evaluate(const std::vector<double>& pred, const std::vector<double>& gold) {
  EvalReport r;
  r.pearson = pearson(pred, gold);
  r.mse = mse(pred, gold);
  r.n = pred.size();
  return r;
}

/// Per-bin squared error over the five gold-score regions [0,1) ... [4,5].
struct RegionErrorTable {
  struct Bin {
    double lo = 0.0;
    double hi = 0.0;
    bool closed_top = false;
    std::size_t count = 0;
    std::optional<double> mse;  // absent for empty bins
  };
  std::array<Bin, 5> bins;
  std::size_t n = 0;
};

inline RegionErrorTable mse_by_region(const std::vector<double>& pred,
                                      const std::vector<double>& gold) {
  if (pred.size() != gold.size()) throw SizeMismatch("mse_by_region: length mismatch");
  RegionErrorTable table;
  for (std::size_t b = 0; b < 5; ++b) {
    table.bins[b].lo = static_cast<double>(b);
    table.bins[b].hi = static_cast<double>(b + 1);
    table.bins[b].closed_top = b == 4;
  }
  std::array<double, 5> se{};
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] < 0.0 || gold[i] > 5.0) {
      throw InvalidInput("mse_by_region: gold score " + std::to_string(gold[i]) +
                         " outside [0,5]");
    }
    const std::size_t b = std::min<std::size_t>(4, static_cast<std::size_t>(gold[i]));
    const double r = pred[i] - gold[i];
    se[b] += r * r;
    ++table.bins[b].count;
  }
  table.n = gold.size();
  for (std::size_t b = 0; b < 5; ++b) {
    if (table.bins[b].count > 0) {
      table.bins[b].mse = se[b] / static_cast<double>(table.bins[b].count);
    }
  }
  return table;
}

/// Pearson of each feature column against gold; constant columns come back
/// absent instead of raising.
inline std::vector<std::optional<double>> per_feature_correlation(
    const std::vector<FeatureVector>& features, const std::vector<double>& gold) {
  if (features.size() != gold.size()) {
    throw SizeMismatch("per_feature_correlation: length mismatch");
  }
  if (features.size() < 2) throw SizeMismatch("per_feature_correlation: need at least 2 rows");
  std::vector<std::optional<double>> out(kFeatureCount);
  std::vector<double> column(features.size());
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    for (std::size_t i = 0; i < features.size(); ++i) column[i] = features[i][f];
    try {
      out[f] = pearson(column, gold);
    } catch (const DegenerateVariance&) {
      out[f] = std::nullopt;
    }
  }
  return out;
}

struct AblationRow {
  std::string group;
  std::size_t n_features = 0;
  double validation_pearson = 0.0;
  double test_pearson = 0.0;
  double delta_validation = 0.0;
  double delta_test = 0.0;
};

struct AblationReport {
  std::vector<AblationRow> rows;  // full model first, then one row per group
};

namespace detail {

inline Matrix drop_columns(const std::vector<FeatureVector>& rows,
                           const std::vector<std::size_t>& dropped) {
  Matrix out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    std::vector<double> r;
    r.reserve(kFeatureCount - dropped.size());
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      if (std::find(dropped.begin(), dropped.end(), f) == dropped.end()) r.push_back(row[f]);
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace detail

/// The feature ablation study: retrains the forest with each feature family
/// removed (seeds held fixed) and reports validation/test Pearson deltas
/// against the full 14-feature model.
inline AblationReport ablation(const std::vector<FeatureVector>& train_features,
                               const std::vector<double>& train_gold,
                               const std::vector<FeatureVector>& val_features,
                               const std::vector<double>& val_gold,
                               const std::vector<FeatureVector>& test_features,
                               const std::vector<double>& test_gold,
                               const ForestConfig& config) {
  AblationReport report;
  const auto run = [&](const std::vector<std::size_t>& dropped) {
    const Matrix tr = detail::drop_columns(train_features, dropped);
    const Matrix va = detail::drop_columns(val_features, dropped);
    const Matrix te = detail::drop_columns(test_features, dropped);
    const RandomForestModel model = fit_forest(tr, train_gold, config);
    return std::pair<double, double>{pearson(forest_predict(model, va), val_gold),
                                     pearson(forest_predict(model, te), test_gold)};
  };
  const auto [full_val, full_test] = run({});
  report.rows.push_back({"full", kFeatureCount, full_val, full_test, 0.0, 0.0});
  for (const auto& group : feature_groups()) {
    const auto [val_p, test_p] = run(group.indices);
    report.rows.push_back({group.name, kFeatureCount - group.indices.size(), val_p, test_p,
                           val_p - full_val, test_p - full_test});
  }
  return report;
}

namespace detail {

/// Rounds a value to 6 significant digits so reports serialize compactly.
inline double sig6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return std::strtod(buf, nullptr);
}

inline nlohmann::json sig6_or_null(const std::optional<double>& v) {
  return v ? nlohmann::json(sig6(*v)) : nlohmann::json(nullptr);
}

}  // namespace detail

inline nlohmann::json region_table_json(const RegionErrorTable& table) {
  nlohmann::json regions = nlohmann::json::array();
  for (const auto& bin : table.bins) {
    regions.push_back({{"lo", bin.lo},
                       {"hi", bin.hi},
                       {"closed_top", bin.closed_top},
                       {"count", bin.count},
                       {"mse", detail::sig6_or_null(bin.mse)}});
  }
  return regions;
}

inline nlohmann::json ablation_report_json(const AblationReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) {
    rows.push_back({{"group", row.group},
                    {"n_features", row.n_features},
                    {"validation_pearson", detail::sig6(row.validation_pearson)},
                    {"test_pearson", detail::sig6(row.test_pearson)},
                    {"delta_validation", detail::sig6(row.delta_validation)},
                    {"delta_test", detail::sig6(row.delta_test)}});
  }
  return rows;
}

/// Assembles the JSON evaluation report. Optional sections appear when their
/// inputs were provided. Numbers carry 6 significant digits.
inline nlohmann::json eval_report_json(
    const EvalReport& report, const std::optional<RegionErrorTable>& regions = std::nullopt,
    const std::optional<std::vector<std::optional<double>>>& per_feature = std::nullopt,
    const std::optional<AblationReport>& ablation_report = std::nullopt) {
  nlohmann::json j;
  j["pearson"] = detail::sig6(report.pearson);
  j["mse"] = detail::sig6(report.mse);
  j["n"] = report.n;
  if (regions) j["regions"] = region_table_json(*regions);
  if (per_feature) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t f = 0; f < per_feature->size(); ++f) {
      arr.push_back({{"index", f},
                     {"name", f < kFeatureCount ? kFeatureNames[f] : "?"},
                     {"pearson", detail::sig6_or_null((*per_feature)[f])}});
    }
    j["per_feature"] = arr;
  }
  if (ablation_report) j["ablation"] = ablation_report_json(*ablation_report);
  return j;
}

}  // namespace clinsim
