// Copyright the clinsim contributors. Licensed under the terms of the Apache 2.0 license.
// See LICENSE in the project root.
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "clinsim/errors.hpp"
#include "clinsim/forest.hpp"  // Matrix, json file helpers

namespace clinsim {

/// Base-model predictions (n rows x k models) with the gold scores they are
/// regressed against.
struct StackInputs {
  Matrix predictions;
  std::vector<double> gold;
};

struct LinearStacker {
  std::vector<double> coefficients;
  double intercept = 0.0;
};

namespace detail {

/// Cholesky solve of the SPD system a x = b; a is n x n row-major, modified in
/// place. Throws RankDeficient when a pivot collapses.
inline std::vector<double> cholesky_solve(std::vector<double>& a, std::vector<double> b,
                                          std::size_t n) {
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(a[i * n + i]));
  const double tol = std::max(1e-10 * max_diag, 1e-300);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      if (i == j) {
        if (s <= tol) throw RankDeficient("stacker design matrix is rank deficient");
        a[i * n + i] = std::sqrt(s);
      } else {
        a[i * n + j] = s / a[j * n + j];
      }
    }
  }
  // Forward then backward substitution.
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
    b[i] = s / a[i * n + i];
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[k * n + i] * b[k];
    b[i] = s / a[i * n + i];
  }
  return b;
}

}  // namespace detail

/// Ordinary least squares with intercept via the normal equations. Requires
/// the design matrix [1 | predictions] to have full column rank.
inline LinearStacker fit_ols(const StackInputs& inputs) {
  const std::size_t n = inputs.predictions.size();
  if (n == 0 || inputs.gold.size() != n) {
    throw SizeMismatch("fit_ols: predictions/gold size mismatch");
  }
  const std::size_t k = inputs.predictions.front().size();
  if (k == 0) throw SizeMismatch("fit_ols: no base model columns");
  for (const auto& row : inputs.predictions) {
    if (row.size() != k) throw SizeMismatch("fit_ols: ragged prediction matrix");
    for (double v : row) {
      if (!std::isfinite(v)) throw NonFiniteInput("fit_ols: non-finite prediction");
    }
  }
  if (n < k + 1) {
    throw SizeMismatch("fit_ols: need at least k+1 rows, got " + std::to_string(n));
  }
  // Gram matrix of the design [1 | P], column 0 is the intercept.
  const std::size_t m = k + 1;
  std::vector<double> gram(m * m, 0.0);
  std::vector<double> rhs(m, 0.0);
  const auto design = [&](std::size_t row, std::size_t col) {
    return col == 0 ? 1.0 : inputs.predictions[row][col - 1];
  };
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < m; ++i) {
      const double di = design(r, i);
      rhs[i] += di * inputs.gold[r];
      for (std::size_t j = 0; j <= i; ++j) gram[i * m + j] += di * design(r, j);
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) gram[i * m + j] = gram[j * m + i];
  }
  const std::vector<double> beta = detail::cholesky_solve(gram, rhs, m);
  LinearStacker stacker;
  stacker.intercept = beta[0];
  stacker.coefficients.assign(beta.begin() + 1, beta.end());
  return stacker;
}

/// intercept + coefficients . row, clamped to the [0,5] score scale.
inline std::vector<double> stacker_predict(const LinearStacker& stacker,
                                           const Matrix& predictions) {
  std::vector<double> out;
  out.reserve(predictions.size());
  for (const auto& row : predictions) {
    if (row.size() != stacker.coefficients.size()) {
      throw SizeMismatch("stacker_predict: row width " + std::to_string(row.size()) +
                         ", stacker expects " + std::to_string(stacker.coefficients.size()));
    }
    double v = stacker.intercept;
    for (std::size_t i = 0; i < row.size(); ++i) v += stacker.coefficients[i] * row[i];
    out.push_back(std::clamp(v, 0.0, 5.0));
  }
  return out;
}

namespace detail {

inline constexpr const char* kStackerFormat = "clinsim-stacker";
inline constexpr int kStackerVersion = 1;

}  // namespace detail

inline void save_stacker(const LinearStacker& stacker, const std::string& path) {
  nlohmann::json j;
  j["format"] = detail::kStackerFormat;
  j["version"] = detail::kStackerVersion;
  j["k"] = stacker.coefficients.size();
  j["coefficients"] = stacker.coefficients;
  j["intercept"] = stacker.intercept;
  detail::save_json_file(path, j);
}

inline LinearStacker load_stacker(const std::string& path) {
  const nlohmann::json j = detail::load_json_file(path);
  detail::check_envelope(j, detail::kStackerFormat, detail::kStackerVersion, path);
  LinearStacker stacker;
  try {
    stacker.coefficients = j.at("coefficients").get<std::vector<double>>();
    stacker.intercept = j.at("intercept").get<double>();
    if (j.at("k").get<std::size_t>() != stacker.coefficients.size()) {
      throw ParseError(path + ": coefficient count disagrees with k");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return stacker;
}

}  // namespace clinsim
