#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "xai/errors.hpp"

namespace xai::stats {

// Type-7 empirical quantile (linear interpolation), q in [0,1].
inline double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ValidationError("quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * (static_cast<double>(values.size()) - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  const double w = pos - static_cast<double>(lo);
  return (1.0 - w) * values[lo] + w * values[hi];
}

inline double mean(const Eigen::VectorXd& v) { return v.mean(); }

inline double variance(const Eigen::VectorXd& v) {
  if (v.size() < 2) return 0.0;
  const double m = v.mean();
  return (v.array() - m).square().sum() / (static_cast<double>(v.size()) - 1.0);
}

inline double sd(const Eigen::VectorXd& v) { return std::sqrt(variance(v)); }

inline double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw ValidationError("correlation: length mismatch or too short");
  }
  const double ma = a.mean(), mb = b.mean();
  const Eigen::ArrayXd da = a.array() - ma, db = b.array() - mb;
  const double denom = std::sqrt(da.square().sum() * db.square().sum());
  if (denom == 0.0) throw ValidationError("correlation: zero variance");
  return (da * db).sum() / denom;
}

}  // namespace xai::stats
