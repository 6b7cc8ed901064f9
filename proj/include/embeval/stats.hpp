// embeval/stats.hpp

// Copyright 2026  The embeval authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef EMBEVAL_STATS_HPP_
#define EMBEVAL_STATS_HPP_

#include <cmath>
#include <span>
#include <string>

#include "embeval/error.hpp"

namespace embeval {

inline double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Population variance (divides by n, not n-1).
inline double population_variance(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double m = mean(v);
  double s = 0.0;
  for (double x : v) {
    double d = x - m;
    s += d * d;
  }
  return s / static_cast<double>(v.size());
}

// Pearson correlation coefficient.  Throws when either vector is constant
// (zero variance), with the offending side named.
inline double pearson(std::span<const double> x, std::span<const double> y,
                      const std::string &x_name = "x",
                      const std::string &y_name = "y") {
  if (x.size() != y.size()) {
    throw ValidationError("pearson: length mismatch");
  }
  if (x.size() < 2) {
    throw NumericError("pearson: need at least 2 points");
  }
  double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    double dx = x[i] - mx;
    double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0) {
    throw NumericError("pearson: degenerate correlation, '" + x_name +
                       "' is constant");
  }
  if (syy == 0.0) {
    throw NumericError("pearson: degenerate correlation, '" + y_name +
                       "' is constant");
  }
  return sxy / std::sqrt(sxx * syy);
}

inline double r_squared(std::span<const double> x, std::span<const double> y,
                        const std::string &x_name = "x",
                        const std::string &y_name = "y") {
  double r = pearson(x, y, x_name, y_name);
  double r2 = r * r;
  return r2 > 1.0 ? 1.0 : r2;
}

}  // namespace embeval

#endif  // EMBEVAL_STATS_HPP_
