// embeval/distance.hpp

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

#ifndef EMBEVAL_DISTANCE_HPP_
#define EMBEVAL_DISTANCE_HPP_

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "embeval/error.hpp"

namespace embeval {

enum class DistanceKind { kCosine, kEuclidean };

inline std::string distance_name(DistanceKind kind) {
  return kind == DistanceKind::kCosine ? "cosine" : "euclidean";
}

inline DistanceKind parse_distance(const std::string &name) {
  if (name == "cosine") return DistanceKind::kCosine;
  if (name == "euclidean") return DistanceKind::kEuclidean;
  throw ConfigError("unknown distance kind: '" + name + "'");
}

// Eight-way unrolled float kernels.  The accumulation order is fixed, which
// keeps results bit-identical between the blocked search path and the
// brute-force oracle regardless of threading, while still vectorizing.
inline float dot_f32(const float *a, const float *b, size_t n) {
  float acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0;
  float acc4 = 0, acc5 = 0, acc6 = 0, acc7 = 0;
  size_t i = 0;
  size_t n8 = n - n % 8;
  for (; i < n8; i += 8) {
    acc0 += a[i + 0] * b[i + 0];
    acc1 += a[i + 1] * b[i + 1];
    acc2 += a[i + 2] * b[i + 2];
    acc3 += a[i + 3] * b[i + 3];
    acc4 += a[i + 4] * b[i + 4];
    acc5 += a[i + 5] * b[i + 5];
    acc6 += a[i + 6] * b[i + 6];
    acc7 += a[i + 7] * b[i + 7];
  }
  float tail = 0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return (((acc0 + acc1) + (acc2 + acc3)) + ((acc4 + acc5) + (acc6 + acc7))) + tail;
}

inline float sqdist_f32(const float *a, const float *b, size_t n) {
  float acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0;
  float acc4 = 0, acc5 = 0, acc6 = 0, acc7 = 0;
  size_t i = 0;
  size_t n8 = n - n % 8;
  for (; i < n8; i += 8) {
    float d0 = a[i + 0] - b[i + 0];
    float d1 = a[i + 1] - b[i + 1];
    float d2 = a[i + 2] - b[i + 2];
    float d3 = a[i + 3] - b[i + 3];
    float d4 = a[i + 4] - b[i + 4];
    float d5 = a[i + 5] - b[i + 5];
    float d6 = a[i + 6] - b[i + 6];
    float d7 = a[i + 7] - b[i + 7];
    acc0 += d0 * d0;
    acc1 += d1 * d1;
    acc2 += d2 * d2;
    acc3 += d3 * d3;
    acc4 += d4 * d4;
    acc5 += d5 * d5;
    acc6 += d6 * d6;
    acc7 += d7 * d7;
  }
  float tail = 0;
  for (; i < n; ++i) {
    float d = a[i] - b[i];
    tail += d * d;
  }
  return (((acc0 + acc1) + (acc2 + acc3)) + ((acc4 + acc5) + (acc6 + acc7))) + tail;
}

inline double vector_norm(std::span<const float> v) {
  return std::sqrt(static_cast<double>(dot_f32(v.data(), v.data(), v.size())));
}

// Cosine distance 1 - u.v/(|u||v|), clamped into [0, 2] against float
// round-off at the ends of the range.
inline double cosine_distance(std::span<const float> u, std::span<const float> v,
                              double norm_u, double norm_v) {
  if (norm_u == 0.0 || norm_v == 0.0) {
    throw ValidationError("cosine distance undefined for zero vectors");
  }
  double d = 1.0 - static_cast<double>(dot_f32(u.data(), v.data(), u.size())) /
                       (norm_u * norm_v);
  if (d < 0.0) return 0.0;
  if (d > 2.0) return 2.0;
  return d;
}

inline double cosine_distance(std::span<const float> u, std::span<const float> v) {
  return cosine_distance(u, v, vector_norm(u), vector_norm(v));
}

inline double euclidean_distance(std::span<const float> u, std::span<const float> v) {
  return std::sqrt(static_cast<double>(sqdist_f32(u.data(), v.data(), u.size())));
}

inline double distance(DistanceKind kind, std::span<const float> u,
                       std::span<const float> v) {
  if (u.size() != v.size()) {
    throw ValidationError("distance: dimension mismatch (" +
                          std::to_string(u.size()) + " vs " +
                          std::to_string(v.size()) + ")");
  }
  return kind == DistanceKind::kCosine ? cosine_distance(u, v)
                                       : euclidean_distance(u, v);
}

}  // namespace embeval

#endif  // EMBEVAL_DISTANCE_HPP_
