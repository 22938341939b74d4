// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LATALIGN_NUMERIC_HPP
#define LATALIGN_NUMERIC_HPP

#include <cmath>
#include <limits>

#include "latalign/types.hpp"

namespace latalign {

// Log-domain zero sentinel. exp(kLogZero) underflows to exactly 0.0 and
// kLogZero + log(2) still rounds to kLogZero, so accumulation cannot drift.
inline constexpr double kLogZero = -1e30;

inline bool is_log_zero(double v) { return v <= kLogZero * 0.5; }

/// log(exp(a) + exp(b)) with sentinel-safe handling of log-zeros.
inline double log_add(double a, double b) {
  if (a < b) std::swap(a, b);
  if (is_log_zero(a)) return kLogZero;
  const double d = b - a;
  if (d < -745.0) return a;  // exp underflows to 0
  return a + std::log1p(std::exp(d));
}

inline double log_add(double a, double b, double c) {
  return log_add(log_add(a, b), c);
}

/// Row-wise log-softmax of an unnormalized score matrix.
template <class Derived>
Mat<typename Derived::Scalar> log_softmax_rows(const Eigen::MatrixBase<Derived>& scores) {
  using Scalar = typename Derived::Scalar;
  Mat<Scalar> out = scores;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const Scalar m = out.row(i).maxCoeff();
    const Scalar lse = m + std::log((out.row(i).array() - m).exp().sum());
    out.row(i).array() -= lse;
  }
  return out;
}

/// Row-wise softmax.
template <class Derived>
Mat<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& scores) {
  using Scalar = typename Derived::Scalar;
  Mat<Scalar> out = scores;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const Scalar m = out.row(i).maxCoeff();
    out.row(i) = (out.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

/// Index of the row maximum; ties resolve to the lowest column index.
template <class Derived>
int argmax_row(const Eigen::MatrixBase<Derived>& row) {
  int best = 0;
  for (Eigen::Index k = 1; k < row.size(); ++k) {
    if (row(k) > row(best)) best = static_cast<int>(k);
  }
  return best;
}

}  // namespace latalign

#endif  // LATALIGN_NUMERIC_HPP
