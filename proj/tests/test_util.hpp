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

#ifndef LATALIGN_TESTS_TEST_UTIL_HPP
#define LATALIGN_TESTS_TEST_UTIL_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "latalign/alignment.hpp"
#include "latalign/rng.hpp"
#include "latalign/types.hpp"

namespace latalign::testutil {

inline Matrix random_logits(Rng& rng, int rows, int cols, double scale = 2.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = scale * rng.normal();
  }
  return m;
}

inline TokenSeq random_target(Rng& rng, int num_tokens, int min_len, int max_len) {
  TokenSeq y(min_len + rng.uniform_int(max_len - min_len + 1));
  for (int& t : y) t = rng.uniform_int(num_tokens);
  return y;
}

/// Exhaustive reference for the marginal negative log-likelihood: enumerate
/// the alignment set directly from the collapse rules, long-double row
/// softmax, plain product-and-sum — no code shared with the DP under test.
/// `observed` (optional, length L, -1 = unconstrained) filters the set to
/// alignments agreeing at observed frames.
inline double oracle_nll(const Matrix& logits, const TokenSeq& y, int blank_id,
                         const std::vector<int>* observed = nullptr) {
  const int L = static_cast<int>(logits.rows());
  const int K = static_cast<int>(logits.cols());
  std::vector<std::vector<long double>> p(L, std::vector<long double>(K));
  for (int t = 0; t < L; ++t) {
    const double m = logits.row(t).maxCoeff();
    long double denom = 0.0L;
    for (int k = 0; k < K; ++k) denom += std::exp(static_cast<long double>(logits(t, k) - m));
    for (int k = 0; k < K; ++k) {
      p[t][k] = std::exp(static_cast<long double>(logits(t, k) - m)) / denom;
    }
  }
  long double total = 0.0L;
  for (const Alignment& a : enumerate_alignments(y, L, blank_id)) {
    if (observed != nullptr) {
      bool ok = true;
      for (int t = 0; t < L && ok; ++t) ok = (*observed)[t] < 0 || (*observed)[t] == a[t];
      if (!ok) continue;
    }
    long double prod = 1.0L;
    for (int t = 0; t < L; ++t) prod *= p[t][a[t]];
    total += prod;
  }
  if (total <= 0.0L) return std::numeric_limits<double>::infinity();
  return -static_cast<double>(std::log(total));
}

/// Central finite differences of `loss` over every lattice entry vs. the
/// analytic gradient; returns the worst relative error (small absolute
/// floor so near-zero entries don't divide by noise).
inline double max_fd_rel_error(const std::function<double(const Matrix&)>& loss, Matrix logits,
                               const Matrix& analytic, double step = 1e-5) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      const double keep = logits(i, j);
      logits(i, j) = keep + step;
      const double up = loss(logits);
      logits(i, j) = keep - step;
      const double down = loss(logits);
      logits(i, j) = keep;
      const double fd = (up - down) / (2.0 * step);
      const double denom = std::max({std::abs(fd), std::abs(analytic(i, j)), 1e-6});
      worst = std::max(worst, std::abs(fd - analytic(i, j)) / denom);
    }
  }
  return worst;
}

}  // namespace latalign::testutil

#endif  // LATALIGN_TESTS_TEST_UTIL_HPP
