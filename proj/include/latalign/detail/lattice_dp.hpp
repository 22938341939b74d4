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

#ifndef LATALIGN_DETAIL_LATTICE_DP_HPP
#define LATALIGN_DETAIL_LATTICE_DP_HPP

#include <limits>
#include <stdexcept>
#include <vector>

#include "latalign/numeric.hpp"
#include "latalign/types.hpp"

namespace latalign::detail {

// Forward-backward and Viterbi over the blank-augmented target
// z = (_, y1, _, y2, ..., _, yU, _). State s emits z_s; transitions are
// stay, advance, and the skip s-2 -> s allowed only between distinct labels.
// An optional per-position constraint restricts the emitted symbol at
// observed positions, which turns the plain marginal into the
// partial-alignment-conditioned one; both losses share this code path.

struct LossResult {
  double nll = 0.0;      // +infinity when no admissible alignment exists
  Matrix grad;           // d nll / d logits, zero when nll is infinite
  double log_prob() const { return -nll; }
};

inline void check_target(const TokenSeq& y, int blank_id, Eigen::Index num_symbols) {
  for (int id : y) {
    if (id < 0 || id >= num_symbols || id == blank_id)
      throw std::invalid_argument("target contains a non-user token id");
  }
}

// observed: nullptr for the unconstrained marginal, else one entry per
// position with -1 for free positions and the required symbol otherwise.
inline LossResult constrained_ctc_loss(const Matrix& logits, const TokenSeq& y, int blank_id,
                                       const int* observed) {
  const Eigen::Index L = logits.rows();
  const Eigen::Index K = logits.cols();
  check_target(y, blank_id, K);

  LossResult res;
  res.grad = Matrix::Zero(L, K);
  const int U = static_cast<int>(y.size());
  if (U > L || L == 0) {
    res.nll = (L == 0 && U == 0) ? 0.0 : std::numeric_limits<double>::infinity();
    return res;
  }

  const Matrix lp = log_softmax_rows(logits);
  const int S = 2 * U + 1;
  auto label = [&](int s) { return s % 2 == 1 ? y[s / 2] : blank_id; };
  auto emit = [&](Eigen::Index t, int s) -> double {
    const int sym = label(s);
    if (observed && observed[t] >= 0 && observed[t] != sym) return kLogZero;
    return lp(t, sym);
  };

  Mat<double> alpha = Mat<double>::Constant(L, S, kLogZero);
  alpha(0, 0) = emit(0, 0);
  if (S > 1) alpha(0, 1) = emit(0, 1);
  for (Eigen::Index t = 1; t < L; ++t) {
    for (int s = 0; s < S; ++s) {
      double acc = alpha(t - 1, s);
      if (s >= 1) acc = log_add(acc, alpha(t - 1, s - 1));
      if (s >= 2 && s % 2 == 1 && label(s) != label(s - 2))
        acc = log_add(acc, alpha(t - 1, s - 2));
      if (is_log_zero(acc)) {
        alpha(t, s) = kLogZero;
        continue;
      }
      const double e = emit(t, s);
      alpha(t, s) = is_log_zero(e) ? kLogZero : acc + e;
    }
  }
  double log_total = alpha(L - 1, S - 1);
  if (S > 1) log_total = log_add(log_total, alpha(L - 1, S - 2));
  if (is_log_zero(log_total)) {
    res.nll = std::numeric_limits<double>::infinity();
    return res;
  }
  res.nll = -log_total;

  // beta excludes the emission at t, so alpha + beta is the full path mass
  // through (t, s).
  Mat<double> beta = Mat<double>::Constant(L, S, kLogZero);
  beta(L - 1, S - 1) = 0.0;
  if (S > 1) beta(L - 1, S - 2) = 0.0;
  for (Eigen::Index t = L - 2; t >= 0; --t) {
    for (int s = 0; s < S; ++s) {
      double acc = kLogZero;
      for (int step = 0; step <= 2; ++step) {
        const int s2 = s + step;
        if (s2 >= S) break;
        if (step == 2 && !(s2 % 2 == 1 && label(s2) != label(s))) continue;
        const double e = emit(t + 1, s2);
        if (is_log_zero(e) || is_log_zero(beta(t + 1, s2))) continue;
        acc = log_add(acc, e + beta(t + 1, s2));
      }
      beta(t, s) = acc;
    }
  }

  // grad wrt logits = softmax - state-occupancy mass per symbol
  for (Eigen::Index t = 0; t < L; ++t) {
    Vec<double> occ = Vec<double>::Constant(K, kLogZero);
    for (int s = 0; s < S; ++s) {
      const double m = alpha(t, s) + beta(t, s);
      if (is_log_zero(alpha(t, s)) || is_log_zero(beta(t, s))) continue;
      occ(label(s)) = log_add(occ(label(s)), m);
    }
    for (Eigen::Index k = 0; k < K; ++k) {
      const double o = is_log_zero(occ(k)) ? 0.0 : std::exp(occ(k) - log_total);
      res.grad(t, k) = std::exp(lp(t, k)) - o;
    }
  }
  return res;
}

// Maximum-probability alignment. Ties prefer blank: the final state tie
// resolves to the trailing blank, and predecessor ties resolve blank first,
// then stay, then skip.
inline Alignment viterbi_alignment(const Matrix& logits, const TokenSeq& y, int blank_id) {
  const Eigen::Index L = logits.rows();
  const Eigen::Index K = logits.cols();
  check_target(y, blank_id, K);
  const int U = static_cast<int>(y.size());
  if (U > L || L == 0)
    throw std::invalid_argument("viterbi_alignment: no alignment of this length");

  const Matrix lp = log_softmax_rows(logits);
  const int S = 2 * U + 1;
  auto label = [&](int s) { return s % 2 == 1 ? y[s / 2] : blank_id; };

  Mat<double> score = Mat<double>::Constant(L, S, kLogZero);
  Mat<int> back = Mat<int>::Constant(L, S, -1);
  score(0, 0) = lp(0, label(0));
  if (S > 1) score(0, 1) = lp(0, label(1));
  for (Eigen::Index t = 1; t < L; ++t) {
    for (int s = 0; s < S; ++s) {
      // candidate predecessors in tie-break preference order
      int cands[3];
      int n = 0;
      if (s % 2 == 1) {
        if (s >= 1) cands[n++] = s - 1;  // blank predecessor first
        cands[n++] = s;
        if (s >= 2 && label(s) != label(s - 2)) cands[n++] = s - 2;
      } else {
        cands[n++] = s;  // staying on blank
        if (s >= 1) cands[n++] = s - 1;
      }
      double best = kLogZero;
      int bp = -1;
      for (int i = 0; i < n; ++i) {
        const double v = score(t - 1, cands[i]);
        if (!is_log_zero(v) && v > best) {
          best = v;
          bp = cands[i];
        }
      }
      if (bp >= 0) {
        score(t, s) = best + lp(t, label(s));
        back(t, s) = bp;
      }
    }
  }

  int end = S - 1;  // trailing blank wins ties
  if (S > 1 && score(L - 1, S - 2) > score(L - 1, S - 1)) end = S - 2;
  if (is_log_zero(score(L - 1, end)))
    throw std::invalid_argument("viterbi_alignment: no alignment of this length");

  Alignment a(L);
  int s = end;
  for (Eigen::Index t = L - 1; t >= 0; --t) {
    a[t] = label(s);
    s = back(t, s);
  }
  return a;
}

}  // namespace latalign::detail

#endif  // LATALIGN_DETAIL_LATTICE_DP_HPP
