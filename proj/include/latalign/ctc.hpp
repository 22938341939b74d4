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

#ifndef LATALIGN_CTC_HPP
#define LATALIGN_CTC_HPP

#include "latalign/alignment.hpp"
#include "latalign/detail/lattice_dp.hpp"
#include "latalign/types.hpp"

namespace latalign {

using LossResult = detail::LossResult;

/// Exact marginal negative log-likelihood of y under per-position conditional
/// independence, with the gradient of the loss with respect to the
/// unnormalized scores. `logits` is L x K with column blank_id scoring the
/// blank. Returns +infinity loss and a zero gradient when no alignment of
/// length L collapses to y.
inline LossResult ctc_loss(const Matrix& logits, const TokenSeq& y, int blank_id) {
  return detail::constrained_ctc_loss(logits, y, blank_id, nullptr);
}

/// collapse(per-row argmax); ties break toward the lowest symbol index.
/// May return the empty sequence.
inline TokenSeq ctc_greedy_decode(const Matrix& logits, int blank_id) {
  Alignment a(logits.rows());
  for (Eigen::Index t = 0; t < logits.rows(); ++t) a[t] = argmax_row(logits.row(t));
  return collapse(a, blank_id);
}

/// The argmax alignment itself (before collapsing); exposed for repetition
/// analyses that compare collapse against blank-stripping.
inline Alignment greedy_alignment(const Matrix& logits) {
  Alignment a(logits.rows());
  for (Eigen::Index t = 0; t < logits.rows(); ++t) a[t] = argmax_row(logits.row(t));
  return a;
}

}  // namespace latalign

#endif  // LATALIGN_CTC_HPP
