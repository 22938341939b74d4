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

#ifndef LATALIGN_IMPUTER_HPP
#define LATALIGN_IMPUTER_HPP

#include <functional>
#include <string>
#include <vector>

#include "latalign/alignment.hpp"
#include "latalign/ctc.hpp"
#include "latalign/vocab.hpp"

namespace latalign {

/// Iterative decoding schedule: T steps committing k frames each.
struct DecodeSchedule {
  int total_steps = 1;
  int per_step_budget = 0;  // 0: derive ceil(L / total_steps) at decode time

  /// Budget for a concrete canvas length, checking T * k >= L.
  int budget_for(int canvas_length) const;
};

/// Marginal NLL restricted to alignments that collapse to y AND agree with
/// the observed (non-mask) frames of `partial`. With an all-mask partial this
/// is exactly ctc_loss (same code path). Returns +infinity loss and zero
/// gradient when the observed frames admit no completion collapsing to y.
LossResult imputer_loss(const Matrix& logits, const TokenSeq& y, const PartialAlignment& partial,
                        int blank_id, int mask_id);

/// Maximum-probability member of the alignment set for y under the lattice
/// (Viterbi; ties back-track toward blank). Throws std::invalid_argument when
/// the set is empty.
Alignment rollin_alignment(const Matrix& logits, const TokenSeq& y, int blank_id);

/// Uniform-random member of the alignment set, for the roll-in ablation.
/// Sampling weights each prefix state by its completion count.
Alignment uniform_random_alignment(const TokenSeq& y, int length, int blank_id, Rng& rng);

/// Scoring callback: maps (source, partial alignment) to an L x K lattice.
using ModelFn = std::function<Matrix(const TokenSeq&, const PartialAlignment&)>;

struct DecodeResult {
  TokenSeq output;
  std::vector<PartialAlignment> trace;  // canvas state after each step
  int model_calls = 0;
};

/// Top-k iterative decoding: start all-mask; each of the T steps scores the
/// canvas once, takes per-position argmax and its log-probability as the
/// confidence over the still-masked positions, and freezes the k most
/// confident of them (ties toward the lower position). Committed frames are
/// never revised; after T steps nothing is masked.
DecodeResult imputer_decode(const ModelFn& model_fn, const TokenSeq& x, int canvas_length,
                            const DecodeSchedule& schedule, int blank_id, int mask_id);

/// Line-oriented rendering of a decode trace, one row per step; mask frames
/// render as "▁?" and blanks as "_".
std::string format_decode_trace(const std::vector<PartialAlignment>& trace, const Vocab& vocab);

}  // namespace latalign

#endif  // LATALIGN_IMPUTER_HPP
