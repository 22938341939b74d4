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

#ifndef LATALIGN_ALIGNMENT_HPP
#define LATALIGN_ALIGNMENT_HPP

#include <cstdint>
#include <vector>

#include "latalign/rng.hpp"
#include "latalign/types.hpp"

namespace latalign {

// Alignment algebra: a target sequence y relates to frame sequences of a
// fixed canvas length through the collapse map (merge consecutive repeats,
// then delete blanks). Everything here is a pure function; the enumeration
// routines are exhaustive oracles meant for validating the DP code at desk
// scale, guarded by an explicit path-count bound.

/// Merge consecutive repeated frames, then remove blanks. All-blank input
/// collapses to the empty sequence.
TokenSeq collapse(const Alignment& a, int blank_id);

/// Drop blanks without merging repeats. Ablation of the merge step, used to
/// measure how much collapsing removes spurious repetitions.
TokenSeq strip_blanks(const Alignment& a, int blank_id);

/// Minimum canvas length that admits an alignment for y: |y| plus one
/// separating blank per adjacent repeated pair.
int needed_canvas_length(const TokenSeq& y);

/// Canonical alignment for y: one separating blank between adjacent repeated
/// tokens, then trailing blanks up to `length`. Requires
/// needed_canvas_length(y) <= length; the result always collapses back to y.
Alignment embed_with_blanks(const TokenSeq& y, int length, int blank_id);

/// Number of alignments of length `length` that collapse to y, counted by
/// dynamic programming over the blank-augmented target lattice. Saturates
/// at uint64 max. Returns 0 when none exists.
uint64_t count_alignments(const TokenSeq& y, int length, int blank_id);

inline constexpr uint64_t kEnumerationBound = 1000000;

/// The full set {a : |a| = length, collapse(a) = y}, enumerated directly
/// from the collapse rules (no lattice involved). Throws std::invalid_argument
/// when |y| > length or the count exceeds `bound`.
std::vector<Alignment> enumerate_alignments(const TokenSeq& y, int length, int blank_id,
                                            uint64_t bound = kEnumerationBound);

enum class MaskPolicy { AllMask, Bernoulli };

/// AllMask: every frame masked. Bernoulli: draw a ratio r uniformly from
/// [0,1), then mask each frame independently with probability r. Observed
/// frames keep a's symbols. Deterministic given the seed.
PartialAlignment sample_mask(const Alignment& a, MaskPolicy policy, int mask_id, uint64_t seed);

/// Bernoulli masking at a fixed ratio, consuming `rng`.
PartialAlignment mask_with_ratio(const Alignment& a, double ratio, int mask_id, Rng& rng);

/// True if no frame of `pa` equals mask_id.
bool fully_observed(const PartialAlignment& pa, int mask_id);

/// Number of masked frames.
int count_masked(const PartialAlignment& pa, int mask_id);

}  // namespace latalign

#endif  // LATALIGN_ALIGNMENT_HPP
