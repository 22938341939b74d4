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

#ifndef LATALIGN_EVAL_HPP
#define LATALIGN_EVAL_HPP

#include <vector>

#include "latalign/types.hpp"

namespace latalign {

/// Corpus-level BLEU-4 in [0, 100]: geometric mean of clipped n-gram
/// precisions (n = 1..4, uniform weights) times the brevity penalty
/// exp(min(0, 1 - ref_len/hyp_len)). Zero precisions are smoothed to
/// 1 / (2 * max(hyp_ngram_count, 1)) so short or disjoint corpora score
/// low but never NaN. Internal consistency is the contract; parity with
/// external scorers is not.
/// Throws std::invalid_argument on empty/mismatched lists or an empty
/// reference. An all-empty hypothesis corpus scores 0.
double bleu(const std::vector<TokenSeq>& hyps, const std::vector<TokenSeq>& refs);

/// 100 * (# positions with token equal to its immediate predecessor) /
/// (total tokens), aggregated over the corpus.
double repetition_rate(const std::vector<TokenSeq>& hyps);

/// Percentage of hypotheses exactly equal to their reference.
double sequence_accuracy(const std::vector<TokenSeq>& hyps, const std::vector<TokenSeq>& refs);

struct BucketScore {
  int max_len;  // inclusive upper reference length; INT_MAX for the open bucket
  int pairs;    // population
  double score;
};

/// BLEU per reference-length bucket. `edges` lists inclusive upper bounds in
/// increasing order (default 10, 20, 30, 40, 50, then an open bucket); empty
/// buckets are omitted.
std::vector<BucketScore> bucketed_bleu(const std::vector<TokenSeq>& hyps,
                                       const std::vector<TokenSeq>& refs,
                                       const std::vector<int>& edges = {10, 20, 30, 40, 50});

}  // namespace latalign

#endif  // LATALIGN_EVAL_HPP
