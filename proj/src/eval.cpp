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

#include "latalign/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace latalign {
namespace {

constexpr int kMaxOrder = 4;

void check_lists(const std::vector<TokenSeq>& hyps, const std::vector<TokenSeq>& refs) {
  if (hyps.empty()) throw std::invalid_argument("bleu: empty hypothesis list");
  if (hyps.size() != refs.size()) {
    throw std::invalid_argument("bleu: hypothesis/reference count mismatch");
  }
  for (const TokenSeq& r : refs) {
    if (r.empty()) throw std::invalid_argument("bleu: empty reference");
  }
}

std::map<TokenSeq, int> ngram_counts(const TokenSeq& seq, int n) {
  std::map<TokenSeq, int> counts;
  if (static_cast<int>(seq.size()) >= n) {
    for (size_t i = 0; i + n <= seq.size(); ++i) {
      ++counts[TokenSeq(seq.begin() + i, seq.begin() + i + n)];
    }
  }
  return counts;
}

}  // namespace

double bleu(const std::vector<TokenSeq>& hyps, const std::vector<TokenSeq>& refs) {
  check_lists(hyps, refs);

  long hyp_len = 0;
  long ref_len = 0;
  long matches[kMaxOrder] = {0};
  long totals[kMaxOrder] = {0};
  for (size_t i = 0; i < hyps.size(); ++i) {
    hyp_len += static_cast<long>(hyps[i].size());
    ref_len += static_cast<long>(refs[i].size());
    for (int n = 1; n <= kMaxOrder; ++n) {
      const auto hyp_counts = ngram_counts(hyps[i], n);
      const auto ref_counts = ngram_counts(refs[i], n);
      for (const auto& [gram, count] : hyp_counts) {
        totals[n - 1] += count;
        const auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matches[n - 1] += std::min(count, it->second);
      }
    }
  }
  if (hyp_len == 0) return 0.0;

  double log_precision_sum = 0.0;
  for (int n = 0; n < kMaxOrder; ++n) {
    const double p = matches[n] > 0
                         ? static_cast<double>(matches[n]) / static_cast<double>(totals[n])
                         : 1.0 / (2.0 * static_cast<double>(std::max(totals[n], 1L)));
    log_precision_sum += std::log(p);
  }
  const double brevity =
      std::exp(std::min(0.0, 1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len)));
  return 100.0 * brevity * std::exp(log_precision_sum / kMaxOrder);
}

double repetition_rate(const std::vector<TokenSeq>& hyps) {
  if (hyps.empty()) throw std::invalid_argument("repetition_rate: empty corpus");
  long repeats = 0;
  long tokens = 0;
  for (const TokenSeq& h : hyps) {
    tokens += static_cast<long>(h.size());
    for (size_t i = 1; i < h.size(); ++i) repeats += h[i] == h[i - 1];
  }
  return tokens == 0 ? 0.0 : 100.0 * static_cast<double>(repeats) / static_cast<double>(tokens);
}

double sequence_accuracy(const std::vector<TokenSeq>& hyps, const std::vector<TokenSeq>& refs) {
  if (hyps.empty()) throw std::invalid_argument("sequence_accuracy: empty corpus");
  if (hyps.size() != refs.size()) {
    throw std::invalid_argument("sequence_accuracy: hypothesis/reference count mismatch");
  }
  long exact = 0;
  for (size_t i = 0; i < hyps.size(); ++i) exact += hyps[i] == refs[i];
  return 100.0 * static_cast<double>(exact) / static_cast<double>(hyps.size());
}

std::vector<BucketScore> bucketed_bleu(const std::vector<TokenSeq>& hyps,
                                       const std::vector<TokenSeq>& refs,
                                       const std::vector<int>& edges) {
  check_lists(hyps, refs);
  for (size_t i = 0; i < edges.size(); ++i) {
    if (edges[i] < 1 || (i > 0 && edges[i] <= edges[i - 1])) {
      throw std::invalid_argument("bucketed_bleu: edges must be positive and increasing");
    }
  }

  const int buckets = static_cast<int>(edges.size()) + 1;
  std::vector<std::vector<TokenSeq>> bucket_hyps(buckets), bucket_refs(buckets);
  for (size_t i = 0; i < refs.size(); ++i) {
    int b = buckets - 1;
    for (size_t e = 0; e < edges.size(); ++e) {
      if (static_cast<int>(refs[i].size()) <= edges[e]) {
        b = static_cast<int>(e);
        break;
      }
    }
    bucket_hyps[b].push_back(hyps[i]);
    bucket_refs[b].push_back(refs[i]);
  }

  std::vector<BucketScore> out;
  for (int b = 0; b < buckets; ++b) {
    if (bucket_hyps[b].empty()) continue;
    const int max_len = b < static_cast<int>(edges.size()) ? edges[b]
                                                           : std::numeric_limits<int>::max();
    out.push_back({max_len, static_cast<int>(bucket_hyps[b].size()),
                   bleu(bucket_hyps[b], bucket_refs[b])});
  }
  return out;
}

}  // namespace latalign
