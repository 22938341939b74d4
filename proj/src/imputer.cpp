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

#include "latalign/imputer.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "latalign/numeric.hpp"

namespace latalign {

int DecodeSchedule::budget_for(int canvas_length) const {
  if (total_steps < 1) throw std::invalid_argument("decode schedule: steps must be positive");
  int k = per_step_budget;
  if (k == 0) k = (canvas_length + total_steps - 1) / total_steps;
  if (k < 1 || static_cast<long long>(k) * total_steps < canvas_length)
    throw std::invalid_argument("decode schedule: T*k must cover the canvas");
  return k;
}

LossResult imputer_loss(const Matrix& logits, const TokenSeq& y, const PartialAlignment& partial,
                        int blank_id, int mask_id) {
  if (static_cast<Eigen::Index>(partial.size()) != logits.rows())
    throw std::invalid_argument("imputer_loss: partial alignment length != lattice length");
  std::vector<int> observed(partial.size());
  for (size_t t = 0; t < partial.size(); ++t) {
    const int f = partial[t];
    if (f == mask_id) {
      observed[t] = -1;
    } else {
      if (f < 0 || f >= logits.cols())
        throw std::invalid_argument("imputer_loss: partial alignment has an unscorable symbol");
      observed[t] = f;
    }
  }
  return detail::constrained_ctc_loss(logits, y, blank_id, observed.data());
}

Alignment rollin_alignment(const Matrix& logits, const TokenSeq& y, int blank_id) {
  return detail::viterbi_alignment(logits, y, blank_id);
}

Alignment uniform_random_alignment(const TokenSeq& y, int length, int blank_id, Rng& rng) {
  const int U = static_cast<int>(y.size());
  if (length == 0) {
    if (U == 0) return {};
    throw std::invalid_argument("uniform_random_alignment: no alignment of this length");
  }
  const int S = 2 * U + 1;
  auto label = [&](int s) { return s % 2 == 1 ? y[s / 2] : blank_id; };

  // suffix path counts: paths[t][s] = completions from state s with
  // length - t frames still to emit (frame t emitted on arrival at s)
  std::vector<std::vector<double>> suffix(length + 1, std::vector<double>(S, 0.0));
  suffix[length][S - 1] = 1.0;
  if (S > 1) suffix[length][S - 2] = 1.0;
  for (int t = length - 1; t >= 1; --t) {
    for (int s = 0; s < S; ++s) {
      double c = suffix[t + 1][s];
      if (s + 1 < S) c += suffix[t + 1][s + 1];
      if (s + 2 < S && (s + 2) % 2 == 1 && label(s + 2) != label(s)) c += suffix[t + 1][s + 2];
      suffix[t][s] = c;
    }
  }
  double total = suffix[1][0] + (S > 1 ? suffix[1][1] : 0.0);
  if (total <= 0.0)
    throw std::invalid_argument("uniform_random_alignment: no alignment of this length");

  Alignment a(length);
  auto pick = [&](const std::vector<int>& states, const std::vector<double>& weights) {
    double sum = 0.0;
    for (double w : weights) sum += w;
    double r = rng.uniform() * sum;
    for (size_t i = 0; i + 1 < states.size(); ++i) {
      if (r < weights[i]) return states[i];
      r -= weights[i];
    }
    return states.back();
  };

  int s = pick({0, S > 1 ? 1 : 0}, {suffix[1][0], S > 1 ? suffix[1][1] : 0.0});
  a[0] = label(s);
  for (int t = 1; t < length; ++t) {
    std::vector<int> states{s};
    std::vector<double> weights{suffix[t + 1][s]};
    if (s + 1 < S) {
      states.push_back(s + 1);
      weights.push_back(suffix[t + 1][s + 1]);
    }
    if (s + 2 < S && (s + 2) % 2 == 1 && label(s + 2) != label(s)) {
      states.push_back(s + 2);
      weights.push_back(suffix[t + 1][s + 2]);
    }
    s = pick(states, weights);
    a[t] = label(s);
  }
  return a;
}

DecodeResult imputer_decode(const ModelFn& model_fn, const TokenSeq& x, int canvas_length,
                            const DecodeSchedule& schedule, int blank_id, int mask_id) {
  const int T = schedule.total_steps;
  const int k = schedule.budget_for(canvas_length);

  DecodeResult res;
  PartialAlignment canvas(canvas_length, mask_id);
  res.trace.reserve(T);
  for (int step = 0; step < T; ++step) {
    const Matrix logits = model_fn(x, canvas);
    ++res.model_calls;
    if (logits.rows() != canvas_length)
      throw std::runtime_error("imputer_decode: model returned a lattice of the wrong length");
    const Matrix lp = log_softmax_rows(logits);

    // (negated confidence, position) sorts most-confident first with
    // position as the tie-break
    std::vector<std::pair<double, int>> ranked;
    for (int t = 0; t < canvas_length; ++t) {
      if (canvas[t] != mask_id) continue;
      const int sym = argmax_row(lp.row(t));
      ranked.emplace_back(-lp(t, sym), t);
    }
    std::sort(ranked.begin(), ranked.end());
    const int commits = std::min<int>(k, static_cast<int>(ranked.size()));
    for (int i = 0; i < commits; ++i) {
      const int t = ranked[i].second;
      canvas[t] = argmax_row(lp.row(t));
    }
    res.trace.push_back(canvas);
  }
  if (count_masked(canvas, mask_id) != 0)
    throw std::runtime_error("imputer_decode: masked frames remain after the full schedule");
  res.output = collapse(canvas, blank_id);
  return res;
}

std::string format_decode_trace(const std::vector<PartialAlignment>& trace, const Vocab& vocab) {
  std::ostringstream out;
  for (const auto& row : trace) {
    for (size_t t = 0; t < row.size(); ++t) {
      if (t) out << ' ';
      out << vocab.render(row[t]);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace latalign
