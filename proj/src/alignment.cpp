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

#include "latalign/alignment.hpp"

#include <stdexcept>
#include <string>

namespace latalign {

TokenSeq collapse(const Alignment& a, int blank_id) {
  TokenSeq out;
  int prev = -1;
  for (int f : a) {
    if (f != prev && f != blank_id) out.push_back(f);
    prev = f;
  }
  return out;
}

TokenSeq strip_blanks(const Alignment& a, int blank_id) {
  TokenSeq out;
  for (int f : a) {
    if (f != blank_id) out.push_back(f);
  }
  return out;
}

int needed_canvas_length(const TokenSeq& y) {
  int n = static_cast<int>(y.size());
  for (size_t i = 1; i < y.size(); ++i) {
    if (y[i] == y[i - 1]) ++n;
  }
  return n;
}

Alignment embed_with_blanks(const TokenSeq& y, int length, int blank_id) {
  if (needed_canvas_length(y) > length)
    throw std::invalid_argument("embed_with_blanks: sequence needs a longer canvas");
  Alignment a;
  a.reserve(length);
  for (size_t i = 0; i < y.size(); ++i) {
    if (i > 0 && y[i] == y[i - 1]) a.push_back(blank_id);
    a.push_back(y[i]);
  }
  a.resize(length, blank_id);
  return a;
}

static uint64_t sat_add(uint64_t a, uint64_t b) {
  uint64_t s = a + b;
  return s < a ? UINT64_MAX : s;
}

uint64_t count_alignments(const TokenSeq& y, int length, int blank_id) {
  const int u_len = static_cast<int>(y.size());
  if (u_len > length) return 0;
  // Path count over the blank-augmented target (_, y1, _, ..., yU, _);
  // each alignment corresponds to exactly one state path.
  const int n_states = 2 * u_len + 1;
  auto label = [&](int s) { return s % 2 == 1 ? y[s / 2] : blank_id; };
  std::vector<uint64_t> cur(n_states, 0), nxt(n_states, 0);
  cur[0] = 1;
  if (n_states > 1) cur[1] = 1;
  for (int t = 1; t < length; ++t) {
    for (int s = 0; s < n_states; ++s) {
      uint64_t c = cur[s];
      if (s >= 1) c = sat_add(c, cur[s - 1]);
      if (s >= 2 && s % 2 == 1 && label(s) != label(s - 2)) c = sat_add(c, cur[s - 2]);
      nxt[s] = c;
    }
    cur.swap(nxt);
  }
  uint64_t total = cur[n_states - 1];
  if (n_states > 1) total = sat_add(total, cur[n_states - 2]);
  return total;
}

namespace {

// Builds alignments frame by frame from the collapse semantics: a blank can
// always follow; the last user token may repeat (it merges away); the next
// target token may start a new run only when it differs from the last frame.
struct Enumerator {
  const TokenSeq& y;
  int length;
  int blank_id;
  std::vector<Alignment>* out;
  Alignment frames;

  void run(int matched, int last) {
    const int i = static_cast<int>(frames.size());
    if (i == length) {
      if (matched == static_cast<int>(y.size())) out->push_back(frames);
      return;
    }
    if (length - i < static_cast<int>(y.size()) - matched) return;
    frames.push_back(blank_id);
    run(matched, blank_id);
    frames.back() = last;
    if (last != blank_id && last >= 0) run(matched, last);
    if (matched < static_cast<int>(y.size()) && y[matched] != last) {
      frames.back() = y[matched];
      run(matched + 1, y[matched]);
    }
    frames.pop_back();
  }
};

}  // namespace

std::vector<Alignment> enumerate_alignments(const TokenSeq& y, int length, int blank_id,
                                            uint64_t bound) {
  if (static_cast<int>(y.size()) > length)
    throw std::invalid_argument("enumerate_alignments: |y| > canvas length");
  const uint64_t n = count_alignments(y, length, blank_id);
  if (n > bound)
    throw std::invalid_argument("enumerate_alignments: " + std::to_string(n) +
                                " paths exceed the enumeration bound of " + std::to_string(bound));
  std::vector<Alignment> out;
  out.reserve(static_cast<size_t>(n));
  Enumerator e{y, length, blank_id, &out, {}};
  e.frames.reserve(length);
  e.run(0, -1);
  return out;
}

PartialAlignment sample_mask(const Alignment& a, MaskPolicy policy, int mask_id, uint64_t seed) {
  if (policy == MaskPolicy::AllMask) return PartialAlignment(a.size(), mask_id);
  Rng rng(seed);
  const double ratio = rng.uniform();
  return mask_with_ratio(a, ratio, mask_id, rng);
}

PartialAlignment mask_with_ratio(const Alignment& a, double ratio, int mask_id, Rng& rng) {
  PartialAlignment pa = a;
  for (auto& f : pa) {
    if (rng.uniform() < ratio) f = mask_id;
  }
  return pa;
}

bool fully_observed(const PartialAlignment& pa, int mask_id) {
  for (int f : pa) {
    if (f == mask_id) return false;
  }
  return true;
}

int count_masked(const PartialAlignment& pa, int mask_id) {
  int n = 0;
  for (int f : pa) n += (f == mask_id);
  return n;
}

}  // namespace latalign
