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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "latalign/alignment.hpp"
#include "latalign/rng.hpp"
#include "test_util.hpp"

using namespace latalign;

namespace {
// Symbol ids used throughout: user tokens A..D = 0..3, then blank, then mask.
constexpr int A = 0, B = 1, C = 2, D = 3;
constexpr int kBlank = 4;
constexpr int kMask = 5;
}  // namespace

TEST_CASE("collapse merges runs then strips blanks") {
  CHECK(collapse({kBlank, A, A, kBlank, A, B, B, C, kBlank, D}, kBlank) ==
        TokenSeq{A, A, B, C, D});
  CHECK(collapse({kBlank, kBlank, kBlank}, kBlank) == TokenSeq{});
  CHECK(collapse({A, kBlank, A, A, B}, kBlank) == TokenSeq{A, A, B});
  CHECK(collapse({}, kBlank) == TokenSeq{});
}

TEST_CASE("strip_blanks drops blanks without merging") {
  CHECK(strip_blanks({kBlank, A, A, kBlank, B}, kBlank) == TokenSeq{A, A, B});
  CHECK(strip_blanks({A, B}, kBlank) == TokenSeq{A, B});
}

TEST_CASE("needed_canvas_length counts adjacent repeats") {
  CHECK(needed_canvas_length({}) == 0);
  CHECK(needed_canvas_length({A}) == 1);
  CHECK(needed_canvas_length({A, B}) == 2);
  CHECK(needed_canvas_length({A, A}) == 3);
  CHECK(needed_canvas_length({A, A, A}) == 5);
  CHECK(needed_canvas_length({A, A, B, B}) == 6);
}

TEST_CASE("embed_with_blanks separates repeats and pads") {
  CHECK(embed_with_blanks({A, B}, 4, kBlank) == Alignment{A, B, kBlank, kBlank});
  CHECK(embed_with_blanks({A, A}, 3, kBlank) == Alignment{A, kBlank, A});
  CHECK(embed_with_blanks({}, 2, kBlank) == Alignment{kBlank, kBlank});
  CHECK_THROWS_AS(embed_with_blanks({A, A}, 2, kBlank), std::invalid_argument);
}

TEST_CASE("enumerate_alignments on the pinned instances") {
  auto sorted = [](std::vector<Alignment> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  CHECK(sorted(enumerate_alignments({A}, 2, kBlank)) ==
        sorted({{A, kBlank}, {kBlank, A}, {A, A}}));
  CHECK(enumerate_alignments({A, A}, 2, kBlank).empty());
  CHECK(enumerate_alignments({A, B}, 2, kBlank) == std::vector<Alignment>{{A, B}});
  CHECK(enumerate_alignments({}, 3, kBlank) ==
        std::vector<Alignment>{{kBlank, kBlank, kBlank}});
}

TEST_CASE("enumerate_alignments rejects oversized instances") {
  CHECK_THROWS_AS(enumerate_alignments({A}, 2, kBlank, /*bound=*/2), std::invalid_argument);
  CHECK_THROWS_AS(enumerate_alignments({A, B}, 1, kBlank), std::invalid_argument);
}

TEST_CASE("count_alignments matches the pinned instances") {
  CHECK(count_alignments({A}, 2, kBlank) == 3);
  CHECK(count_alignments({A, A}, 2, kBlank) == 0);
  CHECK(count_alignments({A, B, C}, 3, kBlank) == 1);
  CHECK(count_alignments({}, 3, kBlank) == 1);
  CHECK(count_alignments({A, B}, 1, kBlank) == 0);
}

TEST_CASE("enumeration round trip and count agreement on random instances") {
  Rng rng(7);
  for (int it = 0; it < 2000; ++it) {
    const int v = 1 + rng.uniform_int(4);
    const TokenSeq y = testutil::random_target(rng, v, 1, 5);
    const int blank = v;
    const int length = 1 + rng.uniform_int(12);
    if (static_cast<int>(y.size()) > length) continue;
    const auto all = enumerate_alignments(y, length, blank);
    CHECK(all.size() == count_alignments(y, length, blank));
    for (const Alignment& a : all) {
      REQUIRE(static_cast<int>(a.size()) == length);
      REQUIRE(collapse(a, blank) == y);
    }
    // no duplicates
    std::set<Alignment> uniq(all.begin(), all.end());
    CHECK(uniq.size() == all.size());
  }
}

TEST_CASE("collapse idempotence through the canonical embedding") {
  Rng rng(11);
  for (int it = 0; it < 500; ++it) {
    Alignment a(1 + rng.uniform_int(10));
    for (int& f : a) f = rng.uniform_int(4) == 0 ? kBlank : rng.uniform_int(4);
    const TokenSeq once = collapse(a, kBlank);
    const int length = std::max<int>(static_cast<int>(a.size()), needed_canvas_length(once));
    CHECK(collapse(embed_with_blanks(once, length, kBlank), kBlank) == once);
  }
}

TEST_CASE("sample_mask policies") {
  const Alignment a{A, kBlank, B, B, kBlank, C};

  SUBCASE("all-mask leaves nothing observed") {
    const PartialAlignment pa = sample_mask(a, MaskPolicy::AllMask, kMask, 1);
    CHECK(pa == PartialAlignment(a.size(), kMask));
    CHECK(count_masked(pa, kMask) == static_cast<int>(a.size()));
    CHECK_FALSE(fully_observed(pa, kMask));
  }

  SUBCASE("ratio 0 observes everything, ratio 1 masks everything") {
    Rng rng(3);
    CHECK(mask_with_ratio(a, 0.0, kMask, rng) == a);
    CHECK(mask_with_ratio(a, 1.0, kMask, rng) == PartialAlignment(a.size(), kMask));
  }

  SUBCASE("Bernoulli draws are reproducible given the seed") {
    const PartialAlignment first = sample_mask(a, MaskPolicy::Bernoulli, kMask, 42);
    const PartialAlignment second = sample_mask(a, MaskPolicy::Bernoulli, kMask, 42);
    CHECK(first == second);
    for (size_t i = 0; i < a.size(); ++i) {
      CHECK((first[i] == kMask || first[i] == a[i]));
    }
  }

  SUBCASE("masking density tracks the drawn ratio on average") {
    const Alignment long_a(400, A);
    int masked = 0;
    for (uint64_t seed = 0; seed < 200; ++seed) {
      masked += count_masked(sample_mask(long_a, MaskPolicy::Bernoulli, kMask, seed), kMask);
    }
    // E[masked fraction] = E[r] = 1/2; 80000 draws keep the noise tiny.
    const double frac = masked / (200.0 * 400.0);
    CHECK(frac > 0.45);
    CHECK(frac < 0.55);
  }
}

TEST_CASE("fully_observed and count_masked") {
  CHECK(fully_observed({A, B, kBlank}, kMask));
  CHECK_FALSE(fully_observed({A, kMask}, kMask));
  CHECK(count_masked({kMask, A, kMask}, kMask) == 2);
  CHECK(count_masked({}, kMask) == 0);
}
