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
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include "latalign/alignment.hpp"
#include "latalign/data.hpp"
#include "latalign/rng.hpp"

using namespace latalign;

namespace {

std::vector<const Corpus*> splits_of(const SyntheticTask& task) {
  return {&task.train, &task.dev, &task.test};
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("/tmp/latalign_test_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

template <class Fn>
std::string thrown_message(const Fn& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

bool message_contains(const std::string& message, const std::string& needle) {
  return message.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("task names parse") {
  CHECK(parse_task_kind("copy") == TaskKind::kCopy);
  CHECK(parse_task_kind("reverse") == TaskKind::kReverse);
  CHECK(parse_task_kind("lexicon") == TaskKind::kLexicon);
  CHECK(parse_task_kind("multimodal") == TaskKind::kMultimodal);
  CHECK_THROWS_AS(parse_task_kind("wmt"), std::invalid_argument);
}

TEST_CASE("copy and reverse tasks produce their defining targets") {
  const SyntheticTask copy = gen_task(TaskKind::kCopy, 50, 10, 10, 6, 1, 8, 2, 3);
  for (const Corpus* c : splits_of(copy)) {
    for (const Pair& p : c->pairs) CHECK(p.target == p.source);
  }
  const SyntheticTask rev = gen_task(TaskKind::kReverse, 50, 10, 10, 6, 1, 8, 2, 3);
  for (const Corpus* c : splits_of(rev)) {
    for (const Pair& p : c->pairs) {
      CHECK(p.target == TokenSeq(p.source.rbegin(), p.source.rend()));
    }
  }
  CHECK(copy.train.pairs.size() == 50);
  CHECK(copy.dev.pairs.size() == 10);
  CHECK(copy.test.pairs.size() == 10);
  CHECK(copy.vocab.num_user_tokens() == 6);
}

TEST_CASE("generation is deterministic under a fixed seed") {
  for (const TaskKind kind :
       {TaskKind::kCopy, TaskKind::kLexicon, TaskKind::kMultimodal}) {
    const SyntheticTask a = gen_task(kind, 40, 8, 8, 8, 2, 9, 2, 11);
    const SyntheticTask b = gen_task(kind, 40, 8, 8, 8, 2, 9, 2, 11);
    const auto as = splits_of(a);
    const auto bs = splits_of(b);
    for (size_t s = 0; s < as.size(); ++s) {
      REQUIRE(as[s]->pairs.size() == bs[s]->pairs.size());
      for (size_t i = 0; i < as[s]->pairs.size(); ++i) {
        CHECK(as[s]->pairs[i].source == bs[s]->pairs[i].source);
        CHECK(as[s]->pairs[i].target == bs[s]->pairs[i].target);
      }
    }
  }
}

TEST_CASE("sources are disjoint across splits") {
  const SyntheticTask task = gen_task(TaskKind::kCopy, 200, 40, 40, 5, 1, 7, 2, 5);
  std::set<TokenSeq> all;
  size_t n = 0;
  for (const Corpus* c : splits_of(task)) {
    for (const Pair& p : c->pairs) {
      all.insert(p.source);
      ++n;
    }
  }
  CHECK(all.size() == n);  // globally unique, hence split-disjoint
}

TEST_CASE("lexicon targets follow one bijection plus sparse adjacent swaps") {
  const SyntheticTask task = gen_task(TaskKind::kLexicon, 1500, 200, 200, 6, 1, 6, 2, 17);

  // Reconstruct the bijection by positionwise majority vote: unswapped
  // positions (~70%) dominate each source token's column.
  std::map<int, std::map<int, int>> votes;
  for (const Pair& p : task.train.pairs) {
    for (size_t i = 0; i < p.source.size(); ++i) ++votes[p.source[i]][p.target[i]];
  }
  std::vector<int> pi(6, -1);
  for (const auto& [src, column] : votes) {
    pi[src] = std::max_element(column.begin(), column.end(), [](const auto& a, const auto& b) {
                return a.second < b.second;
              })->first;
  }
  std::set<int> image(pi.begin(), pi.end());
  REQUIRE(image.size() == 6);  // a bijection
  REQUIRE(image.count(-1) == 0);

  // Every pair in every split must be pi applied tokenwise with swaps only
  // of disjoint even-offset adjacent pairs, and whether a pair swaps must be
  // decided by its first source token alone (the same token always decides
  // the same way). Count the empirical swap rate over swapping tokens.
  long swaps = 0;
  long opportunities = 0;
  std::map<int, bool> decision;  // first token of an even-offset pair -> swapped?
  for (const Corpus* c : splits_of(task)) {
    for (const Pair& p : c->pairs) {
      REQUIRE(p.target.size() == p.source.size());
      size_t i = 0;
      while (i < p.source.size()) {
        const bool swapped = p.target[i] != pi[p.source[i]];
        if (swapped) {
          REQUIRE(i + 1 < p.source.size());
          REQUIRE(i % 2 == 0);
          REQUIRE(p.target[i] == pi[p.source[i + 1]]);
          REQUIRE(p.target[i + 1] == pi[p.source[i]]);
          ++swaps;
        }
        // A swap of two equal source tokens is invisible, so skip those pairs.
        if (i % 2 == 0 && i + 1 < p.source.size() && p.source[i] != p.source[i + 1]) {
          const auto [it, fresh] = decision.emplace(p.source[i], swapped);
          REQUIRE(it->second == swapped);
          (void)fresh;
        }
        ++opportunities;
        i += swapped ? 2 : 1;
      }
    }
  }
  const double rate = static_cast<double>(swaps) / static_cast<double>(opportunities);
  CHECK(rate > 0.05);
  CHECK(rate < 0.5);
}

TEST_CASE("multimodal targets come from a fixed two-point support per source") {
  CHECK(multimodal_paraphrases({0, 1, 2}).first == TokenSeq{0, 1, 2});
  CHECK(multimodal_paraphrases({0, 1, 2}).second == TokenSeq{2, 1, 0, 0});
  CHECK_THROWS_AS(multimodal_paraphrases({}), std::invalid_argument);

  const SyntheticTask task = gen_task(TaskKind::kMultimodal, 1000, 100, 100, 8, 2, 8, 2, 23);
  int first_mode = 0;
  int second_mode = 0;
  for (const Corpus* c : splits_of(task)) {
    for (const Pair& p : c->pairs) {
      const auto [a, b] = multimodal_paraphrases(p.source);
      CHECK(a != b);
      const bool is_a = p.target == a;
      const bool is_b = p.target == b;
      CHECK((is_a || is_b));
      first_mode += is_a;
      second_mode += is_b;
      // both modes must fit the scale-2 canvas so training losses stay finite
      const int canvas = 2 * static_cast<int>(p.source.size());
      CHECK(needed_canvas_length(a) <= canvas);
      CHECK(needed_canvas_length(b) <= canvas);
    }
  }
  const double frac = static_cast<double>(first_mode) / (first_mode + second_mode);
  CHECK(frac > 0.4);
  CHECK(frac < 0.6);

  // The train split enumerates both paraphrases of each source: rows come in
  // adjacent (source, a) / (source, b) pairs, distinct sources across pairs,
  // and no train source leaks into dev or test.
  REQUIRE(task.train.pairs.size() % 2 == 0);
  std::set<TokenSeq> train_sources;
  for (size_t i = 0; i + 1 < task.train.pairs.size(); i += 2) {
    const Pair& pa = task.train.pairs[i];
    const Pair& pb = task.train.pairs[i + 1];
    REQUIRE(pa.source == pb.source);
    const auto [a, b] = multimodal_paraphrases(pa.source);
    CHECK(pa.target == a);
    CHECK(pb.target == b);
    CHECK(train_sources.insert(pa.source).second);
  }
  for (const Corpus* c : {&task.dev, &task.test}) {
    for (const Pair& p : c->pairs) CHECK(train_sources.count(p.source) == 0);
  }

  // An odd row budget leaves the final source with just its first paraphrase.
  const SyntheticTask odd = gen_task(TaskKind::kMultimodal, 5, 2, 2, 8, 2, 6, 2, 29);
  REQUIRE(odd.train.pairs.size() == 5);
  CHECK(odd.train.pairs[4].target ==
        multimodal_paraphrases(odd.train.pairs[4].source).first);
}

TEST_CASE("generator rejects bad configurations") {
  CHECK_THROWS_AS(gen_task(TaskKind::kCopy, 10, 2, 2, 1, 1, 5, 2, 0), std::invalid_argument);
  CHECK_THROWS_AS(gen_task(TaskKind::kCopy, 10, 2, 2, 4, 0, 5, 2, 0), std::invalid_argument);
  CHECK_THROWS_AS(gen_task(TaskKind::kCopy, 10, 2, 2, 4, 5, 4, 2, 0), std::invalid_argument);
  CHECK_THROWS_AS(gen_task(TaskKind::kCopy, 0, 2, 2, 4, 1, 5, 2, 0), std::invalid_argument);
  CHECK_THROWS_AS(gen_task(TaskKind::kMultimodal, 10, 2, 2, 4, 1, 5, 2, 0),
                  std::invalid_argument);
  // only two distinct length-1 sources exist over a binary vocabulary
  CHECK_THROWS_AS(gen_task(TaskKind::kCopy, 10, 2, 2, 2, 1, 1, 2, 0), std::invalid_argument);
  // multimodal second mode has length |x|+1 > 1 * |x|
  CHECK_THROWS_AS(gen_task(TaskKind::kMultimodal, 10, 2, 2, 6, 3, 6, 1, 0),
                  std::invalid_argument);
}

TEST_CASE("TSV round trips and parse errors carry line numbers") {
  const Vocab vocab({"a", "b", "c", "d"});

  SUBCASE("pinned example") {
    TempFile f("pinned.tsv");
    write_text(f.path, "a b\tc d\n");
    const Corpus c = load_tsv(f.path, vocab, 2);
    REQUIRE(c.pairs.size() == 1);
    CHECK(c.pairs[0].source == TokenSeq{0, 1});
    CHECK(c.pairs[0].target == TokenSeq{2, 3});
  }
  SUBCASE("round trip") {
    const SyntheticTask task = gen_task(TaskKind::kReverse, 60, 5, 5, 4, 1, 7, 2, 9);
    TempFile f("roundtrip.tsv");
    save_tsv(task.train, task.vocab, f.path);
    const Corpus back = load_tsv(f.path, task.vocab, 2);
    REQUIRE(back.pairs.size() == task.train.pairs.size());
    for (size_t i = 0; i < back.pairs.size(); ++i) {
      CHECK(back.pairs[i].source == task.train.pairs[i].source);
      CHECK(back.pairs[i].target == task.train.pairs[i].target);
    }
  }
  SUBCASE("malformed lines") {
    TempFile f("bad.tsv");
    write_text(f.path, "a\tb\na\tb\tc\n");
    CHECK(message_contains(thrown_message([&] { load_tsv(f.path, vocab, 2); }),
                           ":2: expected exactly one TAB"));
    write_text(f.path, "a b c d\n");
    CHECK_THROWS_AS(load_tsv(f.path, vocab, 2), std::runtime_error);
    write_text(f.path, "a\t\n");
    CHECK_THROWS_AS(load_tsv(f.path, vocab, 2), std::runtime_error);
    write_text(f.path, "a\tz\n");
    CHECK(message_contains(thrown_message([&] { load_tsv(f.path, vocab, 2); }),
                           "unknown token 'z'"));
    write_text(f.path, "");
    CHECK_THROWS_AS(load_tsv(f.path, vocab, 2), std::runtime_error);
    CHECK_THROWS_AS(load_tsv("/nonexistent/nope.tsv", vocab, 2), std::runtime_error);
  }
  SUBCASE("length constraint enforced at load") {
    TempFile f("toolong.tsv");
    write_text(f.path, "a\tb c d\n");
    CHECK(message_contains(thrown_message([&] { load_tsv(f.path, vocab, 2); }), "exceeds"));
    CHECK_NOTHROW(load_tsv(f.path, vocab, 3));
  }
  SUBCASE("vocab scan") {
    TempFile f("scan.tsv");
    write_text(f.path, "b a\tc\nc d\ta\n");
    const Vocab scanned = build_vocab_from_tsv(f.path);
    REQUIRE(scanned.num_user_tokens() == 4);
    CHECK(scanned.token_text(0) == "a");
    CHECK(scanned.token_text(3) == "d");
  }
}

TEST_CASE("batching respects the token budget and covers each epoch exactly") {
  const auto corpus_of = [](const std::vector<int>& lens) {
    Corpus c;
    for (const int len : lens) c.pairs.push_back({TokenSeq(len, 0), TokenSeq(len, 0)});
    return c;
  };

  SUBCASE("pinned arithmetic: budget 8, four sources of length 4") {
    const auto batches = make_batches(corpus_of({4, 4, 4, 4}), 8, 1);
    REQUIRE(batches.size() == 2);
    CHECK(batches[0].size() == 2);
    CHECK(batches[1].size() == 2);
  }
  SUBCASE("identical lengths pack to floor(budget/length)") {
    const auto batches = make_batches(corpus_of(std::vector<int>(11, 3)), 10, 2);
    REQUIRE(batches.size() == 4);  // 11 pairs, 3 per batch
    for (size_t b = 0; b + 1 < batches.size(); ++b) CHECK(batches[b].size() == 3);
    CHECK(batches.back().size() == 2);
  }
  SUBCASE("coverage, grouping, and cost bound on mixed lengths") {
    std::vector<int> lens;
    Rng rng(3);
    for (int i = 0; i < 200; ++i) lens.push_back(1 + rng.uniform_int(12));
    const Corpus corpus = corpus_of(lens);
    const auto batches = make_batches(corpus, 30, 4);
    std::vector<int> seen;
    int prev_len = 0;
    for (const auto& batch : batches) {
      REQUIRE(!batch.empty());
      int max_len = 0;
      for (const int idx : batch) {
        seen.push_back(idx);
        max_len = std::max(max_len, static_cast<int>(corpus.pairs[idx].source.size()));
      }
      CHECK(static_cast<int>(batch.size()) * max_len <= 30);
      CHECK(max_len >= prev_len);  // sorted fill groups near-equal lengths
      prev_len = max_len;
    }
    std::sort(seen.begin(), seen.end());
    REQUIRE(seen.size() == corpus.pairs.size());
    for (size_t i = 0; i < seen.size(); ++i) CHECK(seen[i] == static_cast<int>(i));
  }
  SUBCASE("oversized pair becomes a singleton batch") {
    const auto batches = make_batches(corpus_of({2, 9, 2}), 6, 5);
    bool found_singleton = false;
    for (const auto& batch : batches) {
      int max_len = 0;
      for (const int idx : batch) max_len = std::max(max_len, 9 * (idx == 1));
      if (max_len == 9) {
        CHECK(batch.size() == 1);
        found_singleton = true;
      }
    }
    CHECK(found_singleton);
  }
  SUBCASE("deterministic under seed") {
    const Corpus corpus = corpus_of({3, 5, 2, 5, 3, 7, 1});
    CHECK(make_batches(corpus, 10, 6) == make_batches(corpus, 10, 6));
  }
  SUBCASE("rejects empty input and bad budgets") {
    CHECK_THROWS_AS(make_batches(Corpus{}, 8, 0), std::invalid_argument);
    CHECK_THROWS_AS(make_batches(corpus_of({3}), 0, 0), std::invalid_argument);
  }
}
