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

#ifndef LATALIGN_DATA_HPP
#define LATALIGN_DATA_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "latalign/types.hpp"
#include "latalign/vocab.hpp"

namespace latalign {

enum class Split { kTrain, kDev, kTest };
enum class Provenance { kRaw, kDistilled };

struct Pair {
  TokenSeq source;
  TokenSeq target;
};

// A nonempty list of sequence pairs; every pair satisfies
// |target| <= scale * |source| (checked when loading from disk).
struct Corpus {
  std::vector<Pair> pairs;
  Split split = Split::kTrain;
  Provenance provenance = Provenance::kRaw;
};

enum class TaskKind { kCopy, kReverse, kLexicon, kMultimodal };

struct SyntheticTask {
  Vocab vocab;
  Corpus train;
  Corpus dev;
  Corpus test;
};

/// Parses a task name ("copy", "reverse", "lexicon", "multimodal").
TaskKind parse_task_kind(const std::string& name);

/// The two paraphrase targets a multimodal source maps to: the source itself,
/// and the reversed source with its first token appended (always a different
/// length, hence always distinct). Pure function of the source content.
std::pair<TokenSeq, TokenSeq> multimodal_paraphrases(const TokenSeq& x);

/// Generates a synthetic task with globally disjoint sources across the three
/// splits. Targets per kind:
///   copy:       y = x
///   reverse:    y = reverse(x)
///   lexicon:    y_i = pi(x_i) for a seed-fixed bijection pi, then each
///               disjoint adjacent pair (0,1), (2,3), ... is swapped wherever
///               a seed-keyed hash of the pair's first token falls below 0.3 —
///               the map x -> y is a pure local function of the source, so
///               held-out pairs are predictable
///   multimodal: a fair coin picks one of multimodal_paraphrases(x); sources
///               are drawn without adjacent repeats so either target fits a
///               scale-2 canvas
/// Throws std::invalid_argument for vocab_size < 2, empty length ranges,
/// nonpositive counts, or when any generated |y| > scale * |x|.
SyntheticTask gen_task(TaskKind kind, int n_train, int n_dev, int n_test, int vocab_size,
                       int min_len, int max_len, int scale, uint64_t seed);

/// One pair per line: source tokens, a single TAB, target tokens; tokens
/// separated by single spaces. Malformed lines are reported as
/// "path:line: message". Loading checks |target| <= scale * |source|.
Corpus load_tsv(const std::string& path, const Vocab& vocab, int scale,
                Split split = Split::kTrain, Provenance provenance = Provenance::kRaw);
void save_tsv(const Corpus& corpus, const Vocab& vocab, const std::string& path);

/// Vocab of the distinct tokens appearing in a TSV corpus file, sorted.
Vocab build_vocab_from_tsv(const std::string& path);

/// Batches as index lists into corpus.pairs. Pairs are sorted by source
/// length (seeded jitter breaks ties), then packed greedily so that
/// batch_size * max_source_length <= token_budget; a single pair over the
/// budget becomes a singleton batch with a warning on stderr. Every pair
/// appears in exactly one batch.
std::vector<std::vector<int>> make_batches(const Corpus& corpus, int token_budget, uint64_t seed);

}  // namespace latalign

#endif  // LATALIGN_DATA_HPP
