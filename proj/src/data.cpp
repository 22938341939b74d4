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

#include "latalign/data.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "latalign/io_util.hpp"
#include "latalign/rng.hpp"

namespace latalign {
namespace {

uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed-keyed coin in [0, 1) for a source token; deterministic so the
/// lexicon task stays a function of the source.
double keyed_u01(uint64_t key, int a) {
  const uint64_t h = mix64(key ^ static_cast<uint64_t>(a + 1));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

bool has_adjacent_repeat(const TokenSeq& x) {
  for (size_t i = 1; i < x.size(); ++i) {
    if (x[i] == x[i - 1]) return true;
  }
  return false;
}

TokenSeq lexicon_target(const TokenSeq& x, const std::vector<int>& pi, uint64_t swap_key) {
  TokenSeq y(x.size());
  for (size_t i = 0; i < x.size(); ++i) y[i] = pi[x[i]];
  // disjoint adjacent pairs (0,1), (2,3), ...: the pair's first token alone
  // keys the swap, so the rule is a position-free local function of x
  for (size_t i = 0; i + 1 < x.size(); i += 2) {
    if (keyed_u01(swap_key, x[i]) < 0.3) std::swap(y[i], y[i + 1]);
  }
  return y;
}

std::string render_seq(const TokenSeq& seq, const Vocab& vocab) {
  std::string out;
  for (size_t i = 0; i < seq.size(); ++i) {
    if (i > 0) out += ' ';
    out += vocab.render(seq[i]);
  }
  return out;
}

std::vector<std::string> split_ws(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

TokenSeq parse_side(const std::string& text, const Vocab& vocab, const std::string& where) {
  const std::vector<std::string> toks = split_ws(text);
  if (toks.empty()) throw std::runtime_error(where + ": empty side");
  TokenSeq seq;
  seq.reserve(toks.size());
  for (const std::string& t : toks) {
    const int id = vocab.find(t);
    if (id < 0) throw std::runtime_error(where + ": unknown token '" + t + "'");
    seq.push_back(id);
  }
  return seq;
}

}  // namespace

TaskKind parse_task_kind(const std::string& name) {
  if (name == "copy") return TaskKind::kCopy;
  if (name == "reverse") return TaskKind::kReverse;
  if (name == "lexicon") return TaskKind::kLexicon;
  if (name == "multimodal") return TaskKind::kMultimodal;
  throw std::invalid_argument("unknown task kind: " + name);
}

std::pair<TokenSeq, TokenSeq> multimodal_paraphrases(const TokenSeq& x) {
  if (x.empty()) throw std::invalid_argument("multimodal_paraphrases: empty source");
  TokenSeq second(x.rbegin(), x.rend());
  second.push_back(x.front());
  return {x, second};
}

SyntheticTask gen_task(TaskKind kind, int n_train, int n_dev, int n_test, int vocab_size,
                       int min_len, int max_len, int scale, uint64_t seed) {
  if (vocab_size < 2) throw std::invalid_argument("gen_task: vocab_size must be >= 2");
  if (min_len < 1 || max_len < min_len) throw std::invalid_argument("gen_task: bad length range");
  if (n_train < 1 || n_dev < 1 || n_test < 1) {
    throw std::invalid_argument("gen_task: split sizes must be positive");
  }
  if (scale < 1) throw std::invalid_argument("gen_task: scale must be >= 1");
  if (kind == TaskKind::kMultimodal && min_len < 2) {
    throw std::invalid_argument("gen_task: multimodal needs min_len >= 2");
  }

  Rng root(seed);
  Rng source_rng = root.fork(1);
  Rng pi_rng = root.fork(2);
  Rng coin_rng = root.fork(3);
  const uint64_t swap_key = mix64(seed ^ 0x5eedULL);

  std::vector<int> pi(vocab_size);
  std::iota(pi.begin(), pi.end(), 0);
  for (int i = vocab_size - 1; i > 0; --i) std::swap(pi[i], pi[pi_rng.uniform_int(i + 1)]);

  // Multimodal train rows enumerate both stored paraphrases of each source,
  // so that split needs only half as many distinct sources as rows.
  const int train_sources = kind == TaskKind::kMultimodal ? (n_train + 1) / 2 : n_train;
  const int total = train_sources + n_dev + n_test;
  std::set<TokenSeq> seen;
  std::vector<TokenSeq> sources;
  sources.reserve(total);
  long attempts = 0;
  const long max_attempts = 1000L * total + 100000L;
  while (static_cast<int>(sources.size()) < total) {
    if (++attempts > max_attempts) {
      throw std::invalid_argument("gen_task: cannot draw enough distinct sources; "
                                  "enlarge the vocabulary or length range");
    }
    const int len = min_len + source_rng.uniform_int(max_len - min_len + 1);
    TokenSeq x(len);
    for (int i = 0; i < len; ++i) x[i] = source_rng.uniform_int(vocab_size);
    if (kind == TaskKind::kMultimodal && has_adjacent_repeat(x)) continue;
    if (!seen.insert(x).second) continue;
    sources.push_back(std::move(x));
  }

  SyntheticTask task{make_symbol_vocab(vocab_size), {}, {}, {}};
  task.train.split = Split::kTrain;
  task.dev.split = Split::kDev;
  task.test.split = Split::kTest;

  const auto target_of = [&](const TokenSeq& x) -> TokenSeq {
    switch (kind) {
      case TaskKind::kCopy:
        return x;
      case TaskKind::kReverse:
        return TokenSeq(x.rbegin(), x.rend());
      case TaskKind::kLexicon:
        return lexicon_target(x, pi, swap_key);
      case TaskKind::kMultimodal: {
        const auto [a, b] = multimodal_paraphrases(x);
        return coin_rng.bernoulli(0.5) ? b : a;
      }
    }
    throw std::logic_error("gen_task: unreachable");
  };

  const auto emit = [&](Corpus& dst, TokenSeq source, TokenSeq target) {
    if (target.size() > static_cast<size_t>(scale) * source.size()) {
      throw std::invalid_argument("gen_task: generated target longer than scale * |source|; "
                                  "increase the scale");
    }
    dst.pairs.push_back(Pair{std::move(source), std::move(target)});
  };

  for (int i = 0; i < total; ++i) {
    const bool in_train = i < train_sources;
    Corpus& dst =
        in_train ? task.train : (i < train_sources + n_dev ? task.dev : task.test);
    if (kind == TaskKind::kMultimodal && in_train) {
      // Both paraphrases become rows, so the half/half target distribution is
      // present in the data exactly and cannot be memorized away per source.
      const auto [a, b] = multimodal_paraphrases(sources[i]);
      emit(dst, sources[i], a);
      if (static_cast<int>(task.train.pairs.size()) < n_train) emit(dst, sources[i], b);
      continue;
    }
    emit(dst, sources[i], target_of(sources[i]));
  }
  return task;
}

Corpus load_tsv(const std::string& path, const Vocab& vocab, int scale, Split split,
                Provenance provenance) {
  if (scale < 1) throw std::invalid_argument("load_tsv: scale must be >= 1");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_tsv: cannot open " + path);
  Corpus corpus;
  corpus.split = split;
  corpus.provenance = provenance;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    const size_t first_tab = line.find('\t');
    if (first_tab == std::string::npos || line.find('\t', first_tab + 1) != std::string::npos) {
      throw std::runtime_error(where + ": expected exactly one TAB separator");
    }
    Pair p;
    p.source = parse_side(line.substr(0, first_tab), vocab, where + " (source)");
    p.target = parse_side(line.substr(first_tab + 1), vocab, where + " (target)");
    if (p.target.size() > static_cast<size_t>(scale) * p.source.size()) {
      throw std::runtime_error(where + ": target length " + std::to_string(p.target.size()) +
                               " exceeds " + std::to_string(scale) + " * source length " +
                               std::to_string(p.source.size()));
    }
    corpus.pairs.push_back(std::move(p));
  }
  if (corpus.pairs.empty()) throw std::runtime_error("load_tsv: " + path + " holds no pairs");
  return corpus;
}

void save_tsv(const Corpus& corpus, const Vocab& vocab, const std::string& path) {
  std::string out;
  for (const Pair& p : corpus.pairs) {
    out += render_seq(p.source, vocab);
    out += '\t';
    out += render_seq(p.target, vocab);
    out += '\n';
  }
  write_file_atomic(path, out);
}

Vocab build_vocab_from_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("build_vocab_from_tsv: cannot open " + path);
  std::set<std::string> uniq;
  std::string line;
  while (std::getline(in, line)) {
    for (std::string& tok : split_ws(line)) {
      if (tok != "\t") uniq.insert(std::move(tok));
    }
  }
  if (uniq.empty()) throw std::runtime_error("build_vocab_from_tsv: " + path + " holds no tokens");
  return Vocab(std::vector<std::string>(uniq.begin(), uniq.end()));
}

std::vector<std::vector<int>> make_batches(const Corpus& corpus, int token_budget, uint64_t seed) {
  if (corpus.pairs.empty()) throw std::invalid_argument("make_batches: empty corpus");
  if (token_budget < 1) throw std::invalid_argument("make_batches: budget must be positive");

  Rng rng(seed);
  std::vector<std::pair<double, int>> keyed(corpus.pairs.size());
  for (size_t i = 0; i < corpus.pairs.size(); ++i) {
    keyed[i] = {static_cast<double>(corpus.pairs[i].source.size()) + rng.uniform(),
                static_cast<int>(i)};
  }
  std::sort(keyed.begin(), keyed.end());

  std::vector<std::vector<int>> batches;
  std::vector<int> cur;
  int cur_max = 0;
  for (const auto& [key, idx] : keyed) {
    const int len = static_cast<int>(corpus.pairs[idx].source.size());
    const int new_max = std::max(cur_max, len);
    if (!cur.empty() &&
        static_cast<long>(cur.size() + 1) * new_max > static_cast<long>(token_budget)) {
      batches.push_back(std::move(cur));
      cur.clear();
      cur_max = 0;
    }
    if (cur.empty() && len > token_budget) {
      std::cerr << "warning: pair with source length " << len << " exceeds the batch budget "
                << token_budget << "; emitting a singleton batch\n";
    }
    cur.push_back(idx);
    cur_max = std::max(cur_max, len);
  }
  if (!cur.empty()) batches.push_back(std::move(cur));
  return batches;
}

}  // namespace latalign
