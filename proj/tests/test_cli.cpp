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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

// End-to-end tests of the command-line binary, driven as a subprocess.
// LATALIGN_BIN is injected by the build.

namespace {

namespace fs = std::filesystem;

struct Scratch {
  fs::path dir;
  Scratch() {
    static int counter = 0;
    dir = fs::temp_directory_path() /
          ("latalign_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string p(const std::string& name) const { return (dir / name).string(); }
};

struct RunResult {
  int exit_code;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult run(const Scratch& s, const std::string& args) {
  const std::string out_path = s.p("_stdout"), err_path = s.p("_stderr");
  const std::string cmd =
      std::string(LATALIGN_BIN) + " " + args + " >" + out_path + " 2>" + err_path;
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = (raw == -1) ? -1 : WEXITSTATUS(raw);
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  return r;
}

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

int line_count(const std::string& text) {
  int n = 0;
  for (const char c : text) n += (c == '\n');
  return n;
}

/// Small shared corpus + flags for the training-based cases.
void generate_copy_corpus(const Scratch& s, uint64_t seed = 7) {
  const RunResult r =
      run(s, "generate-data --task copy --train 80 --dev 16 --test 16 --vocab-size 8 "
             "--min-len 3 --max-len 6 --seed " +
                 std::to_string(seed) + " --out " + s.dir.string());
  REQUIRE(r.exit_code == 0);
}

const char* kTinyModel = "--d-model 32 --d-ff 64 --depth 1 --heads 2 ";

}  // namespace

TEST_CASE("pipeline: generate, train, decode, trace through the binary") {
  Scratch s;
  generate_copy_corpus(s);
  CHECK(fs::exists(s.p("vocab.txt")));
  CHECK(fs::exists(s.p("train.tsv")));
  CHECK(line_count(slurp(s.p("test.tsv"))) == 16);

  const RunResult train =
      run(s, std::string("train --mode ctc --train ") + s.p("train.tsv") + " --dev " +
                 s.p("dev.tsv") + " --vocab " + s.p("vocab.txt") + " --out " + s.p("ctc.ckpt") +
                 " --steps 60 --warmup 20 --eval-every 30 --budget 256 --seed 3 " + kTinyModel);
  REQUIRE(train.exit_code == 0);
  CHECK(contains(train.out, "checkpoint="));
  CHECK(fs::exists(s.p("ctc.ckpt")));
  // tab-separated training log next to the checkpoint
  const std::string log = slurp(s.p("ctc.ckpt.log"));
  CHECK(contains(log, "step\tlr\tloss\tdev_bleu"));
  CHECK(line_count(log) == 61);

  SUBCASE("single-step decoding equals the single-pass decoder, file for file") {
    const RunResult plain = run(s, std::string("decode --ckpt ") + s.p("ctc.ckpt") + " --input " +
                                       s.p("test.tsv") + " --out " + s.p("hyp_plain.txt"));
    const RunResult one = run(s, std::string("decode --ckpt ") + s.p("ctc.ckpt") + " --input " +
                                     s.p("test.tsv") + " --steps 1 --out " + s.p("hyp_one.txt"));
    REQUIRE(plain.exit_code == 0);
    REQUIRE(one.exit_code == 0);
    const std::string a = slurp(s.p("hyp_plain.txt"));
    CHECK(a == slurp(s.p("hyp_one.txt")));
    CHECK(line_count(a) == 16);
  }

  SUBCASE("multi-step decoding writes a canvas trace") {
    const RunResult r = run(s, std::string("decode --ckpt ") + s.p("ctc.ckpt") + " --input " +
                                   s.p("test.tsv") + " --steps 4 --out " + s.p("hyp4.txt") +
                                   " --trace " + s.p("trace.txt"));
    REQUIRE(r.exit_code == 0);
    CHECK(line_count(slurp(s.p("hyp4.txt"))) == 16);
    const std::string trace = slurp(s.p("trace.txt"));
    // 16 sentences x (4 steps + separator)
    CHECK(line_count(trace) == 16 * 5);
    CHECK(contains(trace, "▁?"));  // masked frames visible in early steps
  }

  SUBCASE("decode-step accounting reports exactly T calls per sentence") {
    const RunResult r = run(s, std::string("bench --ckpt ") + s.p("ctc.ckpt") + " --input " +
                                   s.p("test.tsv") + " --steps 1,2,4");
    REQUIRE(r.exit_code == 0);
    CHECK(contains(r.out, "steps=1 sentences=16 model_calls=16 calls_per_sentence=1 "));
    CHECK(contains(r.out, "steps=2 sentences=16 model_calls=32 calls_per_sentence=2 "));
    CHECK(contains(r.out, "steps=4 sentences=16 model_calls=64 calls_per_sentence=4 "));
  }

  SUBCASE("training is reproducible: same seed, same checkpoint bytes") {
    const RunResult again =
        run(s, std::string("train --mode ctc --train ") + s.p("train.tsv") + " --dev " +
                   s.p("dev.tsv") + " --vocab " + s.p("vocab.txt") + " --out " + s.p("ctc2.ckpt") +
                   " --steps 60 --warmup 20 --eval-every 30 --budget 256 --seed 3 " + kTinyModel);
    REQUIRE(again.exit_code == 0);
    CHECK(slurp(s.p("ctc.ckpt")) == slurp(s.p("ctc2.ckpt")));
  }

  SUBCASE("iterative-mode training accepts the checkpoint as a warm start") {
    const RunResult r =
        run(s, std::string("train --mode imputer --train ") + s.p("train.tsv") + " --dev " +
                   s.p("dev.tsv") + " --vocab " + s.p("vocab.txt") + " --init " + s.p("ctc.ckpt") +
                   " --out " + s.p("imp.ckpt") +
                   " --steps 20 --warmup 5 --stage-switch 10 --eval-every 10 --budget 256 "
                   "--seed 4 " +
                   kTinyModel);
    REQUIRE(r.exit_code == 0);
    CHECK(fs::exists(s.p("imp.ckpt")));

    // architecture mismatch is rejected with a diagnostic
    const RunResult bad =
        run(s, std::string("train --mode imputer --train ") + s.p("train.tsv") + " --dev " +
                   s.p("dev.tsv") + " --vocab " + s.p("vocab.txt") + " --init " + s.p("ctc.ckpt") +
                   " --out " + s.p("imp2.ckpt") +
                   " --steps 20 --warmup 5 --d-model 16 --d-ff 32 --depth 1 --heads 2");
    CHECK(bad.exit_code != 0);
    CHECK(contains(bad.err, "architecture"));
  }
}

TEST_CASE("evaluating a file against itself scores a perfect 100") {
  Scratch s;
  generate_copy_corpus(s);
  const RunResult r =
      run(s, std::string("eval --hyp ") + s.p("test.tsv") + " --ref " + s.p("test.tsv"));
  REQUIRE(r.exit_code == 0);
  CHECK(contains(r.out, "bleu=100\n"));
  CHECK(contains(r.out, "sequence_accuracy=100\n"));
  CHECK(contains(r.out, "pairs=16\n"));
}

TEST_CASE("generation is seed-reproducible and seed-sensitive") {
  Scratch a, b, c;
  generate_copy_corpus(a, 7);
  generate_copy_corpus(b, 7);
  generate_copy_corpus(c, 8);
  CHECK(slurp(a.p("train.tsv")) == slurp(b.p("train.tsv")));
  CHECK(slurp(a.p("test.tsv")) == slurp(b.p("test.tsv")));
  CHECK(slurp(a.p("train.tsv")) != slurp(c.p("train.tsv")));
}

TEST_CASE("config file fills options and explicit flags beat file values") {
  Scratch s;
  {
    std::ofstream conf(s.p("run.conf"));
    conf << "[generate-data]\n"
         << "task=reverse\n"
         << "train=30\n"
         << "dev=5\n"
         << "test=5\n"
         << "vocab-size=6\n"
         << "max-len=5\n"
         << "seed=11\n";
  }
  const RunResult file_only = run(s, std::string("generate-data --config ") + s.p("run.conf") +
                                         " --out " + s.dir.string());
  REQUIRE(file_only.exit_code == 0);
  CHECK(contains(file_only.out, "task=reverse"));
  CHECK(contains(file_only.out, "train_pairs=30"));
  CHECK(contains(file_only.out, "vocab_size=6"));

  const RunResult overridden = run(s, std::string("generate-data --config ") + s.p("run.conf") +
                                          " --task copy --train 12 --out " + s.dir.string());
  REQUIRE(overridden.exit_code == 0);
  CHECK(contains(overridden.out, "task=copy"));      // flag wins
  CHECK(contains(overridden.out, "train_pairs=12"));  // flag wins
  CHECK(contains(overridden.out, "vocab_size=6"));    // file still fills the rest

  const RunResult unknown = run(s, std::string("generate-data --config ") + s.p("bad.conf") +
                                       " --out " + s.dir.string());
  CHECK(unknown.exit_code != 0);  // missing config file is an error when requested
}

TEST_CASE("self-check subcommand passes on a fresh build") {
  Scratch s;
  const RunResult r = run(s, "oracle --seed 5");
  CHECK(r.exit_code == 0);
  CHECK(contains(r.out, "marginal_equivalence pass"));
  CHECK(contains(r.out, "masked_equivalence pass"));
  CHECK(contains(r.out, "loss_gradients pass"));
  CHECK(contains(r.out, "model_gradients pass"));
  CHECK(contains(r.out, "oracle=pass"));
}

TEST_CASE("failures exit nonzero with named diagnostics") {
  Scratch s;
  generate_copy_corpus(s);

  const RunResult no_ckpt = run(s, std::string("decode --ckpt ") + s.p("missing.ckpt") +
                                       " --input " + s.p("test.tsv") + " --out " + s.p("h.txt"));
  CHECK(no_ckpt.exit_code != 0);
  CHECK(contains(no_ckpt.err, "error:"));
  CHECK(contains(no_ckpt.err, "missing.ckpt"));

  const RunResult bad_flag = run(s, "eval --no-such-flag x");
  CHECK(bad_flag.exit_code != 0);

  const RunResult bad_mode =
      run(s, std::string("train --mode viterbi --train ") + s.p("train.tsv") + " --dev " +
                 s.p("dev.tsv") + " --vocab " + s.p("vocab.txt") + " --out " + s.p("x.ckpt"));
  CHECK(bad_mode.exit_code != 0);
  CHECK(contains(bad_mode.err, "--mode"));

  const RunResult no_sub = run(s, "");
  CHECK(no_sub.exit_code != 0);

  const RunResult bad_task =
      run(s, std::string("generate-data --task nonsense --out ") + s.dir.string());
  CHECK(bad_task.exit_code != 0);
  CHECK(contains(bad_task.err, "nonsense"));
}
