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

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "latalign/checkpoint.hpp"
#include "latalign/ctc.hpp"
#include "latalign/data.hpp"
#include "latalign/eval.hpp"
#include "latalign/imputer.hpp"
#include "latalign/io_util.hpp"
#include "latalign/model.hpp"
#include "latalign/numeric.hpp"
#include "latalign/rng.hpp"
#include "latalign/train.hpp"

namespace {

using namespace latalign;

// ---------------------------------------------------------------------------
// Shared flag bundles.

struct ModelFlags {
  int d_model = 64;
  int d_ff = 256;
  int depth = 2;
  int heads = 4;
  int scale = 2;
  double dropout = 0.1;
  bool no_pos_encoding = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--d-model", d_model, "model width");
    cmd->add_option("--d-ff", d_ff, "feed-forward width");
    cmd->add_option("--depth", depth, "number of residual blocks");
    cmd->add_option("--heads", heads, "attention heads");
    cmd->add_option("--scale", scale, "canvas scale s (lattice length = s * |source|)");
    cmd->add_option("--dropout", dropout, "residual dropout probability");
    cmd->add_flag("--no-pos-encoding", no_pos_encoding, "disable positional features");
  }

  ModelConfig to_config(Vocab vocab) const {
    ModelConfig cfg(std::move(vocab));
    cfg.d_model = d_model;
    cfg.d_ff = d_ff;
    cfg.depth = depth;
    cfg.heads = heads;
    cfg.s = scale;
    cfg.dropout = dropout;
    cfg.use_pos_encoding = !no_pos_encoding;
    cfg.validate();
    return cfg;
  }
};

struct TrainFlags {
  int steps = 2000;
  int warmup = 400;
  int stage_switch = 0;  // 0: half of the total steps
  int budget = 512;
  int eval_every = 200;
  double peak_lr = 1e-3;
  bool average_best = false;
  bool rollin_uniform = false;
  uint64_t seed = 1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--steps", steps, "total optimization steps");
    cmd->add_option("--warmup", warmup, "linear warmup steps");
    cmd->add_option("--stage-switch", stage_switch,
                    "step at which the all-mask stage ends (0: steps/2)");
    cmd->add_option("--budget", budget, "batch token budget (max-length padding counted)");
    cmd->add_option("--eval-every", eval_every, "dev evaluation cadence");
    cmd->add_option("--peak-lr", peak_lr, "peak learning rate");
    cmd->add_flag("--average-best", average_best, "average the 5 best dev checkpoints");
    cmd->add_flag("--rollin-uniform", rollin_uniform,
                  "ablation: uniform-random roll-in instead of the model's best alignment");
    cmd->add_option("--seed", seed, "run seed");
  }

  TrainConfig to_config() const {
    TrainConfig tc;
    tc.total_steps = steps;
    tc.warmup_steps = warmup;
    tc.stage_switch_step = stage_switch > 0 ? stage_switch : std::max(1, steps / 2);
    tc.token_budget = budget;
    tc.eval_every = eval_every;
    tc.peak_lr = peak_lr;
    tc.average_best = average_best;
    tc.rollin_uniform = rollin_uniform;
    tc.seed = seed;
    tc.validate();
    return tc;
  }
};

// ---------------------------------------------------------------------------
// Token-line file I/O.

/// Reads one token sequence per line; a line with a TAB contributes its
/// source side (so corpus TSVs double as decode inputs).
std::vector<TokenSeq> read_source_lines(const std::string& path, const Vocab& vocab) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<TokenSeq> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const size_t tab = line.find('\t');
    std::istringstream side(tab == std::string::npos ? line : line.substr(0, tab));
    TokenSeq seq;
    std::string tok;
    while (side >> tok) {
      const int id = vocab.find(tok);
      if (id < 0) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": unknown token '" +
                                 tok + "'");
      }
      seq.push_back(id);
    }
    if (seq.empty()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty sequence");
    }
    out.push_back(std::move(seq));
  }
  if (out.empty()) throw std::runtime_error(path + ": no sequences");
  return out;
}

void write_token_lines(const std::string& path, const std::vector<TokenSeq>& seqs,
                       const Vocab& vocab) {
  std::string out;
  for (const TokenSeq& seq : seqs) {
    for (size_t i = 0; i < seq.size(); ++i) {
      if (i > 0) out += ' ';
      out += vocab.render(seq[i]);
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

/// Reads token lines without a vocabulary: tokens are interned into ids via
/// a shared dictionary, which is all the metrics need.
std::vector<TokenSeq> read_interned_lines(const std::string& path,
                                          std::map<std::string, int>& dict) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<TokenSeq> out;
  std::string line;
  while (std::getline(in, line)) {
    const size_t tab = line.find('\t');
    std::istringstream side(tab == std::string::npos ? line : line.substr(tab + 1));
    TokenSeq seq;
    std::string tok;
    while (side >> tok) {
      const auto [it, inserted] = dict.emplace(tok, static_cast<int>(dict.size()));
      seq.push_back(it->second);
    }
    out.push_back(std::move(seq));  // possibly empty: an empty hypothesis line
  }
  if (out.empty()) throw std::runtime_error(path + ": no lines");
  return out;
}

ModelFn model_fn_of(const ModelParams& params, const ModelConfig& cfg) {
  return [&params, &cfg](const TokenSeq& x, const PartialAlignment& partial) {
    return forward_imputer(params, cfg, x, partial);
  };
}

void require_same_architecture(const ModelConfig& a, const ModelConfig& b) {
  if (a.d_model != b.d_model || a.d_ff != b.d_ff || a.depth != b.depth || a.heads != b.heads ||
      a.s != b.s || !(a.vocab == b.vocab)) {
    throw std::runtime_error("checkpoint architecture does not match the requested model");
  }
}

// ---------------------------------------------------------------------------
// Subcommand runners.

int run_generate(const std::string& task_name, int n_train, int n_dev, int n_test,
                 int vocab_size, int min_len, int max_len, int scale, uint64_t seed,
                 const std::string& out_dir) {
  const SyntheticTask task = gen_task(parse_task_kind(task_name), n_train, n_dev, n_test,
                                      vocab_size, min_len, max_len, scale, seed);
  task.vocab.save(out_dir + "/vocab.txt");
  save_tsv(task.train, task.vocab, out_dir + "/train.tsv");
  save_tsv(task.dev, task.vocab, out_dir + "/dev.tsv");
  save_tsv(task.test, task.vocab, out_dir + "/test.tsv");
  std::cout << "task=" << task_name << "\nvocab_size=" << vocab_size
            << "\ntrain_pairs=" << task.train.pairs.size()
            << "\ndev_pairs=" << task.dev.pairs.size()
            << "\ntest_pairs=" << task.test.pairs.size() << "\nout_dir=" << out_dir << "\n";
  return 0;
}

int run_train_teacher(const std::string& train_path, const std::string& dev_path,
                      const std::string& vocab_path, const std::string& out_path,
                      const ModelFlags& mf, const TrainFlags& tf) {
  const Vocab vocab = Vocab::load(vocab_path);
  const ModelConfig cfg = mf.to_config(vocab);
  const TrainConfig tc = tf.to_config();
  const Corpus train = load_tsv(train_path, vocab, cfg.s, Split::kTrain);
  const Corpus dev = load_tsv(dev_path, vocab, cfg.s, Split::kDev);

  const TeacherTrainResult result = train_teacher(train, dev, cfg, tc, &std::cout);

  TeacherCheckpoint ckpt{cfg, result.params};
  ckpt.step = static_cast<uint64_t>(tc.total_steps);
  ckpt.config = tc.echo();
  save_checkpoint(ckpt, out_path);
  write_file_atomic(out_path + ".log", format_train_log(result.log));
  std::cout << "best_dev_bleu=" << result.best_dev_bleu << "\ncheckpoint=" << out_path << "\n";
  return 0;
}

int run_distill(const std::string& teacher_path, const std::string& train_path,
                const std::string& out_path) {
  const TeacherCheckpoint teacher = load_teacher_checkpoint(teacher_path);
  const Corpus train =
      load_tsv(train_path, teacher.model_config.vocab, teacher.model_config.s, Split::kTrain);
  DistillStats stats;
  const Corpus distilled = distill(teacher.params, teacher.model_config, train, &stats);
  save_tsv(distilled, teacher.model_config.vocab, out_path);
  std::cout << "kept=" << stats.kept << "\nskipped_empty=" << stats.skipped_empty
            << "\nskipped_too_long=" << stats.skipped_too_long << "\nout=" << out_path << "\n";
  return 0;
}

int run_train(const std::string& mode, const std::string& train_path, const std::string& dev_path,
              const std::string& vocab_path, const std::string& init_path,
              const std::string& out_path, const ModelFlags& mf, const TrainFlags& tf) {
  if (mode != "ctc" && mode != "imputer") {
    throw std::runtime_error("--mode must be ctc or imputer");
  }
  const Vocab vocab = Vocab::load(vocab_path);
  const ModelConfig cfg = mf.to_config(vocab);
  const TrainConfig tc = tf.to_config();
  const Corpus train = load_tsv(train_path, vocab, cfg.s, Split::kTrain);
  const Corpus dev = load_tsv(dev_path, vocab, cfg.s, Split::kDev);

  ModelParams init = zero_model_params(cfg);
  const ModelParams* init_ptr = nullptr;
  if (!init_path.empty()) {
    AlignerCheckpoint warm = load_aligner_checkpoint(init_path);
    require_same_architecture(warm.model_config, cfg);
    init = std::move(warm.params);
    init_ptr = &init;
  }

  const TrainResult result =
      mode == "ctc" ? train_ctc(train, dev, cfg, tc, &std::cout)
                    : train_imputer(train, dev, cfg, tc, init_ptr, &std::cout);

  AlignerCheckpoint ckpt{cfg, result.params};
  ckpt.mode = mode;
  ckpt.step = static_cast<uint64_t>(tc.total_steps);
  ckpt.config = tc.echo();
  save_checkpoint(ckpt, out_path);
  write_file_atomic(out_path + ".log", format_train_log(result.log));
  std::cout << "best_dev_bleu=" << result.best_dev_bleu << "\ncheckpoint=" << out_path << "\n";
  return 0;
}

int run_decode(const std::string& ckpt_path, const std::string& input_path, int steps,
               const std::string& out_path, const std::string& trace_path) {
  const AlignerCheckpoint ckpt = load_aligner_checkpoint(ckpt_path);
  const ModelConfig& cfg = ckpt.model_config;
  const Vocab& vocab = cfg.vocab;
  const std::vector<TokenSeq> sources = read_source_lines(input_path, vocab);

  std::vector<TokenSeq> hyps;
  std::string trace_out;
  hyps.reserve(sources.size());
  if (steps <= 0) {
    // single-pass lattice argmax + collapse
    for (const TokenSeq& x : sources) {
      hyps.push_back(ctc_greedy_decode(forward_ctc(ckpt.params, cfg, x), vocab.blank_id()));
    }
  } else {
    const DecodeSchedule schedule{steps, 0};
    const ModelFn fn = model_fn_of(ckpt.params, cfg);
    for (const TokenSeq& x : sources) {
      const DecodeResult res = imputer_decode(fn, x, cfg.canvas_length(static_cast<int>(x.size())),
                                              schedule, vocab.blank_id(), vocab.mask_id());
      hyps.push_back(res.output);
      if (!trace_path.empty()) {
        trace_out += format_decode_trace(res.trace, vocab);
        trace_out += '\n';
      }
    }
  }
  write_token_lines(out_path, hyps, vocab);
  if (!trace_path.empty() && steps > 0) write_file_atomic(trace_path, trace_out);
  std::cout << "sentences=" << hyps.size() << "\nsteps=" << std::max(steps, 1)
            << "\nout=" << out_path << "\n";
  return 0;
}

int run_eval(const std::string& hyp_path, const std::string& ref_path) {
  std::map<std::string, int> dict;
  const std::vector<TokenSeq> hyps = read_interned_lines(hyp_path, dict);
  const std::vector<TokenSeq> refs = read_interned_lines(ref_path, dict);
  if (hyps.size() != refs.size()) {
    throw std::runtime_error("hypothesis and reference files differ in line count");
  }

  const double score = bleu(hyps, refs);
  const double reps = repetition_rate(hyps);
  const double acc = sequence_accuracy(hyps, refs);
  const auto buckets = bucketed_bleu(hyps, refs);

  std::cout << "metric            value\n";
  std::cout << "bleu              " << score << "\n";
  std::cout << "repetition_rate   " << reps << "\n";
  std::cout << "sequence_accuracy " << acc << "\n";
  for (const BucketScore& b : buckets) {
    std::cout << "bleu(len<=" << (b.max_len == std::numeric_limits<int>::max()
                                      ? std::string("inf")
                                      : std::to_string(b.max_len))
              << ")     " << b.score << " over " << b.pairs << " pairs\n";
  }
  std::cout << "\nbleu=" << score << "\nrepetition_rate=" << reps
            << "\nsequence_accuracy=" << acc << "\npairs=" << hyps.size() << "\n";
  for (const BucketScore& b : buckets) {
    if (b.max_len == std::numeric_limits<int>::max()) {
      std::cout << "bucket_gt_last=" << b.score << "\n";
    } else {
      std::cout << "bucket_le_" << b.max_len << "=" << b.score << "\n";
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// oracle: self-contained equivalence and gradient self-checks.

double enumeration_nll(const Matrix& logits, const TokenSeq& y, int blank,
                       const PartialAlignment* observed, int mask_id) {
  const Matrix lp = log_softmax_rows(logits);
  const auto members = enumerate_alignments(y, static_cast<int>(logits.rows()), blank);
  long double total = 0.0L;
  for (const Alignment& a : members) {
    if (observed) {
      bool consistent = true;
      for (size_t t = 0; t < a.size(); ++t) {
        if ((*observed)[t] != mask_id && (*observed)[t] != a[t]) {
          consistent = false;
          break;
        }
      }
      if (!consistent) continue;
    }
    long double path = 0.0L;
    for (size_t t = 0; t < a.size(); ++t) path += lp(static_cast<int>(t), a[t]);
    total += expl(path);
  }
  return total > 0 ? -static_cast<double>(logl(total))
                   : std::numeric_limits<double>::infinity();
}

bool oracle_equivalence(Rng& rng, bool with_masks, int instances, double tol,
                        std::ostream& out, const char* label) {
  double worst = 0.0;
  int finite = 0;
  for (int i = 0; i < instances; ++i) {
    const int n_user = 1 + rng.uniform_int(4);  // |V| <= 4
    const int blank = n_user;
    const int mask_id = n_user + 1;
    const int L = 1 + rng.uniform_int(12);
    const int U = rng.uniform_int(std::min(L, 5) + 1);
    TokenSeq y(U);
    for (int& t : y) t = rng.uniform_int(n_user);
    Matrix logits(L, n_user + 1);
    for (int r = 0; r < L; ++r) {
      for (int c = 0; c <= n_user; ++c) logits(r, c) = 2.0 * rng.normal();
    }

    double got, expected;
    if (with_masks) {
      const auto members = enumerate_alignments(y, L, blank);
      if (members.empty()) continue;
      const Alignment& a = members[rng.uniform_int(static_cast<int>(members.size()))];
      PartialAlignment partial(a);
      for (int& f : partial) {
        if (rng.bernoulli(0.5)) f = mask_id;
      }
      got = imputer_loss(logits, y, partial, blank, mask_id).nll;
      expected = enumeration_nll(logits, y, blank, &partial, mask_id);

      // the all-mask case must coincide with the unconditioned loss exactly
      const PartialAlignment all_mask(L, mask_id);
      const double um = imputer_loss(logits, y, all_mask, blank, mask_id).nll;
      const double uc = ctc_loss(logits, y, blank).nll;
      if (std::isfinite(um) || std::isfinite(uc)) {
        if (std::abs(um - uc) > 1e-12 * std::max({1.0, std::abs(um), std::abs(uc)})) {
          out << label << " fail all_mask_gap=" << std::abs(um - uc) << "\n";
          return false;
        }
      }
    } else {
      got = ctc_loss(logits, y, blank).nll;
      expected = enumeration_nll(logits, y, blank, nullptr, 0);
    }

    if (!std::isfinite(expected)) {
      if (std::isfinite(got)) {
        out << label << " fail: finite loss on an impossible instance\n";
        return false;
      }
      continue;
    }
    ++finite;
    const double rel = std::abs(got - expected) / std::max(1.0, std::abs(expected));
    worst = std::max(worst, rel);
  }
  const bool ok = worst < tol && finite > instances / 2;
  out << label << (ok ? " pass" : " FAIL") << " instances=" << finite << " worst_rel=" << worst
      << "\n";
  return ok;
}

bool oracle_loss_gradients(Rng& rng, std::ostream& out) {
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const int n_user = 2 + rng.uniform_int(2);
    const int blank = n_user;
    const int L = 3 + rng.uniform_int(5);
    const int U = 1 + rng.uniform_int(std::min(L, 3));
    TokenSeq y(U);
    for (int& t : y) t = rng.uniform_int(n_user);
    if (count_alignments(y, L, blank) == 0) continue;
    Matrix logits(L, n_user + 1);
    for (int r = 0; r < L; ++r) {
      for (int c = 0; c <= n_user; ++c) logits(r, c) = rng.normal();
    }
    const Matrix grad = ctc_loss(logits, y, blank).grad;
    for (int r = 0; r < L; ++r) {
      for (int c = 0; c <= n_user; ++c) {
        const double keep = logits(r, c);
        logits(r, c) = keep + 1e-5;
        const double up = ctc_loss(logits, y, blank).nll;
        logits(r, c) = keep - 1e-5;
        const double dn = ctc_loss(logits, y, blank).nll;
        logits(r, c) = keep;
        const double fd = (up - dn) / 2e-5;
        const double rel =
            std::abs(fd - grad(r, c)) / std::max({std::abs(fd), std::abs(grad(r, c)), 1e-6});
        worst = std::max(worst, rel);
      }
    }
  }
  const bool ok = worst < 1e-4;
  out << "loss_gradients" << (ok ? " pass" : " FAIL") << " worst_rel=" << worst << "\n";
  return ok;
}

bool oracle_model_gradients(Rng& rng, std::ostream& out) {
  ModelConfig cfg(make_symbol_vocab(3));
  cfg.depth = 1;
  cfg.d_model = 8;
  cfg.d_ff = 16;
  cfg.heads = 2;
  cfg.s = 2;
  cfg.dropout = 0.0;
  ModelParams params = init_model_params(cfg, rng);
  AlignerBatch batch;
  batch.xs = {{0, 1, 2}, {2, 0}};
  const std::vector<TokenSeq> ys = {{0, 1}, {2}};
  const int blank = cfg.vocab.blank_id();

  const auto loss = [&]() {
    const AlignerTrace tr = aligner_forward(params, cfg, batch);
    double total = 0.0;
    for (int b = 0; b < tr.blocks(); ++b) {
      total += ctc_loss(tr.block_logits(b), ys[b], blank).nll;
    }
    return total;
  };
  const AlignerTrace tr = aligner_forward(params, cfg, batch);
  Matrix dlogits = Matrix::Zero(tr.logits.rows(), tr.logits.cols());
  for (int b = 0; b < tr.blocks(); ++b) {
    dlogits.middleRows(tr.offsets[b], tr.block_rows(b)) =
        ctc_loss(tr.block_logits(b), ys[b], blank).grad;
  }
  ModelParams grads = zeros_like(params);
  aligner_backward(params, cfg, batch, tr, dlogits, grads);

  double worst = 0.0;
  const auto pv = param_views(params);
  const auto gv = param_views(grads);
  for (size_t i = 0; i < pv.size(); ++i) {
    for (Eigen::Index e = 0; e < pv[i].size(); ++e) {
      double& x = pv[i].data[e];
      const double keep = x;
      x = keep + 1e-5;
      const double up = loss();
      x = keep - 1e-5;
      const double dn = loss();
      x = keep;
      const double fd = (up - dn) / 2e-5;
      const double an = gv[i].data[e];
      worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6}));
    }
  }
  const bool ok = worst < 1e-3;
  out << "model_gradients" << (ok ? " pass" : " FAIL") << " worst_rel=" << worst << "\n";
  return ok;
}

int run_oracle(uint64_t seed) {
  Rng rng(seed);
  bool ok = true;
  ok &= oracle_equivalence(rng, false, 1000, 1e-8, std::cout, "marginal_equivalence");
  ok &= oracle_equivalence(rng, true, 400, 1e-8, std::cout, "masked_equivalence");
  ok &= oracle_loss_gradients(rng, std::cout);
  ok &= oracle_model_gradients(rng, std::cout);
  std::cout << (ok ? "oracle=pass" : "oracle=FAIL") << "\n";
  return ok ? 0 : 1;
}

int run_bench(const std::string& ckpt_path, const std::string& input_path,
              const std::string& steps_csv) {
  const AlignerCheckpoint ckpt = load_aligner_checkpoint(ckpt_path);
  const ModelConfig& cfg = ckpt.model_config;
  const std::vector<TokenSeq> sources = read_source_lines(input_path, cfg.vocab);
  const ModelFn fn = model_fn_of(ckpt.params, cfg);

  std::vector<int> step_counts;
  std::istringstream csv(steps_csv);
  std::string item;
  while (std::getline(csv, item, ',')) step_counts.push_back(std::stoi(item));
  if (step_counts.empty()) throw std::runtime_error("--steps list is empty");

  for (const int steps : step_counts) {
    const DecodeSchedule schedule{steps, 0};
    long calls = 0;
    long out_tokens = 0;
    const auto t0 = std::chrono::steady_clock::now();
    for (const TokenSeq& x : sources) {
      const DecodeResult res = imputer_decode(fn, x, cfg.canvas_length(static_cast<int>(x.size())),
                                              schedule, cfg.vocab.blank_id(),
                                              cfg.vocab.mask_id());
      calls += res.model_calls;
      out_tokens += static_cast<long>(res.output.size());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                               .count();
    std::cout << "steps=" << steps << " sentences=" << sources.size() << " model_calls=" << calls
              << " calls_per_sentence=" << static_cast<double>(calls) / sources.size()
              << " seconds=" << seconds
              << " sentences_per_second=" << sources.size() / std::max(seconds, 1e-9)
              << " output_tokens=" << out_tokens << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latent-alignment sequence transduction: data, training, decoding, evaluation"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "key=value config file; subcommand options go under a [subcommand] section "
                 "or as subcommand.key entries; explicit flags win over file values");
  app.allow_config_extras(CLI::config_extras_mode::error);

  std::function<int()> runner;

  // generate-data ------------------------------------------------------------
  auto* gen = app.add_subcommand("generate-data", "write synthetic TSV corpora and a vocab");
  {
    static std::string task = "copy", out_dir = ".";
    static int n_train = 2000, n_dev = 200, n_test = 200, vocab_size = 20, min_len = 3,
               max_len = 12, scale = 2;
    static uint64_t seed = 1;
    gen->fallthrough();
    gen->add_option("--task", task, "copy | reverse | lexicon | multimodal");
    gen->add_option("--train", n_train, "training pairs");
    gen->add_option("--dev", n_dev, "dev pairs");
    gen->add_option("--test", n_test, "test pairs");
    gen->add_option("--vocab-size", vocab_size, "user tokens");
    gen->add_option("--min-len", min_len, "minimum source length");
    gen->add_option("--max-len", max_len, "maximum source length");
    gen->add_option("--scale", scale, "canvas scale the corpora must satisfy");
    gen->add_option("--seed", seed, "generation seed");
    gen->add_option("--out", out_dir, "output directory")->required();
    gen->callback([&] {
      runner = [=] {
        return run_generate(task, n_train, n_dev, n_test, vocab_size, min_len, max_len, scale,
                            seed, out_dir);
      };
    });
  }

  // train-teacher --------------------------------------------------------------
  auto* tt = app.add_subcommand("train-teacher", "fit the autoregressive teacher");
  {
    static std::string train_path, dev_path, vocab_path, out_path;
    static ModelFlags mf;
    static TrainFlags tf;
    tt->fallthrough();
    tt->add_option("--train", train_path, "training TSV")->required();
    tt->add_option("--dev", dev_path, "dev TSV")->required();
    tt->add_option("--vocab", vocab_path, "vocab file")->required();
    tt->add_option("--out", out_path, "checkpoint path")->required();
    mf.attach(tt);
    tf.attach(tt);
    tt->callback([&] {
      runner = [=] { return run_train_teacher(train_path, dev_path, vocab_path, out_path, mf, tf); };
    });
  }

  // distill --------------------------------------------------------------------
  auto* dis = app.add_subcommand("distill", "rewrite training targets with teacher decodes");
  {
    static std::string teacher_path, train_path, out_path;
    dis->fallthrough();
    dis->add_option("--teacher", teacher_path, "teacher checkpoint")->required();
    dis->add_option("--train", train_path, "training TSV to rewrite")->required();
    dis->add_option("--out", out_path, "distilled TSV path")->required();
    dis->callback([&] {
      runner = [=] { return run_distill(teacher_path, train_path, out_path); };
    });
  }

  // train ------------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "train an aligner (single-pass or iterative mode)");
  {
    static std::string mode = "ctc", train_path, dev_path, vocab_path, init_path, out_path;
    static ModelFlags mf;
    static TrainFlags tf;
    tr->fallthrough();
    tr->add_option("--mode", mode, "ctc | imputer");
    tr->add_option("--train", train_path, "training TSV")->required();
    tr->add_option("--dev", dev_path, "dev TSV")->required();
    tr->add_option("--vocab", vocab_path, "vocab file")->required();
    tr->add_option("--init", init_path, "warm-start aligner checkpoint");
    tr->add_option("--out", out_path, "checkpoint path")->required();
    mf.attach(tr);
    tf.attach(tr);
    tr->callback([&] {
      runner = [=] {
        return run_train(mode, train_path, dev_path, vocab_path, init_path, out_path, mf, tf);
      };
    });
  }

  // decode -----------------------------------------------------------------
  auto* dec = app.add_subcommand("decode", "decode sources with a trained aligner");
  {
    static std::string ckpt_path, input_path, out_path, trace_path;
    static int steps = 0;
    dec->fallthrough();
    dec->add_option("--ckpt", ckpt_path, "aligner checkpoint")->required();
    dec->add_option("--input", input_path, "source lines (TSV accepted; targets ignored)")
        ->required();
    dec->add_option("--steps", steps,
                    "iterative decode steps T (omit or 0: single-pass lattice argmax)");
    dec->add_option("--out", out_path, "hypothesis file")->required();
    dec->add_option("--trace", trace_path, "canvas trace file (T-step decoding only)");
    dec->callback([&] {
      runner = [=] { return run_decode(ckpt_path, input_path, steps, out_path, trace_path); };
    });
  }

  // eval -------------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "score hypotheses against references");
  {
    static std::string hyp_path, ref_path;
    ev->fallthrough();
    ev->add_option("--hyp", hyp_path, "hypothesis token lines")->required();
    ev->add_option("--ref", ref_path, "reference token lines (TSV accepted; targets used)")
        ->required();
    ev->callback([&] {
      runner = [=] { return run_eval(hyp_path, ref_path); };
    });
  }

  // oracle -----------------------------------------------------------------
  auto* orc = app.add_subcommand("oracle", "run the brute-force and gradient self-checks");
  {
    static uint64_t seed = 12345;
    orc->fallthrough();
    orc->add_option("--seed", seed, "instance seed");
    orc->callback([&] {
      runner = [=] { return run_oracle(seed); };
    });
  }

  // bench --------------------------------------------------------------------
  auto* bn = app.add_subcommand("bench", "decode-step accounting and throughput");
  {
    static std::string ckpt_path, input_path, steps_csv = "1,2,4,8";
    bn->fallthrough();
    bn->add_option("--ckpt", ckpt_path, "aligner checkpoint")->required();
    bn->add_option("--input", input_path, "source lines")->required();
    bn->add_option("--steps", steps_csv, "comma-separated step counts");
    bn->callback([&] {
      runner = [=] { return run_bench(ckpt_path, input_path, steps_csv); };
    });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    return runner ? runner() : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
