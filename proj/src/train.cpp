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

#include "latalign/train.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "latalign/ctc.hpp"
#include "latalign/eval.hpp"
#include "latalign/imputer.hpp"
#include "latalign/numeric.hpp"
#include "latalign/rng.hpp"

namespace latalign {
namespace {

// ---------------------------------------------------------------------------
// Optimizer plumbing, generic over the parameter struct via param_views.

template <class Params>
void clip_gradients(Params& grads, double clip_norm) {
  double sq = 0.0;
  for (const ParamView& v : param_views(grads)) {
    sq += Eigen::Map<const Vector>(v.data, v.size()).squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (norm > clip_norm) {
    const double scale = clip_norm / norm;
    for (const ParamView& v : param_views(grads)) {
      Eigen::Map<Vector>(v.data, v.size()) *= scale;
    }
  }
}

template <class Params>
struct Adam {
  Params m, v;
  int t = 0;

  explicit Adam(const Params& shape) : m(zeros_like(shape)), v(zeros_like(shape)) {}

  void step(Params& params, const Params& grads, double lr, const TrainConfig& tc) {
    ++t;
    const double bc1 = 1.0 - std::pow(tc.beta1, t);
    const double bc2 = 1.0 - std::pow(tc.beta2, t);
    const auto pv = param_views(params);
    const auto gv = param_views(grads);
    const auto mv = param_views(m);
    const auto vv = param_views(v);
    for (size_t i = 0; i < pv.size(); ++i) {
      auto p = Eigen::Map<Vector>(pv[i].data, pv[i].size());
      const auto g = Eigen::Map<const Vector>(gv[i].data, gv[i].size());
      auto m1 = Eigen::Map<Vector>(mv[i].data, mv[i].size());
      auto m2 = Eigen::Map<Vector>(vv[i].data, vv[i].size());
      m1 = tc.beta1 * m1 + (1.0 - tc.beta1) * g;
      m2 = tc.beta2 * m2 + (1.0 - tc.beta2) * g.cwiseProduct(g);
      p.array() -= lr * (m1.array() / bc1) / ((m2.array() / bc2).sqrt() + tc.adam_eps);
    }
  }
};

/// Keeps the best-scoring parameter snapshots (at most five), best first.
template <class Params>
struct BestTracker {
  std::vector<std::pair<double, Params>> best;

  void offer(double score, const Params& params) {
    best.emplace_back(score, params);
    std::stable_sort(best.begin(), best.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    if (best.size() > 5) best.pop_back();
  }

  double best_score() const { return best.empty() ? 0.0 : best.front().first; }

  Params result(bool average) const {
    if (best.empty()) throw std::logic_error("train: no evaluated checkpoint to return");
    if (!average || best.size() == 1) return best.front().second;
    Params avg = zeros_like(best.front().second);
    const auto av = param_views(avg);
    for (const auto& [score, snapshot] : best) {
      const auto sv = param_views(snapshot);
      for (size_t i = 0; i < av.size(); ++i) {
        Eigen::Map<Vector>(av[i].data, av[i].size()) +=
            Eigen::Map<const Vector>(sv[i].data, sv[i].size());
      }
    }
    const double inv = 1.0 / static_cast<double>(best.size());
    for (size_t i = 0; i < av.size(); ++i) Eigen::Map<Vector>(av[i].data, av[i].size()) *= inv;
    return avg;
  }
};

void check_corpora(const Corpus& train, const Corpus& dev, const ModelConfig& cfg) {
  if (train.pairs.empty() || dev.pairs.empty()) {
    throw std::invalid_argument("train: empty corpus");
  }
  for (size_t i = 0; i < train.pairs.size(); ++i) {
    const Pair& p = train.pairs[i];
    if (p.source.empty()) {
      throw std::invalid_argument("train: empty source at pair " + std::to_string(i));
    }
    const int canvas = cfg.canvas_length(static_cast<int>(p.source.size()));
    if (static_cast<int>(p.target.size()) > canvas) {
      throw std::invalid_argument("train: target of pair " + std::to_string(i) + " has length " +
                                  std::to_string(p.target.size()) + " > " + std::to_string(canvas) +
                                  " canvas frames");
    }
    if (needed_canvas_length(p.target) > canvas) {
      throw std::invalid_argument("train: target of pair " + std::to_string(i) +
                                  " cannot be embedded on " + std::to_string(canvas) +
                                  " frames (adjacent repeats need separating blanks)");
    }
  }
}

std::vector<TokenSeq> targets_of(const Corpus& corpus) {
  std::vector<TokenSeq> refs;
  refs.reserve(corpus.pairs.size());
  for (const Pair& p : corpus.pairs) refs.push_back(p.target);
  return refs;
}

std::vector<TokenSeq> greedy_dev_decodes(const ModelParams& params, const ModelConfig& cfg,
                                         const Corpus& dev) {
  std::vector<TokenSeq> hyps;
  hyps.reserve(dev.pairs.size());
  for (const Pair& p : dev.pairs) {
    hyps.push_back(ctc_greedy_decode(forward_ctc(params, cfg, p.source), cfg.vocab.blank_id()));
  }
  return hyps;
}

std::string format_log_line(const TrainLogEntry& e) {
  std::ostringstream out;
  out << e.step << '\t' << e.lr << '\t' << e.loss << '\t';
  if (e.dev_bleu < 0) {
    out << '-';
  } else {
    out << e.dev_bleu;
  }
  return out.str();
}

enum class AlignerMode { kCtc, kImputer };

TrainResult train_aligner(AlignerMode mode, const Corpus& train, const Corpus& dev,
                          const ModelConfig& cfg, const TrainConfig& tc, const ModelParams* init,
                          std::ostream* log_stream) {
  cfg.validate();
  tc.validate();
  check_corpora(train, dev, cfg);

  Rng root(tc.seed);
  Rng init_rng = root.fork(1);
  Rng order_rng = root.fork(2);
  Rng dropout_rng = root.fork(3);
  Rng mask_rng = root.fork(4);

  ModelParams params = init ? *init : init_model_params(cfg, init_rng);
  Adam<ModelParams> adam(params);
  BestTracker<ModelParams> tracker;
  const std::vector<TokenSeq> dev_refs = targets_of(dev);
  const int blank = cfg.vocab.blank_id();
  const int mask_id = cfg.vocab.mask_id();

  TrainResult result{zeros_like(params), 0.0, {}};
  int step = 0;
  while (step < tc.total_steps) {
    const auto batches = make_batches(train, tc.token_budget, order_rng.next_u64());
    for (const auto& batch : batches) {
      if (step >= tc.total_steps) break;
      ++step;
      const bool conditioned = mode == AlignerMode::kImputer && step > tc.stage_switch_step;

      AlignerBatch ab;
      std::vector<TokenSeq> ys;
      for (const int idx : batch) {
        ab.xs.push_back(train.pairs[idx].source);
        ys.push_back(train.pairs[idx].target);
      }

      if (conditioned) {
        // roll in an alignment per pair, then hide a Bernoulli subset of it
        std::vector<Alignment> rolled(ab.xs.size());
        if (tc.rollin_uniform) {
          for (size_t b = 0; b < ab.xs.size(); ++b) {
            const int canvas = cfg.canvas_length(static_cast<int>(ab.xs[b].size()));
            rolled[b] = uniform_random_alignment(ys[b], canvas, blank, mask_rng);
          }
        } else {
          AlignerBatch plain;
          plain.xs = ab.xs;
          const AlignerTrace roll = aligner_forward(params, cfg, plain);
          for (size_t b = 0; b < ab.xs.size(); ++b) {
            rolled[b] =
                rollin_alignment(roll.block_logits(static_cast<int>(b)), ys[b], blank);
          }
        }
        for (const Alignment& a : rolled) {
          ab.aligns.push_back(
              sample_mask(a, MaskPolicy::Bernoulli, mask_id, mask_rng.next_u64()));
        }
      }

      const AlignerTrace tr = aligner_forward(params, cfg, ab, &dropout_rng);
      Matrix dlogits = Matrix::Zero(tr.logits.rows(), tr.logits.cols());
      const double inv_b = 1.0 / static_cast<double>(ab.xs.size());
      double loss_sum = 0.0;
      for (int b = 0; b < tr.blocks(); ++b) {
        const LossResult lres =
            conditioned ? imputer_loss(tr.block_logits(b), ys[b], ab.aligns[b], blank, mask_id)
                        : ctc_loss(tr.block_logits(b), ys[b], blank);
        if (!std::isfinite(lres.nll)) {
          throw std::runtime_error("train: infinite loss at step " + std::to_string(step) +
                                   "; a target admits no alignment on its canvas");
        }
        loss_sum += lres.nll;
        dlogits.middleRows(tr.offsets[b], tr.block_rows(b)) = inv_b * lres.grad;
      }

      ModelParams grads = zeros_like(params);
      aligner_backward(params, cfg, ab, tr, dlogits, grads);
      clip_gradients(grads, tc.clip_norm);
      const double lr = lr_schedule(step, tc);
      adam.step(params, grads, lr, tc);

      TrainLogEntry entry{step, lr, loss_sum * inv_b, -1.0};
      if (step % tc.eval_every == 0 || step == tc.total_steps) {
        entry.dev_bleu = bleu(greedy_dev_decodes(params, cfg, dev), dev_refs);
        tracker.offer(entry.dev_bleu, params);
        if (log_stream) *log_stream << format_log_line(entry) << std::endl;
      }
      result.log.push_back(entry);
    }
  }

  result.params = tracker.result(tc.average_best);
  result.best_dev_bleu = tracker.best_score();
  return result;
}

}  // namespace

void TrainConfig::validate() const {
  if (peak_lr <= 0 || adam_eps <= 0 || clip_norm <= 0) {
    throw std::invalid_argument("train config: rates must be positive");
  }
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) {
    throw std::invalid_argument("train config: betas must lie in [0, 1)");
  }
  if (warmup_steps < 1 || total_steps < 1 || stage_switch_step < 1 || token_budget < 1 ||
      eval_every < 1) {
    throw std::invalid_argument("train config: step counts and budget must be positive");
  }
  if (warmup_steps >= total_steps) {
    throw std::invalid_argument("train config: warmup must end before the last step");
  }
  if (stage_switch_step > total_steps) {
    throw std::invalid_argument("train config: stage switch must not pass the last step");
  }
}

std::map<std::string, std::string> TrainConfig::echo() const {
  const auto fmt = [](double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
  };
  return {
      {"peak_lr", fmt(peak_lr)},
      {"beta1", fmt(beta1)},
      {"beta2", fmt(beta2)},
      {"adam_eps", fmt(adam_eps)},
      {"clip_norm", fmt(clip_norm)},
      {"warmup_steps", std::to_string(warmup_steps)},
      {"total_steps", std::to_string(total_steps)},
      {"stage_switch_step", std::to_string(stage_switch_step)},
      {"token_budget", std::to_string(token_budget)},
      {"eval_every", std::to_string(eval_every)},
      {"average_best", average_best ? "1" : "0"},
      {"rollin_uniform", rollin_uniform ? "1" : "0"},
      {"seed", std::to_string(seed)},
  };
}

double lr_schedule(int step, const TrainConfig& config) {
  if (step < 1) throw std::invalid_argument("lr_schedule: step must be >= 1");
  if (step <= config.warmup_steps) {
    return config.peak_lr * static_cast<double>(step) / config.warmup_steps;
  }
  return config.peak_lr * std::sqrt(static_cast<double>(config.warmup_steps) / step);
}

std::string format_train_log(const std::vector<TrainLogEntry>& log) {
  std::string out = "step\tlr\tloss\tdev_bleu\n";
  for (const TrainLogEntry& e : log) {
    out += format_log_line(e);
    out += '\n';
  }
  return out;
}

TrainResult train_ctc(const Corpus& train, const Corpus& dev, const ModelConfig& config,
                      const TrainConfig& train_config, std::ostream* log_stream) {
  return train_aligner(AlignerMode::kCtc, train, dev, config, train_config, nullptr, log_stream);
}

TrainResult train_imputer(const Corpus& train, const Corpus& dev, const ModelConfig& config,
                          const TrainConfig& train_config, const ModelParams* init,
                          std::ostream* log_stream) {
  return train_aligner(AlignerMode::kImputer, train, dev, config, train_config, init, log_stream);
}

TeacherTrainResult train_teacher(const Corpus& train, const Corpus& dev,
                                 const ModelConfig& config, const TrainConfig& train_config,
                                 std::ostream* log_stream) {
  config.validate();
  train_config.validate();
  if (train.pairs.empty() || dev.pairs.empty()) {
    throw std::invalid_argument("train: empty corpus");
  }
  for (const Corpus* c : {&train, &dev}) {
    for (const Pair& p : c->pairs) {
      const int rows = static_cast<int>(p.source.size() + p.target.size()) + 1;
      if (rows > config.max_positions) {
        throw std::invalid_argument("train: pair exceeds the teacher position limit");
      }
    }
  }

  Rng root(train_config.seed);
  Rng init_rng = root.fork(1);
  Rng order_rng = root.fork(2);
  Rng dropout_rng = root.fork(3);

  TeacherParams params = init_teacher_params(config, init_rng);
  Adam<TeacherParams> adam(params);
  BestTracker<TeacherParams> tracker;
  const std::vector<TokenSeq> dev_refs = targets_of(dev);
  const int end = teacher_end_id(config.vocab);

  TeacherTrainResult result{zero_teacher_params(config), 0.0, {}};
  int step = 0;
  while (step < train_config.total_steps) {
    const auto batches = make_batches(train, train_config.token_budget, order_rng.next_u64());
    for (const auto& batch : batches) {
      if (step >= train_config.total_steps) break;
      ++step;

      TeacherBatch tb;
      for (const int idx : batch) {
        tb.xs.push_back(train.pairs[idx].source);
        tb.ys.push_back(train.pairs[idx].target);
      }

      const TeacherTrace tr = teacher_forward(params, config, tb, &dropout_rng);
      const Matrix probs = softmax_rows(tr.logits);
      Matrix dlogits = Matrix::Zero(tr.logits.rows(), tr.logits.cols());
      double loss_sum = 0.0;
      long predictions = 0;
      for (int b = 0; b < tr.blocks(); ++b) {
        predictions += static_cast<long>(tb.ys[b].size()) + 1;
      }
      const double inv_n = 1.0 / static_cast<double>(predictions);
      for (int b = 0; b < tr.blocks(); ++b) {
        const TokenSeq& y = tb.ys[b];
        for (size_t j = 0; j <= y.size(); ++j) {
          const int row = tr.sep_row[b] + static_cast<int>(j);
          const int target = j < y.size() ? y[j] : end;
          loss_sum -= std::log(std::max(probs(row, target), 1e-300));
          dlogits.row(row) = inv_n * probs.row(row);
          dlogits(row, target) -= inv_n;
        }
      }

      TeacherParams grads = zeros_like(params);
      teacher_backward(params, config, tb, tr, dlogits, grads);
      clip_gradients(grads, train_config.clip_norm);
      const double lr = lr_schedule(step, train_config);
      adam.step(params, grads, lr, train_config);

      TrainLogEntry entry{step, lr, loss_sum * inv_n, -1.0};
      if (step % train_config.eval_every == 0 || step == train_config.total_steps) {
        std::vector<TokenSeq> hyps;
        hyps.reserve(dev.pairs.size());
        for (const Pair& p : dev.pairs) {
          const int cap = config.canvas_length(static_cast<int>(p.source.size()));
          hyps.push_back(teacher_greedy_decode(params, config, p.source, cap));
        }
        entry.dev_bleu = bleu(hyps, dev_refs);
        tracker.offer(entry.dev_bleu, params);
        if (log_stream) *log_stream << format_log_line(entry) << std::endl;
      }
      result.log.push_back(entry);
    }
  }

  result.params = tracker.result(train_config.average_best);
  result.best_dev_bleu = tracker.best_score();
  return result;
}

Corpus distill(const TeacherParams& teacher, const ModelConfig& config, const Corpus& corpus,
               DistillStats* stats) {
  DistillStats local;
  Corpus out;
  out.split = corpus.split;
  out.provenance = Provenance::kDistilled;
  for (const Pair& p : corpus.pairs) {
    const int canvas = config.canvas_length(static_cast<int>(p.source.size()));
    const TokenSeq decoded = teacher_greedy_decode(teacher, config, p.source, canvas);
    if (decoded.empty()) {
      ++local.skipped_empty;
      continue;
    }
    if (needed_canvas_length(decoded) > canvas) {
      ++local.skipped_too_long;
      continue;
    }
    ++local.kept;
    out.pairs.push_back({p.source, decoded});
  }
  if (stats) *stats = local;
  if (out.pairs.empty()) {
    throw std::runtime_error("distill: the teacher produced no usable targets");
  }
  return out;
}

}  // namespace latalign
