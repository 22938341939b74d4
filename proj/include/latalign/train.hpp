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

#ifndef LATALIGN_TRAIN_HPP
#define LATALIGN_TRAIN_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "latalign/data.hpp"
#include "latalign/model.hpp"

namespace latalign {

struct TrainConfig {
  double peak_lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.997;
  double adam_eps = 1e-9;
  double clip_norm = 1.0;     // global gradient norm
  int warmup_steps = 400;
  int total_steps = 2000;
  int stage_switch_step = 1000;  // all-mask stage ends here (imputer only)
  int token_budget = 512;        // per batch, counting max-length padding
  int eval_every = 200;          // dev evaluation cadence in steps
  bool average_best = false;     // average the 5 best dev checkpoints
  bool rollin_uniform = false;   // ablation: uniform-random roll-in
  uint64_t seed = 1;

  /// Throws std::invalid_argument unless warmup < total,
  /// stage_switch <= total, and every knob is positive where required.
  void validate() const;

  /// key=value echo stored in checkpoints.
  std::map<std::string, std::string> echo() const;
};

/// Linear warmup to peak_lr at warmup_steps, then inverse-square-root decay
/// peak_lr * sqrt(warmup/step). Continuous at the boundary, strictly
/// decreasing afterward. step >= 1.
double lr_schedule(int step, const TrainConfig& config);

struct TrainLogEntry {
  int step;
  double lr;
  double loss;
  double dev_bleu;  // negative when this step had no dev evaluation
};

/// Tab-separated "step lr loss dev_bleu" with a header line.
std::string format_train_log(const std::vector<TrainLogEntry>& log);

struct TrainResult {
  ModelParams params;  // best-dev parameters (or the 5-best average)
  double best_dev_bleu = 0.0;
  std::vector<TrainLogEntry> log;
};

/// Minimizes the mean exact-marginalization loss over length-bucketed
/// batches. Deterministic given config.seed (independent substreams drive
/// initialization, batch order, dropout, and masking). Aborts if any training
/// target exceeds s * |x| or cannot be embedded on its canvas. `log_stream`,
/// when given, receives tab-separated log lines as they happen.
TrainResult train_ctc(const Corpus& train, const Corpus& dev, const ModelConfig& config,
                      const TrainConfig& train_config, std::ostream* log_stream = nullptr);

/// Two-stage training: steps up to stage_switch_step run the unconditioned
/// all-mask stage (identical, draw for draw, to train_ctc); later steps roll
/// in an alignment — Viterbi under the current model, or uniform-random with
/// rollin_uniform — mask it with a uniform-ratio Bernoulli pattern, and
/// minimize the conditioned loss. `init` warm-starts the parameters.
TrainResult train_imputer(const Corpus& train, const Corpus& dev, const ModelConfig& config,
                          const TrainConfig& train_config, const ModelParams* init = nullptr,
                          std::ostream* log_stream = nullptr);

struct TeacherTrainResult {
  TeacherParams params;
  double best_dev_bleu = 0.0;
  std::vector<TrainLogEntry> log;
};

/// Next-token cross-entropy over [source, SEP, target] concatenations; dev
/// score is the BLEU of greedy decodes.
TeacherTrainResult train_teacher(const Corpus& train, const Corpus& dev,
                                 const ModelConfig& config, const TrainConfig& train_config,
                                 std::ostream* log_stream = nullptr);

struct DistillStats {
  int kept = 0;
  int skipped_empty = 0;
  int skipped_too_long = 0;
};

/// Replaces every training target with the teacher's greedy decode of the
/// source. Decodes that are empty or need more than s * |x| canvas frames are
/// skipped (and counted), so the result never exceeds the input in size.
/// Split and provenance tags: same split, provenance distilled.
Corpus distill(const TeacherParams& teacher, const ModelConfig& config, const Corpus& corpus,
               DistillStats* stats = nullptr);

}  // namespace latalign

#endif  // LATALIGN_TRAIN_HPP
