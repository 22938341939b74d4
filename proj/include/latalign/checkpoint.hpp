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

#ifndef LATALIGN_CHECKPOINT_HPP
#define LATALIGN_CHECKPOINT_HPP

#include <cstdint>
#include <map>
#include <string>

#include "latalign/model.hpp"

namespace latalign {

// Versioned binary checkpoint: magic + version, a kind tag ("ctc",
// "imputer", or "teacher"), the echoed run configuration, the step count,
// the vocabulary, the model configuration, and one named block per
// parameter tensor (the param_views enumeration). Loading validates the
// magic, version, kind, and every block name and shape.

struct AlignerCheckpoint {
  AlignerCheckpoint(ModelConfig cfg, ModelParams p)
      : model_config(std::move(cfg)), params(std::move(p)) {}

  std::string mode = "ctc";  // or "imputer"
  std::map<std::string, std::string> config;  // echoed training configuration
  uint64_t step = 0;
  ModelConfig model_config;
  ModelParams params;
};

struct TeacherCheckpoint {
  TeacherCheckpoint(ModelConfig cfg, TeacherParams p)
      : model_config(std::move(cfg)), params(std::move(p)) {}

  std::map<std::string, std::string> config;
  uint64_t step = 0;
  ModelConfig model_config;
  TeacherParams params;
};

void save_checkpoint(const AlignerCheckpoint& ckpt, const std::string& path);
void save_checkpoint(const TeacherCheckpoint& ckpt, const std::string& path);

/// Throw std::runtime_error on I/O failure, corruption, version or kind
/// mismatch, or any block shape that disagrees with the stored config.
AlignerCheckpoint load_aligner_checkpoint(const std::string& path);
TeacherCheckpoint load_teacher_checkpoint(const std::string& path);

/// Kind tag of a checkpoint file without loading the tensors.
std::string peek_checkpoint_kind(const std::string& path);

}  // namespace latalign

#endif  // LATALIGN_CHECKPOINT_HPP
