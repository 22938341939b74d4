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

#ifndef LATALIGN_MODEL_HPP
#define LATALIGN_MODEL_HPP

#include <string>
#include <vector>

#include "latalign/rng.hpp"
#include "latalign/types.hpp"
#include "latalign/vocab.hpp"

namespace latalign {

// Scoring model: token embeddings, s-fold upsampling (one affine map per
// sub-position), optional superposition with a partial-alignment embedding,
// a bidirectional pre-layer-norm self-attention stack, and a projection onto
// the scoreable symbols. The same stack with a causal mask serves as the
// autoregressive teacher that generates distilled training data.
//
// Conventions: double precision, row-major activations with one row per
// position, row-vector affine maps (out = in * W + b). Backward passes are
// hand-written reverse mode; the seam with the lattice losses is
// d(loss)/d(logits). Batches are packed: all sequences are concatenated into
// one tall activation matrix so pointwise ops and projections run as single
// products; only attention loops over per-sequence row blocks.

struct ModelConfig {
  explicit ModelConfig(Vocab v) : vocab(std::move(v)) {}

  int depth = 2;
  int d_model = 64;
  int d_ff = 256;
  int heads = 4;
  int s = 2;                     // canvas scale: lattice length is s * |x|
  double dropout = 0.1;          // residual-branch dropout, training only
  bool use_pos_encoding = true;  // sinusoidal; disable for equivariance checks
  int max_positions = 2048;      // teacher rejects longer concatenations
  Vocab vocab;

  int canvas_length(int source_length) const { return s * source_length; }
  int head_dim() const { return d_model / heads; }

  /// Throws std::invalid_argument unless d_model is an even multiple of
  /// heads, s >= 1, depth >= 0, and dropout is in [0, 1).
  void validate() const;
};

/// One pre-layer-norm residual block: self-attention then feed-forward.
struct LayerParams {
  Vector ln1_g, ln1_b;
  Matrix Wq, Wk, Wv, Wo;  // d_model x d_model
  Vector bq, bk, bv, bo;
  Vector ln2_g, ln2_b;
  Matrix W1;  // d_model x d_ff
  Vector b1;
  Matrix W2;  // d_ff x d_model
  Vector b2;
};

struct StackParams {
  std::vector<LayerParams> layers;
  Vector lnf_g, lnf_b;  // final layer norm, applied before the output head
};

/// Aligner parameters. The embedding table covers user tokens, blank, and
/// mask (row order = token id); the output projection covers user tokens and
/// blank only — mask is never scored.
struct ModelParams {
  Matrix embed;                // (K + 1) x d_model, K = vocab.num_scored()
  std::vector<Matrix> up_W;    // s upsampling maps, d_model x d_model
  std::vector<Vector> up_b;
  StackParams stack;
  Matrix out_W;  // d_model x K
  Vector out_b;
};

/// Causal teacher over [source, SEP, target-prefix] concatenations. Id layout
/// appends END and SEP after the user tokens; the output head covers user
/// tokens plus END.
struct TeacherParams {
  Matrix embed;  // (V + 2) x d_model: user tokens, END, SEP
  StackParams stack;
  Matrix out_W;  // d_model x (V + 1)
  Vector out_b;
};

inline int teacher_end_id(const Vocab& v) { return v.num_user_tokens(); }
inline int teacher_sep_id(const Vocab& v) { return v.num_user_tokens() + 1; }

/// Named window onto one parameter tensor (row-major contiguous). The
/// enumeration order is fixed and shared by the optimizer state, the
/// finite-difference harness, and the checkpoint format.
struct ParamView {
  std::string name;
  double* data;
  Eigen::Index rows;
  Eigen::Index cols;
  Eigen::Index size() const { return rows * cols; }
};

std::vector<ParamView> param_views(ModelParams& p);
std::vector<ParamView> param_views(TeacherParams& p);
/// Read-only callers (serialization, norms) get the same views; do not write
/// through them.
std::vector<ParamView> param_views(const ModelParams& p);
std::vector<ParamView> param_views(const TeacherParams& p);

/// Same shapes as `p`, all entries zero — gradient and optimizer-state
/// buffers.
template <class Params>
Params zeros_like(const Params& p) {
  Params z = p;
  for (ParamView& v : param_views(z)) {
    Eigen::Map<Vector>(v.data, v.size()).setZero();
  }
  return z;
}

/// Allocation with zero weights (shape reference, e.g. checkpoint loading).
ModelParams zero_model_params(const ModelConfig& config);
TeacherParams zero_teacher_params(const ModelConfig& config);

/// Xavier-uniform projections, N(0, 0.02) embeddings, identity layer norms,
/// zero biases. The mask embedding row is zeroed so an all-mask canvas scores
/// identically to the unconditioned forward pass until training moves it.
ModelParams init_model_params(const ModelConfig& config, Rng& rng);
TeacherParams init_teacher_params(const ModelConfig& config, Rng& rng);

/// Sinusoidal position features: row p holds sin(p * f_i), cos(p * f_i)
/// interleaved over geometrically spaced frequencies f_i.
Matrix sinusoidal_encoding(int length, int d_model);

// ---------------------------------------------------------------------------
// Packed-batch forward/backward.

/// Sources plus (optionally) one partial alignment per source. `aligns` empty
/// means no alignment conditioning; otherwise aligns[b] must have length
/// s * |xs[b]| with frame symbols in [0, mask_id].
struct AlignerBatch {
  std::vector<TokenSeq> xs;
  std::vector<PartialAlignment> aligns;

  bool conditioned() const { return !aligns.empty(); }
};

/// Per-layer activation cache for reverse mode.
struct LayerTrace {
  Matrix h_in;             // block input
  Vector ln1_mu, ln1_rstd;
  Matrix u;                // first layer-norm output
  Matrix Q, K, V;
  std::vector<Matrix> attn;  // softmax probabilities, indexed block*heads+head
  Matrix ctx;                // per-head contexts, concatenated (pre-Wo)
  Matrix drop_attn;          // inverted-dropout mask; empty when inactive
  Matrix h_mid;              // after the attention residual
  Vector ln2_mu, ln2_rstd;
  Matrix ln2_out;
  Matrix ff_pre;  // pre-activation, n x d_ff
  Matrix drop_ff;
};

struct StackTrace {
  std::vector<LayerTrace> layers;
  Matrix h_last;  // input of the final layer norm
  Vector lnf_mu, lnf_rstd;
  Matrix hn;  // final layer-norm output
};

struct AlignerTrace {
  std::vector<int> offsets;      // B+1 canvas row offsets into packed matrices
  std::vector<int> src_offsets;  // B+1 source row offsets
  Matrix src_embed;              // packed source embeddings (pre-upsampling)
  StackTrace stack;
  Matrix logits;  // total canvas rows x K

  int blocks() const { return static_cast<int>(offsets.size()) - 1; }
  int block_rows(int b) const { return offsets[b + 1] - offsets[b]; }
  Matrix block_logits(int b) const {
    return logits.middleRows(offsets[b], block_rows(b));
  }
};

/// Scores a packed batch. Pass a dropout RNG only during training; with
/// nullptr (or dropout 0) the pass is deterministic.
AlignerTrace aligner_forward(const ModelParams& params, const ModelConfig& config,
                             const AlignerBatch& batch, Rng* dropout_rng = nullptr);

/// Reverse mode seeded by d(loss)/d(logits); accumulates into `grads`
/// (shapes of zeros_like(params)).
void aligner_backward(const ModelParams& params, const ModelConfig& config,
                      const AlignerBatch& batch, const AlignerTrace& trace,
                      const Matrix& dlogits, ModelParams& grads);

/// Single-sequence lattices (inference paths). forward_ctc conditions on
/// nothing; forward_imputer superposes the partial-alignment embedding.
Matrix forward_ctc(const ModelParams& params, const ModelConfig& config, const TokenSeq& x);
Matrix forward_imputer(const ModelParams& params, const ModelConfig& config, const TokenSeq& x,
                       const PartialAlignment& align);

// ---------------------------------------------------------------------------
// Teacher.

/// Pairs are scored over the concatenation [x, SEP, y]: the row at SEP
/// predicts y_0, subsequent rows the following tokens, and the last row END.
struct TeacherBatch {
  std::vector<TokenSeq> xs;
  std::vector<TokenSeq> ys;
};

struct TeacherTrace {
  std::vector<int> offsets;  // B+1 row offsets
  std::vector<int> sep_row;  // absolute row index of each block's SEP
  StackTrace stack;
  Matrix logits;  // total rows x (V + 1)

  int blocks() const { return static_cast<int>(offsets.size()) - 1; }
};

TeacherTrace teacher_forward(const TeacherParams& params, const ModelConfig& config,
                             const TeacherBatch& batch, Rng* dropout_rng = nullptr);
void teacher_backward(const TeacherParams& params, const ModelConfig& config,
                      const TeacherBatch& batch, const TeacherTrace& trace,
                      const Matrix& dlogits, TeacherParams& grads);

/// Next-token log-probabilities (user tokens + END) after consuming
/// [x, SEP, y_prefix]. Rejects inputs exceeding config.max_positions.
Vector forward_teacher(const TeacherParams& params, const ModelConfig& config, const TokenSeq& x,
                       const TokenSeq& y_prefix);

/// Greedy rollout until END or max_target_length tokens.
TokenSeq teacher_greedy_decode(const TeacherParams& params, const ModelConfig& config,
                               const TokenSeq& x, int max_target_length);

}  // namespace latalign

#endif  // LATALIGN_MODEL_HPP
