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

#include "latalign/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "latalign/numeric.hpp"

namespace latalign {
namespace {

constexpr double kLnEps = 1e-5;

using StridedRows = Eigen::Map<Matrix, 0, Eigen::OuterStride<>>;

/// View of rows first, first+stride, first+2*stride, ... of a packed
/// row-major matrix — the sub-position slices of an upsampled canvas.
StridedRows strided_rows(Matrix& m, Eigen::Index first, Eigen::Index count,
                         Eigen::Index stride) {
  return StridedRows(m.data() + first * m.cols(), count, m.cols(),
                     Eigen::OuterStride<>(stride * m.cols()));
}

void layer_norm_fwd(const Matrix& x, const Vector& g, const Vector& b, Matrix& out, Vector& mu,
                    Vector& rstd) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  out.resize(n, d);
  mu.resize(n);
  rstd.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    mu(i) = x.row(i).mean();
    const double var = (x.row(i).array() - mu(i)).square().sum() / static_cast<double>(d);
    rstd(i) = 1.0 / std::sqrt(var + kLnEps);
    out.row(i) =
        (((x.row(i).array() - mu(i)) * rstd(i)) * g.transpose().array() + b.transpose().array())
            .matrix();
  }
}

/// Returns d(loss)/dx; accumulates the gain/shift gradients.
Matrix layer_norm_bwd(const Matrix& x, const Vector& g, const Vector& mu, const Vector& rstd,
                      const Matrix& dout, Vector& dg, Vector& db) {
  const Eigen::Index n = x.rows();
  Matrix dx(n, x.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto xh = ((x.row(i).array() - mu(i)) * rstd(i)).eval();
    const auto dy = dout.row(i).array();
    dg += (dy * xh).matrix().transpose();
    db += dout.row(i).transpose();
    const auto dxh = (dy * g.transpose().array()).eval();
    const double m1 = dxh.mean();
    const double m2 = (dxh * xh).mean();
    dx.row(i) = (rstd(i) * (dxh - m1 - xh * m2)).matrix();
  }
  return dx;
}

/// Inverted dropout: entries are 0 or 1/(1-p), so eval needs no rescaling.
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  Matrix m(rows, cols);
  const double keep = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform() < p ? 0.0 : keep;
  }
  return m;
}

void stack_forward(const StackParams& sp, const ModelConfig& config, Matrix input,
                   const std::vector<int>& offsets, bool causal, Rng* dropout_rng,
                   StackTrace& tr) {
  const Eigen::Index n = input.rows();
  const int d = config.d_model;
  const int H = config.heads;
  const int dh = config.head_dim();
  const int B = static_cast<int>(offsets.size()) - 1;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool use_dropout = dropout_rng != nullptr && config.dropout > 0.0;

  tr.layers.clear();
  tr.layers.resize(sp.layers.size());
  Matrix h = std::move(input);
  for (size_t l = 0; l < sp.layers.size(); ++l) {
    const LayerParams& lp = sp.layers[l];
    LayerTrace& lt = tr.layers[l];
    lt.h_in = std::move(h);

    layer_norm_fwd(lt.h_in, lp.ln1_g, lp.ln1_b, lt.u, lt.ln1_mu, lt.ln1_rstd);
    lt.Q = lt.u * lp.Wq;
    lt.Q.rowwise() += lp.bq.transpose();
    lt.K = lt.u * lp.Wk;
    lt.K.rowwise() += lp.bk.transpose();
    lt.V = lt.u * lp.Wv;
    lt.V.rowwise() += lp.bv.transpose();
    lt.ctx.resize(n, d);
    lt.attn.assign(static_cast<size_t>(B) * H, Matrix());
    for (int b = 0; b < B; ++b) {
      const int r0 = offsets[b];
      const int L = offsets[b + 1] - r0;
      for (int head = 0; head < H; ++head) {
        const auto Qh = lt.Q.block(r0, head * dh, L, dh);
        const auto Kh = lt.K.block(r0, head * dh, L, dh);
        const auto Vh = lt.V.block(r0, head * dh, L, dh);
        Matrix S = Qh * Kh.transpose() * scale;
        if (causal) {
          for (int i = 0; i < L; ++i) {
            for (int j = i + 1; j < L; ++j) S(i, j) = kLogZero;
          }
        }
        Matrix& P = lt.attn[static_cast<size_t>(b) * H + head];
        P = softmax_rows(S);
        lt.ctx.block(r0, head * dh, L, dh) = P * Vh;
      }
    }
    Matrix branch = lt.ctx * lp.Wo;
    branch.rowwise() += lp.bo.transpose();
    if (use_dropout) {
      lt.drop_attn = dropout_mask(n, d, config.dropout, *dropout_rng);
      branch = branch.cwiseProduct(lt.drop_attn);
    }
    lt.h_mid = lt.h_in + branch;

    layer_norm_fwd(lt.h_mid, lp.ln2_g, lp.ln2_b, lt.ln2_out, lt.ln2_mu, lt.ln2_rstd);
    lt.ff_pre = lt.ln2_out * lp.W1;
    lt.ff_pre.rowwise() += lp.b1.transpose();
    Matrix ff = lt.ff_pre.cwiseMax(0.0) * lp.W2;
    ff.rowwise() += lp.b2.transpose();
    if (use_dropout) {
      lt.drop_ff = dropout_mask(n, d, config.dropout, *dropout_rng);
      ff = ff.cwiseProduct(lt.drop_ff);
    }
    h = lt.h_mid + ff;
  }
  tr.h_last = std::move(h);
  layer_norm_fwd(tr.h_last, sp.lnf_g, sp.lnf_b, tr.hn, tr.lnf_mu, tr.lnf_rstd);
}

/// Returns d(loss)/d(stack input); accumulates parameter gradients.
Matrix stack_backward(const StackParams& sp, const ModelConfig& config, const StackTrace& tr,
                      const std::vector<int>& offsets, const Matrix& d_hn, StackParams& gsp) {
  const int H = config.heads;
  const int dh = config.head_dim();
  const int B = static_cast<int>(offsets.size()) - 1;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix dh_cur =
      layer_norm_bwd(tr.h_last, sp.lnf_g, tr.lnf_mu, tr.lnf_rstd, d_hn, gsp.lnf_g, gsp.lnf_b);
  for (int l = static_cast<int>(sp.layers.size()) - 1; l >= 0; --l) {
    const LayerParams& lp = sp.layers[l];
    const LayerTrace& lt = tr.layers[l];
    LayerParams& gl = gsp.layers[l];
    const Eigen::Index n = dh_cur.rows();
    const Eigen::Index d = dh_cur.cols();

    // h_out = h_mid + drop ⊙ (relu(ln2_out·W1 + b1)·W2 + b2)
    Matrix d_branch = lt.drop_ff.size() != 0 ? dh_cur.cwiseProduct(lt.drop_ff) : dh_cur;
    const Matrix ff_act = lt.ff_pre.cwiseMax(0.0);
    gl.W2 += ff_act.transpose() * d_branch;
    gl.b2 += d_branch.colwise().sum().transpose();
    const Matrix d_pre = (d_branch * lp.W2.transpose())
                             .cwiseProduct((lt.ff_pre.array() > 0.0).cast<double>().matrix());
    gl.W1 += lt.ln2_out.transpose() * d_pre;
    gl.b1 += d_pre.colwise().sum().transpose();
    const Matrix d_ln2 = d_pre * lp.W1.transpose();
    Matrix dh_mid =
        dh_cur + layer_norm_bwd(lt.h_mid, lp.ln2_g, lt.ln2_mu, lt.ln2_rstd, d_ln2, gl.ln2_g,
                                gl.ln2_b);

    // h_mid = h_in + drop ⊙ (ctx·Wo + bo)
    d_branch = lt.drop_attn.size() != 0 ? dh_mid.cwiseProduct(lt.drop_attn) : dh_mid;
    gl.Wo += lt.ctx.transpose() * d_branch;
    gl.bo += d_branch.colwise().sum().transpose();
    const Matrix d_ctx = d_branch * lp.Wo.transpose();
    Matrix dQ = Matrix::Zero(n, d);
    Matrix dK = Matrix::Zero(n, d);
    Matrix dV = Matrix::Zero(n, d);
    for (int b = 0; b < B; ++b) {
      const int r0 = offsets[b];
      const int L = offsets[b + 1] - r0;
      for (int head = 0; head < H; ++head) {
        const Matrix& P = lt.attn[static_cast<size_t>(b) * H + head];
        const auto Qh = lt.Q.block(r0, head * dh, L, dh);
        const auto Kh = lt.K.block(r0, head * dh, L, dh);
        const auto Vh = lt.V.block(r0, head * dh, L, dh);
        const auto d_ctx_h = d_ctx.block(r0, head * dh, L, dh);
        const Matrix dP = d_ctx_h * Vh.transpose();
        dV.block(r0, head * dh, L, dh) = P.transpose() * d_ctx_h;
        // Row-wise softmax backward; masked cells have P = 0 so they stay 0.
        const Vector rs = dP.cwiseProduct(P).rowwise().sum();
        const Matrix dS = P.cwiseProduct(dP - rs * Eigen::RowVectorXd::Ones(L));
        dQ.block(r0, head * dh, L, dh) = dS * Kh * scale;
        dK.block(r0, head * dh, L, dh) = dS.transpose() * Qh * scale;
      }
    }
    gl.Wq += lt.u.transpose() * dQ;
    gl.bq += dQ.colwise().sum().transpose();
    gl.Wk += lt.u.transpose() * dK;
    gl.bk += dK.colwise().sum().transpose();
    gl.Wv += lt.u.transpose() * dV;
    gl.bv += dV.colwise().sum().transpose();
    const Matrix d_u = dQ * lp.Wq.transpose() + dK * lp.Wk.transpose() + dV * lp.Wv.transpose();
    dh_cur = dh_mid + layer_norm_bwd(lt.h_in, lp.ln1_g, lt.ln1_mu, lt.ln1_rstd, d_u, gl.ln1_g,
                                     gl.ln1_b);
  }
  return dh_cur;
}

void alloc_layer(LayerParams& l, int d, int d_ff) {
  l.ln1_g = Vector::Zero(d);
  l.ln1_b = Vector::Zero(d);
  l.Wq = Matrix::Zero(d, d);
  l.Wk = Matrix::Zero(d, d);
  l.Wv = Matrix::Zero(d, d);
  l.Wo = Matrix::Zero(d, d);
  l.bq = Vector::Zero(d);
  l.bk = Vector::Zero(d);
  l.bv = Vector::Zero(d);
  l.bo = Vector::Zero(d);
  l.ln2_g = Vector::Zero(d);
  l.ln2_b = Vector::Zero(d);
  l.W1 = Matrix::Zero(d, d_ff);
  l.b1 = Vector::Zero(d_ff);
  l.W2 = Matrix::Zero(d_ff, d);
  l.b2 = Vector::Zero(d);
}

StackParams alloc_stack(const ModelConfig& c) {
  StackParams sp;
  sp.layers.resize(c.depth);
  for (LayerParams& l : sp.layers) alloc_layer(l, c.d_model, c.d_ff);
  sp.lnf_g = Vector::Zero(c.d_model);
  sp.lnf_b = Vector::Zero(c.d_model);
  return sp;
}

void fill_xavier(Matrix& w, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-a, a);
  }
}

void fill_normal(Matrix& w, double stddev, Rng& rng) {
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = stddev * rng.normal();
  }
}

void init_stack(StackParams& sp, Rng& rng) {
  for (LayerParams& l : sp.layers) {
    l.ln1_g.setOnes();
    l.ln2_g.setOnes();
    fill_xavier(l.Wq, rng);
    fill_xavier(l.Wk, rng);
    fill_xavier(l.Wv, rng);
    fill_xavier(l.Wo, rng);
    fill_xavier(l.W1, rng);
    fill_xavier(l.W2, rng);
  }
  sp.lnf_g.setOnes();
}

void stack_views(StackParams& sp, std::vector<ParamView>& out) {
  for (size_t l = 0; l < sp.layers.size(); ++l) {
    LayerParams& lp = sp.layers[l];
    const std::string pre = "layer" + std::to_string(l) + ".";
    auto mat = [&](const char* name, Matrix& m) {
      out.push_back({pre + name, m.data(), m.rows(), m.cols()});
    };
    auto vec = [&](const char* name, Vector& v) {
      out.push_back({pre + name, v.data(), v.size(), 1});
    };
    vec("ln1.g", lp.ln1_g);
    vec("ln1.b", lp.ln1_b);
    mat("attn.Wq", lp.Wq);
    vec("attn.bq", lp.bq);
    mat("attn.Wk", lp.Wk);
    vec("attn.bk", lp.bk);
    mat("attn.Wv", lp.Wv);
    vec("attn.bv", lp.bv);
    mat("attn.Wo", lp.Wo);
    vec("attn.bo", lp.bo);
    vec("ln2.g", lp.ln2_g);
    vec("ln2.b", lp.ln2_b);
    mat("ffn.W1", lp.W1);
    vec("ffn.b1", lp.b1);
    mat("ffn.W2", lp.W2);
    vec("ffn.b2", lp.b2);
  }
  out.push_back({"final_ln.g", sp.lnf_g.data(), sp.lnf_g.size(), 1});
  out.push_back({"final_ln.b", sp.lnf_b.data(), sp.lnf_b.size(), 1});
}

/// Shared input checks for the aligner entry points.
void check_source(const Vocab& vocab, const TokenSeq& x) {
  if (x.empty()) throw std::invalid_argument("model: empty source sequence");
  for (int id : x) {
    if (!vocab.is_user_token(id)) {
      throw std::invalid_argument("model: source token id " + std::to_string(id) +
                                  " out of vocabulary");
    }
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (depth < 0) throw std::invalid_argument("model config: depth must be >= 0");
  if (d_model <= 0 || d_model % 2 != 0) {
    throw std::invalid_argument("model config: d_model must be positive and even");
  }
  if (d_ff <= 0) throw std::invalid_argument("model config: d_ff must be positive");
  if (heads <= 0 || d_model % heads != 0) {
    throw std::invalid_argument("model config: d_model must be divisible by heads");
  }
  if (s < 1) throw std::invalid_argument("model config: canvas scale must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw std::invalid_argument("model config: dropout must be in [0, 1)");
  }
  if (max_positions < 1) throw std::invalid_argument("model config: max_positions must be >= 1");
}

Matrix sinusoidal_encoding(int length, int d_model) {
  Matrix pe = Matrix::Zero(length, d_model);
  for (int pos = 0; pos < length; ++pos) {
    for (int i = 0; 2 * i + 1 < d_model; ++i) {
      const double freq = std::exp(-std::log(10000.0) * (2.0 * i / d_model));
      pe(pos, 2 * i) = std::sin(pos * freq);
      pe(pos, 2 * i + 1) = std::cos(pos * freq);
    }
  }
  return pe;
}

ModelParams zero_model_params(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  const int K = config.vocab.num_scored();
  p.embed = Matrix::Zero(K + 1, config.d_model);
  p.up_W.assign(config.s, Matrix::Zero(config.d_model, config.d_model));
  p.up_b.assign(config.s, Vector::Zero(config.d_model));
  p.stack = alloc_stack(config);
  p.out_W = Matrix::Zero(config.d_model, K);
  p.out_b = Vector::Zero(K);
  return p;
}

TeacherParams zero_teacher_params(const ModelConfig& config) {
  config.validate();
  TeacherParams p;
  const int V = config.vocab.num_user_tokens();
  p.embed = Matrix::Zero(V + 2, config.d_model);
  p.stack = alloc_stack(config);
  p.out_W = Matrix::Zero(config.d_model, V + 1);
  p.out_b = Vector::Zero(V + 1);
  return p;
}

ModelParams init_model_params(const ModelConfig& config, Rng& rng) {
  ModelParams p = zero_model_params(config);
  fill_normal(p.embed, 0.02, rng);
  // A fresh all-mask canvas must score exactly like the unconditioned pass,
  // so iterative decoding of a checkpoint that never trained the mask row
  // (pure marginalization training) matches greedy decoding bit for bit.
  p.embed.row(config.vocab.mask_id()).setZero();
  for (Matrix& w : p.up_W) fill_xavier(w, rng);
  init_stack(p.stack, rng);
  fill_xavier(p.out_W, rng);
  return p;
}

TeacherParams init_teacher_params(const ModelConfig& config, Rng& rng) {
  TeacherParams p = zero_teacher_params(config);
  fill_normal(p.embed, 0.02, rng);
  init_stack(p.stack, rng);
  fill_xavier(p.out_W, rng);
  return p;
}

std::vector<ParamView> param_views(ModelParams& p) {
  std::vector<ParamView> out;
  out.push_back({"embed", p.embed.data(), p.embed.rows(), p.embed.cols()});
  for (size_t r = 0; r < p.up_W.size(); ++r) {
    const std::string pre = "up" + std::to_string(r) + ".";
    out.push_back({pre + "W", p.up_W[r].data(), p.up_W[r].rows(), p.up_W[r].cols()});
    out.push_back({pre + "b", p.up_b[r].data(), p.up_b[r].size(), 1});
  }
  stack_views(p.stack, out);
  out.push_back({"out.W", p.out_W.data(), p.out_W.rows(), p.out_W.cols()});
  out.push_back({"out.b", p.out_b.data(), p.out_b.size(), 1});
  return out;
}

std::vector<ParamView> param_views(TeacherParams& p) {
  std::vector<ParamView> out;
  out.push_back({"embed", p.embed.data(), p.embed.rows(), p.embed.cols()});
  stack_views(p.stack, out);
  out.push_back({"out.W", p.out_W.data(), p.out_W.rows(), p.out_W.cols()});
  out.push_back({"out.b", p.out_b.data(), p.out_b.size(), 1});
  return out;
}

std::vector<ParamView> param_views(const ModelParams& p) {
  return param_views(const_cast<ModelParams&>(p));
}

std::vector<ParamView> param_views(const TeacherParams& p) {
  return param_views(const_cast<TeacherParams&>(p));
}

AlignerTrace aligner_forward(const ModelParams& params, const ModelConfig& config,
                             const AlignerBatch& batch, Rng* dropout_rng) {
  config.validate();
  const int B = static_cast<int>(batch.xs.size());
  if (B == 0) throw std::invalid_argument("aligner_forward: empty batch");
  if (batch.conditioned() && batch.aligns.size() != batch.xs.size()) {
    throw std::invalid_argument("aligner_forward: alignment/source count mismatch");
  }
  const int d = config.d_model;
  const int s = config.s;
  const Vocab& vocab = config.vocab;

  AlignerTrace tr;
  tr.offsets.resize(B + 1);
  tr.src_offsets.resize(B + 1);
  tr.offsets[0] = 0;
  tr.src_offsets[0] = 0;
  int max_canvas = 0;
  for (int b = 0; b < B; ++b) {
    check_source(vocab, batch.xs[b]);
    const int m = static_cast<int>(batch.xs[b].size());
    tr.src_offsets[b + 1] = tr.src_offsets[b] + m;
    tr.offsets[b + 1] = tr.offsets[b] + config.canvas_length(m);
    max_canvas = std::max(max_canvas, config.canvas_length(m));
  }

  tr.src_embed.resize(tr.src_offsets[B], d);
  for (int b = 0; b < B; ++b) {
    for (size_t i = 0; i < batch.xs[b].size(); ++i) {
      tr.src_embed.row(tr.src_offsets[b] + static_cast<int>(i)) =
          params.embed.row(batch.xs[b][i]);
    }
  }

  Matrix input(tr.offsets[B], d);
  for (int b = 0; b < B; ++b) {
    const int m = static_cast<int>(batch.xs[b].size());
    const auto src = tr.src_embed.middleRows(tr.src_offsets[b], m);
    for (int r = 0; r < s; ++r) {
      auto rows = strided_rows(input, tr.offsets[b] + r, m, s);
      rows = src * params.up_W[r];
      rows.rowwise() += params.up_b[r].transpose();
    }
  }
  if (batch.conditioned()) {
    for (int b = 0; b < B; ++b) {
      const PartialAlignment& a = batch.aligns[b];
      const int L = tr.offsets[b + 1] - tr.offsets[b];
      if (static_cast<int>(a.size()) != L) {
        throw std::invalid_argument("aligner_forward: partial alignment length " +
                                    std::to_string(a.size()) + " != canvas length " +
                                    std::to_string(L));
      }
      for (int j = 0; j < L; ++j) {
        if (a[j] < 0 || a[j] > vocab.mask_id()) {
          throw std::invalid_argument("aligner_forward: bad frame symbol " +
                                      std::to_string(a[j]));
        }
        input.row(tr.offsets[b] + j) += params.embed.row(a[j]);
      }
    }
  }
  if (config.use_pos_encoding) {
    const Matrix pe = sinusoidal_encoding(max_canvas, d);
    for (int b = 0; b < B; ++b) {
      const int L = tr.offsets[b + 1] - tr.offsets[b];
      input.middleRows(tr.offsets[b], L) += pe.topRows(L);
    }
  }

  stack_forward(params.stack, config, std::move(input), tr.offsets, /*causal=*/false,
                dropout_rng, tr.stack);
  tr.logits = tr.stack.hn * params.out_W;
  tr.logits.rowwise() += params.out_b.transpose();
  return tr;
}

void aligner_backward(const ModelParams& params, const ModelConfig& config,
                      const AlignerBatch& batch, const AlignerTrace& trace,
                      const Matrix& dlogits, ModelParams& grads) {
  if (dlogits.rows() != trace.logits.rows() || dlogits.cols() != trace.logits.cols()) {
    throw std::invalid_argument("aligner_backward: lattice gradient shape mismatch");
  }
  grads.out_W += trace.stack.hn.transpose() * dlogits;
  grads.out_b += dlogits.colwise().sum().transpose();
  const Matrix d_hn = dlogits * params.out_W.transpose();
  Matrix dX = stack_backward(params.stack, config, trace.stack, trace.offsets, d_hn, grads.stack);

  const int B = trace.blocks();
  const int s = config.s;
  if (batch.conditioned()) {
    for (int b = 0; b < B; ++b) {
      const PartialAlignment& a = batch.aligns[b];
      for (size_t j = 0; j < a.size(); ++j) {
        grads.embed.row(a[j]) += dX.row(trace.offsets[b] + static_cast<int>(j));
      }
    }
  }
  Matrix d_src = Matrix::Zero(trace.src_embed.rows(), config.d_model);
  for (int b = 0; b < B; ++b) {
    const int m = static_cast<int>(batch.xs[b].size());
    const auto src = trace.src_embed.middleRows(trace.src_offsets[b], m);
    auto d_src_block = d_src.middleRows(trace.src_offsets[b], m);
    for (int r = 0; r < s; ++r) {
      auto rows = strided_rows(dX, trace.offsets[b] + r, m, s);
      grads.up_W[r] += src.transpose() * rows;
      grads.up_b[r] += rows.colwise().sum().transpose();
      d_src_block += rows * params.up_W[r].transpose();
    }
  }
  for (int b = 0; b < B; ++b) {
    for (size_t i = 0; i < batch.xs[b].size(); ++i) {
      grads.embed.row(batch.xs[b][i]) +=
          d_src.row(trace.src_offsets[b] + static_cast<int>(i));
    }
  }
}

Matrix forward_ctc(const ModelParams& params, const ModelConfig& config, const TokenSeq& x) {
  AlignerBatch batch;
  batch.xs = {x};
  return aligner_forward(params, config, batch).logits;
}

Matrix forward_imputer(const ModelParams& params, const ModelConfig& config, const TokenSeq& x,
                       const PartialAlignment& align) {
  AlignerBatch batch;
  batch.xs = {x};
  batch.aligns = {align};
  return aligner_forward(params, config, batch).logits;
}

TeacherTrace teacher_forward(const TeacherParams& params, const ModelConfig& config,
                             const TeacherBatch& batch, Rng* dropout_rng) {
  config.validate();
  const int B = static_cast<int>(batch.xs.size());
  if (B == 0) throw std::invalid_argument("teacher_forward: empty batch");
  if (batch.ys.size() != batch.xs.size()) {
    throw std::invalid_argument("teacher_forward: source/target count mismatch");
  }
  const int d = config.d_model;
  const Vocab& vocab = config.vocab;
  const int sep = teacher_sep_id(vocab);

  TeacherTrace tr;
  tr.offsets.resize(B + 1);
  tr.sep_row.resize(B);
  tr.offsets[0] = 0;
  int max_len = 0;
  for (int b = 0; b < B; ++b) {
    check_source(vocab, batch.xs[b]);
    for (int id : batch.ys[b]) {
      if (!vocab.is_user_token(id)) {
        throw std::invalid_argument("teacher_forward: target token id " + std::to_string(id) +
                                    " out of vocabulary");
      }
    }
    const int len =
        static_cast<int>(batch.xs[b].size()) + 1 + static_cast<int>(batch.ys[b].size());
    if (len > config.max_positions) {
      throw std::invalid_argument("teacher_forward: sequence of " + std::to_string(len) +
                                  " positions exceeds max_positions " +
                                  std::to_string(config.max_positions));
    }
    tr.sep_row[b] = tr.offsets[b] + static_cast<int>(batch.xs[b].size());
    tr.offsets[b + 1] = tr.offsets[b] + len;
    max_len = std::max(max_len, len);
  }

  Matrix input(tr.offsets[B], d);
  for (int b = 0; b < B; ++b) {
    int row = tr.offsets[b];
    for (int id : batch.xs[b]) input.row(row++) = params.embed.row(id);
    input.row(row++) = params.embed.row(sep);
    for (int id : batch.ys[b]) input.row(row++) = params.embed.row(id);
  }
  if (config.use_pos_encoding) {
    const Matrix pe = sinusoidal_encoding(max_len, d);
    for (int b = 0; b < B; ++b) {
      const int len = tr.offsets[b + 1] - tr.offsets[b];
      input.middleRows(tr.offsets[b], len) += pe.topRows(len);
    }
  }

  stack_forward(params.stack, config, std::move(input), tr.offsets, /*causal=*/true, dropout_rng,
                tr.stack);
  tr.logits = tr.stack.hn * params.out_W;
  tr.logits.rowwise() += params.out_b.transpose();
  return tr;
}

void teacher_backward(const TeacherParams& params, const ModelConfig& config,
                      const TeacherBatch& batch, const TeacherTrace& trace,
                      const Matrix& dlogits, TeacherParams& grads) {
  if (dlogits.rows() != trace.logits.rows() || dlogits.cols() != trace.logits.cols()) {
    throw std::invalid_argument("teacher_backward: logit gradient shape mismatch");
  }
  grads.out_W += trace.stack.hn.transpose() * dlogits;
  grads.out_b += dlogits.colwise().sum().transpose();
  const Matrix d_hn = dlogits * params.out_W.transpose();
  const Matrix dX =
      stack_backward(params.stack, config, trace.stack, trace.offsets, d_hn, grads.stack);

  const int sep = teacher_sep_id(config.vocab);
  for (int b = 0; b < trace.blocks(); ++b) {
    int row = trace.offsets[b];
    for (int id : batch.xs[b]) grads.embed.row(id) += dX.row(row++);
    grads.embed.row(sep) += dX.row(row++);
    for (int id : batch.ys[b]) grads.embed.row(id) += dX.row(row++);
  }
}

Vector forward_teacher(const TeacherParams& params, const ModelConfig& config, const TokenSeq& x,
                       const TokenSeq& y_prefix) {
  TeacherBatch batch;
  batch.xs = {x};
  batch.ys = {y_prefix};
  const TeacherTrace tr = teacher_forward(params, config, batch);
  const Matrix lp = log_softmax_rows(tr.logits.bottomRows(1));
  return lp.row(0).transpose();
}

TokenSeq teacher_greedy_decode(const TeacherParams& params, const ModelConfig& config,
                               const TokenSeq& x, int max_target_length) {
  TokenSeq y;
  const int end = teacher_end_id(config.vocab);
  while (static_cast<int>(y.size()) < max_target_length) {
    const Vector lp = forward_teacher(params, config, x, y);
    const int k = argmax_row(lp.transpose());
    if (k == end) break;
    y.push_back(k);
  }
  return y;
}

}  // namespace latalign
