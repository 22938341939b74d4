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

#include "latalign/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "latalign/io_util.hpp"

namespace latalign {
namespace {

constexpr char kMagic[8] = {'L', 'A', 'T', 'C', 'K', 'P', 'T', '\0'};
constexpr uint32_t kVersion = 1;

// Little-endian scalar I/O into a growable byte string / bounded reader.
// Host endianness is assumed little (x86-64, aarch64); a mismatch would be
// caught by the magic's version field staying sane but is not supported.

void put_u32(std::string& out, uint32_t v) { out.append(reinterpret_cast<char*>(&v), 4); }
void put_u64(std::string& out, uint64_t v) { out.append(reinterpret_cast<char*>(&v), 8); }
void put_string(std::string& out, const std::string& s) {
  put_u32(out, static_cast<uint32_t>(s.size()));
  out += s;
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;
  const std::string& path;

  void need(size_t n) const {
    if (pos + n > buf.size()) throw std::runtime_error("checkpoint: truncated file " + path);
  }
  uint32_t u32() {
    need(4);
    uint32_t v;
    std::memcpy(&v, buf.data() + pos, 4);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v;
    std::memcpy(&v, buf.data() + pos, 8);
    pos += 8;
    return v;
  }
  std::string str() {
    const uint32_t n = u32();
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
  void doubles(double* dst, size_t n) {
    need(8 * n);
    std::memcpy(dst, buf.data() + pos, 8 * n);
    pos += 8 * n;
  }
};

void put_config(std::string& out, const ModelConfig& cfg) {
  put_u32(out, static_cast<uint32_t>(cfg.d_model));
  put_u32(out, static_cast<uint32_t>(cfg.d_ff));
  put_u32(out, static_cast<uint32_t>(cfg.depth));
  put_u32(out, static_cast<uint32_t>(cfg.heads));
  put_u32(out, static_cast<uint32_t>(cfg.s));
  put_u32(out, static_cast<uint32_t>(cfg.max_positions));
  put_u64(out, static_cast<uint64_t>(cfg.use_pos_encoding));
  const double dropout = cfg.dropout;
  out.append(reinterpret_cast<const char*>(&dropout), 8);
  put_u32(out, static_cast<uint32_t>(cfg.vocab.num_user_tokens()));
  for (int i = 0; i < cfg.vocab.num_user_tokens(); ++i) put_string(out, cfg.vocab.token_text(i));
}

ModelConfig read_config(Reader& in) {
  const int d_model = static_cast<int>(in.u32());
  const int d_ff = static_cast<int>(in.u32());
  const int depth = static_cast<int>(in.u32());
  const int heads = static_cast<int>(in.u32());
  const int s = static_cast<int>(in.u32());
  const int max_positions = static_cast<int>(in.u32());
  const bool use_pos = in.u64() != 0;
  double dropout;
  in.doubles(&dropout, 1);
  const uint32_t n_tokens = in.u32();
  std::vector<std::string> tokens(n_tokens);
  for (uint32_t i = 0; i < n_tokens; ++i) tokens[i] = in.str();
  ModelConfig cfg{Vocab(std::move(tokens))};
  cfg.d_model = d_model;
  cfg.d_ff = d_ff;
  cfg.depth = depth;
  cfg.heads = heads;
  cfg.s = s;
  cfg.max_positions = max_positions;
  cfg.use_pos_encoding = use_pos;
  cfg.dropout = dropout;
  cfg.validate();
  return cfg;
}

void put_kv(std::string& out, const std::map<std::string, std::string>& kv) {
  put_u32(out, static_cast<uint32_t>(kv.size()));
  for (const auto& [k, v] : kv) {
    put_string(out, k);
    put_string(out, v);
  }
}

std::map<std::string, std::string> read_kv(Reader& in) {
  std::map<std::string, std::string> kv;
  const uint32_t n = in.u32();
  for (uint32_t i = 0; i < n; ++i) {
    std::string k = in.str();
    kv[std::move(k)] = in.str();
  }
  return kv;
}

void put_blocks(std::string& out, const std::vector<ParamView>& views) {
  put_u32(out, static_cast<uint32_t>(views.size()));
  for (const ParamView& v : views) {
    put_string(out, v.name);
    put_u64(out, static_cast<uint64_t>(v.rows));
    put_u64(out, static_cast<uint64_t>(v.cols));
    out.append(reinterpret_cast<const char*>(v.data), 8 * static_cast<size_t>(v.size()));
  }
}

void read_blocks(Reader& in, const std::vector<ParamView>& views) {
  const uint32_t n = in.u32();
  if (n != views.size()) {
    throw std::runtime_error("checkpoint: expected " + std::to_string(views.size()) +
                             " parameter blocks, found " + std::to_string(n) + " in " + in.path);
  }
  for (const ParamView& v : views) {
    const std::string name = in.str();
    const uint64_t rows = in.u64();
    const uint64_t cols = in.u64();
    if (name != v.name || rows != static_cast<uint64_t>(v.rows) ||
        cols != static_cast<uint64_t>(v.cols)) {
      throw std::runtime_error("checkpoint: block '" + name + "' (" + std::to_string(rows) + "x" +
                               std::to_string(cols) + ") does not match expected '" + v.name +
                               "' (" + std::to_string(v.rows) + "x" + std::to_string(v.cols) +
                               ") in " + in.path);
    }
    in.doubles(v.data, static_cast<size_t>(v.size()));
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return buf;
}

Reader open_checkpoint(const std::string& buf, const std::string& path) {
  Reader in{buf, 0, path};
  in.need(8);
  if (std::memcmp(buf.data(), kMagic, 8) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  in.pos = 8;
  const uint32_t version = in.u32();
  if (version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version) +
                             " in " + path);
  }
  return in;
}

std::string serialize_header(const std::string& kind, uint64_t step,
                             const std::map<std::string, std::string>& config,
                             const ModelConfig& cfg) {
  std::string out(kMagic, 8);
  put_u32(out, kVersion);
  put_string(out, kind);
  put_u64(out, step);
  put_kv(out, config);
  put_config(out, cfg);
  return out;
}

}  // namespace

void save_checkpoint(const AlignerCheckpoint& ckpt, const std::string& path) {
  if (ckpt.mode != "ctc" && ckpt.mode != "imputer") {
    throw std::invalid_argument("checkpoint: aligner mode must be ctc or imputer");
  }
  std::string out = serialize_header(ckpt.mode, ckpt.step, ckpt.config, ckpt.model_config);
  put_blocks(out, param_views(ckpt.params));
  write_file_atomic(path, out);
}

void save_checkpoint(const TeacherCheckpoint& ckpt, const std::string& path) {
  std::string out = serialize_header("teacher", ckpt.step, ckpt.config, ckpt.model_config);
  put_blocks(out, param_views(ckpt.params));
  write_file_atomic(path, out);
}

AlignerCheckpoint load_aligner_checkpoint(const std::string& path) {
  const std::string buf = read_file(path);
  Reader in = open_checkpoint(buf, path);
  const std::string kind = in.str();
  if (kind != "ctc" && kind != "imputer") {
    throw std::runtime_error("checkpoint: " + path + " holds a '" + kind +
                             "' model, not an aligner");
  }
  const uint64_t step = in.u64();
  auto config = read_kv(in);
  ModelConfig cfg = read_config(in);
  ModelParams params = zero_model_params(cfg);
  read_blocks(in, param_views(params));
  AlignerCheckpoint ckpt{std::move(cfg), std::move(params)};
  ckpt.mode = kind;
  ckpt.step = step;
  ckpt.config = std::move(config);
  return ckpt;
}

TeacherCheckpoint load_teacher_checkpoint(const std::string& path) {
  const std::string buf = read_file(path);
  Reader in = open_checkpoint(buf, path);
  const std::string kind = in.str();
  if (kind != "teacher") {
    throw std::runtime_error("checkpoint: " + path + " holds a '" + kind +
                             "' model, not a teacher");
  }
  const uint64_t step = in.u64();
  auto config = read_kv(in);
  ModelConfig cfg = read_config(in);
  TeacherParams params = zero_teacher_params(cfg);
  read_blocks(in, param_views(params));
  TeacherCheckpoint ckpt{std::move(cfg), std::move(params)};
  ckpt.step = step;
  ckpt.config = std::move(config);
  return ckpt;
}

std::string peek_checkpoint_kind(const std::string& path) {
  const std::string buf = read_file(path);
  Reader in = open_checkpoint(buf, path);
  return in.str();
}

}  // namespace latalign
