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

#include "latalign/vocab.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "latalign/io_util.hpp"

namespace latalign {

Vocab::Vocab(std::vector<std::string> user_tokens) : tokens_(std::move(user_tokens)) {
  if (tokens_.empty()) throw std::invalid_argument("vocab: needs at least one user token");
  for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) {
    const std::string& t = tokens_[i];
    if (t.empty()) throw std::invalid_argument("vocab: empty token text");
    if (t == kBlankText || t == kMaskText)
      throw std::invalid_argument("vocab: reserved token text in user list: " + t);
    if (t.find(' ') != std::string::npos || t.find('\t') != std::string::npos ||
        t.find('\n') != std::string::npos)
      throw std::invalid_argument("vocab: token contains whitespace: " + t);
    if (!index_.emplace(t, i).second)
      throw std::invalid_argument("vocab: duplicate token: " + t);
  }
}

std::string Vocab::render(int id) const {
  if (id == blank_id()) return "_";
  if (id == mask_id()) return "▁?";
  return token_text(id);
}

int Vocab::find(const std::string& text) const {
  auto it = index_.find(text);
  return it == index_.end() ? -1 : it->second;
}

void Vocab::save(const std::string& path) const {
  std::ostringstream out;
  out << kBlankText << '\n' << kMaskText << '\n';
  for (const auto& t : tokens_) out << t << '\n';
  write_file_atomic(path, out.str());
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("vocab: cannot open " + path);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.size() < 3 || lines[0] != kBlankText || lines[1] != kMaskText)
    throw std::runtime_error("vocab: " + path + " must start with reserved lines " +
                             std::string(kBlankText) + ", " + std::string(kMaskText));
  return Vocab(std::vector<std::string>(lines.begin() + 2, lines.end()));
}

Vocab make_symbol_vocab(int n) {
  std::vector<std::string> toks;
  toks.reserve(n);
  for (int i = 0; i < n; ++i) toks.push_back("t" + std::to_string(i));
  return Vocab(std::move(toks));
}

}  // namespace latalign
