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

#ifndef LATALIGN_VOCAB_HPP
#define LATALIGN_VOCAB_HPP

#include <string>
#include <unordered_map>
#include <vector>

#include "latalign/types.hpp"

namespace latalign {

// Token inventory with two reserved symbols.
//
// Id layout: user tokens occupy 0..num_user_tokens()-1, blank_id() is the
// next id and mask_id() the one after. Score lattices are L x K with
// K = num_user_tokens() + 1, so lattice columns coincide with token ids
// (column blank_id() scores the blank); mask is input-only and never scored.
class Vocab {
 public:
  static constexpr const char* kBlankText = "<blank>";
  static constexpr const char* kMaskText = "<mask>";

  /// Builds a vocab from distinct user token strings (must not contain the
  /// reserved texts). Throws std::invalid_argument on duplicates or empties.
  explicit Vocab(std::vector<std::string> user_tokens);

  int num_user_tokens() const { return static_cast<int>(tokens_.size()); }
  int blank_id() const { return num_user_tokens(); }
  int mask_id() const { return num_user_tokens() + 1; }

  /// Number of scoreable symbols (user tokens + blank): lattice width.
  int num_scored() const { return num_user_tokens() + 1; }

  bool is_user_token(int id) const { return id >= 0 && id < num_user_tokens(); }
  bool is_frame_symbol(int id) const { return id >= 0 && id <= blank_id(); }

  const std::string& token_text(int user_id) const { return tokens_.at(user_id); }

  /// Rendering used by corpus files and decode traces: "_" for blank, "▁?"
  /// for mask, token text otherwise.
  std::string render(int id) const;

  /// Lookup of a user token by text; -1 if unknown.
  int find(const std::string& text) const;

  /// Line-per-token text file whose first two lines are the reserved
  /// "<blank>" and "<mask>" entries, followed by the user tokens in id order.
  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Vocab of synthetic single-letter/numbered tokens t0..t{n-1}.
Vocab make_symbol_vocab(int n);

}  // namespace latalign

#endif  // LATALIGN_VOCAB_HPP
