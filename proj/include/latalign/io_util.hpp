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

#ifndef LATALIGN_IO_UTIL_HPP
#define LATALIGN_IO_UTIL_HPP

#include <map>
#include <string>

namespace latalign {

/// Writes content to a temp file next to `path` and renames it into place.
void write_file_atomic(const std::string& path, const std::string& content);

/// Parses a declarative `key = value` file. '#' starts a comment; blank lines
/// ignored. Throws with the offending line number on malformed input.
std::map<std::string, std::string> read_kv_file(const std::string& path);

/// Serializes a key/value map back to the same format, keys sorted.
std::string format_kv(const std::map<std::string, std::string>& kv);

/// Typed lookups with defaults; throw on unparsable values.
int kv_int(const std::map<std::string, std::string>& kv, const std::string& key, int fallback);
double kv_double(const std::map<std::string, std::string>& kv, const std::string& key,
                 double fallback);

}  // namespace latalign

#endif  // LATALIGN_IO_UTIL_HPP
