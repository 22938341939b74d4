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

#ifndef LATALIGN_TYPES_HPP
#define LATALIGN_TYPES_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace latalign {

// Dense row-major matrices throughout: lattices and activations are
// accessed row-per-position, so rows must be contiguous.
template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = Mat<double>;
using Vector = Vec<double>;

/// Sequence of user-token ids (no blank, no mask).
using TokenSeq = std::vector<int>;

/// Frame sequence over user tokens + blank, length fixed to the canvas.
using Alignment = std::vector<int>;

/// Like Alignment but mask frames are allowed; non-mask frames are "observed".
using PartialAlignment = std::vector<int>;

}  // namespace latalign

#endif  // LATALIGN_TYPES_HPP
