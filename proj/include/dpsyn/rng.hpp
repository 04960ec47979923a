// Copyright 2026 The dpsyn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPSYN_RNG_HPP_
#define DPSYN_RNG_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dpsyn {

using Rng = std::mt19937_64;

// Deterministically derives a child seed from a root seed and a path of
// tags, so that every component draws from its own stream and replays are
// exact regardless of call order elsewhere.
inline std::uint64_t derive_seed(std::uint64_t root,
                                 std::initializer_list<std::uint64_t> path) {
  // splitmix64 finalizer chained over the path.
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(root);
  for (std::uint64_t tag : path) h = mix(h ^ mix(tag));
  return h;
}

inline Rng make_rng(std::uint64_t root,
                    std::initializer_list<std::uint64_t> path = {}) {
  return Rng(derive_seed(root, path));
}

// Stream tags used across the pipeline.
namespace stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kLot = 2;
inline constexpr std::uint64_t kNoise = 3;
inline constexpr std::uint64_t kExample = 4;
inline constexpr std::uint64_t kShuffle = 5;
inline constexpr std::uint64_t kGenerate = 6;
inline constexpr std::uint64_t kClassifier = 7;
inline constexpr std::uint64_t kData = 8;
inline constexpr std::uint64_t kSplit = 9;
inline constexpr std::uint64_t kBalance = 10;
inline constexpr std::uint64_t kPretrain = 11;
inline constexpr std::uint64_t kReference = 12;
inline constexpr std::uint64_t kValidation = 13;
}  // namespace stream

}  // namespace dpsyn

#endif  // DPSYN_RNG_HPP_
