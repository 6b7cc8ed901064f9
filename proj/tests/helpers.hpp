// tests/helpers.hpp

// Copyright 2026  The embeval authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef EMBEVAL_TESTS_HELPERS_HPP_
#define EMBEVAL_TESTS_HELPERS_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "embeval/corpus.hpp"
#include "embeval/embedding.hpp"
#include "embeval/rng.hpp"
#include "embeval/util.hpp"

namespace testing {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string &tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("embeval_test_" + tag + "_" + std::to_string(++counter) + "_" +
             std::to_string(::getpid()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  const std::filesystem::path &path() const { return path_; }
  std::filesystem::path operator/(const std::string &s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline embeval::Transcription trans(const std::string &joined) {
  embeval::Transcription t;
  if (!joined.empty()) t.phones = embeval::split(joined, ' ');
  return t;
}

struct Item {
  std::string id;
  std::string label;  // empty: unlabeled
  std::vector<float> vec;
  std::string speaker = "spk";
};

inline embeval::EmbeddingSet make_set(
    std::initializer_list<Item> items,
    embeval::DistanceKind dk = embeval::DistanceKind::kCosine) {
  embeval::EmbeddingSet set(static_cast<int64_t>(items.begin()->vec.size()), dk);
  for (const Item &it : items) {
    embeval::EmbeddingMeta meta;
    meta.id = it.id;
    meta.speaker = it.speaker;
    if (!it.label.empty()) meta.transcription = trans(it.label);
    set.add(std::move(meta), it.vec);
  }
  return set;
}

// n random gaussian embeddings labeled t0..t{n_types-1} round-robin.
inline embeval::EmbeddingSet random_set(int64_t n, int64_t dim, int64_t n_types,
                                        uint64_t seed,
                                        embeval::DistanceKind dk =
                                            embeval::DistanceKind::kCosine) {
  embeval::Rng rng(seed);
  embeval::EmbeddingSet set(dim, dk);
  std::vector<float> v(static_cast<size_t>(dim));
  for (int64_t i = 0; i < n; ++i) {
    for (auto &x : v) x = static_cast<float>(rng.gaussian());
    embeval::EmbeddingMeta meta;
    meta.id = "e" + std::to_string(1000 + i);
    meta.speaker = "spk" + std::to_string(i % 3);
    if (n_types > 0) meta.transcription = trans("t" + std::to_string(i % n_types));
    set.add(std::move(meta), v);
  }
  return set;
}

}  // namespace testing

#endif  // EMBEVAL_TESTS_HELPERS_HPP_
