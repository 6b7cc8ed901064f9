// tests/test_synth.cpp

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

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "embeval/corpus.hpp"
#include "embeval/error.hpp"
#include "embeval/features.hpp"
#include "embeval/synth.hpp"
#include "embeval/util.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace embeval;

TEST_CASE("zipf counts follow largest-remainder rounding", "[synth]") {
  // s=1, 4 types, 25 tokens: weights (1, 1/2, 1/3, 1/4) -> 25*(.48,.24,.16,.12)
  auto counts = zipf_counts(4, 1.0, 25);
  REQUIRE(counts == std::vector<int64_t>{12, 6, 4, 3});

  auto flat = zipf_counts(7, 0.0, 40);
  int64_t total = 0;
  for (int64_t c : flat) {
    total += c;
    REQUIRE(std::abs(c - 40 / 7) <= 1);
  }
  REQUIRE(total == 40);

  auto steep = zipf_counts(3, 2.0, 100);
  REQUIRE(std::accumulate(steep.begin(), steep.end(), int64_t{0}) == 100);
  REQUIRE(steep[0] > steep[1]);
  REQUIRE(steep[1] > steep[2]);

  REQUIRE_THROWS_AS(zipf_counts(0, 1.0, 5), ConfigError);
  REQUIRE_THROWS_AS(zipf_counts(3, 1.0, -1), ConfigError);
}

TEST_CASE("noiseless fixed-length tokens render identical features", "[synth]") {
  testing::TempDir tmp("synth_noiseless");
  SynthConfig cfg;
  cfg.inventory_size = 12;
  cfg.num_types = 6;
  cfg.total_tokens = 60;
  cfg.zipf_exponent = 0.5;
  cfg.frames_per_phone_min = 8;
  cfg.frames_per_phone_max = 8;
  cfg.noise_sigma = 0.0;
  cfg.prototype_dim = 5;
  cfg.speakers = 3;
  cfg.seed = 71;
  SynthOutput out = generate_corpus(cfg, tmp.path());

  auto segments = load_item_file(out.items);
  REQUIRE(static_cast<int64_t>(segments.size()) == cfg.total_tokens);
  FeatureArchive archive = FeatureArchive::open(out.features);

  std::map<std::string, FeatureMatrix> first_of_type;
  for (const Segment &seg : segments) {
    REQUIRE(seg.labeled());
    FeatureMatrix mat = slice_features(archive, seg);
    auto [it, fresh] = first_of_type.emplace(seg.transcription->joined(), mat);
    if (!fresh) {
      REQUIRE(mat.frames == it->second.frames);
      REQUIRE(mat.dim == it->second.dim);
      REQUIRE(mat.data == it->second.data);
    }
  }
  REQUIRE(first_of_type.size() == 6);
}

TEST_CASE("truth file matches the recomputed frequency table", "[synth]") {
  testing::TempDir tmp("synth_truth");
  SynthConfig cfg;
  cfg.inventory_size = 20;
  cfg.num_types = 24;
  cfg.total_tokens = 400;
  cfg.prototype_dim = 4;
  cfg.speakers = 4;
  cfg.seed = 72;
  SynthOutput out = generate_corpus(cfg, tmp.path());

  auto segments = load_item_file(out.items);
  FrequencyTable table = build_frequency_table(segments);
  REQUIRE(table.total_segments == cfg.total_tokens);

  auto truth = load_truth_file(out.truth);
  REQUIRE(truth.size() == segments.size());
  for (const Segment &seg : segments) {
    REQUIRE(truth.at(seg.id) == table.count(*seg.transcription));
  }

  // emitted rank counts also match the frequency table totals
  int64_t from_counts = std::accumulate(out.type_counts.begin(), out.type_counts.end(),
                                        int64_t{0});
  REQUIRE(from_counts == cfg.total_tokens);
  std::multiset<int64_t> by_rank(out.type_counts.begin(), out.type_counts.end());
  std::multiset<int64_t> by_table;
  for (const auto &[t, c] : table.counts) by_table.insert(c);
  REQUIRE(by_rank == by_table);
}

TEST_CASE("same seed gives bit-identical corpora", "[synth]") {
  testing::TempDir tmp("synth_seed");
  SynthConfig cfg;
  cfg.inventory_size = 15;
  cfg.num_types = 10;
  cfg.total_tokens = 120;
  cfg.prototype_dim = 6;
  cfg.speakers = 5;
  cfg.seed = 73;
  SynthOutput a = generate_corpus(cfg, tmp / "a");
  SynthOutput b = generate_corpus(cfg, tmp / "b");

  for (const char *name : {"items.tsv", "alignment.tsv", "truth.tsv"}) {
    REQUIRE(read_file(tmp / "a" / name) == read_file(tmp / "b" / name));
  }
  std::vector<std::string> archive_files;
  for (const auto &entry : std::filesystem::directory_iterator(a.features)) {
    archive_files.push_back(entry.path().filename().string());
  }
  std::sort(archive_files.begin(), archive_files.end());
  REQUIRE(archive_files.size() == 6);  // manifest + one .bin per speaker
  for (const std::string &name : archive_files) {
    REQUIRE(read_file(a.features / name) == read_file(b.features / name));
  }

  cfg.seed = 74;
  generate_corpus(cfg, tmp / "c");
  REQUIRE(read_file(tmp / "a" / "items.tsv") != read_file(tmp / "c" / "items.tsv"));
}

TEST_CASE("emitted counts keep the Zipf slope", "[synth]") {
  auto counts = zipf_counts(300, 1.0, 30000);
  REQUIRE(oracle::loglog_slope(counts, 100) == Catch::Approx(-1.0).margin(0.1));

  auto half = zipf_counts(250, 0.5, 25000);
  REQUIRE(oracle::loglog_slope(half, 100) == Catch::Approx(-0.5).margin(0.1));

  // the generated corpus reports the same counts it placed
  testing::TempDir tmp("synth_slope");
  SynthConfig cfg;
  cfg.inventory_size = 30;
  cfg.num_types = 200;
  cfg.total_tokens = 8000;
  cfg.prototype_dim = 3;
  cfg.frames_per_phone_min = 2;
  cfg.frames_per_phone_max = 3;
  cfg.seed = 75;
  SynthOutput out = generate_corpus(cfg, tmp.path());
  REQUIRE(out.type_counts == zipf_counts(200, 1.0, 8000));
  REQUIRE(oracle::loglog_slope(out.type_counts, 100) == Catch::Approx(-1.0).margin(0.1));
}

TEST_CASE("synth config is validated", "[synth]") {
  testing::TempDir tmp("synth_bad");
  SynthConfig cfg;
  cfg.num_types = 1;
  REQUIRE_THROWS_AS(generate_corpus(cfg, tmp.path()), ConfigError);
  cfg.num_types = 10;
  cfg.total_tokens = 5;
  REQUIRE_THROWS_AS(generate_corpus(cfg, tmp.path()), ConfigError);
  cfg.total_tokens = 100;
  cfg.zipf_exponent = -0.5;
  REQUIRE_THROWS_AS(generate_corpus(cfg, tmp.path()), ConfigError);
  cfg.zipf_exponent = 1.0;
  cfg.frames_per_phone_min = 9;
  cfg.frames_per_phone_max = 5;
  REQUIRE_THROWS_AS(generate_corpus(cfg, tmp.path()), ConfigError);

  // tiny inventory with short strings cannot stay unique
  SynthConfig cramped;
  cramped.inventory_size = 1;
  cramped.num_types = 3;
  cramped.total_tokens = 9;
  cramped.phones_per_type_min = 1;
  cramped.phones_per_type_max = 1;
  cramped.prototype_dim = 2;
  REQUIRE_THROWS_AS(generate_corpus(cramped, tmp / "cramped"), NumericError);
}
