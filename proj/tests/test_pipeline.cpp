// tests/test_pipeline.cpp

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

#include <filesystem>
#include <string>
#include <vector>

#include "embeval/error.hpp"
#include "embeval/pipeline.hpp"
#include "embeval/synth.hpp"
#include "embeval/util.hpp"
#include "helpers.hpp"
#include "json.hpp"
#include "oracles.hpp"

using namespace embeval;

namespace {

nlohmann::json base_config(const SynthOutput &corpus, const std::filesystem::path &out) {
  nlohmann::json j;
  j["corpus"] = {{"features", corpus.features.string()},
                 {"alignments", corpus.alignments.string()},
                 {"items", corpus.items.string()},
                 {"truth", corpus.truth.string()}};
  j["gd"] = {{"l", 4}, {"featurizer", "one_hot"}};
  j["abx"] = {{"max_triplets_per_contrast", 60}};
  j["freq"] = {{"k", 24}};
  j["output_dir"] = out.string();
  j["seed"] = 11;
  return j;
}

SynthOutput tiny_corpus(const std::filesystem::path &dir) {
  SynthConfig cfg;
  cfg.inventory_size = 10;
  cfg.num_types = 8;
  cfg.total_tokens = 90;
  cfg.prototype_dim = 4;
  cfg.frames_per_phone_min = 3;
  cfg.frames_per_phone_max = 5;
  cfg.phones_per_type_min = 2;
  cfg.phones_per_type_max = 3;
  cfg.speakers = 3;
  cfg.noise_sigma = 0.05;
  cfg.seed = 81;
  return generate_corpus(cfg, dir);
}

std::vector<RunRecord> affine_records(int n) {
  std::vector<RunRecord> out;
  for (int i = 0; i < n; ++i) {
    RunRecord r;
    r.model_name = "m" + std::to_string(i);
    r.freq_r2 = 0.1 + 0.2 * i;
    r.map_ap = 0.05 + 0.1 * i;
    r.abx_error = 0.5 - 0.08 * i;
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST_CASE("config parsing rejects unknown and missing keys", "[pipeline]") {
  nlohmann::json ok = {{"corpus", {{"features", "feats"}}}, {"output_dir", "out"}};
  REQUIRE(parse_pipeline_config(ok).features_path == "feats");

  nlohmann::json stray = ok;
  stray["gd"] = {{"sigmaratio", 0.4}};
  try {
    parse_pipeline_config(stray);
    FAIL("expected ConfigError");
  } catch (const ConfigError &e) {
    REQUIRE(std::string(e.what()).find("sigmaratio") != std::string::npos);
    REQUIRE(std::string(e.what()).find("'gd'") != std::string::npos);
  }

  nlohmann::json top = ok;
  top["outputdir"] = "x";
  REQUIRE_THROWS_AS(parse_pipeline_config(top), ConfigError);

  nlohmann::json no_out = {{"corpus", {{"features", "feats"}}}};
  REQUIRE_THROWS_AS(parse_pipeline_config(no_out), ConfigError);
  REQUIRE_THROWS_WITH(parse_pipeline_config(no_out),
                      Catch::Matchers::ContainsSubstring("output_dir"));

  nlohmann::json no_corpus = {{"output_dir", "out"}};
  REQUIRE_THROWS_AS(parse_pipeline_config(no_corpus), ConfigError);

  nlohmann::json no_feats = {{"corpus", nlohmann::json::object()}, {"output_dir", "out"}};
  REQUIRE_THROWS_WITH(parse_pipeline_config(no_feats),
                      Catch::Matchers::ContainsSubstring("corpus.features"));

  nlohmann::json bad_type = ok;
  bad_type["freq"] = {{"k", "many"}};
  REQUIRE_THROWS_AS(parse_pipeline_config(bad_type), ConfigError);
  REQUIRE_THROWS_WITH(parse_pipeline_config(bad_type),
                      Catch::Matchers::ContainsSubstring("freq.k"));

  nlohmann::json bad_mode = ok;
  bad_mode["segmentation"] = {{"mode", "sliding"}};
  REQUIRE_THROWS_AS(parse_pipeline_config(bad_mode), ConfigError);
}

TEST_CASE("defaults are echoed into the config echo", "[pipeline]") {
  nlohmann::json j = {{"corpus", {{"features", "feats"}}}, {"output_dir", "out"},
                      {"seed", 9}};
  PipelineConfig cfg = parse_pipeline_config(j);
  nlohmann::json echo = echo_config(cfg);
  REQUIRE(echo["gd"]["l"] == 10);
  REQUIRE(echo["gd"]["sigma_ratio"] == 0.4);
  REQUIRE(echo["abx"]["max_triplets_per_contrast"] == 1000);
  REQUIRE(echo["abx"]["speaker_mode"] == "any");
  REQUIRE(echo["freq"]["k"] == 2000);
  REQUIRE(echo["map"]["enabled"] == true);
  REQUIRE(echo["pairs"]["enabled"] == false);
  REQUIRE(echo["seed"] == 9);
  // stage seeds are derived, fixed, and echoed
  REQUIRE(echo["abx"]["seed"] == derive_seed(9, "stage:abx"));
  REQUIRE(echo["map"]["seed"] == derive_seed(9, "stage:map"));
}

TEST_CASE("affinely related records correlate to all ones", "[pipeline]") {
  CorrelationReport rep = correlate(affine_records(6));
  REQUIRE(rep.n_models == 6);
  for (int i = 0; i < 3; ++i) {
    REQUIRE(rep.matrix[i][i] == 1.0);
    for (int j = 0; j < 3; ++j) {
      REQUIRE(rep.matrix[i][j] == Catch::Approx(1.0).margin(1e-12));
      REQUIRE(rep.matrix[i][j] == rep.matrix[j][i]);
    }
  }

  REQUIRE_THROWS_AS(correlate(affine_records(2)), ValidationError);
}

TEST_CASE("correlation entries match the scalar oracle", "[pipeline]") {
  std::vector<RunRecord> recs = {{"m0", 0.41, 0.52, 0.33},
                                 {"m1", 0.35, 0.61, 0.48},
                                 {"m2", 0.28, 0.55, 0.61},
                                 {"m3", 0.22, 0.73, 0.66},
                                 {"m4", 0.19, 0.70, 0.79}};
  std::vector<double> freq, map_ap, neg_abx;
  for (const RunRecord &r : recs) {
    freq.push_back(r.freq_r2);
    map_ap.push_back(r.map_ap);
    neg_abx.push_back(-r.abx_error);
  }
  CorrelationReport rep = correlate(recs);
  double fm = oracle::pearson(freq, map_ap);
  double fa = oracle::pearson(freq, neg_abx);
  double ma = oracle::pearson(map_ap, neg_abx);
  REQUIRE(rep.matrix[0][1] == Catch::Approx(fm * fm).margin(1e-9));
  REQUIRE(rep.matrix[0][2] == Catch::Approx(fa * fa).margin(1e-9));
  REQUIRE(rep.matrix[1][2] == Catch::Approx(ma * ma).margin(1e-9));
  for (int i = 0; i < 3; ++i) {
    REQUIRE(rep.matrix[i][i] == 1.0);
    for (int j = 0; j < 3; ++j) {
      REQUIRE(rep.matrix[i][j] == rep.matrix[j][i]);
      REQUIRE(rep.matrix[i][j] >= 0.0);
      REQUIRE(rep.matrix[i][j] <= 1.0);
    }
  }

  // squared correlation is invariant to positive affine rescaling per column
  std::vector<RunRecord> scaled = recs;
  for (RunRecord &r : scaled) {
    r.freq_r2 = 3.0 * r.freq_r2 + 0.1;
    r.map_ap = 0.5 * r.map_ap;
    r.abx_error = 2.0 * r.abx_error + 1.0;
  }
  CorrelationReport rep2 = correlate(scaled);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      REQUIRE(rep2.matrix[i][j] == Catch::Approx(rep.matrix[i][j]).margin(1e-12));
    }
  }

  nlohmann::json rj = to_json(rep);
  REQUIRE(rj["abx_sign"] == "negated");
  REQUIRE(rj["columns"] == nlohmann::json({"freq", "map", "abx"}));
  REQUIRE(rj["matrix"][0][1] == rep.matrix[0][1]);
}

TEST_CASE("constant metric columns are reported by name", "[pipeline]") {
  auto recs = affine_records(4);
  for (RunRecord &r : recs) r.freq_r2 = 0.5;
  REQUIRE_THROWS_AS(correlate(recs), NumericError);
  REQUIRE_THROWS_WITH(correlate(recs), Catch::Matchers::ContainsSubstring("freq"));

  recs = affine_records(4);
  for (RunRecord &r : recs) r.abx_error = 0.25;
  REQUIRE_THROWS_AS(correlate(recs), NumericError);
  REQUIRE_THROWS_WITH(correlate(recs), Catch::Matchers::ContainsSubstring("abx"));
}

TEST_CASE("record files load strictly", "[pipeline]") {
  testing::TempDir tmp("records");
  write_file(tmp / "runs.tsv",
             "model\tabx_error\tmap_ap\tfreq_r2\n"
             "gd\t0.21\t0.64\t0.81\n"
             "\n"
             "gd1hot\t0.12\t0.77\t0.9\n");
  auto recs = load_records(tmp / "runs.tsv");
  REQUIRE(recs.size() == 2);
  REQUIRE(recs[0].model_name == "gd");
  REQUIRE(recs[0].abx_error == 0.21);
  REQUIRE(recs[1].freq_r2 == 0.9);

  write_file(tmp / "bad_header.tsv", "model\tabx\tmap\tfreq\nx\t1\t2\t3\n");
  REQUIRE_THROWS_AS(load_records(tmp / "bad_header.tsv"), ParseError);

  write_file(tmp / "short_row.tsv", "model\tabx_error\tmap_ap\tfreq_r2\nx\t1\t2\n");
  REQUIRE_THROWS_AS(load_records(tmp / "short_row.tsv"), ParseError);

  write_file(tmp / "bad_value.tsv", "model\tabx_error\tmap_ap\tfreq_r2\nx\tlow\t2\t3\n");
  REQUIRE_THROWS_AS(load_records(tmp / "bad_value.tsv"), ParseError);
}

TEST_CASE("correlation matrix writes as a labeled 3x3 TSV", "[pipeline]") {
  testing::TempDir tmp("corr_tsv");
  CorrelationReport rep = correlate(affine_records(5));
  write_correlation_tsv(tmp / "corr.tsv", rep);
  auto lines = read_lines(tmp / "corr.tsv");
  REQUIRE(lines.size() == 4);
  REQUIRE(lines[0] == "\tfreq\tmap\tabx");
  REQUIRE(lines[1].rfind("freq\t", 0) == 0);
  REQUIRE(lines[2].rfind("map\t", 0) == 0);
  REQUIRE(lines[3].rfind("abx\t", 0) == 0);
  REQUIRE(lines[1] == "freq\t1\t1\t1");
}

TEST_CASE("pipeline happy path emits every enabled report", "[pipeline]") {
  testing::TempDir tmp("pipe_happy");
  SynthOutput corpus = tiny_corpus(tmp / "corpus");
  nlohmann::json j = base_config(corpus, tmp / "run");
  j["pairs"] = {{"enabled", true}, {"threshold", 0.9}, {"k", 8}, {"n_pos", 12},
                {"n_neg", 12}};
  PipelineConfig cfg = parse_pipeline_config(j);
  std::filesystem::path out = run_pipeline(cfg);

  REQUIRE(!std::filesystem::exists(out / "FAILED"));
  for (const char *name :
       {"config_echo.json", "items.tsv", "abx.json", "abx_contrasts.tsv", "map.json",
        "freq.json", "freq.tsv", "mined_pairs.tsv", "gold_pairs.tsv", "pairs.json",
        "run.json"}) {
    INFO(name);
    REQUIRE(std::filesystem::exists(out / name));
  }
  REQUIRE(std::filesystem::exists(out / "embeddings" / "manifest.json"));

  nlohmann::json freq_rep = nlohmann::json::parse(read_file(out / "freq.json"));
  REQUIRE(freq_rep.contains("r_squared"));
  REQUIRE(freq_rep["k"] == 24);
  REQUIRE(freq_rep["inputs"].contains("embeddings"));
  REQUIRE(freq_rep["inputs"].contains("truth"));

  nlohmann::json run = nlohmann::json::parse(read_file(out / "run.json"));
  std::vector<std::string> stages;
  for (const auto &s : run["stages"]) stages.push_back(s["name"]);
  REQUIRE(stages == std::vector<std::string>{"segment", "embed", "abx", "map", "freq",
                                             "pairs"});
  REQUIRE(run["stages"][0]["unlabeled"] == 0);
  size_t used_phones = AlignmentStore::load(corpus.alignments).inventory().size();
  REQUIRE(run["stages"][1]["dim"] == 4 * used_phones);  // l * used inventory
  REQUIRE(run["stages"][0].contains("items_digest"));
  REQUIRE(run["stages"][1].contains("embeddings_digest"));
}

TEST_CASE("pipeline reruns are byte-identical at any worker count", "[pipeline]") {
  testing::TempDir tmp("pipe_det");
  SynthOutput corpus = tiny_corpus(tmp / "corpus");

  auto run_with = [&](const std::filesystem::path &out, int threads) {
    nlohmann::json j = base_config(corpus, out);
    j["threads"] = threads;
    j["pairs"] = {{"enabled", true}, {"threshold", 0.9}, {"k", 8}, {"n_pos", 10},
                  {"n_neg", 10}};
    run_pipeline(parse_pipeline_config(j));
  };
  run_with(tmp / "r1", 1);
  run_with(tmp / "r2", 1);
  run_with(tmp / "r3", 4);

  for (const char *name : {"items.tsv", "abx_contrasts.tsv", "freq.tsv",
                           "mined_pairs.tsv", "gold_pairs.tsv"}) {
    INFO(name);
    std::string first = read_file(tmp / "r1" / name);
    REQUIRE(first == read_file(tmp / "r2" / name));
    REQUIRE(first == read_file(tmp / "r3" / name));
  }
  for (const char *name : {"abx.json", "map.json", "freq.json", "run.json"}) {
    INFO(name);
    std::string first = read_file(tmp / "r1" / name);
    REQUIRE(first == read_file(tmp / "r2" / name));
    REQUIRE(first == read_file(tmp / "r3" / name));
  }
  REQUIRE(read_file(tmp / "r1" / "embeddings" / "emb.bin") ==
          read_file(tmp / "r3" / "embeddings" / "emb.bin"));
}

TEST_CASE("a missing archive aborts with stage and path", "[pipeline]") {
  testing::TempDir tmp("pipe_missing");
  nlohmann::json j = {{"corpus", {{"features", (tmp / "nowhere").string()}}},
                      {"output_dir", (tmp / "run").string()}};
  PipelineConfig cfg = parse_pipeline_config(j);
  try {
    run_pipeline(cfg);
    FAIL("expected Error");
  } catch (const Error &e) {
    std::string msg = e.what();
    REQUIRE(msg.rfind("load: ", 0) == 0);
    REQUIRE(msg.find("nowhere") != std::string::npos);
  }
  std::string marker = read_file(tmp / "run" / "FAILED");
  REQUIRE(marker.rfind("load: ", 0) == 0);
  REQUIRE(marker.find("nowhere") != std::string::npos);
}

TEST_CASE("segmentation stage labels grid segments from alignments", "[pipeline]") {
  testing::TempDir tmp("pipe_seg");
  SynthOutput corpus = tiny_corpus(tmp / "corpus");
  nlohmann::json j;
  j["corpus"] = {{"features", corpus.features.string()},
                 {"alignments", corpus.alignments.string()}};
  j["segmentation"] = {{"mode", "grid"}, {"min_dur", 0.08}, {"max_dur", 0.16},
                       {"onset_stride", 0.12}, {"dur_stride", 0.08}};
  j["gd"] = {{"l", 2}, {"featurizer", "one_hot"}};
  j["abx"] = {{"enabled", false}};
  j["map"] = {{"enabled", false}};
  j["freq"] = {{"enabled", false}};
  j["output_dir"] = (tmp / "run").string();
  PipelineConfig cfg = parse_pipeline_config(j);
  std::filesystem::path out = run_pipeline(cfg);

  auto segments = load_item_file(out / "items.tsv");
  REQUIRE(segments.size() > 50);
  int64_t labeled = 0;
  for (const Segment &seg : segments) {
    REQUIRE(seg.duration() >= 0.08 - 1e-9);
    REQUIRE(seg.duration() <= 0.16 + 1e-9);
    if (seg.labeled()) ++labeled;
  }
  REQUIRE(labeled > 0);
  nlohmann::json run = nlohmann::json::parse(read_file(out / "run.json"));
  REQUIRE(run["stages"][0]["segments"] == segments.size());
  REQUIRE(run["stages"][0]["unlabeled"] ==
          static_cast<int64_t>(segments.size()) - labeled);

  // without alignments the one-hot path cannot label anything
  nlohmann::json no_align = j;
  no_align["corpus"].erase("alignments");
  no_align["output_dir"] = (tmp / "run2").string();
  REQUIRE_THROWS_AS(run_pipeline(parse_pipeline_config(no_align)), Error);
  REQUIRE(std::filesystem::exists(tmp / "run2" / "FAILED"));
}
