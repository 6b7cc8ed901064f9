// embeval/knn.hpp

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
//
// Exact nearest-neighbor search.  Distances are computed in query-blocks x
// index-blocks with a bounded top-k selection per query; results are exact
// and independent of block sizes and thread counts.  Ties break by ascending
// id.
//
// Graph dump: graph.json manifest plus neighbors.tsv with rows
// query_id<TAB>rank<TAB>neighbor_id<TAB>distance (rank is 0-based).

#ifndef EMBEVAL_KNN_HPP_
#define EMBEVAL_KNN_HPP_

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "embeval/distance.hpp"
#include "embeval/embedding.hpp"
#include "embeval/error.hpp"
#include "embeval/parallel.hpp"
#include "embeval/util.hpp"
#include "json.hpp"

namespace embeval {

struct BlockConfig {
  int64_t query_block = 1024;
  int64_t index_block = 4096;
};

inline void validate(const BlockConfig &cfg) {
  if (cfg.query_block < 1 || cfg.index_block < 1) {
    throw ConfigError("knn: block sizes must be >= 1");
  }
}

namespace detail {

struct HeapEntry {
  double dist;
  int32_t rank;  // lexicographic id rank, tie-breaker
  int32_t row;
};

// True when a beats b (closer, or equal distance with smaller id rank).
inline bool knn_better(const HeapEntry &a, const HeapEntry &b) {
  if (a.dist != b.dist) return a.dist < b.dist;
  return a.rank < b.rank;
}

// Fixed-capacity worst-on-top heap over HeapEntry.
class TopK {
 public:
  explicit TopK(size_t k) : k_(k) { heap_.reserve(k); }

  void offer(const HeapEntry &e) {
    if (heap_.size() < k_) {
      heap_.push_back(e);
      std::push_heap(heap_.begin(), heap_.end(), knn_better);
    } else if (knn_better(e, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), knn_better);
      heap_.back() = e;
      std::push_heap(heap_.begin(), heap_.end(), knn_better);
    }
  }

  // Worst entry currently kept; only valid when full().
  const HeapEntry &worst() const { return heap_.front(); }
  bool full() const { return heap_.size() == k_; }

  std::vector<HeapEntry> sorted_ascending() {
    std::sort(heap_.begin(), heap_.end(), knn_better);
    return std::move(heap_);
  }

 private:
  size_t k_;
  std::vector<HeapEntry> heap_;
};

}  // namespace detail

class Index {
 public:
  Index(const EmbeddingSet &set, DistanceKind dk, BlockConfig blocks = {})
      : dim_(set.dim()), kind_(dk), blocks_(blocks) {
    validate(blocks_);
    if (set.count() == 0) throw ValidationError("knn index: empty embedding set");
    const int64_t n = set.count();
    data_.assign(set.raw().begin(), set.raw().end());
    ids_.reserve(n);
    for (int64_t i = 0; i < n; ++i) ids_.push_back(set.meta(i).id);
    norms_.resize(n);
    std::vector<std::string> zero_ids;
    for (int64_t i = 0; i < n; ++i) {
      norms_[i] = vector_norm(row(i));
      if (kind_ == DistanceKind::kCosine && norms_[i] == 0.0) zero_ids.push_back(ids_[i]);
    }
    if (!zero_ids.empty()) {
      throw ValidationError("knn index: zero vectors under cosine distance: " +
                            join(zero_ids, ' '));
    }
    // id_rank_[i] = position of ids_[i] in lexicographic order
    std::vector<int32_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int32_t a, int32_t b) {
      if (ids_[a] != ids_[b]) return ids_[a] < ids_[b];
      return a < b;
    });
    id_rank_.resize(n);
    for (int64_t r = 0; r < n; ++r) id_rank_[order[r]] = static_cast<int32_t>(r);
  }

  int64_t size() const { return static_cast<int64_t>(ids_.size()); }
  int64_t dim() const { return dim_; }
  DistanceKind kind() const { return kind_; }
  const BlockConfig &blocks() const { return blocks_; }
  const std::string &id(int64_t i) const { return ids_[i]; }
  const std::vector<std::string> &ids() const { return ids_; }

  std::span<const float> row(int64_t i) const {
    return {data_.data() + i * dim_, static_cast<size_t>(dim_)};
  }

  double row_distance(std::span<const float> q, double q_norm, int64_t i) const {
    if (kind_ == DistanceKind::kCosine) {
      return cosine_distance(q, row(i), q_norm, norms_[i]);
    }
    return euclidean_distance(q, row(i));
  }

  // Exact top-k for one query vector, optionally skipping excluded ids.
  std::vector<std::pair<std::string, double>> query(
      std::span<const float> q, int64_t k,
      const std::unordered_set<std::string> *exclude = nullptr) const {
    if (k < 1) throw ConfigError("knn query: k must be >= 1");
    if (static_cast<int64_t>(q.size()) != dim_) {
      throw ValidationError("knn query: vector dim " + std::to_string(q.size()) +
                            ", index dim " + std::to_string(dim_));
    }
    double q_norm = vector_norm(q);
    if (kind_ == DistanceKind::kCosine && q_norm == 0.0) {
      throw ValidationError("knn query: zero query vector under cosine distance");
    }
    detail::TopK top(static_cast<size_t>(std::min(k, size())));
    for (int64_t block = 0; block < size(); block += blocks_.index_block) {
      int64_t end = std::min(size(), block + blocks_.index_block);
      for (int64_t i = block; i < end; ++i) {
        if (exclude && exclude->count(ids_[i])) continue;
        top.offer({row_distance(q, q_norm, i), id_rank_[i], static_cast<int32_t>(i)});
      }
    }
    std::vector<std::pair<std::string, double>> out;
    for (const detail::HeapEntry &e : top.sorted_ascending()) {
      out.emplace_back(ids_[e.row], e.dist);
    }
    return out;
  }

  const std::vector<int32_t> &id_ranks() const { return id_rank_; }

 private:
  int64_t dim_;
  DistanceKind kind_;
  BlockConfig blocks_;
  std::vector<float> data_;
  std::vector<double> norms_;
  std::vector<std::string> ids_;
  std::vector<int32_t> id_rank_;
};

// Neighbor lists for a batch of queries.  Lists are ascending by distance,
// ties by id; all lists have the same length except where exclusions bite.
struct KnnGraph {
  int64_t k = 0;
  DistanceKind distance = DistanceKind::kCosine;
  int64_t index_size = 0;
  BlockConfig blocks;
  std::vector<std::string> query_ids;
  std::vector<std::string> index_ids;
  std::vector<int64_t> offsets;      // query_ids.size() + 1
  std::vector<int32_t> neighbors;    // rows into index_ids
  std::vector<float> distances;

  int64_t num_queries() const { return static_cast<int64_t>(query_ids.size()); }
  int64_t degree(int64_t q) const { return offsets[q + 1] - offsets[q]; }
  std::span<const int32_t> neighbor_rows(int64_t q) const {
    return {neighbors.data() + offsets[q], static_cast<size_t>(degree(q))};
  }
  std::span<const float> neighbor_distances(int64_t q) const {
    return {distances.data() + offsets[q], static_cast<size_t>(degree(q))};
  }
};

inline KnnGraph build_graph(const Index &index, const EmbeddingSet &queries,
                            int64_t k, bool self_exclude, int threads = 1) {
  if (k < 1) throw ConfigError("knn graph: k must be >= 1");
  if (queries.dim() != index.dim()) {
    throw ValidationError("knn graph: query dim " + std::to_string(queries.dim()) +
                          ", index dim " + std::to_string(index.dim()));
  }
  const int64_t nq = queries.count();
  KnnGraph g;
  g.k = k;
  g.distance = index.kind();
  g.index_size = index.size();
  g.blocks = index.blocks();
  g.index_ids = index.ids();
  g.query_ids.reserve(nq);
  for (int64_t q = 0; q < nq; ++q) g.query_ids.push_back(queries.meta(q).id);

  // self-exclusion matches by id
  std::unordered_map<std::string, int64_t> index_row;
  if (self_exclude) {
    for (int64_t i = 0; i < index.size(); ++i) index_row.emplace(index.id(i), i);
  }

  std::vector<std::vector<detail::HeapEntry>> lists(nq);
  const int64_t qb = index.blocks().query_block;
  const int64_t ib = index.blocks().index_block;
  std::vector<int64_t> block_starts;
  for (int64_t b = 0; b < nq; b += qb) block_starts.push_back(b);

  parallel_for(block_starts.size(), threads, [&](size_t bs, size_t be) {
    std::vector<double> q_norms;
    for (size_t bi = bs; bi < be; ++bi) {
      const int64_t q_begin = block_starts[bi];
      const int64_t q_end = std::min(nq, q_begin + qb);
      q_norms.assign(q_end - q_begin, 0.0);
      std::vector<detail::TopK> tops;
      tops.reserve(q_end - q_begin);
      std::vector<int64_t> skip(q_end - q_begin, -1);
      for (int64_t q = q_begin; q < q_end; ++q) {
        double norm = vector_norm(queries.vec(q));
        if (index.kind() == DistanceKind::kCosine && norm == 0.0) {
          throw ValidationError("knn graph: zero query vector under cosine distance, id '" +
                                queries.meta(q).id + "'");
        }
        q_norms[q - q_begin] = norm;
        if (self_exclude) {
          auto it = index_row.find(queries.meta(q).id);
          if (it != index_row.end()) skip[q - q_begin] = it->second;
        }
        int64_t avail = index.size() - (skip[q - q_begin] >= 0 ? 1 : 0);
        tops.emplace_back(static_cast<size_t>(std::min(k, avail)));
      }
      for (int64_t block = 0; block < index.size(); block += ib) {
        const int64_t i_end = std::min(index.size(), block + ib);
        for (int64_t q = q_begin; q < q_end; ++q) {
          detail::TopK &top = tops[q - q_begin];
          std::span<const float> qv = queries.vec(q);
          const double qn = q_norms[q - q_begin];
          const int64_t self = skip[q - q_begin];
          for (int64_t i = block; i < i_end; ++i) {
            if (i == self) continue;
            top.offer({index.row_distance(qv, qn, i), index.id_ranks()[i],
                       static_cast<int32_t>(i)});
          }
        }
      }
      for (int64_t q = q_begin; q < q_end; ++q) {
        lists[q] = tops[q - q_begin].sorted_ascending();
      }
    }
  });

  g.offsets.resize(nq + 1);
  g.offsets[0] = 0;
  for (int64_t q = 0; q < nq; ++q) {
    g.offsets[q + 1] = g.offsets[q] + static_cast<int64_t>(lists[q].size());
  }
  g.neighbors.resize(g.offsets[nq]);
  g.distances.resize(g.offsets[nq]);
  for (int64_t q = 0; q < nq; ++q) {
    int64_t off = g.offsets[q];
    for (size_t r = 0; r < lists[q].size(); ++r) {
      g.neighbors[off + r] = lists[q][r].row;
      g.distances[off + r] = static_cast<float>(lists[q][r].dist);
    }
  }
  return g;
}

inline void save_graph(const KnnGraph &g, const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json m;
  m["k"] = g.k;
  m["distance"] = distance_name(g.distance);
  m["index_size"] = g.index_size;
  m["query_block"] = g.blocks.query_block;
  m["index_block"] = g.blocks.index_block;
  write_file(dir / "graph.json", m.dump(2) + "\n");

  std::string body = "query_id\trank\tneighbor_id\tdistance\n";
  for (int64_t q = 0; q < g.num_queries(); ++q) {
    auto rows = g.neighbor_rows(q);
    auto dists = g.neighbor_distances(q);
    for (size_t r = 0; r < rows.size(); ++r) {
      body += g.query_ids[q];
      body += '\t';
      body += std::to_string(r);
      body += '\t';
      body += g.index_ids[rows[r]];
      body += '\t';
      body += fmt_g(dists[r]);
      body += '\n';
    }
  }
  write_file(dir / "neighbors.tsv", body);
}

inline KnnGraph load_graph(const std::filesystem::path &dir) {
  namespace fs = std::filesystem;
  fs::path manifest_path = dir / "graph.json";
  if (!fs::exists(manifest_path)) {
    throw DataError("knn graph: missing " + manifest_path.string());
  }
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::exception &e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }
  KnnGraph g;
  try {
    g.k = m.at("k").get<int64_t>();
    g.distance = parse_distance(m.at("distance").get<std::string>());
    g.index_size = m.at("index_size").get<int64_t>();
    if (m.contains("query_block")) g.blocks.query_block = m.at("query_block").get<int64_t>();
    if (m.contains("index_block")) g.blocks.index_block = m.at("index_block").get<int64_t>();
  } catch (const nlohmann::json::exception &e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }

  std::vector<std::string> lines = read_lines(dir / "neighbors.tsv");
  if (lines.empty() || lines[0] != "query_id\trank\tneighbor_id\tdistance") {
    throw ParseError((dir / "neighbors.tsv").string() + ": bad header");
  }
  std::unordered_map<std::string, int32_t> index_row;
  std::string prev_query;
  for (size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    std::string where = (dir / "neighbors.tsv").string() + ": line " + std::to_string(ln + 1);
    std::vector<std::string> cols = split(lines[ln], '\t');
    if (cols.size() != 4) throw ParseError(where + ": expected 4 columns");
    int64_t rank = parse_int(cols[1], where);
    if (cols[0] != prev_query) {
      if (rank != 0) throw ValidationError(where + ": first rank for a query must be 0");
      g.query_ids.push_back(cols[0]);
      g.offsets.push_back(static_cast<int64_t>(g.neighbors.size()));
      prev_query = cols[0];
    } else if (rank != static_cast<int64_t>(g.neighbors.size()) - g.offsets.back()) {
      throw ValidationError(where + ": non-contiguous rank");
    }
    auto [it, inserted] =
        index_row.emplace(cols[2], static_cast<int32_t>(g.index_ids.size()));
    if (inserted) g.index_ids.push_back(cols[2]);
    g.neighbors.push_back(it->second);
    double d = parse_double(cols[3], where);
    if (d < 0.0) throw ValidationError(where + ": negative distance");
    g.distances.push_back(static_cast<float>(d));
  }
  g.offsets.push_back(static_cast<int64_t>(g.neighbors.size()));
  for (size_t q = 0; q + 1 < g.offsets.size(); ++q) {
    auto dists = std::span<const float>(g.distances.data() + g.offsets[q],
                                        static_cast<size_t>(g.offsets[q + 1] - g.offsets[q]));
    for (size_t r = 1; r < dists.size(); ++r) {
      if (dists[r] < dists[r - 1]) {
        throw ValidationError((dir / "neighbors.tsv").string() + ": query '" +
                              g.query_ids[q] + "' distances not ascending");
      }
    }
  }
  return g;
}

}  // namespace embeval

#endif  // EMBEVAL_KNN_HPP_
