// embeval/util.hpp

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

#ifndef EMBEVAL_UTIL_HPP_
#define EMBEVAL_UTIL_HPP_

#include <algorithm>
#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "embeval/error.hpp"

namespace embeval {

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      break;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::string join(const std::vector<std::string> &parts, char sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out.push_back(sep);
    out += parts[i];
  }
  return out;
}

// Canonical float formatting for TSV output; stable across runs.
inline std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline std::string fmt_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

// FNV-1a, used for input-content digests in reports.
inline uint64_t fnv1a64(const void *data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
  const unsigned char *p = static_cast<const unsigned char *>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a64(s.data(), s.size(), h);
}

inline std::string to_hex(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LookupError("cannot open file: " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return data;
}

inline void write_file(const std::filesystem::path &path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write file: " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

// Digest of a file, or of a directory tree (relative names + contents,
// visited in sorted order).
inline std::string digest_path(const std::filesystem::path &path) {
  namespace fs = std::filesystem;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto &ent : fs::recursive_directory_iterator(path)) {
      if (ent.is_regular_file()) files.push_back(ent.path());
    }
    std::sort(files.begin(), files.end());
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto &f : files) {
      h = fnv1a64(fs::relative(f, path).generic_string(), h);
      std::string body = read_file(f);
      h = fnv1a64(body.data(), body.size(), h);
    }
    return to_hex(h);
  }
  std::string body = read_file(path);
  return to_hex(fnv1a64(body.data(), body.size()));
}

// Raw little-endian float32 blobs (feature and embedding archives).
inline void write_f32le(const std::filesystem::path &path, const float *data, size_t n) {
  std::string buf(n * 4, '\0');
  for (size_t i = 0; i < n; ++i) {
    uint32_t bits;
    std::memcpy(&bits, &data[i], 4);
    buf[4 * i + 0] = static_cast<char>(bits & 0xff);
    buf[4 * i + 1] = static_cast<char>((bits >> 8) & 0xff);
    buf[4 * i + 2] = static_cast<char>((bits >> 16) & 0xff);
    buf[4 * i + 3] = static_cast<char>((bits >> 24) & 0xff);
  }
  write_file(path, buf);
}

inline void write_f32le(const std::filesystem::path &path, const std::vector<float> &data) {
  write_f32le(path, data.data(), data.size());
}

// Reads a whole float32 blob; size must be a multiple of 4 bytes.
inline std::vector<float> read_f32le(const std::filesystem::path &path) {
  std::string buf = read_file(path);
  if (buf.size() % 4 != 0) {
    throw ParseError("bad float32 blob size in " + path.string() + ": " +
                     std::to_string(buf.size()) + " bytes is not a multiple of 4");
  }
  size_t n = buf.size() / 4;
  std::vector<float> out(n);
  const unsigned char *p = reinterpret_cast<const unsigned char *>(buf.data());
  for (size_t i = 0; i < n; ++i) {
    uint32_t bits = static_cast<uint32_t>(p[4 * i]) |
                    (static_cast<uint32_t>(p[4 * i + 1]) << 8) |
                    (static_cast<uint32_t>(p[4 * i + 2]) << 16) |
                    (static_cast<uint32_t>(p[4 * i + 3]) << 24);
    std::memcpy(&out[i], &bits, 4);
  }
  return out;
}

inline std::vector<float> read_f32le(const std::filesystem::path &path, size_t expect_n) {
  std::vector<float> out = read_f32le(path);
  if (out.size() != expect_n) {
    throw ParseError("bad float32 blob size in " + path.string() + ": got " +
                     std::to_string(out.size()) + " floats, expected " +
                     std::to_string(expect_n));
  }
  return out;
}

// Strict string->double parse for TSV time columns.
inline double parse_double(const std::string &s, const std::string &context) {
  if (s.empty()) throw ParseError(context + ": empty numeric field");
  char *end = nullptr;
  errno = 0;
  double v = std::strtod(s.c_str(), &end);
  if (errno != 0 || end != s.c_str() + s.size()) {
    throw ParseError(context + ": not a number: '" + s + "'");
  }
  return v;
}

inline int64_t parse_int(const std::string &s, const std::string &context) {
  if (s.empty()) throw ParseError(context + ": empty integer field");
  char *end = nullptr;
  errno = 0;
  long long v = std::strtoll(s.c_str(), &end, 10);
  if (errno != 0 || end != s.c_str() + s.size()) {
    throw ParseError(context + ": not an integer: '" + s + "'");
  }
  return v;
}

// Reads a whole text file into lines, tolerating a trailing newline and
// CRLF endings.
inline std::vector<std::string> read_lines(const std::filesystem::path &path) {
  std::string body = read_file(path);
  std::vector<std::string> lines;
  size_t start = 0;
  while (start < body.size()) {
    size_t pos = body.find('\n', start);
    size_t end = (pos == std::string::npos) ? body.size() : pos;
    size_t len = end - start;
    if (len > 0 && body[start + len - 1] == '\r') --len;
    lines.emplace_back(body.substr(start, len));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return lines;
}

}  // namespace embeval

#endif  // EMBEVAL_UTIL_HPP_
