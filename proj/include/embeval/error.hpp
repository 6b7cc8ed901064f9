// embeval/error.hpp

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

#ifndef EMBEVAL_ERROR_HPP_
#define EMBEVAL_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace embeval {

// Process exit codes, also used by the CLI front end.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumeric = 4,
};

class Error : public std::runtime_error {
 public:
  Error(const std::string &msg, int exit_code)
      : std::runtime_error(msg), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

// Bad configuration: invalid flags, malformed config files, incompatible
// option combinations.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string &msg) : Error(msg, kExitConfig) {}
};

// Bad input data; parent of the parse/validation/lookup triple.
class DataError : public Error {
 public:
  explicit DataError(const std::string &msg) : Error(msg, kExitData) {}
};

// A file does not follow its documented format.
class ParseError : public DataError {
 public:
  explicit ParseError(const std::string &msg) : DataError(msg) {}
};

// Structurally well-formed input violating an invariant.
class ValidationError : public DataError {
 public:
  explicit ValidationError(const std::string &msg) : DataError(msg) {}
};

// A referenced entity (file id, segment id, ...) is unknown.
class LookupError : public DataError {
 public:
  explicit LookupError(const std::string &msg) : DataError(msg) {}
};

// Numeric trouble: degenerate inputs, undefined statistics, non-finite
// values.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string &msg) : Error(msg, kExitNumeric) {}
};

}  // namespace embeval

#endif  // EMBEVAL_ERROR_HPP_
