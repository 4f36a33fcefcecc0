/*
 * Copyright 2026 The Engage Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace engage {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input content is invalid: malformed rows, broken invariants, bad configs.
// The CLI maps this family to exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A text stream could not be parsed. `row` is 1-based and counts the header.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, long row = 0)
      : ValidationError(row > 0 ? "row " + std::to_string(row) + ": " + what
                                : what),
        row_(row) {}

  long row() const { return row_; }

 private:
  long row_;
};

// Feature layout of an input does not match what a model was trained on.
class SchemaError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// File system failures. The CLI maps this family to exit code 2.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace engage
