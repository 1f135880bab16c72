/*
 * Copyright 2026 The mmdet Authors.
 *
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

namespace mmdet {

// Base of every error thrown by the library. The CLI maps these to exit
// status 1; only command-line parsing problems map to 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller passed something the operation's contract rejects.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// An id did not resolve in the store or table it should be in.
class LookupError : public Error {
 public:
  using Error::Error;
};

// Bad magic, unsupported version, unparsable field.
class FormatError : public Error {
 public:
  using Error::Error;
};

// File is structurally valid but shorter or longer than its header says.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

// A required class, variant or table cell is missing.
class CoverageError : public Error {
 public:
  using Error::Error;
};

// A benchmark id appears in more than one trio slot.
class BalanceError : public Error {
 public:
  using Error::Error;
};

// Operation called in the wrong order (e.g. backward without a cache).
class StateError : public Error {
 public:
  using Error::Error;
};

// Malformed text input; the message carries "line N".
class ParseError : public FormatError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : FormatError("line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Numerical operation is undefined on the given input (zero norm, zero
// pooled variance).
class UndefinedError : public Error {
 public:
  using Error::Error;
};

}  // namespace mmdet
