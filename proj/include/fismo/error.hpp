// Copyright 2026 The FISMO Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace fismo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values, non-SPD arguments, empty sample sets.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Operand shapes are incompatible.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An SPD matrix is too close to singular for an inverse square root.
class NearSingular : public Error {
 public:
  using Error::Error;
};

/// The input is mathematically degenerate for the operation (e.g. polar of 0).
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

/// Newton-Schulz iterates blew up.
class IterationDiverged : public Error {
 public:
  using Error::Error;
};

/// Not enough recorded data for an estimate or an audit.
class InsufficientData : public Error {
 public:
  using Error::Error;
};

/// A configuration file is malformed. `path()` names the offending field.
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace fismo
