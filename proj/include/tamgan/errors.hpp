/*
Copyright 2026 The tamgan Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#pragma once

#include <stdexcept>
#include <string>

namespace tamgan {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument values: wrong channel count, too-small image, shape mismatch.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Unsupported configuration (resolution, stage order, malformed manifest).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Operation invoked in the wrong lifecycle state (e.g. lower stage untrained).
class StateError : public Error {
 public:
  using Error::Error;
};

// Network wiring produced incompatible tensor shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Random generation could not satisfy its constraint within the retry budget.
class GenerationError : public Error {
 public:
  using Error::Error;
};

// File or codec failure.
class IoError : public Error {
 public:
  using Error::Error;
};

// Training diverged (NaN/Inf loss).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace tamgan
