/*
Copyright 2026 The convio Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#pragma once

#include <stdexcept>
#include <string>

namespace convio {

/// Base of every error raised by the library. The CLI maps the subclasses
/// onto process exit codes.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Kernel larger than the input, zero-sized dimension, and similar shape faults.
class GeometryError : public Error {
  public:
    using Error::Error;
};

/// A configurable size cap (vertex count, search-space size, ...) was exceeded.
class SizeError : public Error {
  public:
    using Error::Error;
};

/// No feasible object exists: no tile factorization, a pebble budget too small
/// to fire any vertex, an empty configuration space.
class InfeasibleError : public Error {
  public:
    using Error::Error;
};

/// A requested combination the algorithm does not support (e.g. Winograd with stride > 1).
class UnsupportedError : public Error {
  public:
    using Error::Error;
};

/// A schedule that cannot run on the declared hardware.
class ScheduleError : public Error {
  public:
    using Error::Error;
};

/// Malformed input files (dag adjacency text, config files, datasets).
class ParseError : public Error {
  public:
    using Error::Error;
};

} // namespace convio
