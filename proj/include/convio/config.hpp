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

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "convio/bounds.hpp"
#include "convio/model.hpp"

namespace convio {

/// Everything a CLI run needs, loadable from a sectioned key=value file:
///
///     [shape]     algorithm out cin ker stride batch e
///     [hardware]  s np ssm alpha beta
///     [tuner]     ns budget patience seed quantile
///     [output]    json history trace best resume
///
/// `s = 0` means "not given".
struct RunConfig {
    Algorithm algorithm = Algorithm::Direct;
    std::int64_t w_out = 0, h_out = 0, c_out = 0;
    std::int64_t c_in = 1;
    std::int64_t w_ker = 3, h_ker = 3;
    std::int64_t stride = 1;
    std::int64_t batch = 1;
    std::int64_t e = 2;

    std::int64_t s = 0;
    std::int64_t n_p = 1;
    std::int64_t s_sm = 0;
    double alpha = 1.0;
    double beta = 4.0;

    int n_s = 16;
    std::int64_t budget = 64;
    int patience = 50;
    std::uint64_t seed = 0;
    double quantile = 0.2;

    std::string json, history, trace, best, resume;

    [[nodiscard]] ConvShape shape() const;
    [[nodiscard]] HwModel hw() const;
    [[nodiscard]] WinogradParams winograd() const { return {e, w_ker}; }

    friend bool operator==(const RunConfig &, const RunConfig &) = default;
};

Algorithm parse_algorithm(const std::string &s);

/// "4x4x2" -> {4, 4, 2}; throws ParseError unless there are exactly `n` positive parts.
std::vector<std::int64_t> parse_dims(const std::string &text, std::size_t n);

/// Unknown sections or keys are errors. Missing keys keep their defaults.
RunConfig read_run_config(std::istream &is);
RunConfig read_run_config_file(const std::string &path);

/// Canonical form: every key, fixed order.
void write_run_config(std::ostream &os, const RunConfig &c);

} // namespace convio
