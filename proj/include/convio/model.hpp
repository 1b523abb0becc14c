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
#include <string>
#include <utility>

#include <boost/rational.hpp>

namespace convio {

using Rational = boost::rational<std::int64_t>;

inline double to_double(const Rational &q) { return boost::rational_cast<double>(q); }

/// Geometry of one convolution layer under the valid-padding convention.
///
/// Instances are only produced by the factories below, which enforce
/// `out = floor((in - ker) / stride) + 1` on both spatial axes.
struct ConvShape {
    std::int64_t w_in = 1, h_in = 1, c_in = 1;
    std::int64_t w_out = 1, h_out = 1, c_out = 1;
    std::int64_t w_ker = 1, h_ker = 1;
    std::int64_t stride = 1;
    std::int64_t batch = 1;

    /// Build from input dimensions; output spatial dims are derived.
    static ConvShape from_input(std::int64_t w_in, std::int64_t h_in, std::int64_t c_in, std::int64_t c_out,
                                std::int64_t w_ker, std::int64_t h_ker, std::int64_t stride = 1,
                                std::int64_t batch = 1);

    /// Build from output dimensions; the smallest input producing them is derived.
    static ConvShape from_output(std::int64_t w_out, std::int64_t h_out, std::int64_t c_out, std::int64_t c_in,
                                 std::int64_t w_ker, std::int64_t h_ker, std::int64_t stride = 1,
                                 std::int64_t batch = 1);

    /// Zero-pad the input by `pad` on every spatial border before analysis.
    [[nodiscard]] ConvShape padded(std::int64_t pad) const;

    [[nodiscard]] std::int64_t outputs() const { return w_out * h_out * c_out; }
    [[nodiscard]] std::int64_t kernel_volume() const { return w_ker * h_ker * c_in; }
    [[nodiscard]] std::string to_string() const;

    friend bool operator==(const ConvShape &, const ConvShape &) = default;
};

/// F(e x e, r x r) tile parameters.
struct WinogradParams {
    std::int64_t e = 2;
    std::int64_t r = 3;

    [[nodiscard]] std::int64_t tile_in() const { return e + r - 1; }
    /// 1/2 <= r/e <= 2, the range the vertex-generation estimates assume.
    [[nodiscard]] bool ratio_in_range() const { return 2 * r >= e && r <= 2 * e; }

    friend bool operator==(const WinogradParams &, const WinogradParams &) = default;
};

/// Check that `p` applies to `shape` (square kernel of edge r, unit stride).
/// Throws UnsupportedError / GeometryError.
void validate_winograd(const ConvShape &shape, const WinogradParams &p);

/// Two-level machine: fast memory `s` words shared by `n_p` processors, an SM
/// capacity `s_sm` for the per-block budget, and runtime-proxy coefficients.
struct HwModel {
    std::int64_t s = 1024;
    std::int64_t s_sm = 2048;
    std::int64_t n_p = 1;
    double alpha = 1.0;
    double beta = 4.0;

    /// Defaults `s_sm` to two blocks of `s / n_p` words each.
    static HwModel make(std::int64_t s, std::int64_t n_p = 1, std::int64_t s_sm = 0, double alpha = 1.0,
                        double beta = 4.0);

    /// Words of fast memory available to one processor.
    [[nodiscard]] std::int64_t per_processor() const { return s / n_p; }
};

/// R = w_ker * h_ker / stride^2, kept exact.
Rational reuse_factor(const ConvShape &shape);

/// Valid-padding output extent for both axes.
std::pair<std::int64_t, std::int64_t> output_shape(std::int64_t w_in, std::int64_t h_in, std::int64_t w_ker,
                                                   std::int64_t h_ker, std::int64_t stride);

} // namespace convio
