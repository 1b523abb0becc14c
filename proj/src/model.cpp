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

#include "convio/model.hpp"

#include <algorithm>
#include <sstream>

#include "convio/error.hpp"

namespace convio {

namespace {

void require_positive(std::int64_t v, const char *name) {
    if (v < 1) {
        throw GeometryError(std::string(name) + " must be >= 1, got " + std::to_string(v));
    }
}

} // namespace

std::pair<std::int64_t, std::int64_t> output_shape(std::int64_t w_in, std::int64_t h_in, std::int64_t w_ker,
                                                   std::int64_t h_ker, std::int64_t stride) {
    require_positive(w_in, "w_in");
    require_positive(h_in, "h_in");
    require_positive(w_ker, "w_ker");
    require_positive(h_ker, "h_ker");
    require_positive(stride, "stride");
    if (w_ker > w_in || h_ker > h_in) {
        std::ostringstream os;
        os << "kernel " << w_ker << "x" << h_ker << " larger than input " << w_in << "x" << h_in;
        throw GeometryError(os.str());
    }
    return {(w_in - w_ker) / stride + 1, (h_in - h_ker) / stride + 1};
}

ConvShape ConvShape::from_input(std::int64_t w_in, std::int64_t h_in, std::int64_t c_in, std::int64_t c_out,
                                std::int64_t w_ker, std::int64_t h_ker, std::int64_t stride, std::int64_t batch) {
    require_positive(c_in, "c_in");
    require_positive(c_out, "c_out");
    require_positive(batch, "batch");
    auto [w_out, h_out] = output_shape(w_in, h_in, w_ker, h_ker, stride);
    ConvShape s;
    s.w_in = w_in;
    s.h_in = h_in;
    s.c_in = c_in;
    s.w_out = w_out;
    s.h_out = h_out;
    s.c_out = c_out;
    s.w_ker = w_ker;
    s.h_ker = h_ker;
    s.stride = stride;
    s.batch = batch;
    return s;
}

ConvShape ConvShape::from_output(std::int64_t w_out, std::int64_t h_out, std::int64_t c_out, std::int64_t c_in,
                                 std::int64_t w_ker, std::int64_t h_ker, std::int64_t stride, std::int64_t batch) {
    require_positive(w_out, "w_out");
    require_positive(h_out, "h_out");
    require_positive(w_ker, "w_ker");
    require_positive(h_ker, "h_ker");
    require_positive(stride, "stride");
    return from_input(stride * (w_out - 1) + w_ker, stride * (h_out - 1) + h_ker, c_in, c_out, w_ker, h_ker, stride,
                      batch);
}

ConvShape ConvShape::padded(std::int64_t pad) const {
    if (pad < 0) {
        throw GeometryError("padding must be nonnegative");
    }
    return from_input(w_in + 2 * pad, h_in + 2 * pad, c_in, c_out, w_ker, h_ker, stride, batch);
}

std::string ConvShape::to_string() const {
    std::ostringstream os;
    os << "in " << w_in << "x" << h_in << "x" << c_in << " out " << w_out << "x" << h_out << "x" << c_out << " ker "
       << w_ker << "x" << h_ker << " stride " << stride;
    if (batch != 1) {
        os << " batch " << batch;
    }
    return os.str();
}

void validate_winograd(const ConvShape &shape, const WinogradParams &p) {
    if (p.e < 1 || p.r < 1) {
        throw GeometryError("Winograd e and r must be >= 1");
    }
    if (shape.stride != 1) {
        throw UnsupportedError("Winograd requires unit stride, got stride " + std::to_string(shape.stride));
    }
    if (shape.w_ker != shape.h_ker) {
        throw UnsupportedError("Winograd requires a square kernel");
    }
    if (shape.w_ker != p.r) {
        throw GeometryError("Winograd r=" + std::to_string(p.r) + " does not match kernel edge " +
                            std::to_string(shape.w_ker));
    }
}

HwModel HwModel::make(std::int64_t s, std::int64_t n_p, std::int64_t s_sm, double alpha, double beta) {
    if (s < 3) {
        throw GeometryError("fast memory s must be >= 3 words, got " + std::to_string(s));
    }
    if (n_p < 1) {
        throw GeometryError("processor count must be >= 1");
    }
    if (alpha < 0 || beta < 0) {
        throw GeometryError("cost coefficients must be nonnegative");
    }
    HwModel hw;
    hw.s = s;
    hw.n_p = n_p;
    hw.s_sm = s_sm > 0 ? s_sm : 2 * std::max<std::int64_t>(1, s / n_p);
    hw.alpha = alpha;
    hw.beta = beta;
    return hw;
}

Rational reuse_factor(const ConvShape &shape) {
    return Rational(shape.w_ker * shape.h_ker, shape.stride * shape.stride);
}

} // namespace convio
