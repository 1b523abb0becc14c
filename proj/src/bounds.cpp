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

#include "convio/bounds.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "convio/dag.hpp"
#include "convio/error.hpp"

namespace convio {

const char *to_string(Algorithm a) { return a == Algorithm::Direct ? "direct" : "winograd"; }

PhiPsi phi_psi_dc(int step, double k, double s, const Rational &r_factor) {
    if (k <= 0) {
        return {};
    }
    switch (step) {
    case 1: {
        const double v = 2.0 * s * std::sqrt(to_double(r_factor) * k);
        return {v, v};
    }
    case 2:
        return {std::max(k - 1.0, 0.0), 0.0};
    default:
        throw Error("direct convolution has steps 1..2, got " + std::to_string(step));
    }
}

PhiPsi phi_psi_wa(int step, double k, double s, std::int64_t e, std::int64_t r, const WinogradBoundOptions &opts) {
    if (!WinogradParams{e, r}.ratio_in_range()) {
        throw UnsupportedError("Winograd bounds assume 1/2 <= r/e <= 2, got e=" + std::to_string(e) +
                               " r=" + std::to_string(r));
    }
    if (k <= 0) {
        return {};
    }
    const double t = static_cast<double>(e + r - 1);
    const double t2 = t * t;
    const double er = static_cast<double>(e * r);
    const double e2 = static_cast<double>(e * e);
    switch (step) {
    case 1:
        return {6.0 * k * t2 * t2 / er, 3.0 * k * t2 / er};
    case 2: {
        const double v = k * std::sqrt(k) + t2 * s * std::sqrt(k) / e2;
        return {v, v};
    }
    case 3:
        return {std::max(k - 1.0, 0.0), std::min(k / 2.0, s * t2 / e2)};
    case 4: {
        const double first = opts.phi4_proof_variant ? e2 * k - 1.0 : (2.0 * k - 1.0) * e2;
        return {std::max(0.0, std::min(first, (2.0 * t2 - 1.0) * s)), 0.0};
    }
    default:
        throw Error("Winograd has steps 1..4, got " + std::to_string(step));
    }
}

PhiPsiProfile dc_profile(const Rational &r_factor) {
    PhiPsiProfile p;
    p.algorithm = Algorithm::Direct;
    for (int j = 1; j <= 2; ++j) {
        p.steps.emplace_back([j, r_factor](double k, double s) { return phi_psi_dc(j, k, s, r_factor); });
    }
    return p;
}

PhiPsiProfile wa_profile(const WinogradParams &wp, const WinogradBoundOptions &opts) {
    if (!wp.ratio_in_range()) {
        throw UnsupportedError("Winograd bounds assume 1/2 <= r/e <= 2");
    }
    PhiPsiProfile p;
    p.algorithm = Algorithm::Winograd;
    for (int j = 1; j <= 4; ++j) {
        p.steps.emplace_back([j, wp, opts](double k, double s) { return phi_psi_wa(j, k, s, wp.e, wp.r, opts); });
    }
    return p;
}

namespace {

double nested_value(const PhiPsiProfile &profile, const std::vector<std::int64_t> &k, double s) {
    double total = 0;
    double carry = 0;
    for (std::size_t j = 0; j < profile.steps.size(); ++j) {
        const PhiPsi f = profile.steps[j](static_cast<double>(k[j]) + carry, s);
        total += f.phi;
        carry = f.psi;
    }
    return total;
}

void enumerate(const PhiPsiProfile &profile, double s, std::int64_t budget, std::size_t j,
               std::vector<std::int64_t> &k, TUpper &best) {
    if (j == k.size()) {
        const double v = nested_value(profile, k, s);
        if (v > best.value) {
            best.value = v;
            best.k = k;
        }
        return;
    }
    // Descending so that earlier steps win ties.
    for (std::int64_t kj = budget; kj >= 0; --kj) {
        k[j] = kj;
        enumerate(profile, s, budget - kj, j + 1, k, best);
    }
    k[j] = 0;
}

} // namespace

TUpper t_upper_generic(const PhiPsiProfile &profile, std::int64_t s, std::int64_t exhaustive_limit) {
    TUpper best;
    if (s <= 0) {
        best.k.assign(profile.steps.size(), 0);
        return best;
    }
    const std::size_t n = profile.steps.size();
    if (n == 0) {
        throw Error("t_upper_generic: profile has no steps");
    }
    const auto sd = static_cast<double>(s);
    best.value = -1;
    if (s <= exhaustive_limit) {
        std::vector<std::int64_t> k(n, 0);
        enumerate(profile, sd, s, 0, k, best);
        best.exhaustive = true;
    } else {
        std::vector<std::int64_t> k(n, 0);
        k[0] = s;
        best.k = k;
        best.value = nested_value(profile, k, sd);
        bool improved = true;
        while (improved) {
            improved = false;
            for (std::int64_t d = std::bit_floor(static_cast<std::uint64_t>(s)); d >= 1; d /= 2) {
                for (std::size_t a = 0; a < n; ++a) {
                    for (std::size_t b = 0; b < n; ++b) {
                        if (a == b || best.k[a] < d) {
                            continue;
                        }
                        auto cand = best.k;
                        cand[a] -= d;
                        cand[b] += d;
                        const double v = nested_value(profile, cand, sd);
                        if (v > best.value) {
                            best.value = v;
                            best.k = cand;
                            improved = true;
                        }
                    }
                }
            }
        }
    }
    best.value += sd;
    return best;
}

double t_upper_dc(std::int64_t s, const Rational &r_factor) {
    const auto sd = static_cast<double>(s);
    return 4.0 * sd * std::sqrt(to_double(r_factor) * sd) + sd - 1.0;
}

double t_upper_wa(std::int64_t s, std::int64_t e, std::int64_t r) {
    const auto sd = static_cast<double>(s);
    const auto t = static_cast<double>(e + r - 1);
    const auto er = static_cast<double>(e * r);
    return 2.0 * t * t * t / er * sd * std::sqrt(sd) + 6.0 * t * t / er * sd;
}

double exact_lower_bound(std::int64_t v_count, double t_2s, std::int64_t s) {
    if (t_2s <= 0) {
        return 0;
    }
    return std::max(0.0, static_cast<double>(s) * (static_cast<double>(v_count) / t_2s - 1.0));
}

BoundReport lower_bound_dc(const ConvShape &shape, std::int64_t s) {
    if (s < 1) {
        throw GeometryError("fast memory s must be >= 1");
    }
    const Rational rf = reuse_factor(shape);
    BoundReport r;
    r.algorithm = Algorithm::Direct;
    r.s = s;
    r.v_count = direct_vertex_count(shape);
    r.t_2s = t_upper_dc(2 * s, rf);
    r.q_lower = exact_lower_bound(r.v_count, r.t_2s, s);
    const double work = static_cast<double>(shape.batch * shape.w_ker * shape.h_ker * shape.c_in * shape.w_out *
                                            shape.h_out * shape.c_out);
    r.omega = work / (4.0 * std::sqrt(2.0 * to_double(rf) * static_cast<double>(s)));
    auto t = t_upper_generic(dc_profile(rf), 2 * s);
    r.t_2s_generic = t.value;
    r.q_lower_generic = exact_lower_bound(r.v_count, t.value, s);
    r.k_max = t.k;
    return r;
}

BoundReport lower_bound_wa(const ConvShape &shape, const WinogradParams &p, std::int64_t s,
                           const WinogradBoundOptions &opts) {
    if (s < 1) {
        throw GeometryError("fast memory s must be >= 1");
    }
    validate_winograd(shape, p);
    BoundReport r;
    r.algorithm = Algorithm::Winograd;
    r.s = s;
    r.v_count = winograd_vertex_count(shape, p);
    r.t_2s = t_upper_wa(2 * s, p.e, p.r);
    r.q_lower = exact_lower_bound(r.v_count, r.t_2s, s);
    const double work = static_cast<double>(shape.batch * shape.w_out * shape.h_out * shape.c_out * shape.c_in *
                                            p.tile_in() * p.r);
    r.omega = work / (static_cast<double>(p.e) * std::sqrt(static_cast<double>(s)));
    if (p.ratio_in_range()) {
        auto t = t_upper_generic(wa_profile(p, opts), 2 * s);
        r.t_2s_generic = t.value;
        r.q_lower_generic = exact_lower_bound(r.v_count, t.value, s);
        r.k_max = t.k;
    }
    return r;
}

nlohmann::ordered_json to_json(const BoundReport &r) {
    nlohmann::ordered_json j;
    j["algorithm"] = to_string(r.algorithm);
    j["s"] = r.s;
    j["v_count"] = r.v_count;
    j["t_2s"] = r.t_2s;
    j["q_lower"] = r.q_lower;
    j["omega"] = r.omega;
    j["t_2s_generic"] = r.t_2s_generic;
    j["q_lower_generic"] = r.q_lower_generic;
    j["k_max"] = r.k_max;
    return j;
}

} // namespace convio
