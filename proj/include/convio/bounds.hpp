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
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "convio/model.hpp"

namespace convio {

enum class Algorithm { Direct, Winograd };

const char *to_string(Algorithm a);

/// Upper bounds on the vertices a dominator of size k can generate inside one
/// step (phi) and on that step's output set (psi).
struct PhiPsi {
    double phi = 0;
    double psi = 0;
};

/// Per-step (phi_j, psi_j) pairs. Each function maps (k, S) to bounds; k may
/// be fractional because later steps receive psi of earlier ones.
struct PhiPsiProfile {
    Algorithm algorithm = Algorithm::Direct;
    std::vector<std::function<PhiPsi(double k, double s)>> steps;
};

/// Direct convolution. Step 1: phi = psi = 2 s sqrt(R k). Step 2: phi = k - 1, psi = 0.
PhiPsi phi_psi_dc(int step, double k, double s, const Rational &r_factor);

struct WinogradBoundOptions {
    /// Use e^2 k - 1 for phi_4 (the variant in the step-4 proof) instead of (2k - 1) e^2.
    bool phi4_proof_variant = false;
};

/// Winograd F(e x e, r x r), t = e + r - 1.
///   step 1: phi = 6 k t^4 / (e r), psi = 3 k t^2 / (e r)
///   step 2: phi = psi = k sqrt(k) + t^2 s sqrt(k) / e^2
///   step 3: phi = k - 1, psi = min(k / 2, s t^2 / e^2)
///   step 4: phi = min((2k - 1) e^2, (2 t^2 - 1) s), psi = 0
/// Throws UnsupportedError unless 1/2 <= r/e <= 2.
PhiPsi phi_psi_wa(int step, double k, double s, std::int64_t e, std::int64_t r,
                  const WinogradBoundOptions &opts = {});

PhiPsiProfile dc_profile(const Rational &r_factor);
PhiPsiProfile wa_profile(const WinogradParams &p, const WinogradBoundOptions &opts = {});

struct TUpper {
    double value = 0;
    std::vector<std::int64_t> k; ///< integer maximizer k_1..k_n
    bool exhaustive = false;     ///< false when found by local search
};

inline constexpr std::int64_t kExhaustiveTLimit = 64;

/// T(S) = S + max over k_1 + ... + k_n <= S of
///   phi_1(k_1) + phi_2(k_2 + psi_1(k_1)) + ... + phi_n(k_n + psi_{n-1}(...)).
/// Exhaustive over the integer simplex when s <= exhaustive_limit; otherwise
/// starts at (S, 0, ..., 0) and its unit neighbours and climbs by transfers.
TUpper t_upper_generic(const PhiPsiProfile &profile, std::int64_t s,
                       std::int64_t exhaustive_limit = kExhaustiveTLimit);

/// 4 s sqrt(R s) + s - 1.
double t_upper_dc(std::int64_t s, const Rational &r_factor);

/// 2 t^3 / (e r) s sqrt(s) + 6 t^2 / (e r) s.
double t_upper_wa(std::int64_t s, std::int64_t e, std::int64_t r);

struct BoundReport {
    Algorithm algorithm = Algorithm::Direct;
    std::int64_t s = 0;
    std::int64_t v_count = 0; ///< internal + output vertices, batch included
    double t_2s = 0;          ///< closed-form T(2s)
    double q_lower = 0;       ///< max(0, s (|V| / T(2s) - 1))
    double omega = 0;         ///< asymptotic closed form, batch included
    double t_2s_generic = 0;  ///< T(2s) from the phi/psi profile
    double q_lower_generic = 0;
    std::vector<std::int64_t> k_max; ///< maximizer of the generic T(2s)
};

/// s (|V| / T - 1) clamped at 0.
double exact_lower_bound(std::int64_t v_count, double t_2s, std::int64_t s);

/// Omega = w_ker h_ker c_in w_out h_out c_out / (4 sqrt(2 R s)).
BoundReport lower_bound_dc(const ConvShape &shape, std::int64_t s);

/// Omega = w_out h_out c_out c_in t r / (e sqrt(s)); T(2s) closed form from t_upper_wa.
BoundReport lower_bound_wa(const ConvShape &shape, const WinogradParams &p, std::int64_t s,
                           const WinogradBoundOptions &opts = {});

nlohmann::ordered_json to_json(const BoundReport &r);

} // namespace convio
