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

#include <gtest/gtest.h>

#include <bit>
#include <cmath>

#include "convio/bounds.hpp"
#include "convio/dag.hpp"
#include "convio/error.hpp"

using namespace convio;

TEST(PhiPsiDc, Examples) {
    auto z = phi_psi_dc(1, 0, 4, Rational(1));
    EXPECT_EQ(z.phi, 0);
    EXPECT_EQ(z.psi, 0);
    auto a = phi_psi_dc(1, 4, 4, Rational(1));
    EXPECT_DOUBLE_EQ(a.phi, 16);
    EXPECT_DOUBLE_EQ(a.psi, 16);
    auto b = phi_psi_dc(2, 5, 4, Rational(1));
    EXPECT_DOUBLE_EQ(b.phi, 4);
    EXPECT_DOUBLE_EQ(b.psi, 0);
    EXPECT_THROW((void)phi_psi_dc(3, 1, 1, Rational(1)), Error);
}

TEST(PhiPsiWa, Examples) {
    auto z = phi_psi_wa(3, 0, 4, 2, 3);
    EXPECT_EQ(z.phi, 0);
    EXPECT_EQ(z.psi, 0);
    auto a = phi_psi_wa(1, 1, 4, 2, 3);
    EXPECT_DOUBLE_EQ(a.phi, 256);
    EXPECT_DOUBLE_EQ(a.psi, 8);
    auto b = phi_psi_wa(4, 1, 10, 2, 3);
    EXPECT_DOUBLE_EQ(b.phi, 4);
    WinogradBoundOptions variant;
    variant.phi4_proof_variant = true;
    EXPECT_DOUBLE_EQ(phi_psi_wa(4, 1, 10, 2, 3, variant).phi, 3);
    EXPECT_DOUBLE_EQ(phi_psi_wa(4, 1000, 10, 2, 3).phi, 310);
    EXPECT_DOUBLE_EQ(phi_psi_wa(3, 100, 2, 2, 3).psi, 8); // s t^2 / e^2 = 2*16/4
    EXPECT_THROW((void)phi_psi_wa(1, 1, 1, 1, 3), UnsupportedError);
}

TEST(PhiPsi, NondecreasingInK) {
    auto dc = dc_profile(Rational(9, 4));
    auto wa = wa_profile({2, 3});
    auto wa_small = wa_profile({1, 1});
    for (const auto *prof : {&dc, &wa, &wa_small}) {
        for (const auto &f : prof->steps) {
            for (double s : {1.0, 4.0, 37.0}) {
                PhiPsi prev = f(0, s);
                EXPECT_EQ(prev.phi, 0);
                EXPECT_EQ(prev.psi, 0);
                for (double k = 0.25; k < 200; k += 0.25) {
                    PhiPsi cur = f(k, s);
                    EXPECT_GE(cur.phi, prev.phi);
                    EXPECT_GE(cur.psi, prev.psi);
                    prev = cur;
                }
            }
        }
    }
}

TEST(TUpper, ClosedForms) {
    EXPECT_DOUBLE_EQ(t_upper_dc(4, Rational(1)), 35);
    EXPECT_DOUBLE_EQ(t_upper_dc(1, Rational(1)), 4);
    EXPECT_DOUBLE_EQ(t_upper_dc(144, Rational(9)), 20879);
    EXPECT_NEAR(t_upper_wa(1, 2, 3), 37.0 + 1.0 / 3.0, 1e-12);
    EXPECT_DOUBLE_EQ(t_upper_wa(4, 1, 1), 40);
    EXPECT_NEAR(t_upper_wa(64, 2, 3), 11946.0 + 2.0 / 3.0, 1e-9);
}

TEST(TUpper, GenericMatchesDcClosedForm) {
    for (std::int64_t R : {1, 4, 9}) {
        for (std::int64_t s = 1; s <= 64; ++s) {
            auto t = t_upper_generic(dc_profile(Rational(R)), s);
            EXPECT_TRUE(t.exhaustive);
            const double closed = t_upper_dc(s, Rational(R));
            EXPECT_NEAR(t.value, closed, 1e-12 * closed) << "R=" << R << " s=" << s;
            EXPECT_EQ(t.k, (std::vector<std::int64_t>{s, 0}));
        }
    }
    EXPECT_DOUBLE_EQ(t_upper_generic(dc_profile(Rational(1)), 4).value, 35);
    EXPECT_DOUBLE_EQ(t_upper_generic(dc_profile(Rational(1)), 1).value, 4);
    EXPECT_EQ(t_upper_generic(dc_profile(Rational(1)), 0).value, 0);
}

TEST(TUpper, LocalSearchAgreesWithExhaustive) {
    for (std::int64_t s : {65, 90, 128}) {
        auto exact = t_upper_generic(dc_profile(Rational(4)), s, 1000);
        auto local = t_upper_generic(dc_profile(Rational(4)), s);
        EXPECT_TRUE(exact.exhaustive);
        EXPECT_FALSE(local.exhaustive);
        EXPECT_DOUBLE_EQ(exact.value, local.value);
    }
    for (std::int64_t s : {20, 33}) {
        auto exact = t_upper_generic(wa_profile({2, 3}), s, 1000);
        auto local = t_upper_generic(wa_profile({2, 3}), s, 0);
        EXPECT_NEAR(exact.value, local.value, 1e-9 * exact.value);
    }
}

TEST(TUpper, NondecreasingInS) {
    auto wa = wa_profile({2, 1});
    double prev = 0;
    for (std::int64_t s = 0; s <= 40; ++s) {
        double v = t_upper_generic(wa, s).value;
        EXPECT_GE(v, prev);
        prev = v;
    }
}

TEST(LowerBoundDc, Examples) {
    auto shape = ConvShape::from_output(13, 13, 384, 256, 3, 3);
    auto r = lower_bound_dc(shape, 1024);
    const double oracle = 149520384.0 / (4.0 * std::sqrt(18432.0));
    EXPECT_NEAR(r.omega, oracle, 1e-9 * oracle);
    EXPECT_NEAR(r.omega, 275328, 1e-4 * 275328); // quoted value is rounded
    EXPECT_EQ(r.v_count, (2 * 9 * 256 - 1) * 13 * 13 * 384);
    EXPECT_DOUBLE_EQ(r.t_2s, t_upper_dc(2048, Rational(9)));
    EXPECT_NEAR(r.t_2s_generic, r.t_2s, 1e-12 * r.t_2s);
    EXPECT_EQ(r.k_max, (std::vector<std::int64_t>{2048, 0}));
    EXPECT_NEAR(r.q_lower, 1024.0 * (r.v_count / r.t_2s - 1.0), 1e-6);

    auto tiny = lower_bound_dc(ConvShape::from_output(1, 1, 1, 1, 1, 1), 1);
    EXPECT_DOUBLE_EQ(tiny.omega, 1.0 / (4.0 * std::sqrt(2.0)));
    EXPECT_EQ(tiny.q_lower, 0);

    auto huge = lower_bound_dc(shape, 1 << 24);
    EXPECT_EQ(huge.q_lower, 0);
}

TEST(LowerBoundDc, Scaling) {
    auto a = lower_bound_dc(ConvShape::from_output(8, 8, 16, 32, 3, 3), 256);
    auto b = lower_bound_dc(ConvShape::from_output(8, 8, 16, 32, 3, 3), 1024);
    EXPECT_NEAR(a.omega / b.omega, 2.0, 1e-12);
    auto c = lower_bound_dc(ConvShape::from_output(8, 8, 32, 32, 3, 3), 256);
    auto d = lower_bound_dc(ConvShape::from_output(8, 8, 16, 96, 3, 3), 256);
    EXPECT_NEAR(c.omega / a.omega, 2.0, 1e-12);
    EXPECT_NEAR(d.omega / a.omega, 3.0, 1e-12);
}

TEST(LowerBoundWa, Examples) {
    auto shape = ConvShape::from_output(13, 13, 384, 256, 3, 3);
    auto r = lower_bound_wa(shape, {2, 3}, 1024);
    EXPECT_NEAR(r.omega, 199360512.0 / 64.0, 1e-6);
    EXPECT_NEAR(r.omega, 3115008, 1e-6);
    EXPECT_DOUBLE_EQ(r.t_2s, t_upper_wa(2048, 2, 3));
    // the profile-derived T is larger than the closed form, so its bound is weaker
    EXPECT_GE(r.t_2s_generic, r.t_2s);
    EXPECT_LE(r.q_lower_generic, r.q_lower);

    auto tiny = lower_bound_wa(ConvShape::from_output(1, 1, 1, 1, 1, 1), {1, 1}, 1);
    EXPECT_DOUBLE_EQ(tiny.omega, 1.0);

    auto dbl = lower_bound_wa(shape, {2, 3}, 2048);
    EXPECT_NEAR(r.omega / dbl.omega, std::sqrt(2.0), 1e-12);
    auto wide = lower_bound_wa(ConvShape::from_output(13, 13, 768, 256, 3, 3), {2, 3}, 1024);
    EXPECT_NEAR(wide.omega / r.omega, 2.0, 1e-12);
    auto deep = lower_bound_wa(ConvShape::from_output(13, 13, 384, 512, 3, 3), {2, 3}, 1024);
    EXPECT_NEAR(deep.omega / r.omega, 2.0, 1e-12);

    EXPECT_THROW((void)lower_bound_wa(ConvShape::from_output(4, 4, 1, 1, 3, 3, 2), {2, 3}, 64), UnsupportedError);
}

TEST(BoundReport, Json) {
    auto r = lower_bound_dc(ConvShape::from_output(4, 4, 4, 4, 3, 3), 16);
    auto j = to_json(r);
    EXPECT_EQ(j["algorithm"], "direct");
    EXPECT_EQ(j["v_count"], r.v_count);
    EXPECT_EQ(j["k_max"].size(), 2U);
    EXPECT_TRUE(j.contains("omega"));
    EXPECT_TRUE(j.contains("q_lower"));
}

// ---------------------------------------------------------------------------
// phi/psi soundness by enumerating dominator sets on tiny dags.

namespace {

using Mask = std::uint64_t;

struct StepMasks {
    Mask inputs = 0;
    std::vector<Mask> body;   // index j-1
    std::vector<Mask> output; // index j-1
};

StepMasks step_masks(const Dag &dag) {
    auto part = validate_multi_step_partition(dag);
    StepMasks m;
    for (VertexId v : dag.inputs()) {
        m.inputs |= Mask{1} << v;
    }
    for (const auto &st : part.steps) {
        Mask b = 0, o = 0;
        for (VertexId v : st.body) {
            b |= Mask{1} << v;
        }
        for (VertexId v : st.outputs) {
            o |= Mask{1} << v;
        }
        m.body.push_back(b);
        m.output.push_back(o);
    }
    return m;
}

// Vertices every input path to which passes through d (d included).
Mask generated(const Dag &dag, const std::vector<VertexId> &topo, Mask d) {
    Mask free = 0;
    for (VertexId v : topo) {
        const Mask b = Mask{1} << v;
        if (d & b) {
            continue;
        }
        if (dag.kind(v) == VertexKind::Input) {
            free |= b;
            continue;
        }
        for (VertexId u : dag.preds(v)) {
            if (free & (Mask{1} << u)) {
                free |= b;
                break;
            }
        }
    }
    const Mask all = dag.num_vertices() == 64 ? ~Mask{0} : (Mask{1} << dag.num_vertices()) - 1;
    return all & ~free;
}

struct Violation {
    int step;
    Mask d;
};

std::vector<Violation> check_profile(const Dag &dag, const PhiPsiProfile &profile, int s, int max_d) {
    const auto masks = step_masks(dag);
    const auto topo = dag.topological_order();
    const int n = static_cast<int>(dag.num_vertices());
    const int steps = static_cast<int>(profile.steps.size());
    std::vector<Violation> bad;
    std::vector<int> pick;
    std::function<void(int)> rec = [&](int start) {
        if (!pick.empty()) {
            Mask d = 0;
            for (int v : pick) {
                d |= Mask{1} << v;
            }
            const Mask gen = generated(dag, topo, d);
            for (int j = 1; j <= steps; ++j) {
                const Mask u_in = j == 1 ? (masks.body[0] | masks.inputs) : masks.body[j - 1];
                const Mask prev_out = j == 1 ? 0 : masks.output[j - 2];
                const double k = std::popcount(d & u_in) + std::popcount(gen & prev_out);
                const PhiPsi f = profile.steps[j - 1](k, s);
                const int phi_count = std::popcount(gen & ~d & masks.body[j - 1]);
                const int psi_count = std::popcount(gen & ~d & masks.output[j - 1]);
                // psi of the terminal step never enters T(S)
                if (phi_count > f.phi + 1e-9 || (j < steps && psi_count > f.psi + 1e-9)) {
                    bad.push_back({j, d});
                }
            }
        }
        if (static_cast<int>(pick.size()) == max_d) {
            return;
        }
        for (int v = start; v < n; ++v) {
            pick.push_back(v);
            rec(v + 1);
            pick.pop_back();
        }
    };
    rec(0);
    return bad;
}

} // namespace

TEST(PhiPsiSoundness, DirectTinyDags) {
    for (auto shape : {ConvShape::from_output(1, 1, 1, 2, 1, 1), ConvShape::from_output(1, 1, 1, 1, 2, 2),
                       ConvShape::from_output(2, 1, 2, 1, 1, 1), ConvShape::from_output(2, 1, 1, 1, 2, 2, 2),
                       ConvShape::from_output(1, 1, 2, 2, 1, 1)}) {
        auto dag = build_direct_conv_dag(shape);
        auto bad = check_profile(dag, dc_profile(reuse_factor(shape)), 4, 4);
        EXPECT_TRUE(bad.empty()) << shape.to_string() << ": step " << bad.front().step << " D=" << bad.front().d;
    }
}

TEST(PhiPsiSoundness, WinogradTinyDags) {
    for (auto shape : {ConvShape::from_output(1, 1, 1, 2, 1, 1), ConvShape::from_output(1, 1, 2, 2, 1, 1),
                       ConvShape::from_output(2, 1, 1, 2, 1, 1)}) {
        auto dag = build_winograd_dag(shape, {1, 1});
        auto bad = check_profile(dag, wa_profile({1, 1}), 4, 4);
        EXPECT_TRUE(bad.empty()) << shape.to_string() << ": step " << bad.front().step << " D=" << bad.front().d;
    }
}
