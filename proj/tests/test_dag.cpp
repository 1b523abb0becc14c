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

#include <sstream>

#include "convio/dag.hpp"

using namespace convio;

namespace {

// Independent per-output tally: kk*c_in products plus kk*c_in - 1 additions.
std::int64_t oracle_direct(const ConvShape &s) {
    std::int64_t n = 0;
    for (std::int64_t o = 0; o < s.batch * s.outputs(); ++o) {
        std::int64_t leaves = s.w_ker * s.h_ker * s.c_in;
        n += leaves + (leaves - 1);
    }
    return n;
}

// Per-tile tally of the four Winograd steps, skipping padded outputs.
std::int64_t oracle_winograd(const ConvShape &s, std::int64_t e, std::int64_t r) {
    const std::int64_t t = e + r - 1;
    std::int64_t n = 0;
    for (std::int64_t b = 0; b < s.batch; ++b) {
        for (std::int64_t k = 0; k < s.c_out; ++k) {
            for (std::int64_t ty = 0; ty * e < s.h_out; ++ty) {
                for (std::int64_t tx = 0; tx * e < s.w_out; ++tx) {
                    for (std::int64_t c = 0; c < s.c_in; ++c) {
                        n += t * t * (t * t + t * t - 1); // P: t^2 scales + t^2-1 adds per element
                        n += t * t * (r * r + r * r - 1); // J
                        n += t * t;                       // products
                    }
                    n += t * t * (s.c_in - 1);
                    for (std::int64_t oy = 0; oy < e; ++oy) {
                        for (std::int64_t ox = 0; ox < e; ++ox) {
                            if (ty * e + oy < s.h_out && tx * e + ox < s.w_out) {
                                n += 2 * t * t - 1;
                            }
                        }
                    }
                }
            }
        }
    }
    return n;
}

std::int64_t non_inputs(const Dag &d) { return count_vertices(d, {VertexKind::Internal, VertexKind::Output}); }

} // namespace

TEST(DirectDag, WorkedExample) {
    auto s = ConvShape::from_output(2, 2, 1, 2, 3, 3);
    auto dag = build_direct_conv_dag(s);
    EXPECT_EQ(non_inputs(dag), 140);
    EXPECT_EQ(direct_vertex_count(s), 140);
    EXPECT_EQ(count_vertices(dag, {VertexKind::Input}), 4 * 4 * 2 + 9 * 2);
    EXPECT_EQ(count_vertices(dag, {VertexKind::Output}), 4);
    EXPECT_EQ(count_vertices(dag, {}), 0);
}

TEST(DirectDag, CountMatchesOracleOverGrid) {
    for (std::int64_t k : {1, 2, 3}) {
        for (std::int64_t stride : {1, 2}) {
            for (std::int64_t cin : {1, 2, 3}) {
                for (std::int64_t batch : {1, 2}) {
                    auto s = ConvShape::from_output(3, 2, 2, cin, k, k, stride, batch);
                    auto dag = build_direct_conv_dag(s);
                    SCOPED_TRACE(s.to_string());
                    EXPECT_EQ(non_inputs(dag), oracle_direct(s));
                    EXPECT_EQ(direct_vertex_count(s), oracle_direct(s));
                    EXPECT_EQ(static_cast<std::int64_t>(dag.inputs().size()), direct_input_count(s));
                    EXPECT_EQ(static_cast<std::int64_t>(dag.outputs().size()), s.batch * s.outputs());
                }
            }
        }
    }
}

TEST(DirectDag, ProductsReadOneImageAndOneWeight) {
    auto s = ConvShape::from_output(2, 2, 2, 2, 2, 2);
    auto dag = build_direct_conv_dag(s);
    for (VertexId v = 0; v < dag.num_vertices(); ++v) {
        if (dag.op(v) == OpKind::Mul) {
            ASSERT_EQ(dag.preds(v).size(), 2U);
            EXPECT_EQ(dag.step(v), 1);
            EXPECT_EQ(dag.kind(dag.preds(v)[0]), VertexKind::Input);
            EXPECT_EQ(dag.kind(dag.preds(v)[1]), VertexKind::Input);
        } else if (dag.op(v) == OpKind::Add) {
            EXPECT_EQ(dag.step(v), 2);
            EXPECT_EQ(dag.preds(v).size(), 2U);
        }
    }
}

TEST(DirectDag, SingleLeafPassesThroughSummationStep) {
    auto s = ConvShape::from_output(2, 1, 1, 1, 1, 1);
    auto dag = build_direct_conv_dag(s);
    EXPECT_EQ(non_inputs(dag), 2);
    auto part = validate_multi_step_partition(dag);
    ASSERT_EQ(part.steps.size(), 2U);
    EXPECT_TRUE(part.steps[1].body.empty());
    EXPECT_EQ(part.steps[1].inputs, part.steps[1].outputs);
    EXPECT_EQ(part.steps[1].outputs.size(), 2U);
}

TEST(DirectDag, VertexCap) {
    auto s = ConvShape::from_output(8, 8, 8, 8, 3, 3);
    DagOptions opts;
    opts.vertex_cap = 1000;
    try {
        (void)build_direct_conv_dag(s, opts);
        FAIL() << "expected SizeError";
    } catch (const SizeError &e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find(std::to_string(direct_vertex_count(s) + direct_input_count(s))), std::string::npos);
    }
}

TEST(WinogradDag, WorkedExample) {
    auto s = ConvShape::from_output(2, 2, 1, 1, 3, 3);
    auto dag = build_winograd_dag(s, {2, 3});
    EXPECT_EQ(non_inputs(dag), 908);
    EXPECT_EQ(winograd_vertex_count(s, {2, 3}), 908);
    EXPECT_EQ(winograd_closed_form_count(s, {2, 3}), Rational(908));
}

TEST(WinogradDag, DivisibleShapesMatchClosedForm) {
    for (auto [e, r] : {std::pair{2, 3}, std::pair{1, 1}, std::pair{2, 1}, std::pair{2, 2}, std::pair{4, 3}}) {
        for (std::int64_t cin : {1, 2}) {
            for (std::int64_t cout : {1, 2}) {
                auto s = ConvShape::from_output(2 * e, e, cout, cin, r, r);
                SCOPED_TRACE(s.to_string() + " e=" + std::to_string(e));
                auto dag = build_winograd_dag(s, {e, r});
                EXPECT_EQ(non_inputs(dag), oracle_winograd(s, e, r));
                EXPECT_EQ(Rational(non_inputs(dag)), winograd_closed_form_count(s, {e, r}));
                EXPECT_EQ(static_cast<std::int64_t>(dag.inputs().size()), winograd_input_count(s, {e, r}));
            }
        }
    }
}

TEST(WinogradDag, PaddedOutputsAreInert) {
    auto s = ConvShape::from_output(3, 3, 2, 1, 3, 3);
    auto dag = build_winograd_dag(s, {2, 3});
    EXPECT_EQ(non_inputs(dag), oracle_winograd(s, 2, 3));
    EXPECT_EQ(non_inputs(dag), winograd_vertex_count(s, {2, 3}));
    EXPECT_EQ(static_cast<std::int64_t>(dag.outputs().size()), s.outputs());
    // Padded image: 2 tiles of 2 plus r-1 per axis.
    EXPECT_EQ(winograd_input_count(s, {2, 3}), 6 * 6 * 1 + 9 * 1 * 2);
}

TEST(WinogradDag, SharedKernelTransformCountsOncePerKernel) {
    auto s = ConvShape::from_output(4, 4, 2, 2, 3, 3);
    auto plain = build_winograd_dag(s, {2, 3});
    DagOptions opts;
    opts.share_kernel_transform = true;
    auto shared = build_winograd_dag(s, {2, 3}, opts);
    const std::int64_t j_per_tile = 17 * 16 * 2;
    const std::int64_t tiles = 4;
    EXPECT_EQ(non_inputs(plain) - non_inputs(shared), (tiles - 1) * 2 * j_per_tile);
    EXPECT_EQ(non_inputs(shared), winograd_vertex_count(s, {2, 3}, true));
    EXPECT_NO_THROW(validate_multi_step_partition(shared));
}

TEST(WinogradDag, RejectsStride) {
    auto s = ConvShape::from_output(2, 2, 1, 1, 3, 3, 2);
    EXPECT_THROW((void)build_winograd_dag(s, {2, 3}), UnsupportedError);
}

TEST(Partition, BuiltDagsValidate) {
    auto dc = build_direct_conv_dag(ConvShape::from_output(2, 2, 2, 2, 2, 2));
    auto part = validate_multi_step_partition(dc);
    ASSERT_EQ(part.steps.size(), 2U);
    EXPECT_EQ(part.steps[1].outputs, dc.outputs());
    // Every step-1 output feeds step 2.
    EXPECT_EQ(part.steps[0].outputs.size(), static_cast<std::size_t>(2 * 2 * 2 * 2 * 4));

    auto wa = build_winograd_dag(ConvShape::from_output(2, 2, 1, 1, 3, 3), {2, 3});
    auto wp = validate_multi_step_partition(wa);
    ASSERT_EQ(wp.steps.size(), 4U);
    // c_in = 1: products pass straight through the channel sum.
    EXPECT_TRUE(wp.steps[2].body.empty());
    EXPECT_EQ(wp.steps[2].outputs.size(), 16U);
    EXPECT_EQ(wp.steps[1].outputs, wp.steps[2].outputs);
}

TEST(Partition, ReportsEachViolatedClause) {
    DagBuilder b(2);
    VertexId a = b.add_input();
    VertexId c = b.add_input();
    VertexId m = b.add_op(OpKind::Mul, 1, {a, c});
    VertexId x = b.add_op(OpKind::Add, 1, {m, a});
    (void)b.add_op(OpKind::Add, 2, {x, a}); // reads a primary input in step 2
    auto dag = std::move(b).build();
    try {
        (void)validate_multi_step_partition(dag);
        FAIL() << "expected PartitionError";
    } catch (const PartitionError &e) {
        ASSERT_EQ(e.violations().size(), 1U);
        EXPECT_EQ(e.violations()[0].clause, "input");
        EXPECT_EQ(e.violations()[0].vertex, 4U);
    }

    DagBuilder b2(2);
    VertexId i0 = b2.add_input();
    VertexId s2 = b2.add_op(OpKind::Copy, 2, {i0});
    b2.mark_passthrough(s2, 2);
    try {
        (void)validate_multi_step_partition(std::move(b2).build());
        FAIL() << "expected PartitionError";
    } catch (const PartitionError &e) {
        bool disjoint = false;
        for (const auto &v : e.violations()) {
            disjoint |= v.clause == "disjoint";
        }
        EXPECT_TRUE(disjoint);
    }
}

TEST(Partition, StepOneReadingComputedVertex) {
    DagBuilder b(2);
    VertexId a = b.add_input();
    VertexId s2 = b.add_op(OpKind::Copy, 2, {a});
    (void)s2;
    auto dag = std::move(b).build();
    try {
        (void)validate_multi_step_partition(dag);
        FAIL();
    } catch (const PartitionError &e) {
        EXPECT_EQ(e.violations()[0].clause, "input");
    }
}

TEST(Dag, DetectsCycle) {
    DagBuilder b(1);
    VertexId i = b.add_input();
    VertexId u = b.add_op(OpKind::Add, 1, {i});
    VertexId w = b.add_op(OpKind::Add, 1, {u});
    b.add_edge(w, u);
    auto dag = std::move(b).build();
    EXPECT_THROW((void)dag.topological_order(), Error);
}

TEST(DagText, RoundTrip) {
    auto dag = build_winograd_dag(ConvShape::from_output(3, 1, 1, 1, 1, 1), {2, 1});
    std::ostringstream os;
    write_dag_text(os, dag, {{"alg", "wa"}, {"e", "2"}});
    std::istringstream is(os.str());
    auto file = read_dag_text(is);
    EXPECT_EQ(file.meta.at("alg"), "wa");
    ASSERT_EQ(file.dag.num_vertices(), dag.num_vertices());
    EXPECT_EQ(file.dag.num_edges(), dag.num_edges());
    for (VertexId v = 0; v < dag.num_vertices(); ++v) {
        EXPECT_EQ(file.dag.kind(v), dag.kind(v));
        EXPECT_EQ(file.dag.step(v), dag.step(v));
        EXPECT_EQ(file.dag.inert(v), dag.inert(v));
        EXPECT_EQ(file.dag.passes(v), dag.passes(v));
        auto p1 = dag.preds(v);
        auto p2 = file.dag.preds(v);
        EXPECT_TRUE(std::equal(p1.begin(), p1.end(), p2.begin(), p2.end()));
    }
    std::ostringstream again;
    write_dag_text(again, file.dag, file.meta);
    EXPECT_EQ(again.str(), os.str());
}

TEST(DagText, Malformed) {
    std::istringstream bad_header("vertex 3\n");
    EXPECT_THROW((void)read_dag_text(bad_header), ParseError);
    std::istringstream bad_kind("vertices 2 steps 1\n0 input 0 in\n1 input 1 add\nedges 1\n0 1\n");
    EXPECT_THROW((void)read_dag_text(bad_kind), ParseError);
    std::istringstream bad_edge("vertices 1 steps 1\n0 input 0 in\nedges 1\n0 5\n");
    EXPECT_THROW((void)read_dag_text(bad_edge), ParseError);
    EXPECT_THROW((void)read_dag_file("/nonexistent/x.dag"), ParseError);
}
