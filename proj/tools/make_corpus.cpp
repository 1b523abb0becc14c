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

// Regenerates the tiny-DAG corpus used by the pebbling checks.
//
//   make_corpus <dir>

#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "convio/dag.hpp"
#include "convio/error.hpp"

using namespace convio;

namespace {

using Meta = std::map<std::string, std::string>;

struct Entry {
    std::string name;
    Meta meta;
    std::function<Dag()> build;
};

Meta dc_meta(const ConvShape &s) {
    return {{"alg", "dc"},
            {"out", std::to_string(s.w_out) + "x" + std::to_string(s.h_out) + "x" + std::to_string(s.c_out)},
            {"cin", std::to_string(s.c_in)},
            {"ker", std::to_string(s.w_ker) + "x" + std::to_string(s.h_ker)},
            {"stride", std::to_string(s.stride)}};
}

Entry dc(const std::string &name, const ConvShape &s) {
    return {name, dc_meta(s), [s] { return build_direct_conv_dag(s); }};
}

Entry wa(const std::string &name, const ConvShape &s, WinogradParams p) {
    Meta m = dc_meta(s);
    m["alg"] = "wa";
    m["e"] = std::to_string(p.e);
    m["r"] = std::to_string(p.r);
    return {name, m, [s, p] { return build_winograd_dag(s, p); }};
}

Entry generic(const std::string &name, const std::string &what, std::function<Dag()> f) {
    return {name, {{"alg", "generic"}, {"what", what}}, std::move(f)};
}

std::vector<Entry> corpus() {
    std::vector<Entry> out;
    out.push_back(dc("dc_1x1x1_c1_k2x1", ConvShape::from_output(1, 1, 1, 1, 2, 1)));
    out.push_back(dc("dc_1x1x1_c2_k1x1", ConvShape::from_output(1, 1, 1, 2, 1, 1)));
    out.push_back(dc("dc_1x1x1_c1_k2x2", ConvShape::from_output(1, 1, 1, 1, 2, 2)));
    out.push_back(dc("dc_2x1x1_c1_k2x1", ConvShape::from_output(2, 1, 1, 1, 2, 1)));
    out.push_back(dc("dc_1x1x2_c1_k2x1", ConvShape::from_output(1, 1, 2, 1, 2, 1)));
    out.push_back(dc("dc_1x1x1_c3_k1x1", ConvShape::from_output(1, 1, 1, 3, 1, 1)));
    out.push_back(dc("dc_2x2x1_c1_k1x1", ConvShape::from_output(2, 2, 1, 1, 1, 1)));
    out.push_back(dc("dc_1x1x1_c2_k2x1", ConvShape::from_output(1, 1, 1, 2, 2, 1)));
    out.push_back(dc("dc_2x1x1_c1_k2x1_s2", ConvShape::from_output(2, 1, 1, 1, 2, 1, 2)));
    out.push_back(wa("wa_1x1x1_c1_e1r1", ConvShape::from_output(1, 1, 1, 1, 1, 1), {1, 1}));
    out.push_back(wa("wa_1x1x1_c2_e1r1", ConvShape::from_output(1, 1, 1, 2, 1, 1), {1, 1}));
    out.push_back(wa("wa_1x1x2_c1_e1r1", ConvShape::from_output(1, 1, 2, 1, 1, 1), {1, 1}));
    out.push_back(wa("wa_2x1x1_c1_e1r1", ConvShape::from_output(2, 1, 1, 1, 1, 1), {1, 1}));
    out.push_back(generic("binary_op", "c = a + b", [] {
        DagBuilder b;
        auto x = b.add_input(), y = b.add_input();
        b.add_op(OpKind::Add, 1, {x, y});
        return std::move(b).build();
    }));
    out.push_back(generic("two_products", "a*w + c*v", [] {
        DagBuilder b;
        auto a = b.add_input(), w = b.add_input(), c = b.add_input(), v = b.add_input();
        auto p = b.add_op(OpKind::Mul, 1, {a, w});
        auto q = b.add_op(OpKind::Mul, 1, {c, v});
        b.add_op(OpKind::Add, 1, {p, q});
        return std::move(b).build();
    }));
    out.push_back(generic("chain5", "five unary steps", [] {
        DagBuilder b;
        auto v = b.add_input();
        for (int i = 0; i < 5; ++i) {
            v = b.add_op(OpKind::Scale, 1, {v});
        }
        return std::move(b).build();
    }));
    out.push_back(generic("diamond", "shared operand feeding two ops that rejoin", [] {
        DagBuilder b;
        auto a = b.add_input(), c = b.add_input();
        auto l = b.add_op(OpKind::Mul, 1, {a, c});
        auto r = b.add_op(OpKind::Add, 1, {a, c});
        auto m = b.add_op(OpKind::Mul, 1, {l, r});
        b.add_op(OpKind::Scale, 1, {m});
        return std::move(b).build();
    }));
    out.push_back(generic("reduce8", "balanced sum of eight inputs", [] {
        DagBuilder b;
        std::vector<VertexId> level;
        for (int i = 0; i < 8; ++i) {
            level.push_back(b.add_input());
        }
        while (level.size() > 1) {
            std::vector<VertexId> next;
            for (std::size_t i = 0; i < level.size(); i += 2) {
                next.push_back(b.add_op(OpKind::Add, 1, {level[i], level[i + 1]}));
            }
            level = next;
        }
        return std::move(b).build();
    }));
    out.push_back(generic("matmul_2x2x1", "outer product of two 2-vectors", [] {
        DagBuilder b;
        auto a0 = b.add_input(), a1 = b.add_input(), b0 = b.add_input(), b1 = b.add_input();
        b.add_op(OpKind::Mul, 1, {a0, b0});
        b.add_op(OpKind::Mul, 1, {a0, b1});
        b.add_op(OpKind::Mul, 1, {a1, b0});
        b.add_op(OpKind::Mul, 1, {a1, b1});
        return std::move(b).build();
    }));
    out.push_back(generic("fan_out", "one input feeding four ops summed pairwise", [] {
        DagBuilder b;
        auto a = b.add_input(), w = b.add_input();
        auto p = b.add_op(OpKind::Mul, 1, {a, w});
        auto q = b.add_op(OpKind::Add, 1, {a, w});
        auto r = b.add_op(OpKind::Scale, 1, {a});
        auto s = b.add_op(OpKind::Scale, 1, {w});
        auto x = b.add_op(OpKind::Add, 1, {p, q});
        auto y = b.add_op(OpKind::Add, 1, {r, s});
        b.add_op(OpKind::Mul, 1, {x, y});
        return std::move(b).build();
    }));
    return out;
}

} // namespace

int main(int argc, char **argv) {
    if (argc != 2) {
        std::cerr << "usage: make_corpus <dir>\n";
        return 2;
    }
    try {
        for (const auto &e : corpus()) {
            const Dag dag = e.build();
            const std::string path = std::string(argv[1]) + "/" + e.name + ".dag";
            std::ofstream f(path);
            if (!f) {
                std::cerr << "cannot write " << path << "\n";
                return 4;
            }
            write_dag_text(f, dag, e.meta);
            std::cout << e.name << ": " << dag.num_vertices() << " vertices\n";
        }
    } catch (const Error &e) {
        std::cerr << e.what() << "\n";
        return 4;
    }
    return 0;
}
