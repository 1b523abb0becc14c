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

#include "convio/dag.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace convio {

const char *to_string(VertexKind k) {
    switch (k) {
    case VertexKind::Input:
        return "input";
    case VertexKind::Internal:
        return "internal";
    case VertexKind::Output:
        return "output";
    }
    return "?";
}

const char *to_string(OpKind k) {
    switch (k) {
    case OpKind::Input:
        return "in";
    case OpKind::Mul:
        return "mul";
    case OpKind::Add:
        return "add";
    case OpKind::Scale:
        return "scale";
    case OpKind::Copy:
        return "copy";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Dag / DagBuilder

std::vector<VertexId> Dag::inputs() const {
    std::vector<VertexId> out;
    for (VertexId v = 0; v < num_vertices(); ++v) {
        if (kind_[v] == VertexKind::Input) {
            out.push_back(v);
        }
    }
    return out;
}

std::vector<VertexId> Dag::outputs() const {
    std::vector<VertexId> out;
    for (VertexId v = 0; v < num_vertices(); ++v) {
        if (kind_[v] == VertexKind::Output && !inert_[v]) {
            out.push_back(v);
        }
    }
    return out;
}

std::vector<VertexId> Dag::topological_order() const {
    const std::size_t n = num_vertices();
    std::vector<std::uint32_t> indeg(n);
    for (VertexId v = 0; v < n; ++v) {
        indeg[v] = static_cast<std::uint32_t>(preds(v).size());
    }
    std::vector<VertexId> order;
    order.reserve(n);
    for (VertexId v = 0; v < n; ++v) {
        if (indeg[v] == 0) {
            order.push_back(v);
        }
    }
    for (std::size_t head = 0; head < order.size(); ++head) {
        for (VertexId w : succs(order[head])) {
            if (--indeg[w] == 0) {
                order.push_back(w);
            }
        }
    }
    if (order.size() != n) {
        throw Error("dag has a cycle");
    }
    return order;
}

VertexId DagBuilder::add_input() { return add_vertex(OpKind::Input, 0); }

VertexId DagBuilder::add_vertex(OpKind op, int step) {
    if (step < 0 || step > num_steps_) {
        throw Error("step label " + std::to_string(step) + " outside [0," + std::to_string(num_steps_) + "]");
    }
    op_.push_back(op);
    step_.push_back(static_cast<std::uint8_t>(step));
    inert_.push_back(0);
    passes_.push_back(0);
    return static_cast<VertexId>(op_.size() - 1);
}

VertexId DagBuilder::add_op(OpKind op, int step, std::initializer_list<VertexId> preds) {
    VertexId v = add_vertex(op, step);
    for (VertexId p : preds) {
        add_edge(p, v);
    }
    return v;
}

void DagBuilder::add_edge(VertexId src, VertexId dst) {
    if (src >= op_.size() || dst >= op_.size()) {
        throw Error("edge endpoint out of range");
    }
    edges_.emplace_back(src, dst);
}

void DagBuilder::mark_passthrough(VertexId v, int step) { passes_.at(v) |= (1U << step); }

void DagBuilder::mark_inert(VertexId v) { inert_.at(v) = 1; }

void DagBuilder::reserve(std::size_t vertices, std::size_t edges) {
    op_.reserve(vertices);
    step_.reserve(vertices);
    inert_.reserve(vertices);
    passes_.reserve(vertices);
    edges_.reserve(edges);
}

namespace {

void build_csr(std::size_t n, const std::vector<std::pair<VertexId, VertexId>> &edges, bool by_dst,
               std::vector<std::uint64_t> &off, std::vector<VertexId> &idx) {
    off.assign(n + 1, 0);
    for (auto [s, d] : edges) {
        ++off[(by_dst ? d : s) + 1];
    }
    std::partial_sum(off.begin(), off.end(), off.begin());
    idx.resize(edges.size());
    std::vector<std::uint64_t> cursor(off.begin(), off.end() - 1);
    for (auto [s, d] : edges) {
        if (by_dst) {
            idx[cursor[d]++] = s;
        } else {
            idx[cursor[s]++] = d;
        }
    }
}

} // namespace

Dag DagBuilder::build() && {
    Dag dag;
    const std::size_t n = op_.size();
    dag.num_steps_ = num_steps_;
    build_csr(n, edges_, true, dag.pred_off_, dag.pred_idx_);
    build_csr(n, edges_, false, dag.succ_off_, dag.succ_idx_);
    edges_.clear();
    edges_.shrink_to_fit();
    dag.kind_.resize(n);
    for (VertexId v = 0; v < n; ++v) {
        if (dag.pred_off_[v + 1] == dag.pred_off_[v]) {
            dag.kind_[v] = VertexKind::Input;
        } else if (dag.succ_off_[v + 1] == dag.succ_off_[v]) {
            dag.kind_[v] = VertexKind::Output;
        } else {
            dag.kind_[v] = VertexKind::Internal;
        }
    }
    dag.op_ = std::move(op_);
    dag.step_ = std::move(step_);
    dag.inert_ = std::move(inert_);
    dag.passes_ = std::move(passes_);
    return dag;
}

// ---------------------------------------------------------------------------
// Closed-form counts

std::int64_t direct_vertex_count(const ConvShape &s) {
    return s.batch * (2 * s.w_ker * s.h_ker * s.c_in - 1) * s.w_out * s.h_out * s.c_out;
}

std::int64_t direct_input_count(const ConvShape &s) {
    return s.batch * s.w_in * s.h_in * s.c_in + s.w_ker * s.h_ker * s.c_in * s.c_out;
}

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

} // namespace

std::int64_t winograd_vertex_count(const ConvShape &s, const WinogradParams &p, bool share_kernel_transform) {
    const std::int64_t t2 = p.tile_in() * p.tile_in();
    const std::int64_t r2 = p.r * p.r;
    const std::int64_t tiles = ceil_div(s.w_out, p.e) * ceil_div(s.h_out, p.e);
    const std::int64_t input_transform = (2 * t2 - 1) * t2 * s.c_in;
    const std::int64_t kernel_transform = (2 * r2 - 1) * t2 * s.c_in;
    const std::int64_t products = t2 * s.c_in;
    const std::int64_t channel_sums = (s.c_in - 1) * t2;
    const std::int64_t output_transform = 2 * t2 - 1; // per real output element
    std::int64_t per_tile = input_transform + products + channel_sums;
    std::int64_t total = s.batch * tiles * s.c_out * per_tile;
    if (share_kernel_transform) {
        total += s.c_out * kernel_transform;
    } else {
        total += s.batch * tiles * s.c_out * kernel_transform;
    }
    total += s.batch * s.w_out * s.h_out * s.c_out * output_transform;
    return total;
}

std::int64_t winograd_input_count(const ConvShape &s, const WinogradParams &p) {
    const std::int64_t w = ceil_div(s.w_out, p.e) * p.e + p.r - 1;
    const std::int64_t h = ceil_div(s.h_out, p.e) * p.e + p.r - 1;
    return s.batch * w * h * s.c_in + p.r * p.r * s.c_in * s.c_out;
}

Rational winograd_closed_form_count(const ConvShape &s, const WinogradParams &p) {
    const std::int64_t t2 = p.tile_in() * p.tile_in();
    const std::int64_t r2 = p.r * p.r;
    const std::int64_t e2 = p.e * p.e;
    const std::int64_t bracket = (2 * t2 - 1) * t2 * s.c_in + (2 * r2 - 1) * t2 * s.c_in + t2 * s.c_in +
                                 (s.c_in - 1) * t2 + (2 * t2 - 1) * e2;
    return Rational(s.batch * s.w_out * s.h_out * s.c_out, e2) * bracket;
}

// ---------------------------------------------------------------------------
// Builders

namespace {

void check_cap(std::int64_t count, std::int64_t cap, const char *what) {
    if (count > cap) {
        throw SizeError(std::string(what) + " dag would have " + std::to_string(count) + " vertices, cap is " +
                        std::to_string(cap));
    }
}

/// Left-deep sum of `leaves`; returns the root. A single leaf is its own root
/// and is recorded as passing through `step`.
VertexId summation_tree(DagBuilder &b, std::span<const VertexId> leaves, int step) {
    if (leaves.size() == 1) {
        b.mark_passthrough(leaves[0], step);
        return leaves[0];
    }
    VertexId acc = b.add_op(OpKind::Add, step, {leaves[0], leaves[1]});
    for (std::size_t i = 2; i < leaves.size(); ++i) {
        acc = b.add_op(OpKind::Add, step, {acc, leaves[i]});
    }
    return acc;
}

/// Scale every leaf by a resident coefficient, then sum left-deep.
VertexId linear_combination_tree(DagBuilder &b, std::span<const VertexId> leaves, int step,
                                 std::vector<VertexId> &scratch) {
    scratch.clear();
    for (VertexId leaf : leaves) {
        scratch.push_back(b.add_op(OpKind::Scale, step, {leaf}));
    }
    if (scratch.size() == 1) {
        return scratch[0];
    }
    VertexId acc = b.add_op(OpKind::Add, step, {scratch[0], scratch[1]});
    for (std::size_t i = 2; i < scratch.size(); ++i) {
        acc = b.add_op(OpKind::Add, step, {acc, scratch[i]});
    }
    return acc;
}

} // namespace

Dag build_direct_conv_dag(const ConvShape &s, const DagOptions &opts) {
    const std::int64_t total = direct_vertex_count(s) + direct_input_count(s);
    check_cap(total, opts.vertex_cap, "direct convolution");

    DagBuilder b(2);
    b.reserve(static_cast<std::size_t>(total), static_cast<std::size_t>(2 * total));

    // image[n][c][y][x], then weights[k][c][ky][kx]
    const std::int64_t image_size = s.w_in * s.h_in * s.c_in;
    for (std::int64_t i = 0; i < s.batch * image_size; ++i) {
        b.add_input();
    }
    const auto weight_base = static_cast<VertexId>(b.size());
    for (std::int64_t i = 0; i < s.w_ker * s.h_ker * s.c_in * s.c_out; ++i) {
        b.add_input();
    }
    auto image_at = [&](std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x) {
        return static_cast<VertexId>(n * image_size + (c * s.h_in + y) * s.w_in + x);
    };
    auto weight_at = [&](std::int64_t k, std::int64_t c, std::int64_t ky, std::int64_t kx) {
        return static_cast<VertexId>(weight_base + ((k * s.c_in + c) * s.h_ker + ky) * s.w_ker + kx);
    };

    std::vector<VertexId> products;
    products.reserve(static_cast<std::size_t>(s.kernel_volume()));
    for (std::int64_t n = 0; n < s.batch; ++n) {
        for (std::int64_t k = 0; k < s.c_out; ++k) {
            for (std::int64_t oy = 0; oy < s.h_out; ++oy) {
                for (std::int64_t ox = 0; ox < s.w_out; ++ox) {
                    products.clear();
                    for (std::int64_t c = 0; c < s.c_in; ++c) {
                        for (std::int64_t ky = 0; ky < s.h_ker; ++ky) {
                            for (std::int64_t kx = 0; kx < s.w_ker; ++kx) {
                                VertexId in = image_at(n, c, oy * s.stride + ky, ox * s.stride + kx);
                                products.push_back(b.add_op(OpKind::Mul, 1, {in, weight_at(k, c, ky, kx)}));
                            }
                        }
                    }
                    summation_tree(b, products, 2);
                }
            }
        }
    }
    return std::move(b).build();
}

Dag build_winograd_dag(const ConvShape &s, const WinogradParams &p, const DagOptions &opts) {
    validate_winograd(s, p);
    const std::int64_t total =
        winograd_vertex_count(s, p, opts.share_kernel_transform) + winograd_input_count(s, p);
    check_cap(total, opts.vertex_cap, "Winograd");

    const std::int64_t t = p.tile_in();
    const std::int64_t t2 = t * t;
    const std::int64_t tiles_x = ceil_div(s.w_out, p.e);
    const std::int64_t tiles_y = ceil_div(s.h_out, p.e);
    const std::int64_t w_pad = tiles_x * p.e + p.r - 1;
    const std::int64_t h_pad = tiles_y * p.e + p.r - 1;

    DagBuilder b(4);
    b.reserve(static_cast<std::size_t>(total), static_cast<std::size_t>(2 * total));

    const std::int64_t image_size = w_pad * h_pad * s.c_in;
    for (std::int64_t i = 0; i < s.batch * image_size; ++i) {
        b.add_input();
    }
    const auto weight_base = static_cast<VertexId>(b.size());
    for (std::int64_t i = 0; i < p.r * p.r * s.c_in * s.c_out; ++i) {
        b.add_input();
    }
    auto image_at = [&](std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x) {
        return static_cast<VertexId>(n * image_size + (c * h_pad + y) * w_pad + x);
    };
    auto weight_at = [&](std::int64_t k, std::int64_t c, std::int64_t ky, std::int64_t kx) {
        return static_cast<VertexId>(weight_base + ((k * s.c_in + c) * p.r + ky) * p.r + kx);
    };

    std::vector<VertexId> scratch;
    std::vector<VertexId> leaves;

    // J[k][c][a]: transformed kernel element a of kernel k at channel c.
    auto kernel_transform = [&](std::int64_t k, std::int64_t c, std::vector<VertexId> &dst) {
        leaves.clear();
        for (std::int64_t ky = 0; ky < p.r; ++ky) {
            for (std::int64_t kx = 0; kx < p.r; ++kx) {
                leaves.push_back(weight_at(k, c, ky, kx));
            }
        }
        for (std::int64_t a = 0; a < t2; ++a) {
            dst.push_back(linear_combination_tree(b, leaves, 1, scratch));
        }
    };

    std::vector<VertexId> shared_j;
    if (opts.share_kernel_transform) {
        shared_j.reserve(static_cast<std::size_t>(s.c_out * s.c_in * t2));
        for (std::int64_t k = 0; k < s.c_out; ++k) {
            for (std::int64_t c = 0; c < s.c_in; ++c) {
                kernel_transform(k, c, shared_j);
            }
        }
    }

    std::vector<VertexId> p_vals;  // [c][a]
    std::vector<VertexId> j_vals;  // [c][a]
    std::vector<VertexId> lambda;  // [c][a]
    std::vector<VertexId> pi(static_cast<std::size_t>(t2));
    std::vector<VertexId> column;
    for (std::int64_t n = 0; n < s.batch; ++n) {
        for (std::int64_t k = 0; k < s.c_out; ++k) {
            for (std::int64_t ty = 0; ty < tiles_y; ++ty) {
                for (std::int64_t tx = 0; tx < tiles_x; ++tx) {
                    // Step 1: input transform P_i and (unless shared) kernel transform J_k.
                    p_vals.clear();
                    j_vals.clear();
                    for (std::int64_t c = 0; c < s.c_in; ++c) {
                        leaves.clear();
                        for (std::int64_t i = 0; i < t; ++i) {
                            for (std::int64_t j = 0; j < t; ++j) {
                                leaves.push_back(image_at(n, c, ty * p.e + i, tx * p.e + j));
                            }
                        }
                        for (std::int64_t a = 0; a < t2; ++a) {
                            p_vals.push_back(linear_combination_tree(b, leaves, 1, scratch));
                        }
                        if (!opts.share_kernel_transform) {
                            kernel_transform(k, c, j_vals);
                        }
                    }
                    const VertexId *j_src =
                        opts.share_kernel_transform ? shared_j.data() + k * s.c_in * t2 : j_vals.data();
                    // Step 2: element-wise product.
                    lambda.clear();
                    for (std::int64_t idx = 0; idx < s.c_in * t2; ++idx) {
                        lambda.push_back(b.add_op(OpKind::Mul, 2, {p_vals[idx], j_src[idx]}));
                    }
                    // Step 3: sum along channels.
                    for (std::int64_t a = 0; a < t2; ++a) {
                        column.clear();
                        for (std::int64_t c = 0; c < s.c_in; ++c) {
                            column.push_back(lambda[c * t2 + a]);
                        }
                        pi[a] = summation_tree(b, column, 3);
                    }
                    // Step 4: output transform, one tree per output element.
                    for (std::int64_t oy = 0; oy < p.e; ++oy) {
                        for (std::int64_t ox = 0; ox < p.e; ++ox) {
                            const auto before = static_cast<VertexId>(b.size());
                            linear_combination_tree(b, pi, 4, scratch);
                            const bool padded = ty * p.e + oy >= s.h_out || tx * p.e + ox >= s.w_out;
                            if (padded) {
                                for (auto v = before; v < b.size(); ++v) {
                                    b.mark_inert(v);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return std::move(b).build();
}

std::int64_t count_vertices(const Dag &dag, std::initializer_list<VertexKind> kinds) {
    return count_vertices(dag, std::span<const VertexKind>(kinds.begin(), kinds.size()));
}

std::int64_t count_vertices(const Dag &dag, std::span<const VertexKind> kinds) {
    if (kinds.empty()) {
        return 0;
    }
    std::int64_t n = 0;
    for (VertexId v = 0; v < dag.num_vertices(); ++v) {
        if (!dag.inert(v) && std::find(kinds.begin(), kinds.end(), dag.kind(v)) != kinds.end()) {
            ++n;
        }
    }
    return n;
}

// ---------------------------------------------------------------------------
// Multi-step partition

namespace {

std::string summarize(const std::vector<PartitionViolation> &v) {
    std::ostringstream os;
    os << v.size() << " multi-step partition violation(s)";
    if (!v.empty()) {
        os << "; first: vertex " << v.front().vertex << " [" << v.front().clause << "] " << v.front().detail;
    }
    return os.str();
}

} // namespace

PartitionError::PartitionError(std::vector<PartitionViolation> violations)
    : Error(summarize(violations)), violations_(std::move(violations)) {}

StepPartition validate_multi_step_partition(const Dag &dag) {
    std::vector<PartitionViolation> bad;
    const int n_steps = dag.num_steps();
    const std::size_t n = dag.num_vertices();

    try {
        (void)dag.topological_order();
    } catch (const Error &) {
        bad.push_back({0, "acyclic", "graph contains a cycle"});
        throw PartitionError(std::move(bad));
    }

    // Output of step j: computed in j, or passing through j, with no successor computed in j.
    auto is_step_output = [&](VertexId u, int j) {
        if (j < 1 || j > n_steps) {
            return false;
        }
        if (dag.kind(u) == VertexKind::Input) {
            return false;
        }
        if (dag.step(u) != j && !dag.passes_through(u, j)) {
            return false;
        }
        for (VertexId w : dag.succs(u)) {
            if (dag.step(w) == j && dag.kind(w) != VertexKind::Input) {
                return false;
            }
        }
        return true;
    };

    for (VertexId v = 0; v < n; ++v) {
        const bool primary = dag.kind(v) == VertexKind::Input;
        if (primary) {
            if (dag.step(v) != 0 || dag.passes(v) != 0) {
                bad.push_back({v, "cover", "primary input carries a step label"});
            }
            continue;
        }
        const int j = dag.step(v);
        if (j < 1 || j > n_steps) {
            bad.push_back({v, "cover", "home step " + std::to_string(j) + " outside [1," +
                                            std::to_string(n_steps) + "]"});
            continue;
        }
        if (dag.passes_through(v, j)) {
            bad.push_back({v, "disjoint", "vertex passes through its own home step " + std::to_string(j)});
        }
        for (int q = 1; q <= n_steps; ++q) {
            if (dag.passes_through(v, q) && q != j && !is_step_output(v, q - 1) && q - 1 != 0) {
                bad.push_back({v, "input", "passes through step " + std::to_string(q) +
                                               " without being an output of step " + std::to_string(q - 1)});
            }
            if (dag.passes_through(v, q) && q < j) {
                bad.push_back({v, "input", "passes through step " + std::to_string(q) + " before it is computed"});
            }
        }
        for (VertexId u : dag.preds(v)) {
            if (dag.kind(u) != VertexKind::Input && dag.step(u) == j) {
                continue;
            }
            if (j == 1) {
                if (dag.kind(u) != VertexKind::Input) {
                    bad.push_back({v, "input", "step-1 vertex reads computed vertex " + std::to_string(u)});
                }
                continue;
            }
            if (!is_step_output(u, j - 1)) {
                std::ostringstream os;
                os << "step-" << j << " vertex reads vertex " << u << " which is not an output of step " << j - 1;
                if (dag.kind(u) == VertexKind::Input) {
                    os << " (primary input)";
                }
                bad.push_back({v, "input", os.str()});
            }
        }
    }
    if (!bad.empty()) {
        throw PartitionError(std::move(bad));
    }

    StepPartition part;
    part.steps.resize(static_cast<std::size_t>(n_steps));
    for (VertexId v = 0; v < n; ++v) {
        if (dag.kind(v) == VertexKind::Input) {
            continue;
        }
        const int j = dag.step(v);
        part.steps[j - 1].body.push_back(v);
        for (int q = 1; q <= n_steps; ++q) {
            if (dag.passes_through(v, q)) {
                part.steps[q - 1].inputs.push_back(v);
            }
        }
        for (int q = 1; q <= n_steps; ++q) {
            if (is_step_output(v, q)) {
                part.steps[q - 1].outputs.push_back(v);
            }
        }
    }
    // Inputs of each step read from outside it.
    for (int j = 1; j <= n_steps; ++j) {
        auto &inputs = part.steps[j - 1].inputs;
        for (VertexId v : part.steps[j - 1].body) {
            for (VertexId u : dag.preds(v)) {
                if (dag.kind(u) == VertexKind::Input || dag.step(u) != j) {
                    inputs.push_back(u);
                }
            }
        }
        std::sort(inputs.begin(), inputs.end());
        inputs.erase(std::unique(inputs.begin(), inputs.end()), inputs.end());
    }
    return part;
}

// ---------------------------------------------------------------------------
// Text format

void write_dag_text(std::ostream &os, const Dag &dag, const std::map<std::string, std::string> &meta) {
    for (const auto &[k, v] : meta) {
        os << "# " << k << "=" << v << "\n";
    }
    os << "vertices " << dag.num_vertices() << " steps " << dag.num_steps() << "\n";
    for (VertexId v = 0; v < dag.num_vertices(); ++v) {
        os << v << " " << to_string(dag.kind(v)) << " " << dag.step(v) << " " << to_string(dag.op(v));
        for (int q = 1; q <= dag.num_steps(); ++q) {
            if (dag.passes_through(v, q)) {
                os << " pass=" << q;
            }
        }
        if (dag.inert(v)) {
            os << " inert";
        }
        os << "\n";
    }
    os << "edges " << dag.num_edges() << "\n";
    for (VertexId v = 0; v < dag.num_vertices(); ++v) {
        for (VertexId u : dag.preds(v)) {
            os << u << " " << v << "\n";
        }
    }
}

namespace {

[[noreturn]] void parse_fail(std::size_t line, const std::string &msg) {
    throw ParseError("dag text line " + std::to_string(line) + ": " + msg);
}

OpKind parse_op(const std::string &s, std::size_t line) {
    for (OpKind k : {OpKind::Input, OpKind::Mul, OpKind::Add, OpKind::Scale, OpKind::Copy}) {
        if (s == to_string(k)) {
            return k;
        }
    }
    parse_fail(line, "unknown op '" + s + "'");
}

VertexKind parse_kind(const std::string &s, std::size_t line) {
    for (VertexKind k : {VertexKind::Input, VertexKind::Internal, VertexKind::Output}) {
        if (s == to_string(k)) {
            return k;
        }
    }
    parse_fail(line, "unknown vertex kind '" + s + "'");
}

} // namespace

DagFile read_dag_text(std::istream &is) {
    DagFile file;
    std::string raw;
    std::size_t line_no = 0;
    auto next_line = [&](std::string &out) {
        while (std::getline(is, raw)) {
            ++line_no;
            if (raw.empty()) {
                continue;
            }
            if (raw[0] == '#') {
                auto eq = raw.find('=');
                if (eq != std::string::npos) {
                    std::string key = raw.substr(1, eq - 1);
                    key.erase(0, key.find_first_not_of(' '));
                    file.meta[key] = raw.substr(eq + 1);
                }
                continue;
            }
            out = raw;
            return true;
        }
        return false;
    };

    std::string line;
    if (!next_line(line)) {
        parse_fail(line_no, "missing header");
    }
    std::istringstream hdr(line);
    std::string w1, w2;
    std::size_t n = 0;
    int steps = 0;
    if (!(hdr >> w1 >> n >> w2 >> steps) || w1 != "vertices" || w2 != "steps" || steps < 1 || steps > 30) {
        parse_fail(line_no, "expected 'vertices N steps n'");
    }
    DagBuilder b(steps);
    std::vector<VertexKind> declared(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!next_line(line)) {
            parse_fail(line_no, "truncated vertex list");
        }
        std::istringstream ls(line);
        std::size_t id = 0;
        std::string kind, op;
        int step = 0;
        if (!(ls >> id >> kind >> step >> op) || id != i) {
            parse_fail(line_no, "expected '<id> <kind> <step> <op>' with id " + std::to_string(i));
        }
        declared[i] = parse_kind(kind, line_no);
        VertexId v;
        try {
            v = b.add_vertex(parse_op(op, line_no), step);
        } catch (const ParseError &) {
            throw;
        } catch (const Error &e) {
            parse_fail(line_no, e.what());
        }
        std::string flag;
        while (ls >> flag) {
            if (flag == "inert") {
                b.mark_inert(v);
            } else if (flag.rfind("pass=", 0) == 0) {
                int q = std::stoi(flag.substr(5));
                if (q < 1 || q > steps) {
                    parse_fail(line_no, "pass step out of range");
                }
                b.mark_passthrough(v, q);
            } else {
                parse_fail(line_no, "unknown flag '" + flag + "'");
            }
        }
    }
    if (!next_line(line)) {
        parse_fail(line_no, "missing edge header");
    }
    std::istringstream eh(line);
    std::size_t m = 0;
    if (!(eh >> w1 >> m) || w1 != "edges") {
        parse_fail(line_no, "expected 'edges M'");
    }
    for (std::size_t i = 0; i < m; ++i) {
        if (!next_line(line)) {
            parse_fail(line_no, "truncated edge list");
        }
        std::istringstream ls(line);
        std::size_t src = 0, dst = 0;
        if (!(ls >> src >> dst) || src >= n || dst >= n) {
            parse_fail(line_no, "bad edge");
        }
        b.add_edge(static_cast<VertexId>(src), static_cast<VertexId>(dst));
    }
    file.dag = std::move(b).build();
    for (VertexId v = 0; v < n; ++v) {
        if (file.dag.kind(v) != declared[v]) {
            throw ParseError("vertex " + std::to_string(v) + " declared " + to_string(declared[v]) +
                             " but structure makes it " + to_string(file.dag.kind(v)));
        }
    }
    (void)file.dag.topological_order();
    return file;
}

DagFile read_dag_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open dag file " + path);
    }
    return read_dag_text(in);
}

} // namespace convio
