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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "convio/error.hpp"
#include "convio/model.hpp"

namespace convio {

using VertexId = std::uint32_t;

enum class VertexKind : std::uint8_t { Input, Internal, Output };

/// The operation a vertex performs. `Scale` multiplies its single predecessor
/// by a transform coefficient that is assumed resident in fast memory, so the
/// Winograd transform matrices never appear as vertices.
enum class OpKind : std::uint8_t { Input, Mul, Add, Scale, Copy };

const char *to_string(VertexKind k);
const char *to_string(OpKind k);

inline constexpr std::int64_t kDefaultVertexCap = 10'000'000;

/// Immutable computation DAG with sub-computation step labels.
///
/// Every non-input vertex has a home step in [1, num_steps]; primary inputs
/// carry step 0. A vertex may additionally pass through later steps without
/// being recomputed (a one-leaf summation tree): it is then both an input and
/// an output of that step's sub-DAG. Inert vertices exist only to complete a
/// padded tile and are excluded from counts.
class Dag {
  public:
    Dag() = default;

    [[nodiscard]] std::size_t num_vertices() const { return kind_.size(); }
    [[nodiscard]] std::size_t num_edges() const { return pred_idx_.size(); }
    [[nodiscard]] int num_steps() const { return num_steps_; }

    [[nodiscard]] VertexKind kind(VertexId v) const { return kind_[v]; }
    [[nodiscard]] OpKind op(VertexId v) const { return op_[v]; }
    [[nodiscard]] int step(VertexId v) const { return step_[v]; }
    [[nodiscard]] bool inert(VertexId v) const { return inert_[v] != 0; }
    /// Bit j set when the vertex passes through step j unchanged.
    [[nodiscard]] std::uint32_t passes(VertexId v) const { return passes_[v]; }
    [[nodiscard]] bool passes_through(VertexId v, int j) const { return (passes_[v] >> j) & 1U; }

    [[nodiscard]] std::span<const VertexId> preds(VertexId v) const {
        return {pred_idx_.data() + pred_off_[v], pred_idx_.data() + pred_off_[v + 1]};
    }
    [[nodiscard]] std::span<const VertexId> succs(VertexId v) const {
        return {succ_idx_.data() + succ_off_[v], succ_idx_.data() + succ_off_[v + 1]};
    }

    [[nodiscard]] std::vector<VertexId> inputs() const;
    [[nodiscard]] std::vector<VertexId> outputs() const;

    /// Vertices in a topological order; throws Error if the graph has a cycle.
    [[nodiscard]] std::vector<VertexId> topological_order() const;

  private:
    friend class DagBuilder;

    int num_steps_ = 0;
    std::vector<VertexKind> kind_;
    std::vector<OpKind> op_;
    std::vector<std::uint8_t> step_;
    std::vector<std::uint8_t> inert_;
    std::vector<std::uint32_t> passes_;
    std::vector<std::uint64_t> pred_off_{0};
    std::vector<VertexId> pred_idx_;
    std::vector<std::uint64_t> succ_off_{0};
    std::vector<VertexId> succ_idx_;
};

/// Accumulates vertices and edges, then freezes them into a Dag.
class DagBuilder {
  public:
    explicit DagBuilder(int num_steps = 1) : num_steps_(num_steps) {}

    VertexId add_input();
    VertexId add_vertex(OpKind op, int step);
    VertexId add_op(OpKind op, int step, std::initializer_list<VertexId> preds);
    void add_edge(VertexId src, VertexId dst);
    void mark_passthrough(VertexId v, int step);
    void mark_inert(VertexId v);
    void reserve(std::size_t vertices, std::size_t edges);

    [[nodiscard]] std::size_t size() const { return op_.size(); }

    /// Kinds are derived from structure: in-degree 0 is an input, out-degree 0
    /// (non-input) is an output, everything else is internal.
    [[nodiscard]] Dag build() &&;

  private:
    int num_steps_;
    std::vector<OpKind> op_;
    std::vector<std::uint8_t> step_;
    std::vector<std::uint8_t> inert_;
    std::vector<std::uint32_t> passes_;
    std::vector<std::pair<VertexId, VertexId>> edges_;
};

struct DagOptions {
    std::int64_t vertex_cap = kDefaultVertexCap;
    /// Compute each kernel transform J_k once per (kernel, channel) and share it
    /// across tile positions. Off by default: the vertex-count identities count
    /// one transform per tile.
    bool share_kernel_transform = false;
};

/// Number of internal + output vertices of the direct-convolution DAG (batch included).
std::int64_t direct_vertex_count(const ConvShape &shape);
/// Primary inputs of the direct-convolution DAG (image elements of every batch item plus weights).
std::int64_t direct_input_count(const ConvShape &shape);

/// Internal + output vertices of the Winograd DAG, one tile at a time, padded
/// outputs excluded. Equals the closed-form per-tile sum when e divides the output.
std::int64_t winograd_vertex_count(const ConvShape &shape, const WinogradParams &p, bool share_kernel_transform = false);
std::int64_t winograd_input_count(const ConvShape &shape, const WinogradParams &p);

/// Closed form for divisible shapes:
/// (W H C_out / e^2) [(2t^2-1)t^2 C_in + (2r^2-1)t^2 C_in + t^2 C_in + (C_in-1)t^2 + (2t^2-1)e^2], t = e+r-1.
Rational winograd_closed_form_count(const ConvShape &shape, const WinogradParams &p);

/// Two-step DAG: one product vertex per (input, weight) pair of every sliding
/// window, then a left-deep summation tree per output.
Dag build_direct_conv_dag(const ConvShape &shape, const DagOptions &opts = {});

/// Four-step Winograd DAG (input/kernel transform, element-wise product,
/// channel summation, output transform). Output extents not divisible by e are
/// padded up and the padded outputs marked inert. Stride must be 1.
Dag build_winograd_dag(const ConvShape &shape, const WinogradParams &p, const DagOptions &opts = {});

/// Count vertices whose kind is in `kinds`; inert vertices are never counted.
std::int64_t count_vertices(const Dag &dag, std::initializer_list<VertexKind> kinds);
std::int64_t count_vertices(const Dag &dag, std::span<const VertexKind> kinds);

struct StepSet {
    std::vector<VertexId> inputs;  ///< vertices outside the step read by it (incl. passthroughs)
    std::vector<VertexId> body;    ///< vertices computed in this step
    std::vector<VertexId> outputs; ///< the step's output set: no successor computed in the same step
};

struct StepPartition {
    std::vector<StepSet> steps; ///< steps[0] is step 1
};

struct PartitionViolation {
    VertexId vertex;
    std::string clause;
    std::string detail;
};

class PartitionError : public Error {
  public:
    explicit PartitionError(std::vector<PartitionViolation> violations);
    [[nodiscard]] const std::vector<PartitionViolation> &violations() const { return violations_; }

  private:
    std::vector<PartitionViolation> violations_;
};

/// Check the multi-step partition clauses and return the per-step sets.
///
/// Clauses: "acyclic"; "cover" (every computed vertex has a home step in
/// range, primary inputs have none); "disjoint" (a vertex does not pass
/// through its own home step); "input" (every vertex read by step j from
/// outside it is an output of step j-1, or a primary input when j = 1).
/// Throws PartitionError listing every violation found.
StepPartition validate_multi_step_partition(const Dag &dag);

/// Plain adjacency text:
///
///     # key=value        (optional metadata lines)
///     vertices N steps n
///     <id> <kind> <step> <op> [pass=<j>]... [inert]     N lines
///     edges M
///     <src> <dst>                                          M lines
struct DagFile {
    Dag dag;
    std::map<std::string, std::string> meta;
};

void write_dag_text(std::ostream &os, const Dag &dag, const std::map<std::string, std::string> &meta = {});
DagFile read_dag_text(std::istream &is);
DagFile read_dag_file(const std::string &path);

} // namespace convio
