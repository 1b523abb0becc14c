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
#include <vector>

#include "convio/dag.hpp"

namespace convio {

inline constexpr std::size_t kPebbleVertexCap = 25;
inline constexpr std::size_t kPartitionVertexCap = 12;

/// One configuration of the red-blue pebble game. Bit v of a mask is vertex v.
/// Inputs carry blue pebbles permanently and are not tracked in `blue`.
struct PebbleState {
    std::uint32_t red = 0;
    std::uint32_t blue = 0;
    std::int64_t io_count = 0;
    std::uint32_t computed = 0;
};

struct PebbleOptions {
    std::size_t vertex_cap = kPebbleVertexCap;
    /// Abort with SizeError once this many distinct states have been expanded.
    std::size_t state_cap = 20'000'000;
};

/// Exact minimum number of Load + Store moves of a complete calculation with at
/// most `s` red pebbles. Re-computation is allowed; there is no sliding, so a
/// Compute needs a free red pebble in addition to red pebbles on every
/// predecessor. Inert vertices are ignored.
///
/// Throws SizeError above the vertex cap and InfeasibleError when no complete
/// calculation exists (some needed vertex has in-degree >= s).
std::int64_t min_io_pebbling(const Dag &dag, std::int64_t s, const PebbleOptions &opts = {});

/// Subsets V_1..V_h in dependency order. `dominators` and `minimum_sets` are
/// optional claims (leave empty or give one entry per subset); they are
/// checked, never trusted.
///
/// Subsets must cover every non-input vertex. Primary inputs may appear in at
/// most one subset or be left out: dropping them from a partition never
/// increases the subset count, so bounds computed this way stay sound.
struct SPartition {
    std::vector<std::vector<VertexId>> subsets;
    std::vector<std::vector<VertexId>> dominators;
    std::vector<std::vector<VertexId>> minimum_sets;
};

/// Size of a smallest set meeting every path from a primary input to `target`
/// (vertex cut, endpoints included). `target` is a vertex bitmask.
std::int64_t min_dominator_size(const Dag &dag, std::uint32_t target);

/// True iff `dom` meets every input-to-`target` path.
bool dominates(const Dag &dag, std::uint32_t dom, std::uint32_t target);

/// Vertices of `target` with no successor inside `target`.
std::uint32_t minimum_set(const Dag &dag, std::uint32_t target);

/// Check the four S-partition properties. On failure returns false and, when
/// `diagnostic` is non-null, writes "property N: ..." describing the first
/// violated clause.
bool verify_s_partition(const Dag &dag, const SPartition &partition, std::int64_t s,
                        std::string *diagnostic = nullptr);

struct PartitionResult {
    std::int64_t p = 0;
    SPartition certificate;
};

/// Minimum number of subsets over all S-partitions, with a witness.
///
/// Property 4 is equivalent to every prefix union being closed under
/// predecessors, so the search is a shortest path over predecessor-closed sets
/// of non-input vertices. Ties resolve toward numerically smaller blocks.
PartitionResult brute_force_partition(const Dag &dag, std::int64_t s, std::size_t max_non_inputs = kPartitionVertexCap);
std::int64_t brute_force_p(const Dag &dag, std::int64_t s, std::size_t max_non_inputs = kPartitionVertexCap);

struct HongKungCheck {
    std::int64_t q_min = 0;
    std::int64_t p_2s = 0;
    bool holds = false;
};

/// q_min = min_io_pebbling(dag, s), p_2s = brute_force_p(dag, 2s),
/// holds = q_min >= s (p_2s - 1).
HongKungCheck check_hong_kung(const Dag &dag, std::int64_t s, const PebbleOptions &opts = {},
                              std::size_t max_non_inputs = kPartitionVertexCap);

} // namespace convio
