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

#include "convio/pebble.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace convio {

namespace {

using Mask = std::uint32_t;

Mask bit(VertexId v) { return Mask{1} << v; }

void require_mask_size(const Dag &dag, std::size_t cap, const char *what) {
    if (dag.num_vertices() > cap) {
        throw SizeError(std::string(what) + ": dag has " + std::to_string(dag.num_vertices()) +
                        " vertices, cap is " + std::to_string(cap));
    }
}

Mask input_mask(const Dag &dag) {
    Mask m = 0;
    for (VertexId v = 0; v < dag.num_vertices(); ++v) {
        if (dag.kind(v) == VertexKind::Input) {
            m |= bit(v);
        }
    }
    return m;
}

Mask inert_mask(const Dag &dag) {
    Mask m = 0;
    for (VertexId v = 0; v < dag.num_vertices(); ++v) {
        if (dag.inert(v)) {
            m |= bit(v);
        }
    }
    return m;
}

/// Unit-capacity vertex cut via augmenting paths on the split graph.
class VertexCut {
  public:
    explicit VertexCut(const Dag &dag) : n_(static_cast<int>(dag.num_vertices())), dag_(dag) {}

    std::int64_t solve(Mask target, std::int64_t stop_above) {
        const int nodes = 2 * n_ + 2;
        const int src = 2 * n_;
        const int dst = 2 * n_ + 1;
        const int inf = std::numeric_limits<int>::max() / 4;
        cap_.assign(static_cast<std::size_t>(nodes * nodes), 0);
        auto c = [&](int a, int b) -> int & { return cap_[static_cast<std::size_t>(a * nodes + b)]; };
        for (int v = 0; v < n_; ++v) {
            if (dag_.inert(static_cast<VertexId>(v))) {
                continue;
            }
            c(2 * v, 2 * v + 1) = 1;
            if (dag_.kind(static_cast<VertexId>(v)) == VertexKind::Input) {
                c(src, 2 * v) = inf;
            }
            if (target & bit(static_cast<VertexId>(v))) {
                c(2 * v + 1, dst) = inf;
            }
            for (VertexId w : dag_.succs(static_cast<VertexId>(v))) {
                if (!dag_.inert(w)) {
                    c(2 * v + 1, 2 * static_cast<int>(w)) = inf;
                }
            }
        }
        std::int64_t flow = 0;
        std::vector<int> parent(static_cast<std::size_t>(nodes));
        std::vector<int> queue;
        while (flow <= stop_above) {
            std::fill(parent.begin(), parent.end(), -1);
            parent[static_cast<std::size_t>(src)] = src;
            queue.assign(1, src);
            for (std::size_t head = 0; head < queue.size() && parent[static_cast<std::size_t>(dst)] < 0; ++head) {
                int a = queue[head];
                for (int b = 0; b < nodes; ++b) {
                    if (parent[static_cast<std::size_t>(b)] < 0 && c(a, b) > 0) {
                        parent[static_cast<std::size_t>(b)] = a;
                        queue.push_back(b);
                    }
                }
            }
            if (parent[static_cast<std::size_t>(dst)] < 0) {
                break;
            }
            for (int b = dst; b != src; b = parent[static_cast<std::size_t>(b)]) {
                int a = parent[static_cast<std::size_t>(b)];
                c(a, b) -= 1;
                c(b, a) += 1;
            }
            ++flow;
        }
        return flow;
    }

  private:
    int n_;
    const Dag &dag_;
    std::vector<int> cap_;
};

} // namespace

// ---------------------------------------------------------------------------
// Dominators and minimum sets

std::int64_t min_dominator_size(const Dag &dag, std::uint32_t target) {
    require_mask_size(dag, 32, "min_dominator_size");
    VertexCut cut(dag);
    return cut.solve(target, std::numeric_limits<std::int64_t>::max() - 1);
}

bool dominates(const Dag &dag, std::uint32_t dom, std::uint32_t target) {
    require_mask_size(dag, 32, "dominates");
    Mask seen = 0;
    std::vector<VertexId> stack;
    for (VertexId v = 0; v < dag.num_vertices(); ++v) {
        if (dag.kind(v) == VertexKind::Input && !(dom & bit(v)) && !dag.inert(v)) {
            seen |= bit(v);
            stack.push_back(v);
        }
    }
    while (!stack.empty()) {
        VertexId v = stack.back();
        stack.pop_back();
        if (target & bit(v)) {
            return false;
        }
        for (VertexId w : dag.succs(v)) {
            if (!(seen & bit(w)) && !(dom & bit(w)) && !dag.inert(w)) {
                seen |= bit(w);
                stack.push_back(w);
            }
        }
    }
    return true;
}

std::uint32_t minimum_set(const Dag &dag, std::uint32_t target) {
    Mask m = 0;
    for (VertexId v = 0; v < dag.num_vertices(); ++v) {
        if (!(target & bit(v))) {
            continue;
        }
        bool has_inner_succ = false;
        for (VertexId w : dag.succs(v)) {
            has_inner_succ |= (target & bit(w)) != 0;
        }
        if (!has_inner_succ) {
            m |= bit(v);
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// S-partition verification

namespace {

bool fail(std::string *diag, const std::string &msg) {
    if (diag) {
        *diag = msg;
    }
    return false;
}

Mask to_mask(const std::vector<VertexId> &vs) {
    Mask m = 0;
    for (VertexId v : vs) {
        m |= bit(v);
    }
    return m;
}

} // namespace

bool verify_s_partition(const Dag &dag, const SPartition &part, std::int64_t s, std::string *diagnostic) {
    if (dag.num_vertices() > 32) {
        return fail(diagnostic, "dag too large for mask-based verification");
    }
    const std::size_t h = part.subsets.size();
    const Mask inputs = input_mask(dag);
    const Mask inert = inert_mask(dag);
    const Mask all = dag.num_vertices() == 32 ? ~Mask{0} : (bit(static_cast<VertexId>(dag.num_vertices())) - 1);

    // Property 1: disjoint cover of every non-input vertex.
    Mask covered = 0;
    std::vector<Mask> blocks(h);
    for (std::size_t i = 0; i < h; ++i) {
        for (VertexId v : part.subsets[i]) {
            if (v >= dag.num_vertices()) {
                return fail(diagnostic, "property 1: subset " + std::to_string(i) + " names vertex " +
                                            std::to_string(v) + " outside the dag");
            }
            if ((covered | blocks[i]) & bit(v)) {
                return fail(diagnostic, "property 1: vertex " + std::to_string(v) + " appears twice");
            }
            blocks[i] |= bit(v);
        }
        if (blocks[i] == 0) {
            return fail(diagnostic, "property 1: subset " + std::to_string(i) + " is empty");
        }
        covered |= blocks[i];
    }
    const Mask missing = all & ~inputs & ~inert & ~covered;
    if (missing) {
        return fail(diagnostic, "property 1: vertex " + std::to_string(std::countr_zero(missing)) + " not covered");
    }

    if (!part.dominators.empty() && part.dominators.size() != h) {
        return fail(diagnostic, "property 2: dominator list length differs from subset count");
    }
    if (!part.minimum_sets.empty() && part.minimum_sets.size() != h) {
        return fail(diagnostic, "property 3: minimum-set list length differs from subset count");
    }
    for (std::size_t i = 0; i < h; ++i) {
        // Property 2: a dominator of size <= s exists (re-derived), and a claimed one is genuine.
        if (!part.dominators.empty()) {
            const Mask dom = to_mask(part.dominators[i]);
            if (!dominates(dag, dom, blocks[i])) {
                return fail(diagnostic, "property 2: claimed dominator of subset " + std::to_string(i) +
                                            " misses an input path");
            }
            if (std::popcount(dom) > s) {
                return fail(diagnostic, "property 2: claimed dominator of subset " + std::to_string(i) + " has " +
                                            std::to_string(std::popcount(dom)) + " > S vertices");
            }
        }
        const std::int64_t dmin = min_dominator_size(dag, blocks[i]);
        if (dmin > s) {
            return fail(diagnostic, "property 2: subset " + std::to_string(i) + " needs a dominator of " +
                                        std::to_string(dmin) + " > S vertices");
        }
        // Property 3: minimum set.
        const Mask mset = minimum_set(dag, blocks[i]);
        if (!part.minimum_sets.empty() && to_mask(part.minimum_sets[i]) != mset) {
            return fail(diagnostic, "property 3: claimed minimum set of subset " + std::to_string(i) + " is wrong");
        }
        if (std::popcount(mset) > s) {
            return fail(diagnostic, "property 3: subset " + std::to_string(i) + " has minimum set of " +
                                        std::to_string(std::popcount(mset)) + " > S vertices");
        }
    }

    // Property 4: the subset dependency graph is acyclic.
    std::vector<int> owner(dag.num_vertices(), -1);
    for (std::size_t i = 0; i < h; ++i) {
        for (VertexId v : part.subsets[i]) {
            owner[v] = static_cast<int>(i);
        }
    }
    std::vector<std::vector<std::size_t>> dep(h);
    std::vector<int> indeg(h, 0);
    for (VertexId v = 0; v < dag.num_vertices(); ++v) {
        for (VertexId w : dag.succs(v)) {
            int a = owner[v];
            int b = owner[w];
            if (a >= 0 && b >= 0 && a != b) {
                dep[static_cast<std::size_t>(a)].push_back(static_cast<std::size_t>(b));
                ++indeg[static_cast<std::size_t>(b)];
            }
        }
    }
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < h; ++i) {
        if (indeg[i] == 0) {
            order.push_back(i);
        }
    }
    for (std::size_t head = 0; head < order.size(); ++head) {
        for (std::size_t b : dep[order[head]]) {
            if (--indeg[b] == 0) {
                order.push_back(b);
            }
        }
    }
    if (order.size() != h) {
        return fail(diagnostic, "property 4: subsets depend on each other cyclically");
    }
    if (diagnostic) {
        diagnostic->clear();
    }
    return true;
}

// ---------------------------------------------------------------------------
// Exact P(S)

PartitionResult brute_force_partition(const Dag &dag, std::int64_t s, std::size_t max_non_inputs) {
    require_mask_size(dag, 32, "brute_force_p");
    std::vector<VertexId> local; // local index -> vertex
    for (VertexId v = 0; v < dag.num_vertices(); ++v) {
        if (dag.kind(v) != VertexKind::Input && !dag.inert(v)) {
            local.push_back(v);
        }
    }
    const std::size_t m = local.size();
    if (m > max_non_inputs) {
        throw SizeError("brute_force_p: " + std::to_string(m) + " non-input vertices, cap is " +
                        std::to_string(max_non_inputs));
    }
    PartitionResult result;
    if (m == 0) {
        return result;
    }
    if (s < 1) {
        throw InfeasibleError("brute_force_p: S must be >= 1");
    }
    std::vector<std::uint32_t> local_index(dag.num_vertices(), 0);
    for (std::size_t i = 0; i < m; ++i) {
        local_index[local[i]] = static_cast<std::uint32_t>(i);
    }
    std::vector<Mask> local_preds(m, 0);
    for (std::size_t i = 0; i < m; ++i) {
        for (VertexId u : dag.preds(local[i])) {
            if (dag.kind(u) != VertexKind::Input) {
                local_preds[i] |= Mask{1} << local_index[u];
            }
        }
    }
    auto global = [&](Mask lm) {
        Mask g = 0;
        for (; lm; lm &= lm - 1) {
            g |= bit(local[static_cast<std::size_t>(std::countr_zero(lm))]);
        }
        return g;
    };

    const Mask full = static_cast<Mask>((std::uint64_t{1} << m) - 1);
    std::vector<std::uint8_t> valid(static_cast<std::size_t>(full) + 1, 0);
    VertexCut cut(dag);
    for (Mask b = 1; b <= full; ++b) {
        const Mask g = global(b);
        if (std::popcount(minimum_set(dag, g)) > s) {
            continue;
        }
        valid[b] = cut.solve(g, s) <= s;
    }
    auto is_ideal = [&](Mask ideal) {
        for (Mask rest = ideal; rest; rest &= rest - 1) {
            if (local_preds[static_cast<std::size_t>(std::countr_zero(rest))] & ~ideal) {
                return false;
            }
        }
        return true;
    };

    constexpr std::int64_t unreached = std::numeric_limits<std::int64_t>::max();
    std::vector<std::int64_t> dist(static_cast<std::size_t>(full) + 1, unreached);
    std::vector<Mask> from(static_cast<std::size_t>(full) + 1, 0);
    std::vector<std::uint8_t> ideal(static_cast<std::size_t>(full) + 1, 0);
    for (Mask i = 0; i <= full; ++i) {
        ideal[i] = is_ideal(i);
        if (i == full) {
            break;
        }
    }
    dist[0] = 0;
    for (Mask cur = 0; cur < full; ++cur) {
        if (dist[cur] == unreached) {
            continue;
        }
        const Mask rest = full & ~cur;
        // Enumerate nonempty subsets of the remainder in increasing order.
        for (Mask b = rest & (~rest + 1); b; b = (b - rest) & rest) {
            const Mask next = cur | b;
            if (valid[b] && ideal[next] && dist[cur] + 1 < dist[next]) {
                dist[next] = dist[cur] + 1;
                from[next] = cur;
            }
        }
    }
    result.p = dist[full];
    std::vector<Mask> chain;
    for (Mask cur = full; cur != 0; cur = from[cur]) {
        chain.push_back(cur & ~from[cur]);
    }
    std::reverse(chain.begin(), chain.end());
    for (Mask b : chain) {
        const Mask g = global(b);
        std::vector<VertexId> subset;
        for (Mask x = g; x; x &= x - 1) {
            subset.push_back(static_cast<VertexId>(std::countr_zero(x)));
        }
        std::vector<VertexId> mset;
        for (Mask x = minimum_set(dag, g); x; x &= x - 1) {
            mset.push_back(static_cast<VertexId>(std::countr_zero(x)));
        }
        result.certificate.subsets.push_back(std::move(subset));
        result.certificate.minimum_sets.push_back(std::move(mset));
    }
    return result;
}

std::int64_t brute_force_p(const Dag &dag, std::int64_t s, std::size_t max_non_inputs) {
    return brute_force_partition(dag, s, max_non_inputs).p;
}

// ---------------------------------------------------------------------------
// Exact pebbling

namespace {

struct PebbleSearch {
    const Dag &dag;
    std::int64_t s;
    std::size_t n;
    Mask inputs = 0;
    Mask goal = 0;
    std::vector<Mask> preds;
    std::vector<Mask> reach; // goal outputs reachable from v, v included

    [[nodiscard]] Mask live(Mask blue) const {
        Mask m = 0;
        for (std::size_t v = 0; v < n; ++v) {
            if (reach[v] & ~blue) {
                m |= Mask{1} << v;
            }
        }
        return m;
    }
};

std::uint64_t key_of(Mask red, Mask blue) { return (static_cast<std::uint64_t>(blue) << 32) | red; }

} // namespace

std::int64_t min_io_pebbling(const Dag &dag, std::int64_t s, const PebbleOptions &opts) {
    require_mask_size(dag, std::min<std::size_t>(opts.vertex_cap, 32), "min_io_pebbling");
    if (s < 1) {
        throw InfeasibleError("min_io_pebbling: S must be >= 1");
    }
    PebbleSearch ps{dag, s, dag.num_vertices(), 0, 0, {}, {}};
    const std::size_t n = ps.n;
    ps.preds.assign(n, 0);
    ps.reach.assign(n, 0);
    for (VertexId v = 0; v < n; ++v) {
        if (dag.kind(v) == VertexKind::Input) {
            ps.inputs |= bit(v);
        }
        for (VertexId u : dag.preds(v)) {
            ps.preds[v] |= bit(u);
        }
    }
    for (VertexId v : dag.outputs()) {
        ps.goal |= bit(v);
    }
    auto order = dag.topological_order();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const VertexId v = *it;
        if (ps.goal & bit(v)) {
            ps.reach[v] |= bit(v);
        }
        for (VertexId w : dag.succs(v)) {
            ps.reach[v] |= ps.reach[w];
        }
    }
    if (ps.goal == 0) {
        return 0;
    }
    for (VertexId v = 0; v < n; ++v) {
        if (ps.reach[v] && !(ps.inputs & bit(v)) && std::popcount(ps.preds[v]) + 1 > s) {
            throw InfeasibleError("min_io_pebbling: vertex " + std::to_string(v) + " has " +
                                  std::to_string(std::popcount(ps.preds[v])) + " predecessors and cannot be computed with S=" +
                                  std::to_string(s) + " red pebbles");
        }
    }

    // A* on io_count; unstored outputs each need one more Store.
    auto heuristic = [&](Mask blue) { return std::popcount(ps.goal & ~blue); };
    std::unordered_map<std::uint64_t, std::int32_t> best;
    best.reserve(1 << 16);
    std::vector<std::vector<std::uint64_t>> buckets(1);
    std::size_t expanded = 0;

    auto push = [&](Mask red, Mask blue, std::int32_t g) {
        const Mask alive = ps.live(blue);
        red &= alive;
        blue &= alive | ps.goal;
        const std::uint64_t key = key_of(red, blue);
        auto [it, fresh] = best.try_emplace(key, g);
        if (!fresh) {
            if (it->second < 0 || it->second <= g) {
                return;
            }
            it->second = g;
        }
        const auto f = static_cast<std::size_t>(g + heuristic(blue));
        if (buckets.size() <= f) {
            buckets.resize(f + 1);
        }
        buckets[f].push_back(key);
    };
    push(0, 0, 0);

    for (std::size_t f = 0; f < buckets.size(); ++f) {
        while (!buckets[f].empty()) {
            const std::uint64_t key = buckets[f].back();
            buckets[f].pop_back();
            auto it = best.find(key);
            if (it->second < 0) {
                continue;
            }
            const std::int32_t g = it->second;
            if (static_cast<std::size_t>(g) + static_cast<std::size_t>(heuristic(static_cast<Mask>(key >> 32))) != f) {
                continue; // stale entry
            }
            it->second = -1 - g;
            const auto red = static_cast<Mask>(key);
            const auto blue = static_cast<Mask>(key >> 32);
            if ((ps.goal & ~blue) == 0) {
                return g;
            }
            if (++expanded > opts.state_cap) {
                throw SizeError("min_io_pebbling: state cap of " + std::to_string(opts.state_cap) + " exceeded");
            }
            const Mask alive = ps.live(blue);
            const bool full = std::popcount(red) >= s;
            for (VertexId v = 0; v < n; ++v) {
                const Mask b = bit(v);
                if (!(alive & b)) {
                    continue;
                }
                if (red & b) {
                    if (full) {
                        push(red & ~b, blue, g);
                    }
                    if (!(ps.inputs & b) && !(blue & b)) {
                        push(red, blue | b, g + 1);
                    }
                    continue;
                }
                if (full) {
                    continue;
                }
                if ((ps.inputs & b) || (blue & b)) {
                    push(red | b, blue, g + 1);
                }
                if (!(ps.inputs & b) && (ps.preds[v] & ~red) == 0) {
                    if (ps.goal & b) {
                        push(red, blue | b, g + 1); // compute, store at once, free
                    } else {
                        push(red | b, blue, g);
                    }
                }
            }
        }
    }
    throw InfeasibleError("min_io_pebbling: no complete calculation with S=" + std::to_string(s));
}

HongKungCheck check_hong_kung(const Dag &dag, std::int64_t s, const PebbleOptions &opts, std::size_t max_non_inputs) {
    HongKungCheck r;
    r.q_min = min_io_pebbling(dag, s, opts);
    r.p_2s = brute_force_p(dag, 2 * s, max_non_inputs);
    r.holds = r.q_min >= s * (r.p_2s - 1);
    return r;
}

} // namespace convio
