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
#include <deque>
#include <functional>
#include <map>
#include <random>

#include "convio/pebble.hpp"

using namespace convio;

namespace {

Dag product_dag() {
    DagBuilder b(1);
    VertexId x = b.add_input();
    VertexId y = b.add_input();
    (void)b.add_op(OpKind::Mul, 1, {x, y});
    return std::move(b).build();
}

Dag copy_dag() {
    DagBuilder b(1);
    VertexId x = b.add_input();
    (void)b.add_op(OpKind::Copy, 1, {x});
    return std::move(b).build();
}

Dag chain_dag(int len) {
    DagBuilder b(1);
    VertexId v = b.add_input();
    for (int i = 0; i < len; ++i) {
        v = b.add_op(OpKind::Scale, 1, {v});
    }
    return std::move(b).build();
}

// 2 products + 1 sum (the 1x1-kernel, c_in=2 direct convolution).
Dag two_products_dag() {
    DagBuilder b(2);
    VertexId a0 = b.add_input();
    VertexId a1 = b.add_input();
    VertexId w0 = b.add_input();
    VertexId w1 = b.add_input();
    VertexId p0 = b.add_op(OpKind::Mul, 1, {a0, w0});
    VertexId p1 = b.add_op(OpKind::Mul, 1, {a1, w1});
    (void)b.add_op(OpKind::Add, 2, {p0, p1});
    return std::move(b).build();
}

Dag random_dag(std::mt19937 &rng, int n_inputs, int n_compute, int max_fan_in) {
    DagBuilder b(1);
    for (int i = 0; i < n_inputs; ++i) {
        b.add_input();
    }
    for (int i = 0; i < n_compute; ++i) {
        const int avail = n_inputs + i;
        std::uniform_int_distribution<int> fan(1, std::min(max_fan_in, avail));
        std::uniform_int_distribution<int> pick(0, avail - 1);
        VertexId v = b.add_vertex(OpKind::Add, 1);
        std::vector<int> chosen;
        for (int k = fan(rng); static_cast<int>(chosen.size()) < k;) {
            int p = pick(rng);
            if (std::find(chosen.begin(), chosen.end(), p) == chosen.end()) {
                chosen.push_back(p);
                b.add_edge(static_cast<VertexId>(p), v);
            }
        }
    }
    return std::move(b).build();
}

// Plain Dijkstra over (red, blue) with every legal move; no pruning at all.
std::int64_t naive_pebbling(const Dag &dag, int s) {
    const int n = static_cast<int>(dag.num_vertices());
    std::uint32_t inputs = 0, outputs = 0;
    std::vector<std::uint32_t> preds(n, 0);
    for (int v = 0; v < n; ++v) {
        if (dag.kind(v) == VertexKind::Input) {
            inputs |= 1U << v;
        } else if (dag.kind(v) == VertexKind::Output) {
            outputs |= 1U << v;
        }
        for (VertexId u : dag.preds(v)) {
            preds[v] |= 1U << u;
        }
    }
    std::map<std::uint64_t, int> dist;
    std::deque<std::pair<std::uint64_t, int>> dq;
    auto key = [](std::uint32_t r, std::uint32_t b) { return (std::uint64_t{b} << 32) | r; };
    dist[key(0, inputs)] = 0;
    dq.emplace_back(key(0, inputs), 0);
    while (!dq.empty()) {
        auto [k, d] = dq.front();
        dq.pop_front();
        if (dist[k] < d) {
            continue;
        }
        const auto red = static_cast<std::uint32_t>(k);
        const auto blue = static_cast<std::uint32_t>(k >> 32);
        if ((outputs & ~blue) == 0) {
            return d;
        }
        auto relax = [&](std::uint32_t r, std::uint32_t b, int w) {
            auto nk = key(r, b);
            auto it = dist.find(nk);
            if (it == dist.end() || it->second > d + w) {
                dist[nk] = d + w;
                if (w == 0) {
                    dq.emplace_front(nk, d);
                } else {
                    dq.emplace_back(nk, d + 1);
                }
            }
        };
        const int count = std::popcount(red);
        for (int v = 0; v < n; ++v) {
            const std::uint32_t m = 1U << v;
            if (red & m) {
                relax(red & ~m, blue, 0);
                if (!(blue & m)) {
                    relax(red, blue | m, 1);
                }
            } else if (count < s) {
                if (blue & m) {
                    relax(red | m, blue, 1);
                }
                if (!(inputs & m) && (preds[v] & ~red) == 0) {
                    relax(red | m, blue, 0);
                }
            }
        }
    }
    return -1;
}

// Smallest vertex set cutting every input-to-target path, by increasing-size enumeration.
int naive_dominator(const Dag &dag, std::uint32_t target) {
    const int n = static_cast<int>(dag.num_vertices());
    for (int size = 0; size <= n; ++size) {
        for (std::uint32_t d = 0; d < (1U << n); ++d) {
            if (std::popcount(d) != size) {
                continue;
            }
            std::uint32_t reach = 0;
            for (VertexId v = 0; v < static_cast<VertexId>(n); ++v) {
                if (dag.kind(v) == VertexKind::Input && !(d & (1U << v))) {
                    reach |= 1U << v;
                }
            }
            for (int v : dag.topological_order()) {
                if (reach & (1U << v)) {
                    for (VertexId w : dag.succs(v)) {
                        if (!(d & (1U << w))) {
                            reach |= 1U << w;
                        }
                    }
                }
            }
            if ((reach & target) == 0) {
                return size;
            }
        }
    }
    return n + 1;
}

// Enumerate every set partition of the non-input vertices.
int naive_p(const Dag &dag, int s) {
    std::vector<VertexId> verts;
    for (VertexId v = 0; v < dag.num_vertices(); ++v) {
        if (dag.kind(v) != VertexKind::Input) {
            verts.push_back(v);
        }
    }
    int best = static_cast<int>(verts.size()) + 1;
    std::vector<int> label(verts.size(), 0);
    std::function<void(std::size_t, int)> rec = [&](std::size_t i, int blocks) {
        if (blocks >= best) {
            return;
        }
        if (i == verts.size()) {
            std::vector<std::uint32_t> masks(blocks, 0);
            for (std::size_t j = 0; j < verts.size(); ++j) {
                masks[label[j]] |= 1U << verts[j];
            }
            for (auto m : masks) {
                int mset = 0;
                for (VertexId v : verts) {
                    if (!(m & (1U << v))) {
                        continue;
                    }
                    bool inner = false;
                    for (VertexId w : dag.succs(v)) {
                        inner |= (m >> w) & 1U;
                    }
                    mset += inner ? 0 : 1;
                }
                if (mset > s || naive_dominator(dag, m) > s) {
                    return;
                }
            }
            // acyclic: repeatedly peel blocks with no incoming dependency
            std::vector<bool> done(blocks, false);
            for (int round = 0; round < blocks; ++round) {
                int pick = -1;
                for (int a = 0; a < blocks && pick < 0; ++a) {
                    if (done[a]) {
                        continue;
                    }
                    bool blocked = false;
                    for (std::size_t j = 0; j < verts.size(); ++j) {
                        if (label[j] != a) {
                            continue;
                        }
                        for (VertexId u : dag.preds(verts[j])) {
                            auto it = std::find(verts.begin(), verts.end(), u);
                            if (it != verts.end()) {
                                int lb = label[it - verts.begin()];
                                blocked |= lb != a && !done[lb];
                            }
                        }
                    }
                    if (!blocked) {
                        pick = a;
                    }
                }
                if (pick < 0) {
                    return;
                }
                done[pick] = true;
            }
            best = blocks;
            return;
        }
        for (int l = 0; l <= blocks; ++l) {
            label[i] = l;
            rec(i + 1, std::max(blocks, l + 1));
        }
    };
    rec(0, 0);
    return verts.empty() ? 0 : best;
}

} // namespace

TEST(MinIoPebbling, ProductDag) { EXPECT_EQ(min_io_pebbling(product_dag(), 3), 3); }

TEST(MinIoPebbling, CopyNeedsTwoPebbles) {
    EXPECT_EQ(min_io_pebbling(copy_dag(), 2), 2);
    EXPECT_EQ(min_io_pebbling(copy_dag(), 3), 2);
    EXPECT_THROW((void)min_io_pebbling(copy_dag(), 1), InfeasibleError);
    EXPECT_THROW((void)min_io_pebbling(product_dag(), 2), InfeasibleError);
}

TEST(MinIoPebbling, TwoProductsPlusSum) {
    // Frozen from the naive oracle: a spill and a reload of one product at S=3.
    EXPECT_EQ(naive_pebbling(two_products_dag(), 3), 7);
    EXPECT_EQ(min_io_pebbling(two_products_dag(), 3), 7);
    EXPECT_EQ(min_io_pebbling(two_products_dag(), 4), 5);
}

TEST(MinIoPebbling, VertexCap) {
    PebbleOptions opts;
    opts.vertex_cap = 4;
    EXPECT_THROW((void)min_io_pebbling(chain_dag(4), 3, opts), SizeError);
}

TEST(MinIoPebbling, MatchesNaiveOracleOnRandomDags) {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 40; ++trial) {
        auto dag = random_dag(rng, 2 + trial % 3, 3 + trial % 4, 2);
        for (int s : {3, 4}) {
            SCOPED_TRACE("trial " + std::to_string(trial) + " s " + std::to_string(s));
            EXPECT_EQ(min_io_pebbling(dag, s), naive_pebbling(dag, s));
        }
    }
}

TEST(MinIoPebbling, PropertiesOnRandomDags) {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        auto dag = random_dag(rng, 3, 6, 2);
        std::int64_t prev = std::numeric_limits<std::int64_t>::max();
        std::int64_t needed_inputs = 0;
        for (VertexId v : dag.inputs()) {
            needed_inputs += dag.succs(v).empty() ? 0 : 1;
        }
        const auto outputs = static_cast<std::int64_t>(dag.outputs().size());
        for (int s = 3; s <= 7; ++s) {
            auto q = min_io_pebbling(dag, s);
            EXPECT_LE(q, prev);
            EXPECT_GE(q, needed_inputs + outputs);
            prev = q;
        }
    }
}

TEST(Dominator, MatchesNaive) {
    std::mt19937 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        auto dag = random_dag(rng, 3, 5, 3);
        const auto n = static_cast<std::uint32_t>(dag.num_vertices());
        for (std::uint32_t target = 1; target < (1U << n); target += 7) {
            EXPECT_EQ(min_dominator_size(dag, target), naive_dominator(dag, target));
        }
    }
}

TEST(SPartition, TrivialChainPartition) {
    auto dag = chain_dag(2); // input, a, b
    SPartition p;
    p.subsets = {{0, 1, 2}};
    std::string diag;
    EXPECT_TRUE(verify_s_partition(dag, p, 3, &diag)) << diag;
    p.subsets = {{1, 2}};
    p.dominators = {{0}};
    p.minimum_sets = {{2}};
    EXPECT_TRUE(verify_s_partition(dag, p, 1, &diag)) << diag;
}

TEST(SPartition, DominatorTooLarge) {
    auto dag = product_dag();
    SPartition p;
    p.subsets = {{2}};
    std::string diag;
    EXPECT_TRUE(verify_s_partition(dag, p, 1, &diag)); // the product itself dominates
    p.dominators = {{0, 1}};
    EXPECT_FALSE(verify_s_partition(dag, p, 1, &diag));
    EXPECT_NE(diag.find("property 2"), std::string::npos);

    auto sum = two_products_dag();
    SPartition q;
    q.subsets = {{4}, {5}, {6}};
    EXPECT_TRUE(verify_s_partition(sum, q, 1, &diag)) << diag;
    q.subsets = {{4, 5, 6}};
    EXPECT_FALSE(verify_s_partition(sum, q, 1, &diag)); // both products must be cut
    EXPECT_NE(diag.find("property 2"), std::string::npos);
    EXPECT_TRUE(verify_s_partition(sum, q, 2, &diag)) << diag;
    q.subsets = {{0, 2, 4, 1, 3, 5}, {6}};
    EXPECT_TRUE(verify_s_partition(sum, q, 4, &diag)) << diag;
    EXPECT_FALSE(verify_s_partition(sum, q, 3, &diag)); // inputs inside a subset dominate themselves
    q.subsets = {{4, 5}, {6}};
    q.minimum_sets = {{4}, {6}};
    EXPECT_FALSE(verify_s_partition(sum, q, 2, &diag));
    EXPECT_NE(diag.find("property 3"), std::string::npos);
    q.minimum_sets.clear();
    q.dominators = {{4}, {6}};
    EXPECT_FALSE(verify_s_partition(sum, q, 2, &diag));
    EXPECT_NE(diag.find("misses"), std::string::npos);
}

TEST(SPartition, CyclicDependency) {
    auto dag = chain_dag(4); // 0 -> 1 -> 2 -> 3 -> 4
    SPartition p;
    p.subsets = {{1, 3}, {2, 4}};
    std::string diag;
    EXPECT_FALSE(verify_s_partition(dag, p, 3, &diag));
    EXPECT_NE(diag.find("property 4"), std::string::npos);
}

TEST(SPartition, CoverAndDisjoint) {
    auto dag = chain_dag(2);
    SPartition p;
    std::string diag;
    p.subsets = {{1}};
    EXPECT_FALSE(verify_s_partition(dag, p, 3, &diag));
    EXPECT_NE(diag.find("not covered"), std::string::npos);
    p.subsets = {{1, 2}, {2}};
    EXPECT_FALSE(verify_s_partition(dag, p, 3, &diag));
    p.subsets = {{1, 2}, {}};
    EXPECT_FALSE(verify_s_partition(dag, p, 3, &diag));
}

TEST(BruteForceP, SmallCases) {
    EXPECT_EQ(brute_force_p(chain_dag(4), 2), 1);
    EXPECT_EQ(brute_force_p(two_products_dag(), 2), 1);
    EXPECT_EQ(brute_force_p(two_products_dag(), 1), 3);
    EXPECT_EQ(brute_force_p(product_dag(), 6), 1);
    DagBuilder b(1);
    b.add_input();
    EXPECT_EQ(brute_force_p(std::move(b).build(), 2), 0);
}

TEST(BruteForceP, MatchesSetPartitionOracle) {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 25; ++trial) {
        auto dag = random_dag(rng, 3, 5 + trial % 2, 3);
        for (int s : {1, 2, 3}) {
            SCOPED_TRACE("trial " + std::to_string(trial) + " s " + std::to_string(s));
            auto res = brute_force_partition(dag, s);
            EXPECT_EQ(res.p, naive_p(dag, s));
            std::string diag;
            EXPECT_TRUE(verify_s_partition(dag, res.certificate, s, &diag)) << diag;
            EXPECT_EQ(static_cast<std::int64_t>(res.certificate.subsets.size()), res.p);
        }
    }
}

TEST(BruteForceP, Cap) {
    EXPECT_THROW((void)brute_force_p(chain_dag(13), 2), SizeError);
    EXPECT_NO_THROW((void)brute_force_p(chain_dag(13), 2, 13));
}

TEST(HongKung, SmallCases) {
    auto r = check_hong_kung(copy_dag(), 3);
    EXPECT_EQ(r.q_min, 2);
    EXPECT_EQ(r.p_2s, 1);
    EXPECT_TRUE(r.holds);
    r = check_hong_kung(product_dag(), 3);
    EXPECT_EQ(r.q_min, 3);
    EXPECT_GE(r.p_2s, 1);
    EXPECT_TRUE(r.holds);
}

TEST(HongKung, HoldsOnRandomDags) {
    std::mt19937 rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        auto dag = random_dag(rng, 3, 8, 2);
        for (int s : {3, 4}) {
            auto r = check_hong_kung(dag, s);
            EXPECT_TRUE(r.holds) << r.q_min << " vs " << s << "*(" << r.p_2s << "-1)";
        }
    }
}
