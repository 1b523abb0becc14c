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

#include "convio/dataflow.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "convio/dag.hpp"
#include "convio/error.hpp"

namespace convio {

const char *to_string(Layout l) {
    switch (l) {
    case Layout::CHW:
        return "CHW";
    case Layout::CWH:
        return "CWH";
    case Layout::HWC:
        return "HWC";
    }
    return "?";
}

Layout parse_layout(const std::string &s) {
    for (Layout l : {Layout::CHW, Layout::CWH, Layout::HWC}) {
        if (s == to_string(l)) {
            return l;
        }
    }
    throw ParseError("unknown layout '" + s + "' (expected CHW, CWH or HWC)");
}

std::int64_t Schedule::stage_count() const {
    std::int64_t n = 0;
    for (const auto &st : stages) {
        n += st.repeat;
    }
    return n;
}

namespace {

std::vector<std::int64_t> divisors(std::int64_t n) {
    std::vector<std::int64_t> d;
    for (std::int64_t i = 1; i <= n; ++i) {
        if (n % i == 0) {
            d.push_back(i);
        }
    }
    return d;
}

std::string join(const std::vector<std::int64_t> &v) {
    std::ostringstream os;
    os << "{";
    for (std::size_t i = 0; i < v.size(); ++i) {
        os << (i ? "," : "") << v[i];
    }
    os << "}";
    return os.str();
}

std::int64_t block_budget(const HwModel &hw) { return std::min(hw.per_processor(), hw.s_sm / 2); }

[[noreturn]] void schedule_fail(const std::string &msg) { throw ScheduleError(msg); }

} // namespace

std::int64_t resident_words(const TileConfig &tile, std::int64_t r) {
    const std::int64_t xyz = tile.x * tile.y * tile.z;
    if (tile.e == 0) {
        return xyz;
    }
    const std::int64_t t = tile.e + r - 1;
    return 2 * t * t * xyz / (tile.e * tile.e);
}

void check_tile(const ConvShape &shape, const HwModel &hw, const TileConfig &tile) {
    std::ostringstream os;
    if (tile.x < 1 || tile.y < 1 || tile.z < 1 || tile.s_b < 1 || tile.n_xt < 1 || tile.n_yt < 1 || tile.n_zt < 1) {
        schedule_fail("tile fields must be positive");
    }
    if (shape.w_out % tile.x || shape.h_out % tile.y || shape.c_out % tile.z) {
        os << "tile " << tile.x << "x" << tile.y << "x" << tile.z << " does not divide output " << shape.w_out << "x"
           << shape.h_out << "x" << shape.c_out << " (ragged tiles are not simulated)";
        schedule_fail(os.str());
    }
    if (tile.x % tile.n_xt || tile.y % tile.n_yt || tile.z % tile.n_zt) {
        os << "thread counts " << tile.n_xt << "," << tile.n_yt << "," << tile.n_zt << " do not divide tile "
           << tile.x << "," << tile.y << "," << tile.z;
        schedule_fail(os.str());
    }
    if (2 * tile.s_b > hw.s_sm) {
        os << "block budget s_b=" << tile.s_b << " exceeds s_sm/2=" << hw.s_sm / 2;
        schedule_fail(os.str());
    }
    if (tile.e != 0) {
        validate_winograd(shape, {tile.e, shape.w_ker});
        if (tile.x % tile.e || tile.y % tile.e) {
            os << "Winograd tile edge e=" << tile.e << " must divide x=" << tile.x << " and y=" << tile.y;
            schedule_fail(os.str());
        }
    }
    const std::int64_t res = resident_words(tile, shape.w_ker);
    if (res > tile.s_b) {
        os << "tile keeps " << res << " accumulator words resident, block budget s_b=" << tile.s_b;
        schedule_fail(os.str());
    }
}

// ---------------------------------------------------------------------------
// Tile selection

namespace {

std::vector<TileConfig> enumerate_tiles(const ConvShape &shape, const HwModel &hw, std::int64_t e) {
    const std::int64_t s_b = block_budget(hw);
    std::vector<TileConfig> out;
    if (s_b < 1) {
        return out;
    }
    for (std::int64_t x : divisors(shape.w_out)) {
        for (std::int64_t y : divisors(shape.h_out)) {
            for (std::int64_t z : divisors(shape.c_out)) {
                TileConfig t;
                t.x = x;
                t.y = y;
                t.z = z;
                t.s_b = s_b;
                t.e = e;
                if (e != 0 && (x % e || y % e)) {
                    continue;
                }
                if (resident_words(t, shape.w_ker) <= s_b) {
                    out.push_back(t);
                }
            }
        }
    }
    return out;
}

template <class Reading>
TileConfig pick_tile(const std::vector<TileConfig> &tiles, const Rational &R, Reading reading, const ConvShape &shape,
                     std::int64_t budget) {
    if (tiles.empty()) {
        std::ostringstream os;
        os << "no feasible tile: x in " << join(divisors(shape.w_out)) << ", y in " << join(divisors(shape.h_out))
           << ", z in " << join(divisors(shape.c_out)) << " with accumulator budget " << budget;
        throw InfeasibleError(os.str());
    }
    const TileConfig *best = nullptr;
    Rational best_read, best_gap;
    for (const auto &t : tiles) {
        const Rational read = reading(t);
        Rational gap = Rational(t.x * t.y) - R * t.z;
        if (gap < 0) {
            gap = -gap;
        }
        bool better = best == nullptr;
        if (!better) {
            const std::int64_t xyz = t.x * t.y * t.z;
            const std::int64_t best_xyz = best->x * best->y * best->z;
            if (read != best_read) {
                better = read < best_read;
            } else if (gap != best_gap) {
                better = gap < best_gap;
            } else if (xyz != best_xyz) {
                better = xyz > best_xyz;
            } else {
                better = std::tie(t.x, t.y, t.z) < std::tie(best->x, best->y, best->z);
            }
        }
        if (better) {
            best = &t;
            best_read = read;
            best_gap = gap;
        }
    }
    return *best;
}

} // namespace

std::vector<TileConfig> feasible_tiles_dc(const ConvShape &shape, const HwModel &hw) {
    return enumerate_tiles(shape, hw, 0);
}

std::vector<TileConfig> feasible_tiles_wa(const ConvShape &shape, const WinogradParams &p, const HwModel &hw) {
    validate_winograd(shape, p);
    return enumerate_tiles(shape, hw, p.e);
}

TileConfig optimal_tile_dc(const ConvShape &shape, const HwModel &hw) {
    const Rational R = reuse_factor(shape);
    auto reading = [&](const TileConfig &t) { return (Rational(t.z) + Rational(t.x * t.y) / R) / (t.x * t.y * t.z); };
    return pick_tile(feasible_tiles_dc(shape, hw), R, reading, shape, block_budget(hw));
}

TileConfig optimal_tile_wa(const ConvShape &shape, const WinogradParams &p, const HwModel &hw) {
    const Rational R(p.r * p.r);
    auto reading = [&](const TileConfig &t) { return Rational(t.x * t.y + t.z * p.r * p.r, t.x * t.y * t.z); };
    return pick_tile(feasible_tiles_wa(shape, p, hw), R, reading, shape, block_budget(hw));
}

// ---------------------------------------------------------------------------
// Planning

namespace {

template <class Fill>
Schedule plan_blocks(Algorithm alg, const ConvShape &shape, const HwModel &hw, const TileConfig &tile, Fill fill) {
    Schedule s;
    s.algorithm = alg;
    s.shape = shape;
    s.tile = tile;
    s.n_p = hw.n_p;
    const std::int64_t bx = shape.w_out / tile.x;
    const std::int64_t by = shape.h_out / tile.y;
    const std::int64_t bz = shape.c_out / tile.z;
    s.blocks = shape.batch * bx * by * bz;
    s.stages.reserve(static_cast<std::size_t>(s.blocks));
    for (std::int64_t b = 0; b < s.blocks; ++b) {
        Stage st;
        st.block = b;
        st.processor = b % hw.n_p;
        st.repeat = shape.c_in;
        fill(st);
        s.stages.push_back(st);
    }
    return s;
}

} // namespace

Schedule plan_direct_dataflow(const ConvShape &shape, const HwModel &hw, const TileConfig &tile) {
    if (tile.e != 0) {
        throw ScheduleError("direct dataflow given a Winograd tile (e=" + std::to_string(tile.e) + ")");
    }
    check_tile(shape, hw, tile);
    const std::int64_t xw = shape.stride * (tile.x - 1) + shape.w_ker;
    const std::int64_t yw = shape.stride * (tile.y - 1) + shape.h_ker;
    const std::int64_t kk = shape.w_ker * shape.h_ker;
    const std::int64_t xyz = tile.x * tile.y * tile.z;
    return plan_blocks(Algorithm::Direct, shape, hw, tile, [&](Stage &st) {
        st.load_input = xw * yw;
        st.load_weight = kk * tile.z;
        st.flops = 2 * kk * xyz;
        st.store = xyz;
        st.resident = xyz;
        st.transient = st.load_input + st.load_weight;
    });
}

Schedule plan_winograd_dataflow(const ConvShape &shape, const WinogradParams &p, const HwModel &hw,
                                const TileConfig &tile, const WinogradPlanOptions &opts) {
    validate_winograd(shape, p);
    if (tile.e != p.e) {
        throw ScheduleError("Winograd dataflow needs tile.e == " + std::to_string(p.e) + ", got " +
                            std::to_string(tile.e));
    }
    check_tile(shape, hw, tile);
    const std::int64_t t = p.tile_in();
    const std::int64_t t2 = t * t;
    const std::int64_t r2 = p.r * p.r;
    const std::int64_t tiles = (tile.x / p.e) * (tile.y / p.e);
    const std::int64_t per_channel_per_kernel =
        (2 * t2 - 1) * t2 + (opts.share_kernel_transform ? 0 : (2 * r2 - 1) * t2) + t2;
    Schedule s = plan_blocks(Algorithm::Winograd, shape, hw, tile, [&](Stage &st) {
        st.load_input = (tile.x + p.r - 1) * (tile.y + p.r - 1);
        st.load_weight = tile.z * r2;
        st.flops = tiles * tile.z * per_channel_per_kernel;
        st.final_flops = tiles * tile.z * ((shape.c_in - 1) * t2 + p.e * p.e * (2 * t2 - 1));
        st.store = tile.x * tile.y * tile.z;
        st.resident = resident_words(tile, p.r);
        st.transient = st.load_input + st.load_weight;
    });
    if (opts.share_kernel_transform) {
        s.setup_flops = shape.c_out * shape.c_in * (2 * r2 - 1) * t2;
    }
    return s;
}

SimReport simulate(const Schedule &schedule, const HwModel &hw) {
    SimReport r;
    std::int64_t max_resident = 0;
    std::int64_t max_working = 0;
    for (std::size_t i = 0; i < schedule.stages.size(); ++i) {
        const Stage &st = schedule.stages[i];
        if (st.resident > schedule.tile.s_b) {
            std::ostringstream os;
            os << "stage group " << i << " (block " << st.block << ") keeps " << st.resident
               << " words resident, block budget is " << schedule.tile.s_b;
            throw ScheduleError(os.str());
        }
        r.loads += st.repeat * (st.load_input + st.load_weight);
        r.stores += st.store;
        r.flops += st.repeat * st.flops + st.final_flops;
        r.stages += st.repeat;
        max_resident = std::max(max_resident, st.resident);
        max_working = std::max(max_working, st.resident + st.transient);
    }
    r.flops += schedule.setup_flops;
    r.blocks = schedule.blocks;
    r.q_total = r.loads + r.stores;
    const std::int64_t active = std::min<std::int64_t>(hw.n_p, schedule.blocks);
    r.peak_fast_mem = max_resident * active;
    r.peak_working_set = max_working * active;
    r.runtime_proxy = hw.alpha * static_cast<double>(r.flops) / static_cast<double>(hw.n_p) +
                      hw.beta * static_cast<double>(r.q_total);
    return r;
}

// ---------------------------------------------------------------------------
// Analytic volumes

AnalyticIo analytic_dc_io(const ConvShape &shape, const HwModel &hw, const TileConfig &tile) {
    const Rational R = reuse_factor(shape);
    const std::int64_t outs = shape.batch * shape.outputs();
    const std::int64_t kk = shape.w_ker * shape.h_ker;
    const std::int64_t xy = tile.x * tile.y;
    const std::int64_t xyz = xy * tile.z;
    const std::int64_t xw = shape.stride * (tile.x - 1) + shape.w_ker;
    const std::int64_t yw = shape.stride * (tile.y - 1) + shape.h_ker;
    AnalyticIo a;
    a.nominal = Rational(outs, xyz) * kk * shape.c_in * (Rational(tile.z) + Rational(xy) / R) + outs;
    a.exact = Rational(outs, xyz) * shape.c_in * (xw * yw + kk * tile.z) + outs;
    const double budget = static_cast<double>(hw.per_processor());
    a.optimal_point = 2.0 * static_cast<double>(outs * kk * shape.c_in) / std::sqrt(to_double(R) * budget) +
                      static_cast<double>(outs);
    a.at_optimal_point = Rational(xy) == R * tile.z && xyz == hw.per_processor();
    return a;
}

AnalyticIo analytic_wa_io(const ConvShape &shape, const WinogradParams &p, const HwModel &hw, const TileConfig &tile) {
    const std::int64_t outs = shape.batch * shape.outputs();
    const std::int64_t r2 = p.r * p.r;
    const std::int64_t t = p.tile_in();
    const std::int64_t xy = tile.x * tile.y;
    const std::int64_t xyz = xy * tile.z;
    AnalyticIo a;
    a.nominal = Rational(outs, xyz) * shape.c_in * (xy + tile.z * r2) + outs;
    a.exact = Rational(outs, xyz) * shape.c_in * ((tile.x + p.r - 1) * (tile.y + p.r - 1) + tile.z * r2) + outs;
    const double budget = static_cast<double>(hw.per_processor());
    a.optimal_point = 2.0 * static_cast<double>(outs * shape.c_in * p.r * t) /
                          (static_cast<double>(p.e) * std::sqrt(budget)) +
                      static_cast<double>(outs);
    a.at_optimal_point = xy == r2 * tile.z && 2 * t * t * xyz == hw.per_processor() * p.e * p.e;
    return a;
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::ordered_json to_json(const TileConfig &t) {
    nlohmann::ordered_json j;
    j["x"] = t.x;
    j["y"] = t.y;
    j["z"] = t.z;
    j["s_b"] = t.s_b;
    j["n_xt"] = t.n_xt;
    j["n_yt"] = t.n_yt;
    j["n_zt"] = t.n_zt;
    j["layout"] = to_string(t.layout);
    if (t.e != 0) {
        j["e"] = t.e;
    }
    return j;
}

nlohmann::ordered_json to_json(const SimReport &r) {
    nlohmann::ordered_json j;
    j["loads"] = r.loads;
    j["stores"] = r.stores;
    j["q_total"] = r.q_total;
    j["flops"] = r.flops;
    j["runtime_proxy"] = r.runtime_proxy;
    j["peak_fast_mem"] = r.peak_fast_mem;
    j["peak_working_set"] = r.peak_working_set;
    j["stages"] = r.stages;
    j["blocks"] = r.blocks;
    return j;
}

namespace {

nlohmann::ordered_json rational_json(const Rational &q) {
    nlohmann::ordered_json j;
    j["num"] = q.numerator();
    j["den"] = q.denominator();
    j["value"] = to_double(q);
    return j;
}

} // namespace

nlohmann::ordered_json to_json(const AnalyticIo &a) {
    nlohmann::ordered_json j;
    j["nominal"] = rational_json(a.nominal);
    j["exact"] = rational_json(a.exact);
    j["optimal_point"] = a.optimal_point;
    j["at_optimal_point"] = a.at_optimal_point;
    return j;
}

nlohmann::ordered_json schedule_summary(const Schedule &s) {
    nlohmann::ordered_json j;
    j["algorithm"] = to_string(s.algorithm);
    j["tile"] = to_json(s.tile);
    j["n_p"] = s.n_p;
    j["blocks"] = s.blocks;
    j["stages"] = s.stage_count();
    if (!s.stages.empty()) {
        const Stage &st = s.stages.front();
        j["stage_load_input"] = st.load_input;
        j["stage_load_weight"] = st.load_weight;
        j["block_store"] = st.store;
        j["resident_words"] = st.resident;
        j["transient_words"] = st.transient;
    }
    j["setup_flops"] = s.setup_flops;
    return j;
}

void write_trace_csv(std::ostream &os, const Schedule &s) {
    os << "stage,block,processor,channel,loads,stores,resident_words\n";
    std::int64_t idx = 0;
    for (const auto &st : s.stages) {
        for (std::int64_t c = 0; c < st.repeat; ++c) {
            const bool last = c + 1 == st.repeat;
            os << idx++ << "," << st.block << "," << st.processor << "," << c << ","
               << st.load_input + st.load_weight << "," << (last ? st.store : 0) << "," << st.resident << "\n";
        }
    }
}

} // namespace convio
