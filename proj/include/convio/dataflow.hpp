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
#include <string>
#include <vector>

#include "json.hpp"

#include "convio/bounds.hpp"
#include "convio/model.hpp"

namespace convio {

enum class Layout { CHW, CWH, HWC };

const char *to_string(Layout l);
Layout parse_layout(const std::string &s);

/// Output sub-block of x * y * z elements with a per-block fast-memory budget
/// and thread split. `e` is the Winograd tile edge (0 for direct convolution).
struct TileConfig {
    std::int64_t x = 1, y = 1, z = 1;
    std::int64_t s_b = 1;
    std::int64_t n_xt = 1, n_yt = 1, n_zt = 1;
    Layout layout = Layout::CHW;
    std::int64_t e = 0;

    friend bool operator==(const TileConfig &, const TileConfig &) = default;
};

/// A run of `repeat` identical channel stages of one output sub-block,
/// followed by that sub-block's final output transform and store.
struct Stage {
    std::int64_t block = 0;
    std::int64_t processor = 0;
    std::int64_t repeat = 1;
    std::int64_t load_input = 0;  ///< words per repetition
    std::int64_t load_weight = 0; ///< words per repetition
    std::int64_t flops = 0;       ///< per repetition
    std::int64_t final_flops = 0; ///< once, after the repetitions
    std::int64_t store = 0;       ///< once, after the repetitions
    std::int64_t resident = 0;    ///< accumulator words held across repetitions
    std::int64_t transient = 0;   ///< operand words live during one repetition
};

struct Schedule {
    Algorithm algorithm = Algorithm::Direct;
    ConvShape shape;
    TileConfig tile;
    std::int64_t n_p = 1;
    std::int64_t blocks = 0;
    std::int64_t setup_flops = 0; ///< shared kernel transform, computed once
    std::vector<Stage> stages;

    /// Channel stages counted individually.
    [[nodiscard]] std::int64_t stage_count() const;
};

struct SimReport {
    std::int64_t loads = 0;
    std::int64_t stores = 0;
    std::int64_t q_total = 0;
    std::int64_t flops = 0;
    double runtime_proxy = 0;
    std::int64_t peak_fast_mem = 0;    ///< resident words over concurrently active blocks
    std::int64_t peak_working_set = 0; ///< resident plus stage operands
    std::int64_t stages = 0;
    std::int64_t blocks = 0;
};

/// Throws ScheduleError describing the first violated constraint: factor
/// constraints, thread divisibility, s_b <= s_sm / 2, and the accumulator
/// budget (x y z for direct, 2 t^2 / e^2 x y z for Winograd).
void check_tile(const ConvShape &shape, const HwModel &hw, const TileConfig &tile);

/// Accumulator words a tile keeps resident.
std::int64_t resident_words(const TileConfig &tile, std::int64_t r);

/// Feasible direct tiles with s_b = min(s / n_p, s_sm / 2), unit thread counts, CHW layout.
std::vector<TileConfig> feasible_tiles_dc(const ConvShape &shape, const HwModel &hw);
std::vector<TileConfig> feasible_tiles_wa(const ConvShape &shape, const WinogradParams &p, const HwModel &hw);

/// Feasible tile minimizing the analytic reading volume; ties go to the
/// smaller |x y - R z|, then larger x y z, then lexicographic (x, y, z).
/// Throws InfeasibleError listing the divisor sets when nothing fits.
TileConfig optimal_tile_dc(const ConvShape &shape, const HwModel &hw);
TileConfig optimal_tile_wa(const ConvShape &shape, const WinogradParams &p, const HwModel &hw);

/// Direct dataflow: per output sub-block, c_in channel stages each loading an
/// x' * y' input window (x' = stride (x - 1) + w_ker) and w_ker h_ker z weights;
/// partial sums stay resident; one store of x y z. Blocks go round-robin to
/// the n_p processors.
Schedule plan_direct_dataflow(const ConvShape &shape, const HwModel &hw, const TileConfig &tile);

struct WinogradPlanOptions {
    /// Compute each kernel transform once for the whole layer. Changes flops only.
    bool share_kernel_transform = false;
};

/// Winograd dataflow: per output sub-block, c_in channel stages each loading
/// the (x + r - 1)(y + r - 1) input window and z r^2 weights; every e x e tile
/// keeps two t^2 temporaries per kernel; after the last channel the output
/// transform runs and x y z outputs are stored.
Schedule plan_winograd_dataflow(const ConvShape &shape, const WinogradParams &p, const HwModel &hw,
                                const TileConfig &tile, const WinogradPlanOptions &opts = {});

/// Walk the stages and count traffic. Throws ScheduleError naming the stage
/// when a block's resident words exceed s_b.
SimReport simulate(const Schedule &schedule, const HwModel &hw);

struct AnalyticIo {
    Rational nominal;       ///< reading term with x' ~ stride x, plus stores
    Rational exact;         ///< reading term with the exact window, plus stores
    double optimal_point;   ///< closed form at xy = R z and full budget, plus stores
    bool at_optimal_point;  ///< tile satisfies the optimality condition exactly
};

/// (n W H C / xyz) kk c_in (z + xy / R) + n W H C, and the forms above.
AnalyticIo analytic_dc_io(const ConvShape &shape, const HwModel &hw, const TileConfig &tile);
/// (n W H C / xyz)(xy c_in + z r^2 c_in) + n W H C, and the forms above.
AnalyticIo analytic_wa_io(const ConvShape &shape, const WinogradParams &p, const HwModel &hw, const TileConfig &tile);

nlohmann::ordered_json to_json(const TileConfig &t);
nlohmann::ordered_json to_json(const SimReport &r);
nlohmann::ordered_json to_json(const AnalyticIo &a);
nlohmann::ordered_json schedule_summary(const Schedule &s);

/// One row per channel stage: stage,block,processor,channel,loads,stores,resident_words.
void write_trace_csv(std::ostream &os, const Schedule &s);

} // namespace convio
