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
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "convio/bounds.hpp"
#include "convio/dataflow.hpp"
#include "convio/model.hpp"

namespace convio {

enum class SpaceKind { Constrained, Unconstrained };

/// Tile, budget, thread and layout choices for one layer.
///
/// Axes: s_b (powers of two up to s_sm / 2), x | w_out, y | h_out, z | c_out,
/// n_xt | x, n_yt | y, n_zt | z, layout. Every member keeps its accumulators
/// within s_b. The constrained kind also requires z <= sqrt(s_b / R) and
/// xy <= sqrt(s_b R), with R = r^2 for Winograd. Members are ordered
/// lexicographically by (s_b, x, y, z, n_xt, n_yt, n_zt, layout).
class ConfigSpace {
  public:
    /// Throws InfeasibleError when no member exists.
    static ConfigSpace build(const ConvShape &shape, const HwModel &hw, Algorithm alg, const WinogradParams &p = {},
                             SpaceKind kind = SpaceKind::Constrained);

    [[nodiscard]] std::int64_t size() const { return size_; }
    [[nodiscard]] TileConfig at(std::int64_t index) const;
    [[nodiscard]] std::optional<std::int64_t> index_of(const TileConfig &t) const;
    [[nodiscard]] bool contains(const TileConfig &t) const { return index_of(t).has_value(); }

    /// Members that differ from `t` in one axis, moved to the nearest value
    /// above or below. Moving x, y or z replaces its thread count by the gcd
    /// with the new extent.
    [[nodiscard]] std::vector<TileConfig> neighbors(const TileConfig &t) const;

    [[nodiscard]] const ConvShape &shape() const { return shape_; }
    [[nodiscard]] const HwModel &hw() const { return hw_; }
    [[nodiscard]] Algorithm algorithm() const { return alg_; }
    [[nodiscard]] const WinogradParams &winograd() const { return wp_; }
    [[nodiscard]] SpaceKind kind() const { return kind_; }
    /// Balance factor used by the constraints and the xy / (R z) feature.
    [[nodiscard]] const Rational &balance() const { return balance_; }

  private:
    struct Group {
        std::int64_t s_b, x, y, z;
        std::int64_t offset;
    };

    ConvShape shape_;
    HwModel hw_;
    Algorithm alg_ = Algorithm::Direct;
    WinogradParams wp_;
    SpaceKind kind_ = SpaceKind::Constrained;
    Rational balance_{1};
    std::int64_t size_ = 0;
    std::vector<Group> groups_;
    std::map<std::tuple<std::int64_t, std::int64_t, std::int64_t, std::int64_t>, std::size_t> group_index_;
    std::vector<std::int64_t> s_b_values_, x_values_, y_values_, z_values_;

    [[nodiscard]] std::int64_t group_size(const Group &g) const;
};

/// Table-1 membership test used by ConfigSpace.
bool in_search_domain(const ConvShape &shape, const HwModel &hw, Algorithm alg, const WinogradParams &p,
                      SpaceKind kind, const TileConfig &t);

struct Measurement {
    TileConfig config;
    double cost = 0;      ///< runtime proxy; +inf when the schedule is rejected
    double predicted = 0; ///< model prediction at selection time; NaN when chosen at random
    std::int64_t iteration = 0;
};

/// Plan and simulate `config`; ScheduleError becomes an infinite cost.
Measurement measure(const TileConfig &config, const ConvShape &shape, const HwModel &hw, Algorithm alg,
                    const WinogradParams &p = {});
Measurement measure(const TileConfig &config, const ConfigSpace &space);

struct GbrtParams {
    int n_trees = 100;
    int max_depth = 4;
    double learning_rate = 0.1;
    double subsample = 1.0; ///< row fraction per tree; below 1 the seed matters
    int min_leaf = 1;
    std::uint64_t seed = 0;
};

/// Gradient-boosted regression trees, squared-error loss.
class GradientBoostedTrees {
  public:
    explicit GradientBoostedTrees(GbrtParams params = {}) : params_(params) {}

    void fit(const std::vector<std::vector<double>> &x, const std::vector<double> &y);
    [[nodiscard]] double predict(const std::vector<double> &x) const;
    [[nodiscard]] std::size_t tree_count() const { return trees_.size(); }

  private:
    struct Node {
        int feature = -1; ///< -1 for leaves
        double threshold = 0;
        int left = -1, right = -1;
        double value = 0;
    };
    using Tree = std::vector<Node>;

    GbrtParams params_;
    double base_ = 0;
    std::vector<Tree> trees_;

    int grow(Tree &tree, const std::vector<std::vector<double>> &x, const std::vector<double> &residual,
             std::vector<std::size_t> &rows, std::size_t begin, std::size_t end, int depth) const;
};

/// x, y, z, s_b, n_xt, n_yt, n_zt, layout one-hot (3), xy / (R z), xyz / s_b.
std::vector<double> config_features(const TileConfig &t, const Rational &balance);

using Predictor = std::function<double(const TileConfig &)>;

class CostModel {
  public:
    CostModel(Rational balance, GbrtParams params) : balance_(balance), trees_(params) {}

    [[nodiscard]] double predict(const TileConfig &t) const { return trees_.predict(config_features(t, balance_)); }
    [[nodiscard]] Predictor predictor() const {
        return [this](const TileConfig &t) { return predict(t); };
    }

  private:
    friend CostModel train(const std::vector<Measurement> &dataset, const Rational &balance, const GbrtParams &params);
    Rational balance_;
    GradientBoostedTrees trees_;
};

/// Fit on the finite-cost samples. Throws Error with fewer than two.
CostModel train(const std::vector<Measurement> &dataset, const Rational &balance, const GbrtParams &params = {});

struct WalkOptions {
    std::int64_t max_steps = 64;
    double epsilon = 0.05; ///< chance of a sideways move on a plateau
};

/// Greedy walk: each step moves to a uniformly chosen neighbor with strictly
/// lower prediction; with none, takes an equal-cost neighbor with probability
/// epsilon or stops.
TileConfig random_walk(const ConfigSpace &space, const TileConfig &start, const Predictor &model,
                       std::uint64_t seed, const WalkOptions &opts = {});

struct ExploreOptions {
    WalkOptions walk;
    double threshold = 0;        ///< predicted cost every endpoint must reach; <= 0 disables
    int retry_cap = 4;           ///< extra rounds restarting walks above the threshold
    double fresh_fraction = 0.25; ///< share of walks started at random when starts are given
    int threads = 0;             ///< 0 = hardware concurrency
};

struct ExploreResult {
    std::vector<TileConfig> configs;
    std::vector<double> predicted;
    bool threshold_met = true;
    int rounds = 1;
};

/// n_s walks with per-walk RNG streams derived from `seed`. Walk i starts at
/// starts[i % starts.size()] unless it is one of the fresh walks or starts is
/// empty. Results do not depend on the thread count.
ExploreResult explore(const ConfigSpace &space, const Predictor &model, int n_s, std::uint64_t seed,
                      const std::vector<TileConfig> &starts = {}, const ExploreOptions &opts = {});

struct TuneOptions {
    std::int64_t budget = 64; ///< new measurements in this run
    int n_s = 16;
    int patience = 50;
    double threshold_quantile = 0.2;
    std::uint64_t seed = 0;
    ExploreOptions explore;
    GbrtParams gbrt;
};

struct TuneSession {
    std::vector<Measurement> dataset;
    TileConfig best;
    double best_cost = 0;
    std::int64_t iterations = 0;
    std::string stop_reason; ///< budget, patience or exhausted
    std::vector<double> best_curve; ///< best cost after each iteration
};

/// Train, explore, measure, repeat. The first iteration (or any iteration with
/// fewer than two finite samples) measures random unmeasured members.
/// `resume` seeds the dataset; its iterations are kept and numbering continues.
TuneSession tune(const ConfigSpace &space, const TuneOptions &opts, const std::vector<Measurement> &resume = {});

/// Best of `budget` distinct uniformly drawn members.
Measurement random_search(const ConfigSpace &space, std::int64_t budget, std::uint64_t seed);

inline constexpr std::int64_t kOracleCap = 100000;

/// Measure every member; lowest index wins ties. Throws SizeError above the cap.
Measurement exhaustive_oracle(const ConfigSpace &space, std::int64_t cap = kOracleCap);

/// iteration,s_b,x,y,z,n_xt,n_yt,n_zt,layout,e,predicted,measured,best_so_far
void write_history_csv(std::ostream &os, const std::vector<Measurement> &dataset);
std::vector<Measurement> read_history_csv(std::istream &is);

} // namespace convio
