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

#include "convio/autotune.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "convio/error.hpp"

namespace convio {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr Layout kLayouts[] = {Layout::CHW, Layout::CWH, Layout::HWC};

std::vector<std::int64_t> divisors(std::int64_t n) {
    std::vector<std::int64_t> d;
    for (std::int64_t i = 1; i <= n; ++i) {
        if (n % i == 0) {
            d.push_back(i);
        }
    }
    return d;
}

std::int64_t position(const std::vector<std::int64_t> &v, std::int64_t x) {
    auto it = std::lower_bound(v.begin(), v.end(), x);
    return it != v.end() && *it == x ? it - v.begin() : -1;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(c)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

bool power_of_two(std::int64_t v) { return v > 0 && (v & (v - 1)) == 0; }

Rational balance_for(const ConvShape &shape, Algorithm alg, const WinogradParams &p) {
    return alg == Algorithm::Winograd ? Rational(p.r * p.r) : reuse_factor(shape);
}

} // namespace

// ---------------------------------------------------------------------------
// Search domain

bool in_search_domain(const ConvShape &shape, const HwModel &hw, Algorithm alg, const WinogradParams &p,
                      SpaceKind kind, const TileConfig &t) {
    if (!power_of_two(t.s_b) || 2 * t.s_b > hw.s_sm) {
        return false;
    }
    if (t.x < 1 || t.y < 1 || t.z < 1 || shape.w_out % t.x || shape.h_out % t.y || shape.c_out % t.z) {
        return false;
    }
    if (t.n_xt < 1 || t.n_yt < 1 || t.n_zt < 1 || t.x % t.n_xt || t.y % t.n_yt || t.z % t.n_zt) {
        return false;
    }
    if (alg == Algorithm::Winograd) {
        if (t.e != p.e || t.x % p.e || t.y % p.e) {
            return false;
        }
    } else if (t.e != 0) {
        return false;
    }
    if (resident_words(t, shape.w_ker) > t.s_b) {
        return false;
    }
    if (kind == SpaceKind::Constrained) {
        const Rational R = balance_for(shape, alg, p);
        if (R * (t.z * t.z) > Rational(t.s_b)) {
            return false;
        }
        const std::int64_t xy = t.x * t.y;
        if (Rational(xy * xy) > R * t.s_b) {
            return false;
        }
    }
    return true;
}

ConfigSpace ConfigSpace::build(const ConvShape &shape, const HwModel &hw, Algorithm alg, const WinogradParams &p,
                               SpaceKind kind) {
    if (alg == Algorithm::Winograd) {
        validate_winograd(shape, p);
    }
    ConfigSpace cs;
    cs.shape_ = shape;
    cs.hw_ = hw;
    cs.alg_ = alg;
    cs.wp_ = p;
    cs.kind_ = kind;
    cs.balance_ = balance_for(shape, alg, p);
    for (std::int64_t s_b = 1; 2 * s_b <= hw.s_sm; s_b *= 2) {
        cs.s_b_values_.push_back(s_b);
    }
    cs.x_values_ = divisors(shape.w_out);
    cs.y_values_ = divisors(shape.h_out);
    cs.z_values_ = divisors(shape.c_out);
    for (std::int64_t s_b : cs.s_b_values_) {
        for (std::int64_t x : cs.x_values_) {
            for (std::int64_t y : cs.y_values_) {
                for (std::int64_t z : cs.z_values_) {
                    TileConfig t;
                    t.s_b = s_b;
                    t.x = x;
                    t.y = y;
                    t.z = z;
                    t.e = alg == Algorithm::Winograd ? p.e : 0;
                    if (!in_search_domain(shape, hw, alg, p, kind, t)) {
                        continue;
                    }
                    Group g{s_b, x, y, z, cs.size_};
                    cs.group_index_[{s_b, x, y, z}] = cs.groups_.size();
                    cs.groups_.push_back(g);
                    cs.size_ += cs.group_size(g);
                }
            }
        }
    }
    if (cs.size_ == 0) {
        std::ostringstream os;
        os << (kind == SpaceKind::Constrained ? "constrained" : "unconstrained") << " configuration space for "
           << shape.to_string() << " is empty (s_sm=" << hw.s_sm << ")";
        throw InfeasibleError(os.str());
    }
    return cs;
}

std::int64_t ConfigSpace::group_size(const Group &g) const {
    return static_cast<std::int64_t>(divisors(g.x).size() * divisors(g.y).size() * divisors(g.z).size() * 3);
}

TileConfig ConfigSpace::at(std::int64_t index) const {
    if (index < 0 || index >= size_) {
        throw Error("configuration index " + std::to_string(index) + " out of range [0, " + std::to_string(size_) +
                    ")");
    }
    auto it = std::upper_bound(groups_.begin(), groups_.end(), index,
                               [](std::int64_t i, const Group &g) { return i < g.offset; });
    const Group &g = *std::prev(it);
    std::int64_t local = index - g.offset;
    const auto dx = divisors(g.x), dy = divisors(g.y), dz = divisors(g.z);
    TileConfig t;
    t.s_b = g.s_b;
    t.x = g.x;
    t.y = g.y;
    t.z = g.z;
    t.e = alg_ == Algorithm::Winograd ? wp_.e : 0;
    t.layout = kLayouts[local % 3];
    local /= 3;
    t.n_zt = dz[static_cast<std::size_t>(local % static_cast<std::int64_t>(dz.size()))];
    local /= static_cast<std::int64_t>(dz.size());
    t.n_yt = dy[static_cast<std::size_t>(local % static_cast<std::int64_t>(dy.size()))];
    local /= static_cast<std::int64_t>(dy.size());
    t.n_xt = dx[static_cast<std::size_t>(local)];
    return t;
}

std::optional<std::int64_t> ConfigSpace::index_of(const TileConfig &t) const {
    auto it = group_index_.find({t.s_b, t.x, t.y, t.z});
    if (it == group_index_.end() || t.e != (alg_ == Algorithm::Winograd ? wp_.e : 0)) {
        return std::nullopt;
    }
    const Group &g = groups_[it->second];
    const auto dx = divisors(g.x), dy = divisors(g.y), dz = divisors(g.z);
    const std::int64_t ix = position(dx, t.n_xt), iy = position(dy, t.n_yt), iz = position(dz, t.n_zt);
    if (ix < 0 || iy < 0 || iz < 0) {
        return std::nullopt;
    }
    const auto ny = static_cast<std::int64_t>(dy.size());
    const auto nz = static_cast<std::int64_t>(dz.size());
    const std::int64_t il = static_cast<std::int64_t>(t.layout);
    return g.offset + ((ix * ny + iy) * nz + iz) * 3 + il;
}

std::vector<TileConfig> ConfigSpace::neighbors(const TileConfig &t) const {
    std::vector<TileConfig> out;
    auto scan = [&](const std::vector<std::int64_t> &values, std::int64_t current, auto apply) {
        const auto pos = std::lower_bound(values.begin(), values.end(), current) - values.begin();
        for (int dir : {-1, +1}) {
            for (auto i = pos + dir; i >= 0 && i < static_cast<std::ptrdiff_t>(values.size()); i += dir) {
                TileConfig c = t;
                apply(c, values[static_cast<std::size_t>(i)]);
                if (contains(c)) {
                    out.push_back(c);
                    break;
                }
            }
        }
    };
    scan(s_b_values_, t.s_b, [](TileConfig &c, std::int64_t v) { c.s_b = v; });
    scan(x_values_, t.x, [](TileConfig &c, std::int64_t v) {
        c.x = v;
        c.n_xt = std::gcd(c.n_xt, v);
    });
    scan(y_values_, t.y, [](TileConfig &c, std::int64_t v) {
        c.y = v;
        c.n_yt = std::gcd(c.n_yt, v);
    });
    scan(z_values_, t.z, [](TileConfig &c, std::int64_t v) {
        c.z = v;
        c.n_zt = std::gcd(c.n_zt, v);
    });
    scan(divisors(t.x), t.n_xt, [](TileConfig &c, std::int64_t v) { c.n_xt = v; });
    scan(divisors(t.y), t.n_yt, [](TileConfig &c, std::int64_t v) { c.n_yt = v; });
    scan(divisors(t.z), t.n_zt, [](TileConfig &c, std::int64_t v) { c.n_zt = v; });
    scan({0, 1, 2}, static_cast<std::int64_t>(t.layout),
         [](TileConfig &c, std::int64_t v) { c.layout = kLayouts[v]; });
    return out;
}

// ---------------------------------------------------------------------------
// Measurement

Measurement measure(const TileConfig &config, const ConvShape &shape, const HwModel &hw, Algorithm alg,
                    const WinogradParams &p) {
    Measurement m;
    m.config = config;
    m.predicted = std::numeric_limits<double>::quiet_NaN();
    try {
        const Schedule s = alg == Algorithm::Winograd ? plan_winograd_dataflow(shape, p, hw, config)
                                                      : plan_direct_dataflow(shape, hw, config);
        m.cost = simulate(s, hw).runtime_proxy;
    } catch (const ScheduleError &) {
        m.cost = kInf;
    }
    return m;
}

Measurement measure(const TileConfig &config, const ConfigSpace &space) {
    return measure(config, space.shape(), space.hw(), space.algorithm(), space.winograd());
}

// ---------------------------------------------------------------------------
// Boosted trees

void GradientBoostedTrees::fit(const std::vector<std::vector<double>> &x, const std::vector<double> &y) {
    if (x.size() != y.size() || x.empty()) {
        throw Error("gradient boosting needs matching, nonempty x and y");
    }
    const std::size_t n = y.size();
    base_ = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    trees_.clear();
    std::vector<double> pred(n, base_), residual(n);
    std::mt19937_64 rng(params_.seed);
    for (int k = 0; k < params_.n_trees; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            residual[i] = y[i] - pred[i];
        }
        std::vector<std::size_t> rows(n);
        std::iota(rows.begin(), rows.end(), 0);
        if (params_.subsample < 1.0) {
            std::shuffle(rows.begin(), rows.end(), rng);
            const auto keep = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::llround(params_.subsample * static_cast<double>(n))));
            rows.resize(keep);
            std::sort(rows.begin(), rows.end());
        }
        Tree tree;
        grow(tree, x, residual, rows, 0, rows.size(), 0);
        trees_.push_back(std::move(tree));
        for (std::size_t i = 0; i < n; ++i) {
            int node = 0;
            const Tree &t = trees_.back();
            while (t[static_cast<std::size_t>(node)].feature >= 0) {
                const Node &nd = t[static_cast<std::size_t>(node)];
                node = x[i][static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
            }
            pred[i] += params_.learning_rate * t[static_cast<std::size_t>(node)].value;
        }
    }
}

int GradientBoostedTrees::grow(Tree &tree, const std::vector<std::vector<double>> &x,
                               const std::vector<double> &residual, std::vector<std::size_t> &rows,
                               std::size_t begin, std::size_t end, int depth) const {
    const int id = static_cast<int>(tree.size());
    tree.emplace_back();
    const std::size_t n = end - begin;
    double sum = 0;
    for (std::size_t i = begin; i < end; ++i) {
        sum += residual[rows[i]];
    }
    tree[static_cast<std::size_t>(id)].value = sum / static_cast<double>(n);
    const auto min_leaf = static_cast<std::size_t>(std::max(1, params_.min_leaf));
    if (depth >= params_.max_depth || n < 2 * min_leaf) {
        return id;
    }
    const double parent = sum * sum / static_cast<double>(n);
    double best_gain = 1e-12 * std::max(1.0, std::abs(parent));
    int best_feature = -1;
    double best_threshold = 0;
    std::vector<std::size_t> order(rows.begin() + static_cast<std::ptrdiff_t>(begin),
                                   rows.begin() + static_cast<std::ptrdiff_t>(end));
    const std::size_t n_features = x[rows[begin]].size();
    for (std::size_t f = 0; f < n_features; ++f) {
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a][f] < x[b][f]; });
        double left = 0;
        for (std::size_t i = 1; i < n; ++i) {
            left += residual[order[i - 1]];
            const double lo = x[order[i - 1]][f], hi = x[order[i]][f];
            if (!(lo < hi) || i < min_leaf || n - i < min_leaf) {
                continue;
            }
            const double right = sum - left;
            const double gain = left * left / static_cast<double>(i) +
                                right * right / static_cast<double>(n - i) - parent;
            if (gain > best_gain) {
                best_gain = gain;
                best_feature = static_cast<int>(f);
                best_threshold = lo + (hi - lo) / 2;
            }
        }
    }
    if (best_feature < 0) {
        return id;
    }
    const auto f = static_cast<std::size_t>(best_feature);
    auto mid = std::stable_partition(rows.begin() + static_cast<std::ptrdiff_t>(begin),
                                     rows.begin() + static_cast<std::ptrdiff_t>(end),
                                     [&](std::size_t r) { return x[r][f] <= best_threshold; });
    const auto split = static_cast<std::size_t>(mid - rows.begin());
    const int l = grow(tree, x, residual, rows, begin, split, depth + 1);
    const int r = grow(tree, x, residual, rows, split, end, depth + 1);
    Node &node = tree[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return id;
}

double GradientBoostedTrees::predict(const std::vector<double> &x) const {
    double v = base_;
    for (const auto &t : trees_) {
        int node = 0;
        while (t[static_cast<std::size_t>(node)].feature >= 0) {
            const Node &nd = t[static_cast<std::size_t>(node)];
            node = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
        }
        v += params_.learning_rate * t[static_cast<std::size_t>(node)].value;
    }
    return v;
}

std::vector<double> config_features(const TileConfig &t, const Rational &balance) {
    const auto d = [](std::int64_t v) { return static_cast<double>(v); };
    return {d(t.x),
            d(t.y),
            d(t.z),
            d(t.s_b),
            d(t.n_xt),
            d(t.n_yt),
            d(t.n_zt),
            t.layout == Layout::CHW ? 1.0 : 0.0,
            t.layout == Layout::CWH ? 1.0 : 0.0,
            t.layout == Layout::HWC ? 1.0 : 0.0,
            d(t.x * t.y) / (to_double(balance) * d(t.z)),
            d(t.x * t.y * t.z) / d(t.s_b)};
}

CostModel train(const std::vector<Measurement> &dataset, const Rational &balance, const GbrtParams &params) {
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (const auto &m : dataset) {
        if (std::isfinite(m.cost)) {
            x.push_back(config_features(m.config, balance));
            y.push_back(m.cost);
        }
    }
    if (y.size() < 2) {
        throw Error("training needs at least two finite-cost measurements, got " + std::to_string(y.size()));
    }
    CostModel model(balance, params);
    model.trees_.fit(x, y);
    return model;
}

// ---------------------------------------------------------------------------
// Exploration

TileConfig random_walk(const ConfigSpace &space, const TileConfig &start, const Predictor &model,
                       std::uint64_t seed, const WalkOptions &opts) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    TileConfig cur = start;
    double cur_pred = model(cur);
    for (std::int64_t step = 0; step < opts.max_steps; ++step) {
        std::vector<TileConfig> better, level;
        std::vector<double> better_pred;
        for (const auto &c : space.neighbors(cur)) {
            const double p = model(c);
            if (p < cur_pred) {
                better.push_back(c);
                better_pred.push_back(p);
            } else if (p == cur_pred) {
                level.push_back(c);
            }
        }
        if (!better.empty()) {
            std::uniform_int_distribution<std::size_t> pick(0, better.size() - 1);
            const std::size_t i = pick(rng);
            cur = better[i];
            cur_pred = better_pred[i];
        } else if (!level.empty() && coin(rng) < opts.epsilon) {
            std::uniform_int_distribution<std::size_t> pick(0, level.size() - 1);
            cur = level[pick(rng)];
        } else {
            break;
        }
    }
    return cur;
}

namespace {

TileConfig random_member(const ConfigSpace &space, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::int64_t> pick(0, space.size() - 1);
    return space.at(pick(rng));
}

template <class Fn>
void parallel_for(std::size_t n, int threads, Fn fn) {
    std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                      : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) {
                fn(i);
            }
        });
    }
    for (auto &t : pool) {
        t.join();
    }
}

} // namespace

ExploreResult explore(const ConfigSpace &space, const Predictor &model, int n_s, std::uint64_t seed,
                      const std::vector<TileConfig> &starts, const ExploreOptions &opts) {
    if (n_s < 1) {
        throw Error("explore needs n_s >= 1");
    }
    const auto n = static_cast<std::size_t>(n_s);
    std::size_t fresh = n;
    if (!starts.empty()) {
        fresh = static_cast<std::size_t>(std::llround(opts.fresh_fraction * static_cast<double>(n)));
        fresh = std::min(fresh, n);
    }
    ExploreResult res;
    res.configs.resize(n);
    res.predicted.resize(n);
    std::vector<std::size_t> pending(n);
    std::iota(pending.begin(), pending.end(), 0);
    for (int round = 0;; ++round) {
        parallel_for(pending.size(), opts.threads, [&](std::size_t k) {
            const std::size_t i = pending[k];
            TileConfig start;
            if (round == 0 && i < n - fresh) {
                start = starts[i % starts.size()];
                if (!space.contains(start)) {
                    start = random_member(space, derive_seed(seed, static_cast<std::uint64_t>(round), i, 1));
                }
            } else {
                start = random_member(space, derive_seed(seed, static_cast<std::uint64_t>(round), i, 1));
            }
            res.configs[i] =
                random_walk(space, start, model, derive_seed(seed, static_cast<std::uint64_t>(round), i, 2), opts.walk);
            res.predicted[i] = model(res.configs[i]);
        });
        res.rounds = round + 1;
        if (opts.threshold <= 0) {
            res.threshold_met = true;
            break;
        }
        std::vector<std::size_t> above;
        for (std::size_t i = 0; i < n; ++i) {
            if (res.predicted[i] > opts.threshold) {
                above.push_back(i);
            }
        }
        if (above.empty()) {
            res.threshold_met = true;
            break;
        }
        if (round >= opts.retry_cap) {
            res.threshold_met = false;
            break;
        }
        pending = std::move(above);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Tuning loop

namespace {

class Unmeasured {
  public:
    explicit Unmeasured(const ConfigSpace &space) : space_(space) {}

    void mark(const TileConfig &t) {
        if (auto i = space_.index_of(t)) {
            seen_.insert(*i);
        }
    }
    [[nodiscard]] bool seen(const TileConfig &t) const {
        auto i = space_.index_of(t);
        return i && seen_.count(*i);
    }
    [[nodiscard]] std::int64_t remaining() const { return space_.size() - static_cast<std::int64_t>(seen_.size()); }

    /// Uniform over unmeasured members.
    TileConfig draw(std::mt19937_64 &rng) const {
        std::uniform_int_distribution<std::int64_t> pick(0, remaining() - 1);
        std::int64_t k = pick(rng);
        // k-th index not in seen_.
        std::int64_t idx = k;
        for (std::int64_t s : seen_) {
            if (s <= idx) {
                ++idx;
            } else {
                break;
            }
        }
        return space_.at(idx);
    }

  private:
    const ConfigSpace &space_;
    std::set<std::int64_t> seen_;
};

double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const auto i = static_cast<std::size_t>(std::floor(q * static_cast<double>(v.size() - 1)));
    return v[std::min(i, v.size() - 1)];
}

} // namespace

TuneSession tune(const ConfigSpace &space, const TuneOptions &opts, const std::vector<Measurement> &resume) {
    if (opts.n_s < 1) {
        throw Error("tune needs n_s >= 1");
    }
    if (opts.budget < opts.n_s) {
        throw Error("tune budget " + std::to_string(opts.budget) + " is below n_s=" + std::to_string(opts.n_s));
    }
    TuneSession session;
    session.dataset = resume;
    session.best_cost = kInf;
    Unmeasured pool(space);
    std::int64_t iteration = 0;
    for (const auto &m : resume) {
        pool.mark(m.config);
        iteration = std::max(iteration, m.iteration + 1);
        if (m.cost < session.best_cost) {
            session.best_cost = m.cost;
            session.best = m.config;
        }
    }
    std::vector<TileConfig> starts;
    {
        std::vector<Measurement> finite;
        for (const auto &m : resume) {
            if (std::isfinite(m.cost)) {
                finite.push_back(m);
            }
        }
        std::stable_sort(finite.begin(), finite.end(),
                         [](const Measurement &a, const Measurement &b) { return a.cost < b.cost; });
        for (std::size_t i = 0; i < finite.size() && starts.size() < static_cast<std::size_t>(opts.n_s); ++i) {
            starts.push_back(finite[i].config);
        }
    }

    std::int64_t remaining = opts.budget;
    int stale = 0;
    session.stop_reason = "budget";
    while (remaining > 0) {
        if (pool.remaining() == 0) {
            session.stop_reason = "exhausted";
            break;
        }
        const std::int64_t want = std::min({static_cast<std::int64_t>(opts.n_s), remaining, pool.remaining()});
        std::mt19937_64 rng(derive_seed(opts.seed, static_cast<std::uint64_t>(iteration), 0));
        std::vector<std::pair<TileConfig, double>> picks;
        std::vector<double> finite_costs;
        for (const auto &m : session.dataset) {
            if (std::isfinite(m.cost)) {
                finite_costs.push_back(m.cost);
            }
        }
        auto taken = [&](const TileConfig &c) {
            if (pool.seen(c)) {
                return true;
            }
            return std::any_of(picks.begin(), picks.end(), [&](const auto &p) { return p.first == c; });
        };
        if (finite_costs.size() < 2) {
            while (static_cast<std::int64_t>(picks.size()) < want) {
                TileConfig c = pool.draw(rng);
                if (!taken(c)) {
                    picks.emplace_back(c, std::numeric_limits<double>::quiet_NaN());
                }
            }
        } else {
            GbrtParams gp = opts.gbrt;
            gp.seed = derive_seed(opts.gbrt.seed ^ opts.seed, static_cast<std::uint64_t>(iteration), 1);
            const CostModel model = train(session.dataset, space.balance(), gp);
            const Predictor pred = model.predictor();
            ExploreOptions eo = opts.explore;
            eo.threshold = quantile(finite_costs, opts.threshold_quantile);
            ExploreResult ex =
                explore(space, pred, opts.n_s, derive_seed(opts.seed, static_cast<std::uint64_t>(iteration), 2),
                        starts, eo);
            starts = ex.configs;
            std::vector<std::pair<TileConfig, double>> cand;
            for (std::size_t i = 0; i < ex.configs.size(); ++i) {
                cand.emplace_back(ex.configs[i], ex.predicted[i]);
            }
            std::stable_sort(cand.begin(), cand.end(), [](const auto &a, const auto &b) { return a.second < b.second; });
            for (const auto &c : cand) {
                if (static_cast<std::int64_t>(picks.size()) < want && !taken(c.first)) {
                    picks.push_back(c);
                }
            }
            // Fill from the endpoints' unmeasured neighborhoods, then at random.
            if (static_cast<std::int64_t>(picks.size()) < want) {
                std::vector<std::pair<TileConfig, double>> near;
                for (const auto &c : cand) {
                    for (const auto &nb : space.neighbors(c.first)) {
                        if (!taken(nb)) {
                            near.emplace_back(nb, pred(nb));
                        }
                    }
                }
                std::stable_sort(near.begin(), near.end(),
                                 [](const auto &a, const auto &b) { return a.second < b.second; });
                for (const auto &c : near) {
                    if (static_cast<std::int64_t>(picks.size()) < want && !taken(c.first)) {
                        picks.push_back(c);
                    }
                }
            }
            while (static_cast<std::int64_t>(picks.size()) < want) {
                TileConfig c = pool.draw(rng);
                if (!taken(c)) {
                    picks.emplace_back(c, pred(c));
                }
            }
        }
        bool improved = false;
        for (const auto &[config, predicted] : picks) {
            Measurement m = measure(config, space);
            m.predicted = predicted;
            m.iteration = iteration;
            pool.mark(config);
            if (m.cost < session.best_cost) {
                session.best_cost = m.cost;
                session.best = config;
                improved = true;
            }
            session.dataset.push_back(m);
        }
        remaining -= static_cast<std::int64_t>(picks.size());
        session.best_curve.push_back(session.best_cost);
        ++session.iterations;
        ++iteration;
        stale = improved ? 0 : stale + 1;
        if (stale >= opts.patience) {
            session.stop_reason = "patience";
            break;
        }
    }
    if (remaining <= 0 && session.stop_reason != "patience") {
        session.stop_reason = "budget";
    }
    return session;
}

Measurement random_search(const ConfigSpace &space, std::int64_t budget, std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, 0, 3));
    Unmeasured pool(space);
    Measurement best;
    best.cost = kInf;
    bool any = false;
    for (std::int64_t i = 0; i < budget && pool.remaining() > 0; ++i) {
        const TileConfig c = pool.draw(rng);
        pool.mark(c);
        Measurement m = measure(c, space);
        m.iteration = i;
        if (!any || m.cost < best.cost) {
            best = m;
            any = true;
        }
    }
    return best;
}

Measurement exhaustive_oracle(const ConfigSpace &space, std::int64_t cap) {
    if (space.size() > cap) {
        throw SizeError("exhaustive oracle over " + std::to_string(space.size()) + " configurations, cap is " +
                        std::to_string(cap));
    }
    Measurement best;
    for (std::int64_t i = 0; i < space.size(); ++i) {
        Measurement m = measure(space.at(i), space);
        m.iteration = i;
        if (i == 0 || m.cost < best.cost) {
            best = m;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// History files

namespace {

std::string format_number(double v) {
    if (std::isnan(v)) {
        return "";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_number(const std::string &s) {
    if (s.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    if (s == "inf") {
        return kInf;
    }
    if (s == "-inf") {
        return -kInf;
    }
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) {
        throw ParseError("bad number '" + s + "'");
    }
    return v;
}

constexpr const char *kHistoryHeader = "iteration,s_b,x,y,z,n_xt,n_yt,n_zt,layout,e,predicted,measured,best_so_far";

} // namespace

void write_history_csv(std::ostream &os, const std::vector<Measurement> &dataset) {
    os << kHistoryHeader << "\n";
    double best = kInf;
    for (const auto &m : dataset) {
        best = std::min(best, m.cost);
        const TileConfig &t = m.config;
        os << m.iteration << "," << t.s_b << "," << t.x << "," << t.y << "," << t.z << "," << t.n_xt << "," << t.n_yt
           << "," << t.n_zt << "," << to_string(t.layout) << "," << t.e << "," << format_number(m.predicted) << ","
           << format_number(m.cost) << "," << format_number(best) << "\n";
    }
}

std::vector<Measurement> read_history_csv(std::istream &is) {
    std::string line;
    if (!std::getline(is, line) || line != kHistoryHeader) {
        throw ParseError("history file must start with '" + std::string(kHistoryHeader) + "'");
    }
    std::vector<Measurement> out;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            f.push_back(cell);
        }
        if (!line.empty() && line.back() == ',') {
            f.emplace_back();
        }
        if (f.size() != 13) {
            throw ParseError("history line " + std::to_string(lineno) + ": expected 13 fields, got " +
                             std::to_string(f.size()));
        }
        try {
            Measurement m;
            m.iteration = std::stoll(f[0]);
            m.config.s_b = std::stoll(f[1]);
            m.config.x = std::stoll(f[2]);
            m.config.y = std::stoll(f[3]);
            m.config.z = std::stoll(f[4]);
            m.config.n_xt = std::stoll(f[5]);
            m.config.n_yt = std::stoll(f[6]);
            m.config.n_zt = std::stoll(f[7]);
            m.config.layout = parse_layout(f[8]);
            m.config.e = std::stoll(f[9]);
            m.predicted = parse_number(f[10]);
            m.cost = parse_number(f[11]);
            out.push_back(m);
        } catch (const ParseError &) {
            throw;
        } catch (const std::exception &e) {
            throw ParseError("history line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

} // namespace convio
