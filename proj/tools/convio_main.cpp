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

// Command-line front end: lower bounds, DAG statistics, pebbling oracles,
// dataflow simulation and auto-tuning.

#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "convio/autotune.hpp"
#include "convio/bounds.hpp"
#include "convio/config.hpp"
#include "convio/dag.hpp"
#include "convio/dataflow.hpp"
#include "convio/error.hpp"
#include "convio/pebble.hpp"

using namespace convio;
using Json = nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kUsage = 2, kInfeasible = 3, kInternal = 4 };

class UsageError : public Error {
  public:
    using Error::Error;
};

struct Flags {
    std::string config;
    std::string alg, out, in, ker;
    std::int64_t cin = 0, cout = 0, stride = 0, batch = 0, e = 0;
    std::int64_t s = 0, np = 0, ssm = 0;
    double alpha = 0, beta = 0;
    int ns = 0, patience = 0;
    std::int64_t budget = 0;
    std::uint64_t seed = 0;
    double quantile = 0;
    std::map<std::string, std::string> paths;

    std::map<std::string, CLI::Option *> opt;

    [[nodiscard]] bool given(const std::string &name) const {
        auto it = opt.find(name);
        return it != opt.end() && it->second->count() > 0;
    }

    void add_path(CLI::App *app, const std::string &name, const std::string &help) {
        opt[name] = app->add_option("--" + name, paths[name], help);
    }

    void add_shape(CLI::App *app) {
        opt["config"] = app->add_option("--config", config, "key=value run config; flags win");
        opt["alg"] = app->add_option("--alg", alg, "direct | winograd");
        opt["out"] = app->add_option("--out", out, "output extent WxHxC");
        opt["in"] = app->add_option("--in", in, "input extent WxH (with --cout)");
        opt["cin"] = app->add_option("--cin", cin, "input channels");
        opt["cout"] = app->add_option("--cout", cout, "output channels (with --in)");
        opt["ker"] = app->add_option("--ker", ker, "kernel WxH (default 3x3)");
        opt["stride"] = app->add_option("--stride", stride, "stride");
        opt["batch"] = app->add_option("--batch", batch, "batch size");
        opt["e"] = app->add_option("--e", e, "Winograd output tile edge (default 2)");
        add_path(app, "json", "also write the JSON report here");
    }

    void add_hw(CLI::App *app) {
        opt["s"] = app->add_option("--s", s, "fast memory words");
        opt["np"] = app->add_option("--np", np, "processors");
        opt["ssm"] = app->add_option("--ssm", ssm, "shared memory per SM (default 2 s / np)");
        opt["alpha"] = app->add_option("--alpha", alpha, "flop weight of the runtime proxy");
        opt["beta"] = app->add_option("--beta", beta, "word weight of the runtime proxy");
    }

    void add_tuner(CLI::App *app) {
        opt["ns"] = app->add_option("--ns", ns, "parallel walks per iteration (default 16)");
        opt["budget"] = app->add_option("--budget", budget, "measurements (default 64)");
        opt["patience"] = app->add_option("--patience", patience, "iterations without improvement (default 50)");
        opt["seed"] = app->add_option("--seed", seed, "master seed");
        opt["quantile"] = app->add_option("--quantile", quantile, "explorer threshold quantile (default 0.2)");
        add_path(app, "history", "tuning history CSV");
        add_path(app, "best", "best-config JSON");
        add_path(app, "resume", "resume from a history CSV");
    }

    [[nodiscard]] RunConfig resolve() const {
        RunConfig c = given("config") ? read_run_config_file(config) : RunConfig{};
        if (given("alg")) {
            c.algorithm = parse_algorithm(alg);
        }
        if (given("ker")) {
            auto d = parse_dims(ker, 2);
            c.w_ker = d[0];
            c.h_ker = d[1];
        }
        auto set = [&](const char *name, auto &field, auto value) {
            if (given(name)) {
                field = value;
            }
        };
        set("cin", c.c_in, cin);
        set("stride", c.stride, stride);
        set("batch", c.batch, batch);
        set("e", c.e, e);
        set("s", c.s, s);
        set("np", c.n_p, np);
        set("ssm", c.s_sm, ssm);
        set("alpha", c.alpha, alpha);
        set("beta", c.beta, beta);
        set("ns", c.n_s, ns);
        set("budget", c.budget, budget);
        set("patience", c.patience, patience);
        set("seed", c.seed, seed);
        set("quantile", c.quantile, quantile);
        if (given("out") && given("in")) {
            throw UsageError("give either --out or --in, not both");
        }
        if (given("out")) {
            auto d = parse_dims(out, 3);
            c.w_out = d[0];
            c.h_out = d[1];
            c.c_out = d[2];
        } else if (given("in")) {
            if (!given("cout")) {
                throw UsageError("--in needs --cout");
            }
            auto d = parse_dims(in, 2);
            auto sh = ConvShape::from_input(d[0], d[1], c.c_in, cout, c.w_ker, c.h_ker, c.stride, c.batch);
            c.w_out = sh.w_out;
            c.h_out = sh.h_out;
            c.c_out = sh.c_out;
        } else if (given("cout")) {
            c.c_out = cout;
        }
        for (auto [name, field] : {std::pair{"json", &c.json}, std::pair{"history", &c.history},
                                   std::pair{"trace", &c.trace}, std::pair{"best", &c.best},
                                   std::pair{"resume", &c.resume}}) {
            if (given(name)) {
                *field = paths.at(name);
            }
        }
        if (c.w_out == 0) {
            throw UsageError("no shape given (use --out WxHxC or --in WxH --cout C, or --config)");
        }
        return c;
    }
};

void write_file(const std::string &path, const std::string &text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw Error("cannot write " + path);
    }
    f << text;
}

void emit(const Json &j, const std::string &path) {
    const std::string text = j.dump(2) + "\n";
    std::cout << text;
    if (!path.empty()) {
        write_file(path, text);
    }
}

Json shape_json(const ConvShape &sh) {
    Json j;
    j["w_in"] = sh.w_in;
    j["h_in"] = sh.h_in;
    j["c_in"] = sh.c_in;
    j["w_out"] = sh.w_out;
    j["h_out"] = sh.h_out;
    j["c_out"] = sh.c_out;
    j["w_ker"] = sh.w_ker;
    j["h_ker"] = sh.h_ker;
    j["stride"] = sh.stride;
    j["batch"] = sh.batch;
    return j;
}

Json hw_json(const HwModel &hw) {
    Json j;
    j["s"] = hw.s;
    j["s_sm"] = hw.s_sm;
    j["n_p"] = hw.n_p;
    j["alpha"] = hw.alpha;
    j["beta"] = hw.beta;
    return j;
}

BoundReport bound_for(const RunConfig &c, std::int64_t s) {
    return c.algorithm == Algorithm::Winograd ? lower_bound_wa(c.shape(), c.winograd(), s)
                                              : lower_bound_dc(c.shape(), s);
}

void require_s(const RunConfig &c) {
    if (c.s <= 0) {
        throw UsageError("missing --s (fast memory words)");
    }
}

// ---------------------------------------------------------------------------

int cmd_lower_bound(const Flags &f) {
    RunConfig c = f.resolve();
    require_s(c);
    Json j;
    j["command"] = "lower-bound";
    j["shape"] = shape_json(c.shape());
    if (c.algorithm == Algorithm::Winograd) {
        j["e"] = c.e;
        j["r"] = c.w_ker;
    }
    j["bound"] = to_json(bound_for(c, c.s));
    emit(j, c.json);
    return kOk;
}

int cmd_dag_stats(const Flags &f, std::int64_t cap, bool shared) {
    RunConfig c = f.resolve();
    const ConvShape sh = c.shape();
    DagOptions opts;
    opts.vertex_cap = cap;
    opts.share_kernel_transform = shared;
    Json j;
    j["command"] = "dag-stats";
    j["algorithm"] = to_string(c.algorithm);
    j["shape"] = shape_json(sh);
    Dag dag;
    std::int64_t lemma = 0;
    if (c.algorithm == Algorithm::Winograd) {
        j["e"] = c.e;
        j["r"] = c.w_ker;
        dag = build_winograd_dag(sh, c.winograd(), opts);
        lemma = winograd_vertex_count(sh, c.winograd(), shared);
        if (!shared && sh.w_out % c.e == 0 && sh.h_out % c.e == 0) {
            const Rational closed = winograd_closed_form_count(sh, c.winograd());
            j["closed_form"] = to_double(closed);
        }
    } else {
        dag = build_direct_conv_dag(sh, opts);
        lemma = direct_vertex_count(sh);
    }
    const std::int64_t inputs = count_vertices(dag, {VertexKind::Input});
    const std::int64_t internal = count_vertices(dag, {VertexKind::Internal});
    const std::int64_t outputs = count_vertices(dag, {VertexKind::Output});
    j["vertices"] = static_cast<std::int64_t>(dag.num_vertices());
    j["edges"] = static_cast<std::int64_t>(dag.num_edges());
    j["steps"] = dag.num_steps();
    j["inputs"] = inputs;
    j["internal"] = internal;
    j["outputs"] = outputs;
    j["counted"] = internal + outputs;
    j["lemma"] = lemma;
    j["match"] = internal + outputs == lemma ? "yes" : "no";
    emit(j, c.json);
    return kOk;
}

Dag builtin_fixture(const std::string &name) {
    if (name == "binary-op") {
        DagBuilder b;
        auto x = b.add_input();
        auto y = b.add_input();
        b.add_op(OpKind::Add, 1, {x, y});
        return std::move(b).build();
    }
    if (name == "two-products") {
        DagBuilder b;
        auto a = b.add_input(), w = b.add_input(), c = b.add_input(), v = b.add_input();
        auto p = b.add_op(OpKind::Mul, 1, {a, w});
        auto q = b.add_op(OpKind::Mul, 1, {c, v});
        b.add_op(OpKind::Add, 1, {p, q});
        return std::move(b).build();
    }
    if (name == "dc-tiny") {
        return build_direct_conv_dag(ConvShape::from_output(2, 1, 1, 1, 2, 1));
    }
    if (name == "wa-tiny") {
        return build_winograd_dag(ConvShape::from_output(1, 1, 1, 2, 1, 1), {1, 1});
    }
    throw UsageError("unknown fixture '" + name + "' (binary-op, two-products, dc-tiny, wa-tiny)");
}

int cmd_pebble(const std::string &dag_path, const std::string &fixture, std::int64_t s, std::size_t max_part,
               const std::string &json_path) {
    if (dag_path.empty() == fixture.empty()) {
        throw UsageError("give exactly one of --dag FILE or --fixture NAME");
    }
    Dag dag = fixture.empty() ? read_dag_file(dag_path).dag : builtin_fixture(fixture);
    const HongKungCheck hk = check_hong_kung(dag, s, {}, max_part);
    Json j;
    j["command"] = "pebble";
    j["source"] = fixture.empty() ? dag_path : "fixture:" + fixture;
    j["vertices"] = static_cast<std::int64_t>(dag.num_vertices());
    j["non_inputs"] = count_vertices(dag, {VertexKind::Internal, VertexKind::Output});
    j["s"] = s;
    j["q_min"] = hk.q_min;
    j["p_2s"] = hk.p_2s;
    j["bound"] = s * (hk.p_2s - 1);
    j["holds"] = hk.holds;
    emit(j, json_path);
    return kOk;
}

struct TileFlags {
    std::string tile, threads, layout;
    std::int64_t s_b = 0;
    bool share = false;
    CLI::Option *o_tile = nullptr, *o_threads = nullptr, *o_layout = nullptr, *o_sb = nullptr;
};

int cmd_simulate(const Flags &f, const TileFlags &tf) {
    RunConfig c = f.resolve();
    require_s(c);
    const ConvShape sh = c.shape();
    const HwModel hw = c.hw();
    const bool wa = c.algorithm == Algorithm::Winograd;
    TileConfig tile;
    bool auto_tile = true;
    if (tf.o_tile->count()) {
        auto d = parse_dims(tf.tile, 3);
        tile.x = d[0];
        tile.y = d[1];
        tile.z = d[2];
        tile.s_b = std::min(hw.per_processor(), hw.s_sm / 2);
        tile.e = wa ? c.e : 0;
        auto_tile = false;
    } else {
        tile = wa ? optimal_tile_wa(sh, c.winograd(), hw) : optimal_tile_dc(sh, hw);
    }
    if (tf.o_sb->count()) {
        tile.s_b = tf.s_b;
    }
    if (tf.o_threads->count()) {
        auto d = parse_dims(tf.threads, 3);
        tile.n_xt = d[0];
        tile.n_yt = d[1];
        tile.n_zt = d[2];
    }
    if (tf.o_layout->count()) {
        tile.layout = parse_layout(tf.layout);
    }
    const Schedule sched = wa ? plan_winograd_dataflow(sh, c.winograd(), hw, tile, {tf.share})
                              : plan_direct_dataflow(sh, hw, tile);
    const SimReport rep = simulate(sched, hw);
    const AnalyticIo an = wa ? analytic_wa_io(sh, c.winograd(), hw, tile) : analytic_dc_io(sh, hw, tile);
    const BoundReport lb = bound_for(c, hw.s);
    Json j;
    j["command"] = "simulate";
    j["algorithm"] = to_string(c.algorithm);
    j["shape"] = shape_json(sh);
    j["hardware"] = hw_json(hw);
    j["auto_tile"] = auto_tile;
    j["schedule"] = schedule_summary(sched);
    j["simulated"] = to_json(rep);
    j["analytic"] = to_json(an);
    j["simulated_equals_exact"] = Rational(rep.q_total) == an.exact;
    j["lower_bound"] = lb.q_lower;
    j["omega"] = lb.omega;
    j["ratio_to_lower_bound"] = lb.q_lower > 0 ? Json(static_cast<double>(rep.q_total) / lb.q_lower) : Json(nullptr);
    j["ratio_to_omega"] = lb.omega > 0 ? Json(static_cast<double>(rep.q_total) / lb.omega) : Json(nullptr);
    if (!c.trace.empty()) {
        std::ostringstream os;
        write_trace_csv(os, sched);
        write_file(c.trace, os.str());
    }
    emit(j, c.json);
    return kOk;
}

Json space_json(const ConfigSpace &cons, const ConfigSpace &uncons) {
    Json j;
    j["constrained"] = cons.size();
    j["unconstrained"] = uncons.size();
    j["ratio"] = static_cast<double>(cons.size()) / static_cast<double>(uncons.size());
    return j;
}

int cmd_tune(const Flags &f, bool unconstrained, int threads) {
    RunConfig c = f.resolve();
    require_s(c);
    if (c.n_s < 1) {
        throw UsageError("--ns must be >= 1");
    }
    if (c.budget < c.n_s) {
        throw UsageError("--budget " + std::to_string(c.budget) + " is below --ns " + std::to_string(c.n_s));
    }
    const ConvShape sh = c.shape();
    const HwModel hw = c.hw();
    const auto kind = unconstrained ? SpaceKind::Unconstrained : SpaceKind::Constrained;
    const ConfigSpace space = ConfigSpace::build(sh, hw, c.algorithm, c.winograd(), kind);
    const ConfigSpace other = ConfigSpace::build(
        sh, hw, c.algorithm, c.winograd(), unconstrained ? SpaceKind::Constrained : SpaceKind::Unconstrained);
    std::vector<Measurement> resume;
    if (!c.resume.empty()) {
        std::ifstream in(c.resume);
        if (!in) {
            throw ParseError("cannot open history " + c.resume);
        }
        resume = read_history_csv(in);
    }
    TuneOptions o;
    o.budget = c.budget;
    o.n_s = c.n_s;
    o.patience = c.patience;
    o.seed = c.seed;
    o.threshold_quantile = c.quantile;
    o.explore.threads = threads;
    const TuneSession session = tune(space, o, resume);
    Json j;
    j["command"] = "tune";
    j["algorithm"] = to_string(c.algorithm);
    j["shape"] = shape_json(sh);
    j["hardware"] = hw_json(hw);
    j["space"] = unconstrained ? space_json(other, space) : space_json(space, other);
    j["searched"] = unconstrained ? "unconstrained" : "constrained";
    j["seed"] = c.seed;
    j["budget"] = c.budget;
    j["measurements"] = static_cast<std::int64_t>(session.dataset.size());
    j["iterations"] = session.iterations;
    j["stop_reason"] = session.stop_reason;
    j["best"] = to_json(session.best);
    j["best_cost"] = session.best_cost;
    if (!c.history.empty()) {
        std::ostringstream os;
        write_history_csv(os, session.dataset);
        write_file(c.history, os.str());
    }
    if (!c.best.empty()) {
        write_file(c.best, j.dump(2) + "\n");
    }
    emit(j, c.json);
    return kOk;
}

int cmd_report(const Flags &f) {
    RunConfig c = f.resolve();
    require_s(c);
    const ConvShape sh = c.shape();
    const HwModel hw = c.hw();
    const bool wa = c.algorithm == Algorithm::Winograd;
    Json j;
    j["command"] = "report";
    j["algorithm"] = to_string(c.algorithm);
    j["shape"] = shape_json(sh);
    j["hardware"] = hw_json(hw);
    const BoundReport lb = bound_for(c, hw.s);
    j["bound"] = to_json(lb);
    const TileConfig tile = wa ? optimal_tile_wa(sh, c.winograd(), hw) : optimal_tile_dc(sh, hw);
    const Schedule sched =
        wa ? plan_winograd_dataflow(sh, c.winograd(), hw, tile) : plan_direct_dataflow(sh, hw, tile);
    const SimReport rep = simulate(sched, hw);
    j["optimal_tile"] = to_json(tile);
    j["simulated"] = to_json(rep);
    j["analytic"] = to_json(wa ? analytic_wa_io(sh, c.winograd(), hw, tile) : analytic_dc_io(sh, hw, tile));
    j["ratio_to_omega"] = lb.omega > 0 ? Json(static_cast<double>(rep.q_total) / lb.omega) : Json(nullptr);
    try {
        const auto cons = ConfigSpace::build(sh, hw, c.algorithm, c.winograd());
        const auto uncons = ConfigSpace::build(sh, hw, c.algorithm, c.winograd(), SpaceKind::Unconstrained);
        j["space"] = space_json(cons, uncons);
    } catch (const InfeasibleError &e) {
        j["space"] = e.what();
    }
    emit(j, c.json);
    return kOk;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"I/O lower bounds, dataflow simulation and tile tuning for convolution layers"};
    app.require_subcommand(1);

    Flags lb_flags, ds_flags, sim_flags, tune_flags, rep_flags;
    auto *lb = app.add_subcommand("lower-bound", "closed-form and exact I/O lower bounds");
    lb_flags.add_shape(lb);
    lb_flags.add_hw(lb);

    auto *ds = app.add_subcommand("dag-stats", "build the computation DAG and check the vertex-count identity");
    ds_flags.add_shape(ds);
    std::int64_t cap = kDefaultVertexCap;
    bool ds_shared = false;
    ds->add_option("--cap", cap, "vertex cap");
    ds->add_flag("--share-kernel", ds_shared, "one kernel transform per (kernel, channel)");

    auto *pb = app.add_subcommand("pebble", "minimum pebbling I/O versus the S-partition bound");
    std::string dag_path, fixture, pb_json;
    std::int64_t pb_s = 0;
    std::size_t max_part = kPartitionVertexCap;
    pb->add_option("--dag", dag_path, "DAG text file");
    pb->add_option("--fixture", fixture, "built-in DAG: binary-op, two-products, dc-tiny, wa-tiny");
    pb->add_option("--s", pb_s, "red pebbles")->required();
    pb->add_option("--max-partition", max_part, "non-input cap for the partition search");
    pb->add_option("--json", pb_json, "also write the JSON report here");

    auto *sim = app.add_subcommand("simulate", "plan and simulate a tiled dataflow");
    sim_flags.add_shape(sim);
    sim_flags.add_hw(sim);
    sim_flags.add_path(sim, "trace", "per-stage CSV trace");
    TileFlags tf;
    tf.o_tile = sim->add_option("--tile", tf.tile, "sub-block XxYxZ (default: optimal)");
    tf.o_sb = sim->add_option("--sb", tf.s_b, "per-block budget");
    tf.o_threads = sim->add_option("--threads", tf.threads, "thread split AxBxC");
    tf.o_layout = sim->add_option("--layout", tf.layout, "CHW | CWH | HWC");
    sim->add_flag("--share-kernel", tf.share, "compute kernel transforms once (Winograd)");

    auto *tn = app.add_subcommand("tune", "search the tile space with the learned cost model");
    tune_flags.add_shape(tn);
    tune_flags.add_hw(tn);
    tune_flags.add_tuner(tn);
    bool unconstrained = false;
    int threads = 1;
    tn->add_flag("--unconstrained", unconstrained, "search without the balance constraints");
    tn->add_option("--threads", threads, "explorer threads (results do not depend on it)");

    auto *rp = app.add_subcommand("report", "bound, optimal tile, simulation and space sizes for one layer");
    rep_flags.add_shape(rp);
    rep_flags.add_hw(rp);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (lb->parsed()) {
            return cmd_lower_bound(lb_flags);
        }
        if (ds->parsed()) {
            return cmd_dag_stats(ds_flags, cap, ds_shared);
        }
        if (pb->parsed()) {
            return cmd_pebble(dag_path, fixture, pb_s, max_part, pb_json);
        }
        if (sim->parsed()) {
            return cmd_simulate(sim_flags, tf);
        }
        if (tn->parsed()) {
            return cmd_tune(tune_flags, unconstrained, threads);
        }
        if (rp->parsed()) {
            return cmd_report(rep_flags);
        }
    } catch (const UsageError &e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const ParseError &e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const GeometryError &e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const UnsupportedError &e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const InfeasibleError &e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return kInfeasible;
    } catch (const SizeError &e) {
        std::cerr << "size cap: " << e.what() << "\n";
        return kInfeasible;
    } catch (const ScheduleError &e) {
        std::cerr << "schedule error: " << e.what() << "\n";
        return kInfeasible;
    } catch (const std::exception &e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kInternal;
    }
    return kInternal;
}
