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

#include "convio/config.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "convio/error.hpp"

namespace convio {

namespace pt = boost::property_tree;

ConvShape RunConfig::shape() const {
    return ConvShape::from_output(w_out, h_out, c_out, c_in, w_ker, h_ker, stride, batch);
}

HwModel RunConfig::hw() const {
    if (s <= 0) {
        throw GeometryError("fast memory size s is required");
    }
    return HwModel::make(s, n_p, s_sm, alpha, beta);
}

Algorithm parse_algorithm(const std::string &s) {
    if (s == "direct" || s == "dc") {
        return Algorithm::Direct;
    }
    if (s == "winograd" || s == "wa") {
        return Algorithm::Winograd;
    }
    throw ParseError("unknown algorithm '" + s + "' (expected direct or winograd)");
}

std::vector<std::int64_t> parse_dims(const std::string &text, std::size_t n) {
    std::vector<std::int64_t> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t next = text.find('x', pos);
        const std::string part = text.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(part, &used);
        } catch (const std::exception &) {
            used = 0;
        }
        if (part.empty() || used != part.size() || v < 1) {
            throw ParseError("bad dimension list '" + text + "'");
        }
        out.push_back(v);
        if (next == std::string::npos) {
            break;
        }
        pos = next + 1;
    }
    if (out.size() != n) {
        throw ParseError("expected " + std::to_string(n) + " dimensions in '" + text + "'");
    }
    return out;
}

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <class T>
T get(const pt::ptree &sec, const std::string &where, const std::string &key, T fallback) {
    auto v = sec.get_optional<std::string>(key);
    if (!v) {
        return fallback;
    }
    try {
        std::size_t used = 0;
        T out;
        if constexpr (std::is_floating_point_v<T>) {
            out = static_cast<T>(std::stod(*v, &used));
        } else if constexpr (std::is_unsigned_v<T>) {
            out = static_cast<T>(std::stoull(*v, &used));
        } else {
            out = static_cast<T>(std::stoll(*v, &used));
        }
        if (used != v->size()) {
            throw std::invalid_argument("trailing characters");
        }
        return out;
    } catch (const std::exception &) {
        throw ParseError("[" + where + "] " + key + ": bad value '" + *v + "'");
    }
}

const std::map<std::string, std::set<std::string>> kKeys = {
    {"shape", {"algorithm", "out", "cin", "ker", "stride", "batch", "e"}},
    {"hardware", {"s", "np", "ssm", "alpha", "beta"}},
    {"tuner", {"ns", "budget", "patience", "seed", "quantile"}},
    {"output", {"json", "history", "trace", "best", "resume"}},
};

} // namespace

RunConfig read_run_config(std::istream &is) {
    pt::ptree tree;
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error &e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    for (const auto &[name, sec] : tree) {
        auto it = kKeys.find(name);
        if (it == kKeys.end() || !sec.data().empty()) {
            throw ParseError("config: unknown section or top-level key '" + name + "'");
        }
        for (const auto &kv : sec) {
            if (!it->second.count(kv.first)) {
                throw ParseError("config: unknown key [" + name + "] " + kv.first);
            }
        }
    }
    RunConfig c;
    const pt::ptree empty;
    const auto &shape = tree.get_child("shape", empty);
    const auto &hw = tree.get_child("hardware", empty);
    const auto &tuner = tree.get_child("tuner", empty);
    const auto &out = tree.get_child("output", empty);
    if (auto a = shape.get_optional<std::string>("algorithm")) {
        c.algorithm = parse_algorithm(*a);
    }
    if (auto o = shape.get_optional<std::string>("out")) {
        auto d = parse_dims(*o, 3);
        c.w_out = d[0];
        c.h_out = d[1];
        c.c_out = d[2];
    }
    if (auto k = shape.get_optional<std::string>("ker")) {
        auto d = parse_dims(*k, 2);
        c.w_ker = d[0];
        c.h_ker = d[1];
    }
    c.c_in = get(shape, "shape", "cin", c.c_in);
    c.stride = get(shape, "shape", "stride", c.stride);
    c.batch = get(shape, "shape", "batch", c.batch);
    c.e = get(shape, "shape", "e", c.e);
    c.s = get(hw, "hardware", "s", c.s);
    c.n_p = get(hw, "hardware", "np", c.n_p);
    c.s_sm = get(hw, "hardware", "ssm", c.s_sm);
    c.alpha = get(hw, "hardware", "alpha", c.alpha);
    c.beta = get(hw, "hardware", "beta", c.beta);
    c.n_s = get(tuner, "tuner", "ns", c.n_s);
    c.budget = get(tuner, "tuner", "budget", c.budget);
    c.patience = get(tuner, "tuner", "patience", c.patience);
    c.seed = get(tuner, "tuner", "seed", c.seed);
    c.quantile = get(tuner, "tuner", "quantile", c.quantile);
    c.json = out.get("json", std::string());
    c.history = out.get("history", std::string());
    c.trace = out.get("trace", std::string());
    c.best = out.get("best", std::string());
    c.resume = out.get("resume", std::string());
    return c;
}

RunConfig read_run_config_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open config file " + path);
    }
    return read_run_config(in);
}

void write_run_config(std::ostream &os, const RunConfig &c) {
    os << "[shape]\n"
       << "algorithm=" << to_string(c.algorithm) << "\n"
       << "out=" << c.w_out << "x" << c.h_out << "x" << c.c_out << "\n"
       << "cin=" << c.c_in << "\n"
       << "ker=" << c.w_ker << "x" << c.h_ker << "\n"
       << "stride=" << c.stride << "\n"
       << "batch=" << c.batch << "\n"
       << "e=" << c.e << "\n"
       << "[hardware]\n"
       << "s=" << c.s << "\n"
       << "np=" << c.n_p << "\n"
       << "ssm=" << c.s_sm << "\n"
       << "alpha=" << num(c.alpha) << "\n"
       << "beta=" << num(c.beta) << "\n"
       << "[tuner]\n"
       << "ns=" << c.n_s << "\n"
       << "budget=" << c.budget << "\n"
       << "patience=" << c.patience << "\n"
       << "seed=" << c.seed << "\n"
       << "quantile=" << num(c.quantile) << "\n"
       << "[output]\n"
       << "json=" << c.json << "\n"
       << "history=" << c.history << "\n"
       << "trace=" << c.trace << "\n"
       << "best=" << c.best << "\n"
       << "resume=" << c.resume << "\n";
}

} // namespace convio
