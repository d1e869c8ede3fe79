#include "fmanet/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "fmanet/common.hpp"

namespace fmanet {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("bad value for config key '" + key + "': " + v);
    }
}

int parse_int(const std::string& key, const std::string& v) {
    const double d = parse_double(key, v);
    const int i = static_cast<int>(std::llround(d));
    if (static_cast<double>(i) != d) throw ConfigError("config key '" + key + "' expects an integer, got " + v);
    return i;
}

std::vector<MotionBin> parse_bins(const std::string& key, const std::string& v) {
    std::vector<MotionBin> bins;
    std::stringstream ss(v);
    std::string part;
    while (std::getline(ss, part, ',')) {
        part = trim(part);
        const size_t colon = part.find(':');
        if (colon == std::string::npos) throw ConfigError("bad bin '" + part + "' in config key '" + key + "'");
        MotionBin b;
        b.lo = parse_double(key, trim(part.substr(0, colon)));
        const std::string hi = trim(part.substr(colon + 1));
        b.hi = (hi == "inf") ? std::numeric_limits<double>::infinity() : parse_double(key, hi);
        bins.push_back(b);
    }
    if (bins.empty()) throw ConfigError("config key '" + key + "' has no bins");
    return bins;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string part;
    while (std::getline(ss, part, ',')) out.push_back(parse_int(key, trim(part)));
    if (out.empty()) throw ConfigError("config key '" + key + "' has no entries");
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void Config::validate() {
    if (T % 2 == 0 || T < 1) throw ConfigError("T must be odd and positive (T = 2N+1), got " + std::to_string(T));
    if (s < 1) throw ConfigError("s must be >= 1");
    if (M < 1) throw ConfigError("M must be >= 1");
    if (n < 1) throw ConfigError("n must be >= 1");
    if (k_d % 2 == 0) {
        std::cerr << "warning: k_d=" << k_d << " is even; rounding up to " << k_d + 1 << "\n";
        k_d += 1;
    }
    if (k_r % 2 == 0) {
        std::cerr << "warning: k_r=" << k_r << " is even; rounding up to " << k_r + 1 << "\n";
        k_r += 1;
    }
    if (C < 1 || D < 1 || G < 1) throw ConfigError("C, D, G must be positive");
    if (H < 4 || W < 4) throw ConfigError("LR patch must be at least 4x4");
    if (batch < 1) throw ConfigError("batch must be >= 1");
    if (iterations < 0 || pretrain_iterations < 0) throw ConfigError("iteration counts must be >= 0");
    if (blur_len < 0.0) throw ConfigError("blur_len must be >= 0");
    if (blur_len > std::floor(k_d / 2.0))
        throw ConfigError("blur_len " + std::to_string(blur_len) + " exceeds kernel reach k_d/2 = " +
                          std::to_string(k_d / 2));
    if (bins.empty()) {
        // paper bins [0,20), [20,40), >=40 at s=4, rescaled by s/4 so the
        // LR-grid semantics stay comparable
        const double scale = static_cast<double>(s) / 4.0;
        bins = {{0.0, 20.0 * scale}, {20.0 * scale, 40.0 * scale},
                {40.0 * scale, std::numeric_limits<double>::infinity()}};
    }
    for (const auto& b : bins)
        if (!(b.lo >= 0.0) || !(b.hi > b.lo)) throw ConfigError("bins must satisfy 0 <= lo < hi");
}

Config parse_config_text(const std::string& text) {
    Config c;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key=value, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));

        if (key == "T") c.T = parse_int(key, val);
        else if (key == "N") c.T = 2 * parse_int(key, val) + 1;
        else if (key == "s") c.s = parse_int(key, val);
        else if (key == "M") c.M = parse_int(key, val);
        else if (key == "n") c.n = parse_int(key, val);
        else if (key == "k_d") c.k_d = parse_int(key, val);
        else if (key == "k_r") c.k_r = parse_int(key, val);
        else if (key == "C") c.C = parse_int(key, val);
        else if (key == "D") c.D = parse_int(key, val);
        else if (key == "G") c.G = parse_int(key, val);
        else if (key == "lambda1") c.lambda1 = parse_double(key, val);
        else if (key == "lambda2") c.lambda2 = parse_double(key, val);
        else if (key == "lambda3") c.lambda3 = parse_double(key, val);
        else if (key == "lambda4") c.lambda4 = parse_double(key, val);
        else if (key == "lambda5") c.lambda5 = parse_double(key, val);
        else if (key == "lambda6") c.lambda6 = parse_double(key, val);
        else if (key == "lr") c.lr = parse_double(key, val);
        else if (key == "batch") c.batch = parse_int(key, val);
        else if (key == "iterations") c.iterations = parse_int(key, val);
        else if (key == "pretrain_iterations") c.pretrain_iterations = parse_int(key, val);
        else if (key == "seed") c.seed = static_cast<uint64_t>(parse_int(key, val));
        else if (key == "pretrain_checkpoint") c.pretrain_checkpoint = val;
        else if (key == "H") c.H = parse_int(key, val);
        else if (key == "W") c.W = parse_int(key, val);
        else if (key == "samples_per_bin") c.samples_per_bin = parse_int(key, val);
        else if (key == "blur_len") c.blur_len = parse_double(key, val);
        else if (key == "bins") c.bins = parse_bins(key, val);
        else if (key == "ablate_kd_set") c.ablate_kd_set = parse_int_list(key, val);
        else if (key == "ablate_pretrain_iterations") c.ablate_pretrain_iterations = parse_int(key, val);
        else if (key == "ablate_joint_iterations") c.ablate_joint_iterations = parse_int(key, val);
        else if (key == "ablate_lambda2") c.ablate_lambda2 = parse_double(key, val);
        else throw ConfigError("unknown config key '" + key + "'");
    }
    c.validate();
    return c;
}

Config parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << is.rdbuf();
    return parse_config_text(buf.str());
}

std::string config_to_text(const Config& c) {
    std::ostringstream os;
    os << "T=" << c.T << "\ns=" << c.s << "\nM=" << c.M << "\nn=" << c.n << "\nk_d=" << c.k_d
       << "\nk_r=" << c.k_r << "\nC=" << c.C << "\nD=" << c.D << "\nG=" << c.G << "\n";
    os << "lambda1=" << fmt(c.lambda1) << "\nlambda2=" << fmt(c.lambda2) << "\nlambda3="
       << fmt(c.lambda3) << "\nlambda4=" << fmt(c.lambda4) << "\nlambda5=" << fmt(c.lambda5)
       << "\nlambda6=" << fmt(c.lambda6) << "\n";
    os << "lr=" << fmt(c.lr) << "\nbatch=" << c.batch << "\niterations=" << c.iterations
       << "\npretrain_iterations=" << c.pretrain_iterations << "\nseed=" << c.seed << "\n";
    if (!c.pretrain_checkpoint.empty()) os << "pretrain_checkpoint=" << c.pretrain_checkpoint << "\n";
    os << "H=" << c.H << "\nW=" << c.W << "\nsamples_per_bin=" << c.samples_per_bin
       << "\nblur_len=" << fmt(c.blur_len) << "\n";
    os << "bins=";
    for (size_t i = 0; i < c.bins.size(); ++i) {
        if (i) os << ",";
        os << fmt(c.bins[i].lo) << ":";
        if (std::isinf(c.bins[i].hi)) os << "inf";
        else os << fmt(c.bins[i].hi);
    }
    os << "\n";
    os << "ablate_kd_set=";
    for (size_t i = 0; i < c.ablate_kd_set.size(); ++i) {
        if (i) os << ",";
        os << c.ablate_kd_set[i];
    }
    os << "\nablate_pretrain_iterations=" << c.ablate_pretrain_iterations
       << "\nablate_joint_iterations=" << c.ablate_joint_iterations
       << "\nablate_lambda2=" << fmt(c.ablate_lambda2) << "\n";
    return os.str();
}

}  // namespace fmanet
