#pragma once

#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vtflow/godunov.hpp"
#include "vtflow/varnet.hpp"

namespace vtcli {

/// Anything wrong with a configuration file or its referenced inputs.
/// Commands translate it into exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::string trim(std::string s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

/// Flat `section.key = value` file. Blank lines and lines starting with #
/// are ignored. Keys are validated against the full set the tool knows, so
/// a typo fails loudly with its line number instead of being skipped.
class KeyFile {
public:
    static const std::set<std::string>& known_keys() {
        static const std::set<std::string> k = {
            "fd.u_kmh", "fd.w_kmh", "fd.kappa_veh_km",
            "domain.length_km", "domain.horizon_hr",
            "grid.dt_s",
            "init.kind", "init.k0_veh_km", "init.csv",
            "source.kind", "source.a_veh_km_hr", "source.a_up_veh_km_hr",
            "source.a_down_veh_km_hr", "source.x0_km", "source.csv",
            "source.a_veh_km2_hr", "source.b",
            "run.rule", "run.boundary", "run.dt_list_s",
            "rmse.probe_x_km",
            "erp.k_up_veh_km", "erp.k_down_veh_km", "erp.a_up_veh_km_hr",
            "erp.a_down_veh_km_hr", "erp.x0_km", "erp.t_hr",
            "varnet.k0_veh_km",
            "output.field_csv", "output.meta_json", "output.convergence_csv",
            "output.candidates_csv", "output.surface_csv", "output.exact_csv",
        };
        return k;
    }

    static KeyFile parse(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw ConfigError("cannot open config file: " + path);
        KeyFile kf;
        kf.path_ = path;
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const std::string s = trim(line);
            if (s.empty() || s[0] == '#') continue;
            const size_t eq = s.find('=');
            if (eq == std::string::npos)
                throw ConfigError(path + ":" + std::to_string(lineno) +
                                  ": expected 'key = value', got '" + s + "'");
            const std::string key = trim(s.substr(0, eq));
            const std::string val = trim(s.substr(eq + 1));
            if (!known_keys().count(key))
                throw ConfigError(path + ":" + std::to_string(lineno) + ": unknown key '" +
                                  key + "'");
            if (kf.kv_.count(key))
                throw ConfigError(path + ":" + std::to_string(lineno) + ": duplicate key '" +
                                  key + "'");
            kf.kv_[key] = val;
            kf.line_[key] = lineno;
        }
        return kf;
    }

    bool has(const std::string& key) const { return kv_.count(key) != 0; }

    std::string str(const std::string& key) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) throw ConfigError(path_ + ": missing required key '" + key + "'");
        return it->second;
    }

    std::string str_or(const std::string& key, const std::string& def) const {
        auto it = kv_.find(key);
        return it == kv_.end() ? def : it->second;
    }

    double num(const std::string& key) const { return to_num(key, str(key)); }

    double num_or(const std::string& key, double def) const {
        auto it = kv_.find(key);
        return it == kv_.end() ? def : to_num(key, it->second);
    }

    const std::string& path() const { return path_; }

private:
    double to_num(const std::string& key, const std::string& val) const {
        try {
            size_t pos = 0;
            const double v = std::stod(val, &pos);
            if (trim(val.substr(pos)).empty()) return v;
        } catch (const std::exception&) {
        }
        throw ConfigError(path_ + ":" + std::to_string(line_.at(key)) + ": key '" + key +
                          "' is not a number: '" + val + "'");
    }

    std::string path_;
    std::map<std::string, std::string> kv_;
    std::map<std::string, int> line_;
};

inline vtflow::TriangularFD build_fd(const KeyFile& kf) {
    try {
        return vtflow::TriangularFD(kf.num("fd.u_kmh"), kf.num("fd.w_kmh"),
                                    kf.num("fd.kappa_veh_km"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(kf.path() + ": fd.*: " + e.what());
    }
}

enum class RuleChoice { Ct, Erp, Both };

inline RuleChoice build_rule(const KeyFile& kf, const std::string& override_rule) {
    const std::string r = override_rule.empty() ? kf.str_or("run.rule", "both") : override_rule;
    if (r == "ct") return RuleChoice::Ct;
    if (r == "erp") return RuleChoice::Erp;
    if (r == "both") return RuleChoice::Both;
    throw ConfigError(kf.path() + ": run.rule must be ct, erp or both, got '" + r + "'");
}

inline vtflow::BoundaryMode build_boundary(const KeyFile& kf) {
    const std::string b = kf.str_or("run.boundary", "open");
    if (b == "open") return vtflow::BoundaryMode::Open;
    if (b == "mirror") return vtflow::BoundaryMode::Mirror;
    throw ConfigError(kf.path() + ": run.boundary must be open or mirror, got '" + b + "'");
}

inline std::vector<double> build_initial_density(const KeyFile& kf, int n_cells) {
    const std::string kind = kf.str_or("init.kind", "uniform");
    if (kind == "uniform")
        return std::vector<double>(static_cast<size_t>(n_cells), kf.num_or("init.k0_veh_km", 0.0));
    if (kind == "csv") {
        const std::string path = kf.str("init.csv");
        std::ifstream is(path);
        if (!is) throw ConfigError(kf.path() + ": init.csv: cannot open '" + path + "'");
        std::string line;
        if (!std::getline(is, line) || trim(line) != "k_veh_per_km")
            throw ConfigError(path + ": expected header 'k_veh_per_km'");
        std::vector<double> k;
        while (std::getline(is, line)) {
            const std::string s = trim(line);
            if (s.empty()) continue;
            try {
                k.push_back(std::stod(s));
            } catch (const std::exception&) {
                throw ConfigError(path + ": bad density value '" + s + "'");
            }
        }
        if (k.size() != static_cast<size_t>(n_cells))
            throw ConfigError(path + ": has " + std::to_string(k.size()) +
                              " densities, grid needs " + std::to_string(n_cells));
        return k;
    }
    throw ConfigError(kf.path() + ": init.kind must be uniform or csv, got '" + kind + "'");
}

inline vtflow::SourceModel build_source(const KeyFile& kf) {
    using namespace vtflow;
    const std::string kind = kf.str_or("source.kind", "none");
    try {
        if (kind == "none") return ExogenousSource{ConstantSource{0.0}};
        if (kind == "constant")
            return ExogenousSource{ConstantSource{kf.num("source.a_veh_km_hr")}};
        if (kind == "step")
            return ExogenousSource{StepSource{kf.num("source.a_up_veh_km_hr"),
                                              kf.num("source.a_down_veh_km_hr"),
                                              kf.num("source.x0_km")}};
        if (kind == "cell_csv") {
            const std::string path = kf.str("source.csv");
            std::ifstream is(path);
            if (!is) throw ConfigError(kf.path() + ": source.csv: cannot open '" + path + "'");
            return ExogenousSource{read_cell_source_csv(is)};
        }
        if (kind == "merge_linear")
            return EndogenousSource(
                MergeFeedback{kf.num("source.a_veh_km2_hr"), kf.num("source.b")});
        if (kind == "simple_linear")
            return EndogenousSource(
                SimpleFeedback{kf.num("source.a_veh_km_hr"), kf.num("source.b")});
    } catch (const std::invalid_argument& e) {
        throw ConfigError(kf.path() + ": source.*: " + e.what());
    } catch (const std::runtime_error& e) {
        throw ConfigError(kf.path() + ": source.csv: " + e.what());
    }
    throw ConfigError(kf.path() + ": source.kind must be one of none, constant, step, "
                      "cell_csv, merge_linear, simple_linear, got '" + kind + "'");
}

/// The comparison horizon and the exact solution both exist only for the
/// linear merge feedback, so commands that need them insist on it.
inline vtflow::MergeExample build_merge_example(const KeyFile& kf) {
    if (kf.str_or("source.kind", "none") != "merge_linear")
        throw ConfigError(kf.path() +
                          ": this command needs source.kind = merge_linear "
                          "(the exact solution is only known for that feedback)");
    try {
        return vtflow::MergeExample(build_fd(kf), kf.num("source.a_veh_km2_hr"),
                                    kf.num("source.b"), kf.num("domain.length_km"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(kf.path() + ": " + e.what());
    }
}

inline std::vector<double> parse_dt_list(const std::string& csv, const std::string& origin) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string s = trim(item);
        if (s.empty()) continue;
        try {
            out.push_back(std::stod(s));
        } catch (const std::exception&) {
            throw ConfigError(origin + ": bad dt value '" + s + "'");
        }
    }
    if (out.empty()) throw ConfigError(origin + ": empty dt list");
    return out;
}

}  // namespace vtcli
