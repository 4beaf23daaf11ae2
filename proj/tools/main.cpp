#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <thread>

#include "app_config.hpp"
#include "vtflow/oracle.hpp"

namespace fs = std::filesystem;
using namespace vtflow;
using vtcli::ConfigError;
using vtcli::KeyFile;

namespace {

fs::path resolve_out_dir(const std::string& flag) {
    std::string dir = flag;
    if (dir.empty())
        if (const char* env = std::getenv("VTFLOW_OUT_DIR")) dir = env;
    if (dir.empty()) dir = ".";
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
    return p;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream os(p);
    if (!os) throw ConfigError("cannot write '" + p.string() + "'");
    return os;
}

const char* rule_name(FluxRule r) { return r == FluxRule::CT ? "ct" : "erp"; }

std::vector<FluxRule> rules_of(vtcli::RuleChoice c) {
    switch (c) {
        case vtcli::RuleChoice::Ct: return {FluxRule::CT};
        case vtcli::RuleChoice::Erp: return {FluxRule::ERP};
        default: return {FluxRule::CT, FluxRule::ERP};
    }
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

int cmd_simulate(const std::string& cfg_path, const std::string& rule_flag,
                 const std::string& out_flag) {
    const KeyFile kf = KeyFile::parse(cfg_path);
    const fs::path out = resolve_out_dir(out_flag);
    const TriangularFD fd = vtcli::build_fd(kf);
    const double dt_hr = kf.num("grid.dt_s") / 3600.0;
    const GridSpec g = make_grid(fd, dt_hr, kf.num("domain.length_km"));
    const double horizon = kf.num("domain.horizon_hr");
    const std::vector<double> k0 = vtcli::build_initial_density(kf, g.n_cells);
    const SourceModel src = vtcli::build_source(kf);
    const BoundaryMode bc = vtcli::build_boundary(kf);
    const std::string base = kf.str_or("output.field_csv", "field");

    nlohmann::json meta;
    meta["command"] = "simulate";
    meta["config"] = cfg_path;
    meta["fd"] = {{"u_kmh", fd.u()}, {"w_kmh", fd.w()}, {"kappa_veh_km", fd.kappa()}};
    meta["grid"] = {{"dt_s", kf.num("grid.dt_s")},
                    {"dx_km", g.dx},
                    {"n_cells", g.n_cells},
                    {"length_km", g.length()}};
    meta["horizon_hr"] = horizon;
    meta["boundary"] = kf.str_or("run.boundary", "open");
    meta["runs"] = nlohmann::json::array();

    for (FluxRule rule : rules_of(vtcli::build_rule(kf, rule_flag))) {
        const RunResult r = run(g, fd, k0, src, rule, horizon, bc);
        const fs::path field = out / (base + "_" + rule_name(rule) + ".csv");
        auto os = open_out(field);
        write_run_csv(r, os);
        const double resid = max_abs(r.residuals);
        meta["runs"].push_back({{"rule", rule_name(rule)},
                                {"field_csv", field.filename().string()},
                                {"steps", r.states.size() - 1},
                                {"total_clamped_cells", r.total_clamps},
                                {"max_abs_residual_veh", resid},
                                {"residual_bound_veh", 1e-9 * fd.kappa() * g.length()}});
        std::printf("%s: %zu steps, %d clamped cells, max |residual| = %.3g veh -> %s\n",
                    rule_name(rule), r.states.size() - 1, r.total_clamps, resid,
                    field.string().c_str());
    }

    const fs::path meta_path = out / kf.str_or("output.meta_json", "run_meta.json");
    open_out(meta_path) << meta.dump(2) << "\n";
    std::printf("metadata -> %s\n", meta_path.string().c_str());
    return 0;
}

int cmd_convergence(const std::string& cfg_path, const std::string& dt_flag, bool parallel,
                    const std::string& out_flag) {
    const KeyFile kf = KeyFile::parse(cfg_path);
    const fs::path out = resolve_out_dir(out_flag);
    const MergeExample ex = vtcli::build_merge_example(kf);
    const std::vector<double> dts =
        dt_flag.empty() ? vtcli::parse_dt_list(kf.str("run.dt_list_s"), cfg_path + ": run.dt_list_s")
                        : vtcli::parse_dt_list(dt_flag, "--dt-list");
    std::optional<double> probe;
    if (kf.has("rmse.probe_x_km")) probe = kf.num("rmse.probe_x_km");

    std::vector<ConvergenceRow> rows(dts.size());
    if (parallel) {
        // Each dt is an independent pair of runs; rows land in list order,
        // so the output is byte-identical to the sequential path.
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errs(dts.size());
        for (size_t i = 0; i < dts.size(); ++i)
            pool.emplace_back([&, i] {
                try {
                    rows[i] = convergence_sweep(ex, {&dts[i], 1}, probe).front();
                } catch (...) {
                    errs[i] = std::current_exception();
                }
            });
        for (auto& th : pool) th.join();
        for (auto& e : errs)
            if (e) std::rethrow_exception(e);
    } else {
        rows = convergence_sweep(ex, dts, probe);
    }

    const fs::path csv = out / kf.str_or("output.convergence_csv", "convergence.csv");
    auto os = open_out(csv);
    write_convergence_csv(rows, os);

    std::printf("comparison horizon t* = %.9g h (%.6g s)%s\n", merge_regime_end(ex),
                merge_regime_end(ex) * 3600.0,
                probe ? " at the probe station" : ", full field");
    std::printf("%8s %12s %12s %8s\n", "dt_s", "rmse_ct", "rmse_erp", "ratio");
    for (const ConvergenceRow& r : rows)
        std::printf("%8g %12.6g %12.6g %8.4g\n", r.dt_s, r.rmse_ct, r.rmse_erp, r.ratio);
    std::printf("table -> %s\n", csv.string().c_str());
    return 0;
}

int cmd_erp(const std::string& cfg_path, const std::string& out_flag) {
    const KeyFile kf = KeyFile::parse(cfg_path);
    const fs::path out = resolve_out_dir(out_flag);
    const TriangularFD fd = vtcli::build_fd(kf);
    const RiemannProblem p(fd, kf.num("erp.k_up_veh_km"), kf.num("erp.k_down_veh_km"),
                           kf.num("erp.a_up_veh_km_hr"), kf.num("erp.a_down_veh_km_hr"),
                           kf.num_or("erp.x0_km", 0.0), kf.num("erp.t_hr"));
    const RiemannSolution sol = solve(p);

    const fs::path csv = out / kf.str_or("output.candidates_csv", "erp_candidates.csv");
    auto os = open_out(csv);
    os << "label, y_km, f_veh, valid\n";
    char buf[128];
    for (const RiemannCandidateRow& row : sol.candidates) {
        std::snprintf(buf, sizeof buf, "%s, %.12g, %.12g, %d\n", row.label.c_str(), row.y,
                      row.f, row.valid ? 1 : 0);
        os << buf;
    }

    std::printf("N(t, x0)   = %.12g veh\n", sol.n);
    std::printf("q_raw      = %.12g veh/h\n", sol.q_raw);
    std::printf("q          = %.12g veh/h (clamped: %s)\n", sol.q, sol.clamped ? "yes" : "no");
    std::printf("argmin     = %s\n", sol.argmin.c_str());
    std::printf("candidates -> %s\n", csv.string().c_str());
    return 0;
}

int cmd_varnet(const std::string& cfg_path, const std::string& out_flag) {
    const KeyFile kf = KeyFile::parse(cfg_path);
    const fs::path out = resolve_out_dir(out_flag);
    const TriangularFD fd = vtcli::build_fd(kf);
    const SourceModel src = vtcli::build_source(kf);
    const ExogenousSource* exo = std::get_if<ExogenousSource>(&src);
    if (!exo)
        throw ConfigError(cfg_path +
                          ": varnet needs an exogenous source "
                          "(source.kind = none, constant, step or cell_csv)");
    const VariationalNet net = build_net(fd, kf.num("domain.horizon_hr"),
                                         kf.num("domain.length_km"),
                                         kf.num("grid.dt_s") / 3600.0, *exo);
    const double k0 = kf.num_or("varnet.k0_veh_km", 0.0);
    std::vector<double> g0(static_cast<size_t>(net.columns()));
    for (int j = 0; j < net.columns(); ++j) g0[static_cast<size_t>(j)] = -k0 * net.node_x(j);
    const auto surface = solve_all(net, g0);

    const fs::path csv = out / kf.str_or("output.surface_csv", "n_surface.csv");
    auto os = open_out(csv);
    write_n_surface_csv(net, surface, os);
    std::printf("lattice: %d levels x %d columns (pitch %.6g km), %zu links\n", net.levels(),
                net.columns(), net.pitch(), net.n_links());
    std::printf("surface -> %s\n", csv.string().c_str());
    return 0;
}

int cmd_exact(const std::string& cfg_path, const std::string& out_flag) {
    const KeyFile kf = KeyFile::parse(cfg_path);
    const fs::path out = resolve_out_dir(out_flag);
    const MergeExample ex = vtcli::build_merge_example(kf);
    const double dt_hr = kf.num("grid.dt_s") / 3600.0;
    const GridSpec g = make_grid(ex.fd(), dt_hr, kf.num("domain.length_km"));
    const double horizon = kf.num("domain.horizon_hr");
    const auto m = static_cast<long long>(std::llround(horizon / dt_hr));
    if (m < 0 || std::abs(m * dt_hr - horizon) > 1e-9 * std::max(1.0, horizon))
        throw ConfigError(cfg_path + ": domain.horizon_hr must be a whole number of steps");

    const fs::path csv = out / kf.str_or("output.exact_csv", "exact_field.csv");
    auto os = open_out(csv);
    os << "t_hr, x_km, k_veh_per_km\n";
    char buf[96];
    for (long long j = 0; j <= m; ++j) {
        const double t = static_cast<double>(j) * dt_hr;
        for (int i = 0; i < g.n_cells; ++i) {
            const double xc = g.cell_center(i);
            std::snprintf(buf, sizeof buf, "%.12g, %.12g, %.12g\n", t, xc,
                          exact_merge_density(ex, t, xc).k);
            os << buf;
        }
    }

    const double t_star = merge_regime_end(ex);
    std::printf("regime end t* = %.9g h (%.6g s)\n", t_star, t_star * 3600.0);
    std::printf("exact field -> %s\n", csv.string().c_str());
    return 0;
}

struct CheckResult {
    std::string name;
    int cases = 0;
    double max_dev = 0.0;
    double budget = 0.0;
    bool pass = true;
    std::string worst;
};

int cmd_verify(unsigned long long seed, int n_instances) {
    if (n_instances < 1) throw ConfigError("verify needs at least one instance");
    const TriangularFD fds[] = {TriangularFD(100.0, 100.0, 150.0),
                                TriangularFD(120.0, 60.0, 180.0)};
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> ad(-2000.0, 2000.0);
    std::uniform_real_distribution<double> td(0.001, 0.05);
    std::vector<CheckResult> checks;
    char buf[256];

    {
        // Exact interface solve against the brute-force path search.
        CheckResult c{"erp_vs_oracle", n_instances, 0.0, 0.0, true, ""};
        const LatticeDPConfig cfg{200, 9, 8};
        for (int i = 0; i < n_instances; ++i) {
            const TriangularFD& fd = fds[i % 2];
            const RiemannProblem p(fd, unit(rng) * fd.kappa(), unit(rng) * fd.kappa(),
                                   ad(rng), ad(rng), 0.0, td(rng));
            const OracleResult o = brute_force_N(p, cfg);
            const double dev = std::abs(solve(p).n - o.n);
            const double budget = o.tolerance + 1e-9 * std::max(1.0, std::abs(o.n));
            c.max_dev = std::max(c.max_dev, dev);
            c.budget = std::max(c.budget, budget);
            if (dev > budget) {
                c.pass = false;
                std::snprintf(buf, sizeof buf,
                              "kU=%.6g kD=%.6g aU=%.6g aD=%.6g t=%.6g u=%g w=%g kappa=%g",
                              p.k_up(), p.k_down(), p.a_up(), p.a_down(), p.t(), fd.u(),
                              fd.w(), fd.kappa());
                c.worst = buf;
            }
        }
        checks.push_back(std::move(c));
    }

    {
        // Source-free interface flow must reduce to the one-step flux.
        CheckResult c{"erp_reduces_to_ct", n_instances, 0.0, 0.0, true, ""};
        for (int i = 0; i < n_instances; ++i) {
            const TriangularFD& fd = fds[i % 2];
            const double ku = unit(rng) * fd.kappa(), kd = unit(rng) * fd.kappa();
            const double dt = (1.0 + 39.0 * unit(rng)) / 3600.0;
            const double dev = std::abs(erp_flux(fd, ku, kd, 0.0, 0.0, dt) - ct_flux(fd, ku, kd));
            const double budget = 1e-9 * fd.capacity();
            c.max_dev = std::max(c.max_dev, dev);
            c.budget = std::max(c.budget, budget);
            if (dev > budget) {
                c.pass = false;
                std::snprintf(buf, sizeof buf, "kU=%.6g kD=%.6g dt=%.6g u=%g w=%g kappa=%g", ku,
                              kd, dt * 3600.0, fd.u(), fd.w(), fd.kappa());
                c.worst = buf;
            }
        }
        checks.push_back(std::move(c));
    }

    {
        // Lattice solver against the closed-form count on aligned uniform
        // constant-inflow instances (capacity crossing on a whole step).
        CheckResult c{"varnet_vs_closed_form", n_instances, 0.0, 0.0, true, ""};
        const double dt = 0.1;
        for (int i = 0; i < n_instances; ++i) {
            const TriangularFD& fd = fds[i % 2];
            const double length = fd.u() * dt * 8.0;
            const int level = 4;
            const int ix = i % 2 == 0 ? 4 : 8;
            double k0 = unit(rng) * fd.kappa();
            const double gap = fd.critical_density() - k0;
            double a = 0.0;
            if (i % 5 != 0 && std::abs(gap) > 1.0) a = gap / ((1 + i % 3) * dt);
            const ExogenousSource src{ConstantSource{a}};
            const VariationalNet net = build_net(fd, dt * (level + 1), length, dt, src);
            std::vector<double> g0(static_cast<size_t>(net.columns()));
            for (int j = 0; j < net.columns(); ++j)
                g0[static_cast<size_t>(j)] = -k0 * net.node_x(j);
            const double got = solve_N(net, g0, NodeId{level, ix});
            const double expect = n_value(ConstantIVP(fd, k0, a), net.node_time(level),
                                          net.node_x(ix));
            const double dev = std::abs(got - expect) / std::max(1.0, std::abs(expect));
            c.max_dev = std::max(c.max_dev, dev);
            c.budget = 1e-9;
            if (dev > c.budget) {
                c.pass = false;
                std::snprintf(buf, sizeof buf, "k0=%.6g a=%.6g level=%d ix=%d u=%g w=%g kappa=%g",
                              k0, a, level, ix, fd.u(), fd.w(), fd.kappa());
                c.worst = buf;
            }
        }
        checks.push_back(std::move(c));
    }

    std::printf("seed %llu, %d instances per check\n", seed, n_instances);
    std::printf("%-24s %7s %15s %15s %7s\n", "check", "cases", "max deviation", "budget",
                "result");
    bool all_pass = true;
    for (const CheckResult& c : checks) {
        std::printf("%-24s %7d %15.6g %15.6g %7s\n", c.name.c_str(), c.cases, c.max_dev,
                    c.budget, c.pass ? "PASS" : "FAIL");
        if (!c.pass) {
            std::printf("  worst instance: %s\n", c.worst.c_str());
            all_pass = false;
        }
    }
    return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kinematic wave solver with continuum sources"};
    app.require_subcommand(1);

    std::string cfg_path, out_flag, rule_flag, dt_flag;
    bool parallel = false;
    unsigned long long seed = 1234;
    int n_instances = 50;

    auto add_config = [&](CLI::App* cmd) {
        cmd->add_option("--config", cfg_path, "experiment config file")->required();
        cmd->add_option("--out", out_flag, "output directory (default $VTFLOW_OUT_DIR or .)");
    };

    CLI::App* sim = app.add_subcommand("simulate", "run the grid solver, write field CSVs");
    add_config(sim);
    sim->add_option("--rule", rule_flag, "override run.rule: ct, erp or both");

    CLI::App* conv = app.add_subcommand("convergence", "dt sweep against the exact density");
    add_config(conv);
    conv->add_option("--dt-list", dt_flag, "comma-separated step sizes in seconds");
    conv->add_flag("--parallel", parallel, "run the sweep entries in parallel");

    CLI::App* erp = app.add_subcommand("erp", "solve one interface problem exactly");
    add_config(erp);

    CLI::App* vnet = app.add_subcommand("varnet", "solve counts on the variational lattice");
    add_config(vnet);

    CLI::App* exact = app.add_subcommand("exact", "sample the exact merge density field");
    add_config(exact);

    CLI::App* verify = app.add_subcommand("verify", "randomized cross-checks, exit 1 on failure");
    verify->add_option("--seed", seed, "random seed");
    verify->add_option("--instances", n_instances, "instances per check");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(cfg_path, rule_flag, out_flag);
        if (conv->parsed()) return cmd_convergence(cfg_path, dt_flag, parallel, out_flag);
        if (erp->parsed()) return cmd_erp(cfg_path, out_flag);
        if (vnet->parsed()) return cmd_varnet(cfg_path, out_flag);
        if (exact->parsed()) return cmd_exact(cfg_path, out_flag);
        if (verify->parsed()) return cmd_verify(seed, n_instances);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
