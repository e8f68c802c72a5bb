#include "rowperm/config.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "rowperm/conformal.hpp"
#include "rowperm/corrector.hpp"
#include "rowperm/errors.hpp"
#include "rowperm/euler_sim.hpp"
#include "rowperm/experiments.hpp"
#include "rowperm/fields.hpp"
#include "rowperm/geometry.hpp"
#include "rowperm/util.hpp"

namespace rowperm {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

const std::set<std::string> kKnownKeys = {"subcommand", "shape", "field", "sweep", "out",
                                          "corner",     "eps",   "deps",  "t_end", "dt",
                                          "tol",        "threads"};

} // namespace

ConfigResult parse_config(const std::string& text) {
    ConfigResult result;
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            result.errors.push_back("line " + std::to_string(lineno) + ": expected key = value");
            continue;
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (!kKnownKeys.count(key)) {
            result.errors.push_back("UnknownKey: " + key);
            continue;
        }
        if (kv.count(key)) result.errors.push_back("duplicate key: " + key);
        kv[key] = value;
    }

    RunConfig cfg;
    auto need = [&](const char* key) {
        if (!kv.count(key)) {
            result.errors.push_back(std::string("MissingRequired: ") + key);
            return false;
        }
        return true;
    };
    auto get_positive = [&](const char* key, double& out, bool required) {
        if (!kv.count(key)) {
            if (required) result.errors.push_back(std::string("MissingRequired: ") + key);
            return;
        }
        try {
            std::size_t used = 0;
            const double v = std::stod(kv[key], &used);
            if (used != kv[key].size() || !std::isfinite(v) || v <= 0) {
                result.errors.push_back(std::string("TypeMismatch: ") + key +
                                        " must be a positive real, got '" + kv[key] + "'");
                return;
            }
            out = v;
        } catch (const std::exception&) {
            result.errors.push_back(std::string("TypeMismatch: ") + key + " must be a real, got '" +
                                    kv[key] + "'");
        }
    };

    if (need("subcommand")) {
        cfg.subcommand = kv["subcommand"];
        const std::set<std::string> subs = {"conformal-probe", "cell", "rates", "simulate"};
        if (!subs.count(cfg.subcommand))
            result.errors.push_back("TypeMismatch: unknown subcommand '" + cfg.subcommand + "'");
    }
    if (need("shape")) cfg.shape = kv["shape"];
    if (need("out")) cfg.out = kv["out"];

    const std::string& sub = cfg.subcommand;
    if (sub == "conformal-probe") {
        if (kv.count("corner")) {
            try {
                cfg.corner = std::stoi(kv["corner"]);
                if (cfg.corner < 0)
                    result.errors.push_back("TypeMismatch: corner must be a non-negative index");
            } catch (const std::exception&) {
                result.errors.push_back("TypeMismatch: corner must be an integer, got '" +
                                        kv["corner"] + "'");
            }
        } else {
            result.errors.push_back("MissingRequired: corner");
        }
    }
    if (sub == "cell" || sub == "simulate") {
        get_positive("eps", cfg.eps, true);
        get_positive("deps", cfg.deps, true);
    } else {
        get_positive("eps", cfg.eps, false);
        get_positive("deps", cfg.deps, false);
    }
    if (sub == "rates") {
        if (need("field")) cfg.field = kv["field"];
        if (need("sweep")) cfg.sweep = kv["sweep"];
    }
    if (sub == "simulate") {
        if (need("field")) cfg.field = kv["field"];
        get_positive("t_end", cfg.t_end, true);
        get_positive("dt", cfg.dt, true);
    }
    if (kv.count("field")) cfg.field = kv["field"];
    if (kv.count("tol")) get_positive("tol", cfg.tol, false);
    if (kv.count("threads")) {
        try {
            cfg.threads = std::stoi(kv["threads"]);
            if (cfg.threads < 1) result.errors.push_back("TypeMismatch: threads must be >= 1");
        } catch (const std::exception&) {
            result.errors.push_back("TypeMismatch: threads must be an integer");
        }
    }
    if (cfg.field.empty() && (sub == "cell" || sub == "simulate"))
        cfg.field = "bump:0.5,0.8,0.2"; // default vorticity catalog entry

    if (result.errors.empty()) result.config = cfg;
    return result;
}

std::string render_config(const RunConfig& c) {
    std::ostringstream out;
    out << "subcommand = " << c.subcommand << '\n';
    out << "shape = " << c.shape << '\n';
    if (!c.field.empty()) out << "field = " << c.field << '\n';
    if (!c.sweep.empty()) out << "sweep = " << c.sweep << '\n';
    out << "out = " << c.out << '\n';
    if (c.subcommand == "conformal-probe") out << "corner = " << c.corner << '\n';
    if (c.eps > 0) out << "eps = " << format_double(c.eps) << '\n';
    if (c.deps > 0) out << "deps = " << format_double(c.deps) << '\n';
    if (c.subcommand == "simulate") {
        out << "t_end = " << format_double(c.t_end) << '\n';
        out << "dt = " << format_double(c.dt) << '\n';
    }
    out << "tol = " << format_double(c.tol) << '\n';
    out << "threads = " << c.threads << '\n';
    return out.str();
}

namespace {

struct StageClock {
    std::vector<std::pair<std::string, double>> stages;
    std::chrono::steady_clock::time_point mark = std::chrono::steady_clock::now();

    void lap(const std::string& name) {
        const auto now = std::chrono::steady_clock::now();
        stages.emplace_back(name, std::chrono::duration<double, std::milli>(now - mark).count());
        mark = now;
    }
};

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("Io", "cannot open output file: " + path);
    out << content;
}

void write_manifest(const RunConfig& cfg, const StageClock& clock, const std::string& status) {
    std::filesystem::path out_path(cfg.out.empty() ? "run.out" : cfg.out);
    std::filesystem::path dir = out_path.parent_path();
    const std::filesystem::path manifest = dir.empty() ? "manifest.txt" : dir / "manifest.txt";
    std::ostringstream body;
    body << "# " << kVersion << "\n";
    body << render_config(cfg);
    body << "status = " << status << '\n';
    for (const auto& [name, ms] : clock.stages)
        body << "wall_ms." << name << " = " << format_double(ms) << '\n';
    std::ofstream out(manifest);
    if (out) out << body.str();
}

std::vector<SweepPoint> load_sweep(const std::string& sweep) {
    if (sweep == "default") return default_sweep();
    std::ifstream in(sweep);
    if (!in) throw InvalidArgument("cannot open sweep file: " + sweep);
    std::vector<SweepPoint> pts;
    double e, d;
    while (in >> e >> d) pts.push_back({e, d});
    if (pts.empty()) throw InvalidArgument("sweep file has no 'eps d_eps' rows: " + sweep);
    return pts;
}

int run_impl(const RunConfig& cfg, StageClock& clock) {
    set_thread_count(cfg.threads);
    auto shape = shape_by_name(cfg.shape);
    clock.lap("shape");

    if (cfg.subcommand == "conformal-probe") {
        const ConformalMap map = map_for_shape(*shape);
        clock.lap("map");
        write_file(cfg.out, corner_probe_csv(map, *shape, cfg.corner));
        clock.lap("probe");
        return 0;
    }

    if (cfg.subcommand == "cell") {
        const ConformalMap map = map_for_shape(*shape);
        clock.lap("map");
        const VorticityField f = field_by_name(cfg.field);
        PorousLattice lattice = build_lattice(shape, cfg.eps, cfg.deps);
        if (lattice.n_holes() > kMaxHoles)
            throw QuadratureBudgetExceeded("N_eps exceeds the desk-scale cap of 64 holes");
        QuadratureSpec spec;
        spec.abs_tol = cfg.tol;
        CorrectorAssembly assembly(lattice, map, f, spec);
        clock.lap("assembly");
        const auto rows = cell_table(assembly, spec);
        write_file(cfg.out, cell_csv(rows));
        clock.lap("cell-table");
        return 0;
    }

    if (cfg.subcommand == "rates") {
        const VorticityField f = field_by_name(cfg.field);
        const auto points = load_sweep(cfg.sweep);
        QuadratureSpec spec;
        spec.abs_tol = cfg.tol;
        clock.lap("setup");
        std::vector<RateRecord> records;
        for (const SweepPoint& pt : points) {
            const double eps_arr[] = {pt.epsilon};
            auto recs = rate_sweep(shape, f, eps_arr, [&](double) { return pt.d_eps; }, spec);
            records.push_back(recs.front());
        }
        write_file(cfg.out, rates_csv(records));
        clock.lap("sweep");
        return 0;
    }

    if (cfg.subcommand == "simulate") {
        const ConformalMap map = map_for_shape(*shape);
        const VorticityField f = field_by_name(cfg.field);
        PorousLattice lattice = build_lattice(shape, cfg.eps, cfg.deps);
        if (lattice.n_holes() > kMaxHoles)
            throw QuadratureBudgetExceeded("N_eps exceeds the desk-scale cap of 64 holes");
        clock.lap("setup");
        const StabilityReport report = stability_report(f, lattice, map, cfg.t_end, cfg.dt);
        clock.lap("simulate");
        std::ostringstream csv;
        csv << "t,seed_id,x_plane,y_plane,x_perf,y_perf,gap\n";
        for (const TrajectorySample& s : report.series) {
            csv << format_double(s.t) << ',' << s.seed_id << ',' << format_double(s.plane.x) << ','
                << format_double(s.plane.y) << ',' << format_double(s.perforated.x) << ','
                << format_double(s.perforated.y) << ',' << format_double(s.gap) << '\n';
        }
        write_file(cfg.out, csv.str());
        clock.lap("write");
        return 0;
    }
    throw InvalidArgument("unknown subcommand: " + cfg.subcommand);
}

} // namespace

int run(const RunConfig& cfg) {
    StageClock clock;
    try {
        const int status = run_impl(cfg, clock);
        write_manifest(cfg, clock, "ok");
        return status;
    } catch (const Error& e) {
        write_manifest(cfg, clock, std::string("error: ") + e.what());
        std::cerr << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        write_manifest(cfg, clock, std::string("error: ") + e.what());
        std::cerr << e.what() << '\n';
        return 1;
    }
}

} // namespace rowperm
