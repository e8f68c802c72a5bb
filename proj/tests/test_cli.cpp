#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "rowperm/config.hpp"

using namespace rowperm;

namespace {
std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}
} // namespace

TEST_CASE("parse_config accepts a full rates config") {
    const auto res = parse_config(
        "subcommand = rates\nshape = disk\nfield = bump:0.5,0.8,0.2\n"
        "sweep = default\nout = rates.csv\neps = 0.1\ndeps = 0.01\n");
    REQUIRE(res.ok());
    CHECK(res.config->shape == "disk");
    CHECK(res.config->eps == 0.1);
    CHECK(res.config->threads == 1);
}

TEST_CASE("parse_config reports the failing key for bad values") {
    const auto res = parse_config(
        "subcommand = rates\nshape = disk\nfield = bump:0.5,0.8,0.2\n"
        "sweep = default\nout = rates.csv\neps = -1\n");
    CHECK(!res.ok());
    bool mentions_eps = false;
    for (const auto& e : res.errors)
        if (e.find("eps") != std::string::npos && e.find("TypeMismatch") != std::string::npos)
            mentions_eps = true;
    CHECK(mentions_eps);
}

TEST_CASE("empty input lists every required key") {
    const auto res = parse_config("");
    CHECK(!res.ok());
    int missing = 0;
    for (const auto& e : res.errors)
        if (e.rfind("MissingRequired", 0) == 0) ++missing;
    CHECK(missing >= 3); // subcommand, shape, out at minimum
}

TEST_CASE("unknown keys are rejected and all errors are collected") {
    const auto res = parse_config(
        "subcommand = simulate\nshape = disk\nout = x.csv\n"
        "warp_factor = 9\neps = oops\ndeps = 0.01\nt_end = 1\ndt = 0.01\n");
    CHECK(!res.ok());
    bool unknown = false, mismatch = false;
    for (const auto& e : res.errors) {
        if (e.find("UnknownKey: warp_factor") != std::string::npos) unknown = true;
        if (e.find("TypeMismatch: eps") != std::string::npos) mismatch = true;
    }
    CHECK(unknown);
    CHECK(mismatch);
}

TEST_CASE("render/parse round trip") {
    RunConfig cfg;
    cfg.subcommand = "cell";
    cfg.shape = "square";
    cfg.field = "bump:0.5,0.8,0.2";
    cfg.out = "cells.csv";
    cfg.eps = 0.1;
    cfg.deps = 0.05;
    const auto res = parse_config(render_config(cfg));
    REQUIRE(res.ok());
    CHECK(res.config->subcommand == "cell");
    CHECK(res.config->deps == 0.05);
}

TEST_CASE("run writes the probe csv and the manifest") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "rowperm_cli_test";
    fs::create_directories(dir);

    RunConfig cfg;
    cfg.subcommand = "conformal-probe";
    cfg.shape = "square";
    cfg.corner = 0;
    cfg.out = (dir / "probe.csv").string();
    CHECK(run(cfg) == 0);

    const std::string csv = slurp(cfg.out);
    CHECK(csv.rfind("r,abs_dT,predicted,fitted_running\n", 0) == 0);
    // monotone r column
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);
    double prev = 0.0;
    int rows = 0;
    while (std::getline(lines, line)) {
        const double r = std::stod(line.substr(0, line.find(',')));
        CHECK(r > prev);
        prev = r;
        ++rows;
    }
    CHECK(rows >= 20);

    const std::string manifest = slurp((dir / "manifest.txt").string());
    CHECK(manifest.find("status = ok") != std::string::npos);
    CHECK(manifest.find("subcommand = conformal-probe") != std::string::npos);

    // identical run, identical bytes
    const std::string first = csv;
    CHECK(run(cfg) == 0);
    CHECK(slurp(cfg.out) == first);

    fs::remove_all(dir);
}

TEST_CASE("failed runs still write a manifest and exit nonzero") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "rowperm_cli_fail";
    fs::create_directories(dir);

    RunConfig cfg;
    cfg.subcommand = "simulate";
    cfg.shape = "disk";
    cfg.field = "bump:0.5,0.35,0.15"; // support closer than the guard
    cfg.eps = 0.2;
    cfg.deps = 0.04;
    cfg.t_end = 0.05;
    cfg.dt = 0.01;
    cfg.out = (dir / "traj.csv").string();
    CHECK(run(cfg) != 0);

    const std::string manifest = slurp((dir / "manifest.txt").string());
    CHECK(manifest.find("status = error") != std::string::npos);
    CHECK(manifest.find("0.3") != std::string::npos);

    fs::remove_all(dir);
}
