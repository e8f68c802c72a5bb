#pragma once

#include <optional>
#include <string>
#include <vector>

namespace rowperm {

inline constexpr const char* kVersion = "rowperm 0.1.0";

/// Validated run description for one CLI subcommand.
struct RunConfig {
    std::string subcommand; // conformal-probe | cell | rates | simulate
    std::string shape;
    std::string field;
    std::string sweep; // "default" or a path of "eps d_eps" lines
    std::string out;
    int corner = 0;
    double eps = 0.0;
    double deps = 0.0;
    double t_end = 1.0;
    double dt = 0.01;
    double tol = 1e-6;
    int threads = 1;
};

struct ConfigResult {
    std::optional<RunConfig> config;
    std::vector<std::string> errors; // every problem found, not just the first

    bool ok() const { return config.has_value(); }
};

/// Parses line-oriented `key = value` text. Unknown keys, type mismatches
/// and missing required keys are all collected.
ConfigResult parse_config(const std::string& text);

/// Renders a config back to the canonical key = value text (manifest echo).
std::string render_config(const RunConfig& config);

/// Executes the run: writes the declared CSV artifacts plus manifest.txt
/// (next to the output), even when the run fails. Returns the exit status.
int run(const RunConfig& config);

} // namespace rowperm
