#pragma once

// Line-oriented run configuration: `key = value` entries under `[section]`
// headers, `#` comments. Unknown keys, duplicates, type mismatches, and
// domain violations are reported with line numbers. serialize() emits the
// canonical form, which reparses to an equal RunConfig.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fracsteer::cfg {

struct ConfigError : std::runtime_error {
    ConfigError(const std::string& msg, int line_no) : std::runtime_error(msg), line(line_no) {}
    int line = 0;
};

struct RunConfig {
    // [run]
    std::string scenario;  // required: heat5 | heat5-linear | zero
    std::uint64_t seed = 42;
    std::string out_dir = "out";
    int replicates = 100;
    // [model]
    double q = 0.75;
    double hurst = 0.75;
    int modes = 8;
    std::vector<double> partition = {1, 2, 3, 4, 5};
    double dt = 1.0 / 256.0;
    double tau_max = 10.0;
    double offset_step = 1.0 / 64.0;
    double radius = 1.0;  // ball radius for the growth constants
    // [scenario]
    double f_scale = 1.0, g_scale = 1.0, k_scale = 1.0;
    double sigma_scale = 0.05;
    double history_scale = 1.0;
    double target_scale = 1.0;
    double actuator_scale = 1.0;
    bool final_only = false;
    // [noise]
    std::string fbm_generator = "cholesky";  // cholesky | volterra
    // [sweep]
    std::vector<double> lambdas = {1e-1, 1e-2, 1e-3, 1e-4, 1e-5};
    // [tolerances]
    double picard_tol = 1e-10;
    int picard_max_iter = 60;
    double outer_tol = 1e-8;
    int outer_max_iter = 10;
    double tail_tol = 1e-9;

    bool operator==(const RunConfig&) const = default;
};

RunConfig parse_config(const std::string& text);
std::string serialize_config(const RunConfig& config);

}  // namespace fracsteer::cfg
