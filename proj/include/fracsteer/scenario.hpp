#pragma once

// Built-in scenarios. "heat5" is the 1-D heat operator on (0,pi) with
// Dirichlet ends (eigenvalues -n^2, sine basis), weight h(e) = e^{2e}
// (varpi = 1/2), delay-kernel coefficients
//   F(t, z_t) = f_scale int e^{4 theta} z_t(theta) dtheta   (per mode)
//   G(t, z_t) = g_scale diag(int e^{6 theta} z_t(theta) dtheta)
//   K_i(t, z_t) = k_scale int e^{theta} z_t(theta) dtheta
// and constant diagonal sigma. "heat5-linear" zeroes F, G, sigma and the
// impulses (the steering test bed); "zero" also zeroes the target.

#include <string>

#include "fracsteer/controllability.hpp"
#include "fracsteer/mild_solver.hpp"

namespace fracsteer::scenario {

struct ScenarioParams {
    std::string name = "heat5";
    double q = 0.75;
    double hurst = 0.75;
    int modes = 8;
    std::vector<double> partition_points = {1, 2, 3, 4, 5};  // t_1 s_1 ... T
    double dt = 1.0 / 256.0;
    double f_scale = 1.0, g_scale = 1.0, k_scale = 1.0;
    double sigma_scale = 0.05;
    double history_scale = 1.0;
    double target_scale = 1.0;
    double actuator_scale = 1.0;
    double tau_max = 10.0;
    double offset_step = 1.0 / 64.0;
    double tail_tol = 1e-9;
    double picard_tol = 1e-10;
    int picard_max_iter = 60;
    bool volterra_fbm = false;
    bool final_only = false;
};

struct BuiltScenario {
    solver::ProblemSpec problem;
    control::Actuator actuator;
    control::SteeringTarget target;
};

bool known_scenario(const std::string& name);
BuiltScenario build(const ScenarioParams& params);

}  // namespace fracsteer::scenario
