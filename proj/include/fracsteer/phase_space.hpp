#pragma once

// Weighted infinite-delay phase space: history buffers on a uniform offset
// grid over [-tau_max, 0], segment extraction z_t(theta) = z(t+theta), the
// weighted-sup norm
//   ||phi|| = int h(e) sup_{e<=theta<=0} |phi(theta)| de,
// and the segment-norm inequality ||z_t|| <= varpi sup_{[0,T]} |z| + ||z_0||.

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "fracsteer/numerics.hpp"

namespace fracsteer::phase {

struct WeightFunction {
    std::function<double(double)> h;  // positive on (-inf, 0]
    double varpi = 0.0;               // certified integral of h
    double tau_max = 0.0;             // truncation horizon
    double tail_mass = 0.0;           // bound on the mass beyond -tau_max
};

// Adaptive quadrature of int_{-tau}^0 h with tau doubled until the last
// doubling contributes less than tail_tol/2 at a certified geometric decay.
// Throws std::domain_error if the tail has not resolved by tau = 200.
double varpi(const std::function<double(double)>& h, double tail_tol,
             double* tau_end = nullptr, double* tail_mass = nullptr);

// tau_override > 0 truncates the stored horizon (tail_mass re-derived there);
// 0 keeps the horizon found by varpi().
WeightFunction make_weight(std::function<double(double)> h, double tail_tol = 1e-9,
                           double tau_override = 0.0);

struct HistoryBuffer {
    // offsets[0] = 0 > offsets[1] > ... >= -tau_max, uniform spacing
    std::vector<double> offsets;
    std::vector<Eigen::VectorXd> values;

    int dim() const { return values.empty() ? 0 : static_cast<int>(values[0].size()); }
    double tau_max() const { return offsets.empty() ? 0.0 : -offsets.back(); }
    // linear interpolation; clamped to the oldest stored value below -tau_max
    Eigen::VectorXd at(double theta) const;
    void validate() const;

    static HistoryBuffer sampled(const std::function<Eigen::VectorXd(double)>& phi,
                                 double tau_max, double step);
    // initial data must vanish at theta = 0
    static HistoryBuffer initial(const std::function<Eigen::VectorXd(double)>& phi,
                                 double tau_max, double step);
    static HistoryBuffer zero(int dim, double tau_max, double step);
};

// Running-max sweep from theta = 0 leftward, then trapezoid against h.
double dh_norm(const HistoryBuffer& hist, const WeightFunction& w);

// A path z on (-inf, T]: initial history plus computed grid values.
struct PathView {
    const HistoryBuffer* history = nullptr;
    const std::vector<double>* times = nullptr;  // increasing, starts at 0
    const Eigen::MatrixXd* states = nullptr;     // dim x times->size()

    double horizon() const { return times && !times->empty() ? times->back() : 0.0; }
    Eigen::VectorXd value(double s) const;  // s <= 0 -> history, else interpolated
};

// z_t on the standard offset grid; t must lie in [0, horizon].
HistoryBuffer segment(const PathView& path, double t, double tau_max, double step);

struct LemmaCheck {
    double lhs = 0.0;    // ||z_t||
    double rhs = 0.0;    // varpi_grid * sup_{[0,T]} |z| + ||z_0||
    bool holds = false;  // lhs <= rhs + 1e-9
};

// Both sides share the trapezoid mass of h on the offset grid, which keeps the
// discrete inequality exact up to roundoff.
LemmaCheck lemma_lm1_check(const PathView& path, double t, const WeightFunction& w, double step);

}  // namespace fracsteer::phase
