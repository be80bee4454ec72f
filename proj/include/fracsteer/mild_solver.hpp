#pragma once

// Time-stepping of the mild solution on the truncated eigenbasis by Picard
// iteration per flow interval (s_i, t_{i+1}]:
//
//   z(t) = T_q(t-s_i) K_i(s_i, z_{s_i})
//        + int S_q(t-e) F(e, z_e) de
//        + int S_q(t-e) G(e, z_e) dW(e)
//        + int S_q(t-e) sigma(e) dB^H(e),
//
// with the state pinned to K_i(t, z_t) on impulse intervals (t_i, s_i], plus
// the theorem-constant ledger. The weakly singular convolutions use product
// integration: the (t-e)^{q-1} factor integrated exactly per cell, the
// Mittag-Leffler factor frozen at cell midpoints, piecewise-linear drift
// samples, and left-point sums for the stochastic terms.

#include <Eigen/Dense>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "fracsteer/mittag_leffler.hpp"
#include "fracsteer/noise.hpp"
#include "fracsteer/phase_space.hpp"

namespace fracsteer::solver {

struct TimePartition {
    // interleaved 0 = t_0 = s_0 < t_1 < s_1 < ... < t_m < s_m < t_{m+1} = T
    std::vector<double> t_points;  // t_1 .. t_{m+1}
    std::vector<double> s_points;  // s_1 .. s_m
    double dt = 0.0;               // uniform micro-step

    // points = {t_1, s_1, ..., t_m, s_m, T} (odd count)
    static TimePartition from_points(const std::vector<double>& points, double dt);

    int impulse_count() const { return static_cast<int>(s_points.size()); }
    int flow_count() const { return static_cast<int>(t_points.size()); }
    double horizon() const { return t_points.back(); }
    double flow_start(int i) const { return i == 0 ? 0.0 : s_points[i - 1]; }
    double flow_end(int i) const { return t_points[i]; }
    void validate() const;
};

class SolveWorkspace;

// Evaluation view of the path segment z_t handed to the coefficient maps.
// value() interpolates; exp_kernel_integral computes
//   int_{-tau_max}^0 e^{rate * theta} z(t + theta) dtheta   (rate >= 0)
// with committed-prefix acceleration, trapezoidal on the underlying grids.
class SegmentContext {
public:
    double t() const { return t_; }
    int dim() const;
    Eigen::VectorXd value(double theta) const;
    Eigen::VectorXd exp_kernel_integral(double rate) const;
    phase::HistoryBuffer materialize() const;

private:
    friend class SolveWorkspace;
    SegmentContext(const SolveWorkspace* ws, double t) : ws_(ws), t_(t) {}
    const SolveWorkspace* ws_;
    double t_;
};

using DriftMap = std::function<Eigen::VectorXd(const SegmentContext&)>;      // F(t, z_t)
using DiffusionMap = std::function<Eigen::MatrixXd(const SegmentContext&)>;  // G(t, z_t)
using SigmaMap = std::function<Eigen::MatrixXd(double)>;                     // sigma(t)
using ImpulseMap = std::function<Eigen::VectorXd(const SegmentContext&)>;    // K_i(t, z_t)

struct DeclaredConstants {
    std::optional<double> n_f, n_g;              // Lipschitz constants of F, G
    std::vector<std::optional<double>> l_k;      // per-impulse Lipschitz
    std::optional<double> xi1_star, xi2_star;    // growth bounds of F, G
    std::vector<std::optional<double>> upsilon;  // per-impulse growth
    std::optional<double> lambda_sigma;          // sup ||sigma||^2
};

struct ProblemSpec {
    double q = 0.75;  // in (1/2, 1)
    double hurst = 0.75;
    ml::SpectralOperator op;
    TimePartition partition;
    phase::WeightFunction weight;
    phase::HistoryBuffer initial_history;  // phi(0) = 0, on the offset grid
    double offset_step = 1.0 / 64.0;       // history/segment grid spacing

    DriftMap drift;
    DiffusionMap diffusion;
    SigmaMap sigma;
    std::vector<ImpulseMap> impulses;

    noise::QStructure q1, q2;
    DeclaredConstants declared;

    double picard_tol = 1e-10;  // squared sup distance between iterates
    int picard_max_iter = 60;
    bool volterra_fbm = false;

    void validate() const;
    // uniform micro grid over [0, T]
    std::vector<double> global_grid() const;
};

struct ConstantsLedger {
    std::optional<double> eta0;
    std::vector<std::optional<double>> eta_i;
    std::optional<double> l_r;
    std::optional<double> kappa0;
    std::vector<std::optional<double>> kappa_i;
    std::optional<double> l_hr;
    std::optional<double> lambda1, lambda2, lambda3;
    double r = 0.0;
    double varpi = 0.0;
    double m1 = 0.0, m2 = 0.0;
    double phi_norm = 0.0;  // ||phi||_{D_h}

    bool contraction_ok() const { return l_r.has_value() && *l_r < 1.0; }
    bool hr_ok() const { return l_hr.has_value() && *l_hr < 1.0; }
};

struct IntervalStats {
    int index = 0;
    bool impulse = false;
    int iterations = 0;
    double final_residual = 0.0;
    std::vector<double> residuals;  // successive squared sup distances
};

struct Trajectory {
    std::vector<double> times;  // micro grid on [0, T]
    Eigen::MatrixXd states;     // N x times.size()
    std::vector<std::int8_t> kind;  // 0 = flow, 1 = impulse
    phase::HistoryBuffer initial_history;
    std::vector<IntervalStats> stats;

    phase::PathView view() const { return {&initial_history, &times, &states}; }
};

// int_a^t (t-e)^{q-1} f(e) de with f piecewise linear through (nodes, samples);
// the weight is integrated exactly on every cell. q in (1/2, 1].
double singular_conv_quadrature(double q, const std::vector<double>& nodes,
                                const std::vector<double>& samples, double a, double t);
// Same with the full kernel (t-e)^{q-1} E_{q,q}(lambda (t-e)^q), E frozen at
// cell midpoints.
double singular_conv_quadrature(double q, double lambda, const std::vector<double>& nodes,
                                const std::vector<double>& samples, double a, double t);

// Product-integration tables for one flow interval, reusable across replicates
// (they depend only on geometry and spectrum).
struct IntervalTables {
    int steps = 0;
    double dt = 0.0;
    double t_start = 0.0, t_end = 0.0;
    Eigen::MatrixXd e_mid;   // N x (steps+1), col d: E_{q,q}(lambda ((d-1/2) dt)^q)
    Eigen::MatrixXd s_left;  // N x (steps+1), col d: (d dt)^{q-1} E_{q,q}(lambda (d dt)^q)
    Eigen::MatrixXd t_prop;  // N x (steps+1), col k: E_q(lambda (k dt)^q)
    std::vector<double> w_i0, w_i1;  // exact weight integrals per lag

    static IntervalTables build(const ProblemSpec& problem, int flow_index);
};

// Solves one flow interval in place (trajectory columns for that interval).
// `control_contrib`, when present, is an N x (steps+1) matrix added per node
// (column k = contribution at the k-th interval node). The trajectory must be
// committed up to the interval start. Throws ConvergenceError when max_iter
// is exhausted above tol.
void picard_solve_interval(const ProblemSpec& problem, int flow_index,
                           const IntervalTables& tables, Trajectory& traj,
                           const noise::NoiseRealization& noise_real, double tol, int max_iter,
                           IntervalStats* stats, const Eigen::MatrixXd* control_contrib = nullptr);

// State pinned to K_i(t, z_t) during impulse interval i (1-based); the
// self-reference through z_t(0) is resolved by a per-node fixed point inside a
// forward sweep. t must lie inside (t_i, s_i] on the micro grid.
Eigen::VectorXd apply_impulse(const ProblemSpec& problem, int impulse_index, double t,
                              Trajectory& traj);

// Full stitched path: flow intervals by Picard, impulse intervals by forward
// sweep. The noise realization is derived deterministically from the seed.
Trajectory simulate(const ProblemSpec& problem, std::uint64_t seed);
Trajectory simulate(const ProblemSpec& problem, const noise::NoiseRealization& noise_real);

// Non-control part of the mild formula at the interval end, evaluated from an
// existing trajectory with the same quadratures the interval solver uses:
//   T_q(t_{i+1}-s_i) K_i + int S_q F de + int S_q G dW + int S_q sigma dB^H.
Eigen::VectorXd mild_rhs_at_end(const ProblemSpec& problem, int flow_index,
                                const IntervalTables& tables, Trajectory& traj,
                                const noise::NoiseRealization& noise_real);

// Theorem-constant ledger; entries whose declared inputs are absent stay
// unset ("unverified") and simulation proceeds regardless.
ConstantsLedger ledger_evaluate(const ProblemSpec& problem, const ml::PropagatorBounds& bounds,
                                double r);

// CSV columns: t,mode,value,interval_kind
void export_csv(const Trajectory& traj, std::ostream& os);

}  // namespace fracsteer::solver
