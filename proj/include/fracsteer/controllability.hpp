#pragma once

// Regularized-Gramian steering for the actuated system: the interval Gramian
//   Gamma = int_{s_i}^{t_{i+1}} S_q(t_{i+1}-e) A A* S_q*(t_{i+1}-e) de,
// its regularized inverse Delta(Lambda, Gamma) = (Lambda I + Gamma)^{-1}, the
// steering control u(t) = A* S_q*(t_{i+1}-t) Delta p with residual
//   p = target - T_q K_i - int S_q F - int S_q G dW - int S_q sigma dB^H,
// closed-loop simulation (outer fixed point over the control/trajectory
// pair), and the Lambda-sweep steering-error experiment.
//
// p is evaluated per realization from the noise over the whole interval
// (anticipating, matching the formula as written); see README.

#include <Eigen/Dense>

#include "fracsteer/mild_solver.hpp"

namespace fracsteer::control {

struct Actuator {
    Eigen::MatrixXd matrix;  // maps control space into mode space, N x dim_U

    Eigen::MatrixXd adjoint() const { return matrix.transpose(); }
    Eigen::MatrixXd gram_factor() const { return matrix * matrix.transpose(); }  // A A*
    static Actuator identity(int n_modes, double scale = 1.0);
    // adjoint consistency <A u, z> = <u, A* z> verified on random vectors
    void validate(int n_modes) const;
};

struct GramianOp {
    double s_i = 0.0, t_next = 0.0;
    int steps = 0;
    Eigen::MatrixXd matrix;  // symmetric PSD on mode space
};

struct SteeringTarget {
    std::vector<Eigen::VectorXd> per_interval;  // z_{t_{i+1}}, i = 0..m
    bool final_only = false;  // steer only the last interval

    void validate(int n_modes, int flow_count) const;
};

// Product integration with the exact cell mass of (t_next-e)^{2q-2} and the
// Mittag-Leffler factors frozen at cell midpoints. The same cells drive the
// final-node control quadrature in the closed loop, so the discrete identity
// z(t_{i+1}) - target = -Lambda Delta p holds exactly in the linear case.
GramianOp gramian(double q, const ml::SpectralOperator& spec, const Actuator& actuator,
                  double s_i, double t_next, int steps);

// (Lambda I + Gamma)^{-1} through a cached LDLT factorization.
class RegularizedInverse {
public:
    RegularizedInverse(double lambda_reg, const GramianOp& gram);
    Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
    Eigen::MatrixXd dense() const;
    double lambda_reg() const { return lambda_; }

private:
    double lambda_;
    Eigen::LDLT<Eigen::MatrixXd> fact_;
};

RegularizedInverse resolvent_delta(double lambda_reg, const GramianOp& gram);

// p(z(.)) for flow interval i evaluated from an existing trajectory;
// K_0(0,.) = 0 on the first interval.
Eigen::VectorXd residual_p(const solver::ProblemSpec& problem, int flow_index,
                           solver::Trajectory& traj, const noise::NoiseRealization& noise_real,
                           const Eigen::VectorXd& target);

// u(t) = A* S_q*(t_{i+1}-t) Delta p; t must lie strictly inside (s_i, t_{i+1})
// (the kernel is singular at t_{i+1}; quadratures evaluate at cell midpoints).
Eigen::VectorXd control_law(double t, double t_next, const RegularizedInverse& delta,
                            const Eigen::VectorXd& p_value, double q,
                            const ml::SpectralOperator& spec, const Actuator& actuator);

struct ClosedLoopResult {
    solver::Trajectory trajectory;
    std::vector<double> terminal_sq_error;  // ||z(t_{i+1}) - target_i||^2 per interval
    std::vector<Eigen::VectorXd> p_values;  // converged residual per interval
    std::vector<int> outer_iterations;
};

// Reusable per-interval tables + Gramians (lambda- and noise-independent).
class ClosedLoopEngine {
public:
    ClosedLoopEngine(const solver::ProblemSpec& problem, const Actuator& actuator,
                     const SteeringTarget& target);
    ClosedLoopResult run(double lambda_reg, const noise::NoiseRealization& noise_real) const;
    const GramianOp& interval_gramian(int flow_index) const { return gramians_[flow_index]; }

    int outer_max_iter = 10;
    double outer_tol = 1e-8;  // squared change of the residual p between outer passes

private:
    const solver::ProblemSpec* problem_;
    Actuator actuator_;
    SteeringTarget target_;
    std::vector<solver::IntervalTables> tables_;
    std::vector<GramianOp> gramians_;
    std::vector<Eigen::MatrixXd> s_mid_;  // midpoint S-kernel per interval
    Eigen::MatrixXd aat_;
};

ClosedLoopResult closed_loop_simulate(const solver::ProblemSpec& problem, const Actuator& actuator,
                                      const SteeringTarget& target, double lambda_reg,
                                      std::uint64_t seed);

struct SweepRow {
    double lambda = 0.0;
    int interval_index = 0;
    double mean_sq_error = 0.0;
    double std_error = 0.0;
    int replicates = 0;
};

// Rows ordered by (lambda, interval). lambdas must be strictly decreasing and
// positive. Replicates share noise across lambdas (common random numbers) and
// run on up to `threads` workers with deterministic reduction.
std::vector<SweepRow> lambda_sweep(const solver::ProblemSpec& problem, const Actuator& actuator,
                                   const SteeringTarget& target,
                                   const std::vector<double>& lambdas, int replicates,
                                   std::uint64_t base_seed, int threads = 1);

// CSV columns: lambda,interval_index,mean_sq_error,std_error,replicates
void export_csv(const std::vector<SweepRow>& rows, std::ostream& os);

}  // namespace fracsteer::control
