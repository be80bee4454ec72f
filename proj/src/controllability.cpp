#include "fracsteer/controllability.hpp"

#include <Eigen/Eigenvalues>
#include <limits>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <thread>

namespace fracsteer::control {

Actuator Actuator::identity(int n_modes, double scale) {
    Actuator a;
    a.matrix = scale * Eigen::MatrixXd::Identity(n_modes, n_modes);
    return a;
}

void Actuator::validate(int n_modes) const {
    if (matrix.rows() != n_modes) throw std::domain_error("Actuator: row count != mode count");
    if (!matrix.allFinite()) throw std::domain_error("Actuator: entries must be finite");
    num::GaussianStream g(0x5eedu);
    for (int rep = 0; rep < 4; ++rep) {
        Eigen::VectorXd u(matrix.cols()), z(matrix.rows());
        for (int i = 0; i < u.size(); ++i) u(i) = g.next();
        for (int i = 0; i < z.size(); ++i) z(i) = g.next();
        double lhs = (matrix * u).dot(z);
        double rhs = u.dot(adjoint() * z);
        if (std::fabs(lhs - rhs) > 1e-10 * (1.0 + std::fabs(lhs)))
            throw NumericError("Actuator: adjoint consistency failed");
    }
}

void SteeringTarget::validate(int n_modes, int flow_count) const {
    if (static_cast<int>(per_interval.size()) != flow_count)
        throw std::domain_error("SteeringTarget: need one target per flow interval");
    for (const auto& v : per_interval)
        if (v.size() != n_modes)
            throw std::domain_error("SteeringTarget: target dimension != mode count");
}

GramianOp gramian(double q, const ml::SpectralOperator& spec, const Actuator& actuator,
                  double s_i, double t_next, int steps) {
    if (!(q > 0.5) || !(q < 1.0))
        throw std::domain_error("gramian: q must lie in (1/2,1) (square-integrable kernel)");
    if (!(t_next > s_i)) throw std::domain_error("gramian: need s_i < t_next");
    if (steps < 1) throw std::domain_error("gramian: steps must be positive");
    spec.validate();
    actuator.validate(spec.dim);

    // Per-cell product integration in the variable v = u^{2q-1} (u = t_next-e),
    // which absorbs the singular weight exactly:
    //   int_cell u^{2q-2} E_n E_n' du = 1/(2q-1) int_cell E_n E_n' dv.
    // The smooth factor is integrated by 4-point Gauss-Legendre per cell, so
    // constant factors (lambda = 0) stay exact and high modes converge fast.
    const double dt = (t_next - s_i) / steps;
    const double p = 2.0 * q - 1.0;
    const num::GaussLegendre& gl = num::gauss_legendre(4);
    Eigen::MatrixXd kernel_sum = Eigen::MatrixXd::Zero(spec.dim, spec.dim);
    Eigen::VectorXd e_vals(spec.dim);
    for (int d = 1; d <= steps; ++d) {
        double v0 = std::pow((d - 1) * dt, p), v1 = std::pow(d * dt, p);
        double c = 0.5 * (v0 + v1), half = 0.5 * (v1 - v0);
        for (int g = 0; g < 4; ++g) {
            double v = c + half * gl.nodes[g];
            double u = std::pow(v, 1.0 / p);
            for (int n = 0; n < spec.dim; ++n)
                e_vals(n) = ml::ml_eval({q, q, spec.eigenvalues[n] * std::pow(u, q)});
            double w = half * gl.weights[g] / p;
            kernel_sum.noalias() += w * (e_vals * e_vals.transpose());
        }
    }
    GramianOp g;
    g.s_i = s_i;
    g.t_next = t_next;
    g.steps = steps;
    g.matrix = kernel_sum.cwiseProduct(actuator.gram_factor());
    g.matrix = 0.5 * (g.matrix + g.matrix.transpose().eval());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.matrix, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10)
        throw NumericError("gramian: matrix not positive semidefinite");
    return g;
}

RegularizedInverse::RegularizedInverse(double lambda_reg, const GramianOp& gram)
    : lambda_(lambda_reg) {
    if (!(lambda_reg > 0.0))
        throw std::domain_error("resolvent_delta: regularization must be positive");
    Eigen::MatrixXd shifted = gram.matrix;
    shifted.diagonal().array() += lambda_reg;
    fact_.compute(shifted);
    if (fact_.info() != Eigen::Success)
        throw NumericError("resolvent_delta: factorization failed");
}

Eigen::VectorXd RegularizedInverse::apply(const Eigen::VectorXd& v) const {
    return fact_.solve(v);
}

Eigen::MatrixXd RegularizedInverse::dense() const {
    int n = fact_.matrixL().rows();
    return fact_.solve(Eigen::MatrixXd::Identity(n, n));
}

RegularizedInverse resolvent_delta(double lambda_reg, const GramianOp& gram) {
    return RegularizedInverse(lambda_reg, gram);
}

Eigen::VectorXd residual_p(const solver::ProblemSpec& problem, int flow_index,
                           solver::Trajectory& traj, const noise::NoiseRealization& noise_real,
                           const Eigen::VectorXd& target) {
    solver::IntervalTables tables = solver::IntervalTables::build(problem, flow_index);
    return target - solver::mild_rhs_at_end(problem, flow_index, tables, traj, noise_real);
}

Eigen::VectorXd control_law(double t, double t_next, const RegularizedInverse& delta,
                            const Eigen::VectorXd& p_value, double q,
                            const ml::SpectralOperator& spec, const Actuator& actuator) {
    if (!(t < t_next))
        throw std::domain_error("control_law: propagator is singular at t = t_{i+1}");
    Eigen::VectorXd dp = delta.apply(p_value);
    Eigen::VectorXd s_vals(spec.dim);
    for (int n = 0; n < spec.dim; ++n)
        s_vals(n) = ml::propagator_S(q, spec.eigenvalues[n], t_next - t);
    return actuator.adjoint() * s_vals.cwiseProduct(dp).eval();
}

ClosedLoopEngine::ClosedLoopEngine(const solver::ProblemSpec& problem, const Actuator& actuator,
                                   const SteeringTarget& target)
    : problem_(&problem), actuator_(actuator), target_(target) {
    problem.validate();
    actuator_.validate(problem.op.dim);
    target_.validate(problem.op.dim, problem.partition.flow_count());
    const int flows = problem.partition.flow_count();
    tables_.reserve(flows);
    gramians_.reserve(flows);
    s_mid_.reserve(flows);
    aat_ = actuator_.gram_factor();
    for (int i = 0; i < flows; ++i) {
        tables_.push_back(solver::IntervalTables::build(problem, i));
        const auto& tb = tables_.back();
        gramians_.push_back(gramian(problem.q, problem.op, actuator_, tb.t_start, tb.t_end,
                                    tb.steps));
        // S_q scalar at the cell midpoints measured from t_end: lag d -> (d-1/2) dt
        Eigen::MatrixXd sm(problem.op.dim, tb.steps + 1);
        sm.col(0).setZero();
        for (int d = 1; d <= tb.steps; ++d)
            sm.col(d) = std::pow((d - 0.5) * tb.dt, problem.q - 1.0) * tb.e_mid.col(d);
        s_mid_.push_back(std::move(sm));
    }
}

ClosedLoopResult ClosedLoopEngine::run(double lambda_reg,
                                       const noise::NoiseRealization& noise_real) const {
    const solver::ProblemSpec& problem = *problem_;
    const int n_modes = problem.op.dim;
    const int m = problem.partition.impulse_count();

    ClosedLoopResult result;
    result.trajectory.times = problem.global_grid();
    result.trajectory.states = Eigen::MatrixXd::Zero(n_modes, result.trajectory.times.size());
    result.trajectory.kind.assign(result.trajectory.times.size(), 0);
    result.trajectory.initial_history = problem.initial_history;
    solver::Trajectory& traj = result.trajectory;

    for (int i = 0; i <= m; ++i) {
        const solver::IntervalTables& tb = tables_[i];
        const int steps = tb.steps;
        const double dt = tb.dt;
        const bool steered = !(target_.final_only && i < m);
        const Eigen::VectorXd& target_vec = target_.per_interval[i];

        solver::IntervalStats st;
        int outer_used = 0;
        Eigen::VectorXd p = Eigen::VectorXd::Zero(n_modes);

        if (!steered) {
            solver::picard_solve_interval(problem, i, tb, traj, noise_real, problem.picard_tol,
                                          problem.picard_max_iter, &st);
        } else {
            RegularizedInverse delta(lambda_reg, gramians_[i]);
            const Eigen::MatrixXd& s_mid = s_mid_[i];
            const Eigen::MatrixXd& aat = aat_;

            Eigen::MatrixXd contrib = Eigen::MatrixXd::Zero(n_modes, steps + 1);
            Eigen::VectorXd p_prev = Eigen::VectorXd::Zero(n_modes);
            bool have_p = false;
            for (int outer = 0; outer <= outer_max_iter; ++outer) {
                solver::picard_solve_interval(problem, i, tb, traj, noise_real, problem.picard_tol,
                                              problem.picard_max_iter, &st,
                                              have_p ? &contrib : nullptr);
                Eigen::VectorXd rhs_end =
                    solver::mild_rhs_at_end(problem, i, tb, traj, noise_real);
                p = target_vec - rhs_end;
                outer_used = outer + 1;
                if (have_p && (p - p_prev).squaredNorm() <= outer_tol) break;
                p_prev = p;
                have_p = true;

                Eigen::VectorXd dp = delta.apply(p);
                // per-cell frozen control field r_j = A A* (S_q*(t_next - mid_j) dp)
                Eigen::MatrixXd r_cells(n_modes, steps);
                for (int j = 0; j < steps; ++j)
                    r_cells.col(j) = aat * s_mid.col(steps - j).cwiseProduct(dp).eval();
                contrib.setZero();
                for (int k = 1; k < steps; ++k) {
                    Eigen::VectorXd acc = Eigen::VectorXd::Zero(n_modes);
                    for (int j = 0; j < k; ++j) {
                        int d = k - j;
                        double w = tb.w_i0[d] + tb.w_i1[d];  // full cell mass of (t_k - e)^{q-1}
                        acc += w * tb.e_mid.col(d).cwiseProduct(r_cells.col(j));
                    }
                    contrib.col(k) = acc;
                }
                // final node shares the Gramian cells exactly
                contrib.col(steps) = gramians_[i].matrix * dp;
            }
        }
        traj.stats.push_back(st);

        int k_end = static_cast<int>(std::llround(tb.t_end / dt));
        double err = (traj.states.col(k_end) - target_vec).squaredNorm();
        result.terminal_sq_error.push_back(steered ? err
                                                   : std::numeric_limits<double>::quiet_NaN());
        result.p_values.push_back(p);
        result.outer_iterations.push_back(outer_used);

        if (i < m) {
            double s_next = problem.partition.s_points[i];
            solver::apply_impulse(problem, i + 1, s_next, traj);
        }
    }
    return result;
}

ClosedLoopResult closed_loop_simulate(const solver::ProblemSpec& problem, const Actuator& actuator,
                                      const SteeringTarget& target, double lambda_reg,
                                      std::uint64_t seed) {
    ClosedLoopEngine engine(problem, actuator, target);
    auto grid = problem.global_grid();
    noise::NoiseRealization nr = noise::make_realization(
        problem.hurst, grid, problem.q1.dim(), problem.q2.dim(), seed, problem.volterra_fbm);
    return engine.run(lambda_reg, nr);
}

std::vector<SweepRow> lambda_sweep(const solver::ProblemSpec& problem, const Actuator& actuator,
                                   const SteeringTarget& target,
                                   const std::vector<double>& lambdas, int replicates,
                                   std::uint64_t base_seed, int threads) {
    if (lambdas.empty()) throw std::domain_error("lambda_sweep: empty lambda list");
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (!(lambdas[i] > 0.0)) throw std::domain_error("lambda_sweep: lambdas must be positive");
        if (i > 0 && !(lambdas[i] < lambdas[i - 1]))
            throw std::domain_error("lambda_sweep: lambdas must be strictly decreasing");
    }
    if (replicates < 1) throw std::domain_error("lambda_sweep: need at least one replicate");

    ClosedLoopEngine engine(problem, actuator, target);
    const int flows = problem.partition.flow_count();
    auto grid = problem.global_grid();

    // noise shared across lambdas (common random numbers); the Cholesky factor
    // is built once per grid
    noise::FbmCholesky fbm_gen(problem.hurst, grid);
    auto realization = [&](int rep) {
        noise::NoiseRealization nr;
        nr.grid = grid;
        nr.seed = num::mix_seed(base_seed, 4, rep);
        nr.wiener = noise::wiener_paths(grid, problem.q1.dim(), num::mix_seed(nr.seed, 1));
        nr.fbm = problem.volterra_fbm
                     ? noise::fbm_paths_volterra(problem.hurst, grid, problem.q2.dim(),
                                                 num::mix_seed(nr.seed, 2))
                     : fbm_gen.sample(problem.q2.dim(), num::mix_seed(nr.seed, 2));
        return nr;
    };

    // errors(lambda, rep * flows + i)
    std::vector<std::vector<double>> errors(lambdas.size(),
                                            std::vector<double>(replicates * flows, 0.0));
    int workers = std::max(1, std::min(threads, replicates));
    auto work = [&](int worker) {
        for (int rep = worker; rep < replicates; rep += workers) {
            noise::NoiseRealization nr = realization(rep);
            for (std::size_t li = 0; li < lambdas.size(); ++li) {
                ClosedLoopResult res = engine.run(lambdas[li], nr);
                for (int i = 0; i < flows; ++i)
                    errors[li][rep * flows + i] = res.terminal_sq_error[i];
            }
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& th : pool) th.join();
    }

    std::vector<SweepRow> rows;
    rows.reserve(lambdas.size() * flows);
    for (std::size_t li = 0; li < lambdas.size(); ++li) {
        for (int i = 0; i < flows; ++i) {
            SweepRow row;
            row.lambda = lambdas[li];
            row.interval_index = i;
            row.replicates = replicates;
            double s = 0.0;
            for (int rep = 0; rep < replicates; ++rep) s += errors[li][rep * flows + i];
            row.mean_sq_error = s / replicates;
            double v = 0.0;
            for (int rep = 0; rep < replicates; ++rep) {
                double d = errors[li][rep * flows + i] - row.mean_sq_error;
                v += d * d;
            }
            row.std_error = replicates > 1 ? std::sqrt(v / (replicates - 1) / replicates) : 0.0;
            rows.push_back(row);
        }
    }
    return rows;
}

void export_csv(const std::vector<SweepRow>& rows, std::ostream& os) {
    os << "lambda,interval_index,mean_sq_error,std_error,replicates\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.17g,%d,%.17g,%.17g,%d\n", r.lambda, r.interval_index,
                      r.mean_sq_error, r.std_error, r.replicates);
        os << buf;
    }
}

}  // namespace fracsteer::control
