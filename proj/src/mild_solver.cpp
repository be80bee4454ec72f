#include "fracsteer/mild_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

namespace fracsteer::solver {

// ---- partition ---------------------------------------------------------------

TimePartition TimePartition::from_points(const std::vector<double>& points, double dt) {
    if (points.empty() || points.size() % 2 == 0)
        throw std::domain_error("TimePartition: need t_1, s_1, ..., t_m, s_m, T (odd count)");
    TimePartition p;
    p.dt = dt;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (i % 2 == 0)
            p.t_points.push_back(points[i]);
        else
            p.s_points.push_back(points[i]);
    }
    p.validate();
    return p;
}

void TimePartition::validate() const {
    if (!(dt > 0.0)) throw std::domain_error("TimePartition: dt must be positive");
    if (t_points.size() != s_points.size() + 1)
        throw std::domain_error("TimePartition: point counts out of shape");
    double prev = 0.0;
    for (std::size_t i = 0; i < t_points.size(); ++i) {
        if (!(t_points[i] > prev))
            throw std::domain_error("TimePartition: interleaving violated (t_i)");
        prev = t_points[i];
        if (i < s_points.size()) {
            if (!(s_points[i] > prev))
                throw std::domain_error("TimePartition: interleaving violated (s_i)");
            prev = s_points[i];
        }
    }
    auto on_grid = [&](double x) {
        double k = x / dt;
        return std::fabs(k - std::nearbyint(k)) < 1e-9;
    };
    for (double x : t_points)
        if (!on_grid(x)) throw std::domain_error("TimePartition: points must sit on the dt grid");
    for (double x : s_points)
        if (!on_grid(x)) throw std::domain_error("TimePartition: points must sit on the dt grid");
}

void ProblemSpec::validate() const {
    if (!(q > 0.5) || !(q < 1.0)) throw std::domain_error("ProblemSpec: q must lie in (1/2,1)");
    if (!(hurst > 0.5) || !(hurst < 1.0))
        throw std::domain_error("ProblemSpec: hurst must lie in (1/2,1)");
    op.validate();
    partition.validate();
    initial_history.validate();
    if (initial_history.dim() != op.dim)
        throw std::domain_error("ProblemSpec: history dimension != mode count");
    if (initial_history.values.front().norm() > 1e-12)
        throw std::domain_error("ProblemSpec: initial history must vanish at theta = 0");
    if (static_cast<int>(impulses.size()) != partition.impulse_count())
        throw std::domain_error("ProblemSpec: impulse map count != partition impulse count");
    q1.validate();
    q2.validate();
    if (!(offset_step > 0.0)) throw std::domain_error("ProblemSpec: offset_step must be positive");
}

std::vector<double> ProblemSpec::global_grid() const {
    int n = static_cast<int>(std::llround(partition.horizon() / partition.dt));
    std::vector<double> g(n + 1);
    for (int k = 0; k <= n; ++k) g[k] = k * partition.dt;
    g.back() = partition.horizon();
    return g;
}

// ---- weakly singular product integration --------------------------------------

namespace {

// exact cell integrals of (t-e)^{q-1} against the linear hat parts
struct CellWeights {
    double left;
    double right;
};

CellWeights cell_weights(double q, double t, double e0, double e1) {
    double u0 = t - e0, u1 = t - e1;  // u0 > u1 >= 0
    double i0 = (std::pow(u0, q) - std::pow(u1, q)) / q;
    double j = u0 * i0 - (std::pow(u0, q + 1.0) - std::pow(u1, q + 1.0)) / (q + 1.0);
    double i1 = j / (e1 - e0);
    return {i0 - i1, i1};
}

}  // namespace

double singular_conv_quadrature(double q, const std::vector<double>& nodes,
                                const std::vector<double>& samples, double a, double t) {
    if (!(q > 0.5) || !(q <= 1.0))
        throw std::domain_error("singular_conv_quadrature: q must lie in (1/2,1]");
    if (!(t > a)) throw std::domain_error("singular_conv_quadrature: need t > a");
    if (nodes.size() < 2 || nodes.size() != samples.size())
        throw std::domain_error("singular_conv_quadrature: nodes/samples mismatch");
    num::Kahan<double> acc;
    for (std::size_t j = 0; j + 1 < nodes.size(); ++j) {
        CellWeights w = cell_weights(q, t, nodes[j], nodes[j + 1]);
        acc.add(w.left * samples[j] + w.right * samples[j + 1]);
    }
    return acc.sum;
}

double singular_conv_quadrature(double q, double lambda, const std::vector<double>& nodes,
                                const std::vector<double>& samples, double a, double t) {
    if (!(q > 0.5) || !(q <= 1.0))
        throw std::domain_error("singular_conv_quadrature: q must lie in (1/2,1]");
    if (!(t > a)) throw std::domain_error("singular_conv_quadrature: need t > a");
    if (nodes.size() < 2 || nodes.size() != samples.size())
        throw std::domain_error("singular_conv_quadrature: nodes/samples mismatch");
    num::Kahan<double> acc;
    for (std::size_t j = 0; j + 1 < nodes.size(); ++j) {
        CellWeights w = cell_weights(q, t, nodes[j], nodes[j + 1]);
        double mid = 0.5 * (nodes[j] + nodes[j + 1]);
        double e_fac = ml::ml_eval({q, q, lambda * std::pow(t - mid, q)});
        acc.add(e_fac * (w.left * samples[j] + w.right * samples[j + 1]));
    }
    return acc.sum;
}

// ---- interval tables -----------------------------------------------------------

IntervalTables IntervalTables::build(const ProblemSpec& problem, int flow_index) {
    const double q = problem.q;
    const double dt = problem.partition.dt;
    IntervalTables tb;
    tb.dt = dt;
    tb.t_start = problem.partition.flow_start(flow_index);
    tb.t_end = problem.partition.flow_end(flow_index);
    tb.steps = static_cast<int>(std::llround((tb.t_end - tb.t_start) / dt));
    const int n_modes = problem.op.dim;
    tb.e_mid.resize(n_modes, tb.steps + 1);
    tb.s_left.resize(n_modes, tb.steps + 1);
    tb.t_prop.resize(n_modes, tb.steps + 1);
    tb.w_i0.assign(tb.steps + 1, 0.0);
    tb.w_i1.assign(tb.steps + 1, 0.0);
    for (int d = 1; d <= tb.steps; ++d) {
        CellWeights w = cell_weights(q, d * dt, 0.0, dt);
        tb.w_i0[d] = w.left;
        tb.w_i1[d] = w.right;
    }
    for (int n = 0; n < n_modes; ++n) {
        double lam = problem.op.eigenvalues[n];
        tb.e_mid(n, 0) = 0.0;
        tb.s_left(n, 0) = 0.0;
        tb.t_prop(n, 0) = 1.0;
        for (int d = 1; d <= tb.steps; ++d) {
            double u_mid = (d - 0.5) * dt;
            double u = d * dt;
            tb.e_mid(n, d) = ml::ml_eval({q, q, lam * std::pow(u_mid, q)});
            tb.s_left(n, d) = std::pow(u, q - 1.0) * ml::ml_eval({q, q, lam * std::pow(u, q)});
            tb.t_prop(n, d) = ml::ml_eval({q, 1.0, lam * std::pow(u, q)});
        }
    }
    return tb;
}

// ---- workspace -----------------------------------------------------------------

class SolveWorkspace {
public:
    SolveWorkspace(const ProblemSpec& problem, Trajectory& traj)
        : problem_(&problem), traj_(&traj), dt_(problem.partition.dt) {}

    double problem_tau_max() const { return problem_->weight.tau_max; }
    double problem_step() const { return problem_->offset_step; }

    void begin_flow(int k0, int steps) {
        mode_ = Mode::Flow;
        k0_ = k0;
        steps_ = steps;
        trial_ = nullptr;
        caches_.clear();
    }

    // call whenever the interval columns of the trajectory changed
    void refresh_live() {
        for (auto& [rate, rc] : caches_) extend_path_prefix(rc, k0_ + steps_, /*from=*/k0_ + 1);
    }

    void begin_impulse(int k0) {
        mode_ = Mode::Impulse;
        k0_ = k0;  // last committed node
        trial_ = nullptr;
        caches_.clear();
    }

    void set_impulse_node(int k_cur, const Eigen::VectorXd* trial) {
        // nodes < k_cur must already be committed in the trajectory
        k_cur_ = k_cur;
        trial_ = trial;
        for (auto& [rate, rc] : caches_) extend_path_prefix(rc, k_cur - 1, rc.valid + 1);
    }

    SegmentContext context(double t) const { return SegmentContext(this, t); }

    int dim() const { return problem_->op.dim; }

    Eigen::VectorXd path_value(double s) const {
        if (s <= 0.0) return traj_->initial_history.at(s);
        const auto& times = traj_->times;
        int k = static_cast<int>(s / dt_);
        if (k >= static_cast<int>(times.size()) - 1) k = static_cast<int>(times.size()) - 2;
        double w = (s - times[k]) / dt_;
        if (w < 1e-12) return node_value(k);
        if (w > 1.0 - 1e-12) return node_value(k + 1);
        return (1.0 - w) * node_value(k) + w * node_value(k + 1);
    }

    Eigen::VectorXd exp_integral(double rate, double t) const {
        if (!(rate >= 0.0)) throw std::domain_error("exp_kernel_integral: rate must be >= 0");
        if (rate * problem_->partition.horizon() > 600.0)
            throw NumericError("exp_kernel_integral: rate too large for stable prefixes");
        RateCache& rc = cache(rate);
        const double tau_max = problem_->weight.tau_max;
        const int k = static_cast<int>(std::llround(t / dt_));
        Eigen::VectorXd j_part = Eigen::VectorXd::Zero(dim());
        if (k > 0) {
            if (mode_ == Mode::Impulse && k == k_cur_) {
                // live sliver against the trial value
                j_part = rc.path_prefix.col(k - 1) +
                         0.5 * dt_ *
                             (std::exp(rate * (t - dt_)) * node_value(k - 1) +
                              std::exp(rate * t) * (*trial_));
            } else {
                j_part = rc.path_prefix.col(k);
            }
        }
        if (t > tau_max) j_part -= path_prefix_interp(rc, t - tau_max);
        Eigen::VectorXd h_part = Eigen::VectorXd::Zero(dim());
        if (t < tau_max) h_part = hist_prefix_interp(rc, t - tau_max);
        return std::exp(-rate * t) * (h_part + j_part);
    }

private:
    enum class Mode { Flow, Impulse };

    struct RateCache {
        double rate = 0.0;
        Eigen::MatrixXd hist_prefix;  // dim x offsets: int_{offset_i}^0 e^{r s} phi(s) ds
        Eigen::MatrixXd path_prefix;  // dim x nodes: int_0^{t_k} e^{r s} z(s) ds
        int valid = 0;                // highest valid path_prefix column
    };

    Eigen::VectorXd node_value(int k) const {
        if (mode_ == Mode::Impulse && trial_ != nullptr && k == k_cur_) return *trial_;
        return traj_->states.col(k);
    }

    RateCache& cache(double rate) const {
        auto it = caches_.find(rate);
        if (it == caches_.end()) {
            RateCache rc;
            rc.rate = rate;
            build_hist_prefix(rc);
            rc.path_prefix = Eigen::MatrixXd::Zero(dim(), traj_->times.size());
            rc.valid = 0;
            int target = (mode_ == Mode::Flow) ? k0_ + steps_ : std::max(0, k_cur_ - 1);
            extend_path_prefix(rc, target, 1);
            it = caches_.emplace(rate, std::move(rc)).first;
        }
        return it->second;
    }

    void build_hist_prefix(RateCache& rc) const {
        const auto& hist = traj_->initial_history;
        const std::size_t n = hist.offsets.size();
        rc.hist_prefix = Eigen::MatrixXd::Zero(dim(), n);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            double e0 = hist.offsets[i], e1 = hist.offsets[i + 1];  // e1 < e0
            Eigen::VectorXd piece =
                0.5 * (e0 - e1) *
                (std::exp(rc.rate * e0) * hist.values[i] + std::exp(rc.rate * e1) * hist.values[i + 1]);
            rc.hist_prefix.col(i + 1) = rc.hist_prefix.col(i) + piece;
        }
    }

    void extend_path_prefix(RateCache& rc, int target, int from) const {
        int start = std::max(1, std::min(from, rc.valid + 1));
        for (int k = start; k <= target; ++k) {
            double t0 = traj_->times[k - 1], t1 = traj_->times[k];
            rc.path_prefix.col(k) =
                rc.path_prefix.col(k - 1) +
                0.5 * (t1 - t0) *
                    (std::exp(rc.rate * t0) * node_value(k - 1) +
                     std::exp(rc.rate * t1) * node_value(k));
        }
        rc.valid = std::max(rc.valid, target);
    }

    Eigen::VectorXd hist_prefix_interp(const RateCache& rc, double x) const {
        const auto& offs = traj_->initial_history.offsets;
        if (x >= 0.0) return Eigen::VectorXd::Zero(dim());
        if (x <= offs.back()) return rc.hist_prefix.col(offs.size() - 1);
        auto it = std::lower_bound(offs.begin(), offs.end(), x, std::greater<double>());
        std::size_t hi = static_cast<std::size_t>(it - offs.begin());
        std::size_t lo = hi - 1;
        double w = (offs[lo] - x) / (offs[lo] - offs[hi]);
        return (1.0 - w) * rc.hist_prefix.col(lo) + w * rc.hist_prefix.col(hi);
    }

    Eigen::VectorXd path_prefix_interp(const RateCache& rc, double s) const {
        if (s <= 0.0) return Eigen::VectorXd::Zero(dim());
        int k = static_cast<int>(s / dt_);
        double w = (s - traj_->times[k]) / dt_;
        if (k + 1 >= static_cast<int>(traj_->times.size()))
            return rc.path_prefix.col(traj_->times.size() - 1);
        return (1.0 - w) * rc.path_prefix.col(k) + w * rc.path_prefix.col(k + 1);
    }

    const ProblemSpec* problem_;
    Trajectory* traj_;
    double dt_;
    Mode mode_ = Mode::Flow;
    int k0_ = 0;
    int steps_ = 0;
    int k_cur_ = 0;
    const Eigen::VectorXd* trial_ = nullptr;
    mutable std::map<double, RateCache> caches_;
};

int SegmentContext::dim() const { return ws_->dim(); }

Eigen::VectorXd SegmentContext::value(double theta) const {
    if (theta > 0.0) throw std::domain_error("SegmentContext: theta must be <= 0");
    return ws_->path_value(t_ + theta);
}

Eigen::VectorXd SegmentContext::exp_kernel_integral(double rate) const {
    return ws_->exp_integral(rate, t_);
}

phase::HistoryBuffer SegmentContext::materialize() const {
    return phase::HistoryBuffer::sampled([this](double th) { return value(th); },
                                         ws_->problem_tau_max(), ws_->problem_step());
}

// ---- interval solve ------------------------------------------------------------

void picard_solve_interval(const ProblemSpec& problem, int flow_index,
                           const IntervalTables& tables, Trajectory& traj,
                           const noise::NoiseRealization& noise_real, double tol, int max_iter,
                           IntervalStats* stats, const Eigen::MatrixXd* control_contrib) {
    const int n_modes = problem.op.dim;
    const int steps = tables.steps;
    const int k0 = static_cast<int>(std::llround(tables.t_start / tables.dt));
    const double dt = tables.dt;

    // scaled noise increments over the interval
    const int dim1 = problem.q1.dim();
    const int dim2 = problem.q2.dim();
    Eigen::VectorXd sq1(dim1), sq2(dim2);
    for (int i = 0; i < dim1; ++i) sq1(i) = std::sqrt(problem.q1.eigenvalues[i]);
    for (int i = 0; i < dim2; ++i) sq2(i) = std::sqrt(problem.q2.eigenvalues[i]);
    Eigen::MatrixXd dw(dim1, steps), db(dim2, steps);
    for (int j = 0; j < steps; ++j) {
        dw.col(j) = sq1.cwiseProduct(noise_real.wiener.col(k0 + j + 1) - noise_real.wiener.col(k0 + j));
        db.col(j) = sq2.cwiseProduct(noise_real.fbm.col(k0 + j + 1) - noise_real.fbm.col(k0 + j));
    }

    // sigma term is iterate-independent
    Eigen::MatrixXd sigma_kick(n_modes, steps);
    for (int j = 0; j < steps; ++j) {
        Eigen::MatrixXd s = problem.sigma(tables.t_start + j * dt);
        if (s.rows() != n_modes || s.cols() != dim2)
            throw std::domain_error("sigma map returned wrong dimensions");
        sigma_kick.col(j) = s * db.col(j);
    }
    Eigen::MatrixXd z_sigma = Eigen::MatrixXd::Zero(n_modes, steps + 1);
    for (int k = 1; k <= steps; ++k)
        for (int d = 1; d <= k; ++d)
            z_sigma.col(k) += tables.s_left.col(d).cwiseProduct(sigma_kick.col(k - d));

    const Eigen::VectorXd anchor = traj.states.col(k0);

    SolveWorkspace ws(problem, traj);
    ws.begin_flow(k0, steps);

    // initial iterate: constant anchor
    for (int k = 1; k <= steps; ++k) traj.states.col(k0 + k) = anchor;

    Eigen::MatrixXd f_samples(n_modes, steps + 1);
    Eigen::MatrixXd g_kick(n_modes, steps);
    Eigen::MatrixXd next(n_modes, steps + 1);
    std::vector<double> residuals;

    for (int iter = 1; iter <= max_iter; ++iter) {
        ws.refresh_live();
        for (int j = 0; j <= steps; ++j) {
            SegmentContext ctx = ws.context(tables.t_start + j * dt);
            Eigen::VectorXd f = problem.drift(ctx);
            if (f.size() != n_modes) throw std::domain_error("drift map returned wrong dimension");
            f_samples.col(j) = f;
            if (j < steps) {
                Eigen::MatrixXd g = problem.diffusion(ctx);
                if (g.rows() != n_modes || g.cols() != dim1)
                    throw std::domain_error("diffusion map returned wrong dimensions");
                g_kick.col(j) = g * dw.col(j);
            }
        }
        next.col(0) = anchor;
        for (int k = 1; k <= steps; ++k) {
            Eigen::VectorXd acc = tables.t_prop.col(k).cwiseProduct(anchor);
            for (int d = 1; d <= k; ++d) {
                acc += tables.e_mid.col(d).cwiseProduct(tables.w_i0[d] * f_samples.col(k - d) +
                                                        tables.w_i1[d] * f_samples.col(k - d + 1));
                acc += tables.s_left.col(d).cwiseProduct(g_kick.col(k - d));
            }
            acc += z_sigma.col(k);
            if (control_contrib) acc += control_contrib->col(k);
            next.col(k) = acc;
        }
        double res = 0.0;
        for (int k = 1; k <= steps; ++k)
            res = std::max(res, (next.col(k) - traj.states.col(k0 + k)).squaredNorm());
        for (int k = 1; k <= steps; ++k) traj.states.col(k0 + k) = next.col(k);
        residuals.push_back(res);
        if (res <= tol) {
            if (stats) {
                stats->index = flow_index;
                stats->impulse = false;
                stats->iterations = iter;
                stats->final_residual = res;
                stats->residuals = residuals;
            }
            for (int k = 1; k <= steps; ++k) traj.kind[k0 + k] = 0;
            return;
        }
    }
    throw ConvergenceError("picard_solve_interval: max_iter exhausted above tol", residuals);
}

Eigen::VectorXd mild_rhs_at_end(const ProblemSpec& problem, int flow_index,
                                const IntervalTables& tables, Trajectory& traj,
                                const noise::NoiseRealization& noise_real) {
    const int n_modes = problem.op.dim;
    const int steps = tables.steps;
    const int k0 = static_cast<int>(std::llround(tables.t_start / tables.dt));
    const double dt = tables.dt;
    const int dim1 = problem.q1.dim();
    const int dim2 = problem.q2.dim();

    SolveWorkspace ws(problem, traj);
    ws.begin_flow(k0, steps);
    ws.refresh_live();

    Eigen::VectorXd sq1(dim1), sq2(dim2);
    for (int i = 0; i < dim1; ++i) sq1(i) = std::sqrt(problem.q1.eigenvalues[i]);
    for (int i = 0; i < dim2; ++i) sq2(i) = std::sqrt(problem.q2.eigenvalues[i]);

    Eigen::MatrixXd f_samples(n_modes, steps + 1);
    Eigen::MatrixXd kick(n_modes, steps);
    for (int j = 0; j <= steps; ++j) {
        SegmentContext ctx = ws.context(tables.t_start + j * dt);
        f_samples.col(j) = problem.drift(ctx);
        if (j < steps) {
            Eigen::VectorXd dw =
                sq1.cwiseProduct(noise_real.wiener.col(k0 + j + 1) - noise_real.wiener.col(k0 + j));
            Eigen::VectorXd db =
                sq2.cwiseProduct(noise_real.fbm.col(k0 + j + 1) - noise_real.fbm.col(k0 + j));
            kick.col(j) = problem.diffusion(ctx) * dw + problem.sigma(tables.t_start + j * dt) * db;
        }
    }
    Eigen::VectorXd acc = tables.t_prop.col(steps).cwiseProduct(traj.states.col(k0));
    for (int d = 1; d <= steps; ++d) {
        acc += tables.e_mid.col(d).cwiseProduct(tables.w_i0[d] * f_samples.col(steps - d) +
                                                tables.w_i1[d] * f_samples.col(steps - d + 1));
        acc += tables.s_left.col(d).cwiseProduct(kick.col(steps - d));
    }
    return acc;
}

// ---- impulse sweep ---------------------------------------------------------------

Eigen::VectorXd apply_impulse(const ProblemSpec& problem, int impulse_index, double t,
                              Trajectory& traj) {
    if (impulse_index < 1 || impulse_index > problem.partition.impulse_count())
        throw std::domain_error("apply_impulse: impulse index out of range");
    const double dt = problem.partition.dt;
    const double t_i = problem.partition.t_points[impulse_index - 1];
    const double s_i = problem.partition.s_points[impulse_index - 1];
    if (!(t > t_i) || t > s_i + 1e-12)
        throw std::domain_error("apply_impulse: t outside (t_i, s_i]");
    if (std::fabs(t / dt - std::nearbyint(t / dt)) > 1e-9)
        throw std::domain_error("apply_impulse: t must sit on the micro grid");
    const ImpulseMap& kmap = problem.impulses[impulse_index - 1];

    const int k_begin = static_cast<int>(std::llround(t_i / dt)) + 1;
    const int k_target = static_cast<int>(std::llround(t / dt));

    SolveWorkspace ws(problem, traj);
    ws.begin_impulse(k_begin - 1);

    Eigen::VectorXd x = traj.states.col(k_begin - 1);
    for (int k = k_begin; k <= k_target; ++k) {
        double tk = traj.times[k];
        x = traj.states.col(k - 1);  // predictor: carry the previous value
        bool done = false;
        std::vector<double> residuals;
        for (int it = 0; it < 50; ++it) {
            ws.set_impulse_node(k, &x);
            Eigen::VectorXd xn = kmap(ws.context(tk));
            double change = (xn - x).norm();
            residuals.push_back(change);
            x = xn;
            if (change <= 1e-13 * (1.0 + xn.norm())) {
                done = true;
                break;
            }
        }
        if (!done)
            throw ConvergenceError("apply_impulse: node fixed point did not converge", residuals);
        traj.states.col(k) = x;
        traj.kind[k] = 1;
    }
    return x;
}

// ---- full simulation ----------------------------------------------------------

Trajectory simulate(const ProblemSpec& problem, const noise::NoiseRealization& noise_real) {
    problem.validate();
    Trajectory traj;
    traj.times = problem.global_grid();
    traj.states = Eigen::MatrixXd::Zero(problem.op.dim, traj.times.size());
    traj.kind.assign(traj.times.size(), 0);
    traj.initial_history = problem.initial_history;
    if (noise_real.grid.size() != traj.times.size())
        throw std::domain_error("simulate: noise grid does not match the micro grid");

    const int m = problem.partition.impulse_count();
    for (int i = 0; i <= m; ++i) {
        IntervalTables tables = IntervalTables::build(problem, i);
        IntervalStats st;
        picard_solve_interval(problem, i, tables, traj, noise_real, problem.picard_tol,
                              problem.picard_max_iter, &st);
        traj.stats.push_back(std::move(st));
        if (i < m) {
            double s_next = problem.partition.s_points[i];
            apply_impulse(problem, i + 1, s_next, traj);
            IntervalStats ist;
            ist.index = i + 1;
            ist.impulse = true;
            traj.stats.push_back(std::move(ist));
        }
    }
    return traj;
}

Trajectory simulate(const ProblemSpec& problem, std::uint64_t seed) {
    problem.validate();
    auto grid = problem.global_grid();
    noise::NoiseRealization nr = noise::make_realization(
        problem.hurst, grid, problem.q1.dim(), problem.q2.dim(), seed, problem.volterra_fbm);
    return simulate(problem, nr);
}

// ---- ledger ---------------------------------------------------------------------

ConstantsLedger ledger_evaluate(const ProblemSpec& problem, const ml::PropagatorBounds& bounds,
                                double r) {
    if (!(problem.q > 0.5)) throw std::domain_error("ledger_evaluate: q must exceed 1/2");
    const double q = problem.q;
    const double vp = problem.weight.varpi;
    const double m1 = bounds.m1, m2 = bounds.m2;
    const double horizon = problem.partition.horizon();
    const double t1 = problem.partition.t_points.front();
    const double h = problem.hurst;
    const int m = problem.partition.impulse_count();
    const auto& dc = problem.declared;

    ConstantsLedger led;
    led.r = r;
    led.varpi = vp;
    led.m1 = m1;
    led.m2 = m2;
    led.phi_norm = phase::dh_norm(problem.initial_history, problem.weight);
    double phi2 = led.phi_norm * led.phi_norm;

    auto drift_pair = [&](double t_a) -> std::optional<double> {
        if (!dc.n_f || !dc.n_g) return std::nullopt;
        return *dc.n_f * std::pow(t_a, 2.0 * q) / (q * q) +
               *dc.n_g * std::pow(t_a, 2.0 * q - 1.0) / (2.0 * q - 1.0);
    };

    if (auto p = drift_pair(t1)) led.eta0 = 2.0 * m2 * m2 * vp * vp * *p;
    led.eta_i.resize(m);
    for (int i = 0; i < m; ++i) {
        auto lk = (i < static_cast<int>(dc.l_k.size())) ? dc.l_k[i] : std::nullopt;
        auto p = drift_pair(problem.partition.t_points[i + 1]);
        if (lk && p) {
            double lkv = lk.value(), pv = p.value();
            led.eta_i[i] = 3.0 * m1 * m1 * lkv * vp * vp + 3.0 * m2 * m2 * vp * vp * pv;
        }
    }
    // L_R = max{eta_0, varpi^2 L_{K_i}, eta_i}
    {
        bool have = led.eta0.has_value();
        double v = led.eta0.value_or(0.0);
        for (int i = 0; i < m; ++i) {
            auto lk = (i < static_cast<int>(dc.l_k.size())) ? dc.l_k[i] : std::nullopt;
            if (!lk || !led.eta_i[i]) {
                have = false;
                break;
            }
            v = std::max({v, vp * vp * *lk, *led.eta_i[i]});
        }
        if (have) led.l_r = v;
    }
    if (auto p = drift_pair(horizon)) led.l_hr = 2.0 * m2 * m2 * vp * vp * *p;

    double lam_base = 8.0 * (phi2 + vp * vp * r);
    led.lambda3 = lam_base;
    if (dc.xi1_star) led.lambda1 = *dc.xi1_star * lam_base;
    if (dc.xi2_star) led.lambda2 = *dc.xi2_star * lam_base;

    auto kappa_tail = [&](double t_a) -> std::optional<double> {
        if (!led.lambda1 || !led.lambda2 || !dc.lambda_sigma) return std::nullopt;
        return *led.lambda1 / (q * q) + *led.lambda2 / (t_a * (2.0 * q - 1.0)) +
               2.0 * h * *dc.lambda_sigma * std::pow(t_a, 2.0 * h - 2.0) / (2.0 * q - 1.0);
    };
    if (auto kt = kappa_tail(t1)) led.kappa0 = 3.0 * m2 * m2 * std::pow(t1, 2.0 * q) * *kt;
    led.kappa_i.resize(m);
    for (int i = 0; i < m; ++i) {
        double ti1 = problem.partition.t_points[i + 1];
        auto ups = (i < static_cast<int>(dc.upsilon.size())) ? dc.upsilon[i] : std::nullopt;
        auto kt = kappa_tail(ti1);
        if (ups && kt && led.lambda3) {
            double uv = ups.value(), kv = kt.value();
            led.kappa_i[i] =
                4.0 * m1 * m1 * uv * *led.lambda3 + 4.0 * m2 * m2 * std::pow(ti1, 2.0 * q) * kv;
        }
    }
    return led;
}

// ---- export ---------------------------------------------------------------------

void export_csv(const Trajectory& traj, std::ostream& os) {
    os << "t,mode,value,interval_kind\n";
    char buf[96];
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        const char* kind = traj.kind[k] ? "impulse" : "flow";
        for (Eigen::Index n = 0; n < traj.states.rows(); ++n) {
            std::snprintf(buf, sizeof(buf), "%.17g,%ld,%.17g,%s\n", traj.times[k],
                          static_cast<long>(n), traj.states(n, k), kind);
            os << buf;
        }
    }
}

}  // namespace fracsteer::solver
