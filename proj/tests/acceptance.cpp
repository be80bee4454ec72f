// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failures. Tolerances are pinned here, not configurable.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "fracsteer/controllability.hpp"
#include "fracsteer/harness.hpp"
#include "fracsteer/mild_solver.hpp"
#include "fracsteer/scenario.hpp"
#include "oracles.hpp"

using namespace fracsteer;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

int failures = 0;

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

void report(int criterion, const char* name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s%s%s\n", pass ? "PASS" : "FAIL", criterion, name,
                detail.empty() ? "" : " -- ", detail.c_str());
    if (!pass) ++failures;
}

std::string fnum(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

// ---- criterion 1: Mittag-Leffler correctness ---------------------------------

void criterion_1() {
    Timer timer;
    bool pass = true;
    double worst = 0.0;
    oracles::TestRng rng(1001);
    for (int i = 0; i < 200; ++i) {
        double x = rng.uniform(-20.0, 3.0);
        double d = std::fabs(ml::ml_eval({1.0, 1.0, x}) - std::exp(x));
        worst = std::max(worst, d);
        if (d > 1e-10) pass = false;
    }
    for (int i = 0; i < 200; ++i) {
        double x = rng.uniform(0.0, 10.0);
        double d = std::fabs(ml::ml_eval({2.0, 1.0, -x * x}) - std::cos(x));
        worst = std::max(worst, d);
        if (d > 1e-10) pass = false;
    }
    double worst_talbot = 0.0;
    for (int i = 0; i < 20; ++i) {
        double q = rng.uniform(0.55, 0.95);
        double a = -rng.uniform(0.0, 50.0);
        double t = rng.uniform(0.05, 5.0);
        double d = std::fabs(ml::ml_eval({q, 1.0, a * std::pow(t, q)}) -
                             oracles::talbot_propagator_T(q, a, t));
        worst_talbot = std::max(worst_talbot, d);
        if (d > 1e-6) pass = false;
    }
    double secs = timer.seconds();
    if (secs >= 5.0) pass = false;
    report(1, "Mittag-Leffler exp/cos identities and Talbot contour oracle", pass,
           "worst identity " + fnum(worst) + ", worst contour " + fnum(worst_talbot) + ", " +
               fnum(secs) + " s");
}

// ---- criterion 2: fBm validity -------------------------------------------------

void criterion_2() {
    Timer timer;
    std::vector<harness::CheckResult> checks;
    harness::fbm_validation_suite(checks, 0.75, 8899, 10000);
    bool kernel_ok = false, cov_ok = false, lemma_ok = false;
    std::string detail;
    for (const auto& c : checks) {
        if (c.name.rfind("kernel-covariance", 0) == 0) {
            kernel_ok = c.pass;
            detail += c.detail;
        }
        if (c.name.rfind("generator covariances", 0) == 0) {
            cov_ok = c.pass;
            detail += ", " + c.detail;
        }
        if (c.name.rfind("second-moment", 0) == 0) lemma_ok = c.pass;
    }
    double secs = timer.seconds();
    bool pass = kernel_ok && cov_ok && lemma_ok && secs < 60.0;
    report(2, "fBm kernel identity, generator covariances, second-moment bound", pass,
           detail + ", " + fnum(secs) + " s");
}

// ---- criterion 3: phase space --------------------------------------------------

void criterion_3() {
    bool pass = true;
    double vp = phase::varpi([](double e) { return std::exp(2.0 * e); }, 1e-9);
    if (std::fabs(vp - 0.5) > 1e-8) pass = false;

    auto w = phase::make_weight([](double e) { return std::exp(2.0 * e); }, 1e-9, 10.0);
    auto ramp = phase::HistoryBuffer::sampled(
        [](double th) {
            VectorXd v(1);
            v(0) = std::min(-th, 1.0);
            return v;
        },
        10.0, 1.0 / 1024.0);
    double got = phase::dh_norm(ramp, w);
    double expected = (1.0 - std::exp(-2.0)) / 4.0;
    if (std::fabs(got - expected) > 1e-6) pass = false;

    // segment-norm inequality on 100 random trajectories
    const double step = 1.0 / 64.0;
    auto w6 = phase::make_weight([](double e) { return std::exp(2.0 * e); }, 1e-9, 6.0);
    std::vector<double> times = num::linspace(0.0, 2.0, 129);
    oracles::TestRng rng(33);
    int held = 0;
    for (int draw = 0; draw < 100; ++draw) {
        double amp = rng.uniform(0.1, 3.0), freq = rng.uniform(0.5, 6.0);
        auto hist = phase::HistoryBuffer::initial(
            [&](double th) {
                VectorXd v(1);
                v(0) = amp * th * std::exp(th / 2.0) * std::sin(freq * th);
                return v;
            },
            6.0, step);
        MatrixXd st(1, 129);
        for (int k = 0; k < 129; ++k)
            st(0, k) = amp * std::sin(freq * times[k]) + rng.uniform(-0.05, 0.05);
        st(0, 0) = 0.0;
        phase::PathView p{&hist, &times, &st};
        if (phase::lemma_lm1_check(p, rng.uniform(0.0, 2.0), w6, step).holds) ++held;
    }
    if (held != 100) pass = false;

    report(3, "varpi = 1/2, ramp-history norm, segment-norm inequality x100", pass,
           "varpi err " + fnum(std::fabs(vp - 0.5)) + ", ramp err " +
               fnum(std::fabs(got - expected)) + ", " + std::to_string(held) + "/100 held");
}

// ---- criterion 4: solver -------------------------------------------------------

solver::ProblemSpec one_mode(double q, double lambda, double dt, double c_force) {
    solver::ProblemSpec p;
    p.q = q;
    p.hurst = 0.75;
    p.op = ml::SpectralOperator::from_eigenvalues({lambda});
    p.partition = solver::TimePartition::from_points({1.0}, dt);
    p.weight = phase::make_weight([](double e) { return std::exp(2.0 * e); }, 1e-9, 4.0);
    p.offset_step = 1.0 / 64.0;
    p.initial_history = phase::HistoryBuffer::zero(1, 4.0, 1.0 / 64.0);
    p.drift = [c_force](const solver::SegmentContext&) {
        VectorXd v(1);
        v(0) = c_force;
        return v;
    };
    p.diffusion = [](const solver::SegmentContext&) { return MatrixXd::Zero(1, 1); };
    p.sigma = [](double) { return MatrixXd::Zero(1, 1); };
    p.q1 = noise::QStructure::constant(1, 1.0);
    p.q2 = noise::QStructure::constant(1, 1.0);
    return p;
}

void criterion_4() {
    Timer timer;
    bool pass = true;
    std::string detail;

    // constant forcing at dt = 1/256 within 1e-4
    {
        auto p = one_mode(0.75, 0.0, 1.0 / 256.0, 1.3);
        auto traj = solver::simulate(p, 1);
        double exact = 1.3 / std::tgamma(1.75);
        double err = std::fabs(traj.states(0, traj.times.size() - 1) - exact);
        detail += "const-forcing err " + fnum(err);
        if (err > 1e-4) pass = false;
    }
    // first-order refinement ratio in [1.5, 2.5]
    {
        double ends[4];
        for (int lev = 0; lev < 4; ++lev) {
            auto p = one_mode(0.6, -4.0, 1.0 / (64 << lev), 1.0);
            ends[lev] = solver::simulate(p, 1).states.col(64 << lev)(0);
        }
        for (int lev = 2; lev < 4; ++lev) {
            double ratio = std::fabs(ends[lev - 2] - ends[lev - 1]) /
                           std::fabs(ends[lev - 1] - ends[lev]);
            detail += ", ratio " + fnum(ratio);
            if (!(ratio >= 1.5 && ratio <= 2.5)) pass = false;
        }
    }
    // Picard contraction rate under the ledger bound
    {
        scenario::ScenarioParams sp;
        sp.name = "heat5";
        sp.modes = 4;
        sp.partition_points = {1};
        sp.dt = 1.0 / 128.0;
        sp.f_scale = 0.3;
        sp.g_scale = 0.0;
        sp.sigma_scale = 0.0;
        sp.picard_tol = 1e-26;
        auto built = scenario::build(sp);
        auto bounds = ml::operator_bounds(built.problem.q, built.problem.op, 1.0, 2000);
        auto led = solver::ledger_evaluate(built.problem, bounds, 1.0);
        bool ok = led.contraction_ok();
        auto traj = solver::simulate(built.problem, 1);
        const auto& res = traj.stats.front().residuals;
        double worst_ratio = 0.0;
        for (std::size_t k = 2; k + 1 < res.size(); ++k) {
            if (res[k + 1] < 1e-24) break;
            worst_ratio = std::max(worst_ratio, res[k + 1] / res[k]);
        }
        detail += ", contraction " + fnum(worst_ratio) + " vs L_R " + fnum(*led.l_r);
        if (!ok || worst_ratio > *led.l_r + 0.1) pass = false;
    }
    // zero input -> exactly zero trajectory
    {
        auto p = one_mode(0.75, -1.0, 1.0 / 64.0, 0.0);
        if (solver::simulate(p, 5).states.cwiseAbs().maxCoeff() != 0.0) pass = false;
    }
    double secs = timer.seconds();
    if (secs >= 30.0) pass = false;
    report(4, "solver analytic case, refinement order, contraction, zero input", pass,
           detail + ", " + fnum(secs) + " s");
}

// ---- criterion 5: ledger arithmetic --------------------------------------------

void criterion_5() {
    bool pass = true;
    double worst = 0.0;
    oracles::TestRng rng(555);
    for (int set = 0; set < 10; ++set) {
        solver::ProblemSpec p;
        p.q = rng.uniform(0.55, 0.95);
        p.hurst = rng.uniform(0.55, 0.95);
        p.op = ml::SpectralOperator::from_eigenvalues({-1.0});
        p.partition = solver::TimePartition::from_points({1, 2, 3, 4, 5}, 1.0 / 8.0);
        p.weight = phase::make_weight([](double e) { return std::exp(2.0 * e); }, 1e-9, 6.0);
        p.offset_step = 1.0 / 32.0;
        p.initial_history = phase::HistoryBuffer::initial(
            [&](double th) {
                VectorXd v(1);
                v(0) = -th * std::exp(2.0 * th);
                return v;
            },
            6.0, 1.0 / 32.0);
        p.drift = [](const solver::SegmentContext&) { return VectorXd::Zero(1); };
        p.diffusion = [](const solver::SegmentContext&) { return MatrixXd::Zero(1, 1); };
        p.sigma = [](double) { return MatrixXd::Zero(1, 1); };
        p.impulses.assign(2, [](const solver::SegmentContext&) { return VectorXd::Zero(1); });
        p.q1 = noise::QStructure::constant(1, 1.0);
        p.q2 = noise::QStructure::constant(1, 1.0);
        double nf = rng.uniform(0.0, 2.0), ng = rng.uniform(0.0, 2.0);
        double lk1 = rng.uniform(0.0, 2.0), lk2 = rng.uniform(0.0, 2.0);
        double x1 = rng.uniform(0.0, 2.0), x2 = rng.uniform(0.0, 2.0);
        double u1 = rng.uniform(0.0, 2.0), u2 = rng.uniform(0.0, 2.0);
        double ls = rng.uniform(0.0, 2.0), r = rng.uniform(0.0, 3.0);
        p.declared.n_f = nf;
        p.declared.n_g = ng;
        p.declared.l_k = {lk1, lk2};
        p.declared.xi1_star = x1;
        p.declared.xi2_star = x2;
        p.declared.upsilon = {u1, u2};
        p.declared.lambda_sigma = ls;
        ml::PropagatorBounds bounds{rng.uniform(1.0, 2.0), rng.uniform(0.5, 1.5), 5.0};

        auto led = solver::ledger_evaluate(p, bounds, r);

        // independent transcription of the theorem formulas
        double q = p.q, h = p.hurst, vp = led.varpi, m1 = bounds.m1, m2 = bounds.m2;
        double phi2 = led.phi_norm * led.phi_norm;
        auto pair_at = [&](double ta) {
            return nf * std::pow(ta, 2 * q) / (q * q) +
                   ng * std::pow(ta, 2 * q - 1) / (2 * q - 1);
        };
        double eta0 = 2 * m2 * m2 * vp * vp * pair_at(1.0);
        double eta1 = 3 * m1 * m1 * lk1 * vp * vp + 3 * m2 * m2 * vp * vp * pair_at(3.0);
        double eta2 = 3 * m1 * m1 * lk2 * vp * vp + 3 * m2 * m2 * vp * vp * pair_at(5.0);
        double lr = std::max({eta0, vp * vp * lk1, vp * vp * lk2, eta1, eta2});
        double lhr = 2 * m2 * m2 * vp * vp * pair_at(5.0);
        double base = 8.0 * (phi2 + vp * vp * r);
        double l1 = x1 * base, l2 = x2 * base, l3 = base;
        auto ktail = [&](double ta) {
            return l1 / (q * q) + l2 / (ta * (2 * q - 1)) +
                   2 * h * ls * std::pow(ta, 2 * h - 2) / (2 * q - 1);
        };
        double k0 = 3 * m2 * m2 * std::pow(1.0, 2 * q) * ktail(1.0);
        double k1 = 4 * m1 * m1 * u1 * l3 + 4 * m2 * m2 * std::pow(3.0, 2 * q) * ktail(3.0);
        double k2 = 4 * m1 * m1 * u2 * l3 + 4 * m2 * m2 * std::pow(5.0, 2 * q) * ktail(5.0);

        auto rel = [&](double a, double b) {
            return std::fabs(a - b) / std::max(1e-30, std::fabs(b));
        };
        double errs[] = {rel(*led.eta0, eta0),       rel(*led.eta_i[0], eta1),
                         rel(*led.eta_i[1], eta2),   rel(*led.l_r, lr),
                         rel(*led.l_hr, lhr),        rel(*led.lambda1, l1),
                         rel(*led.lambda2, l2),      rel(*led.lambda3, l3),
                         rel(*led.kappa0, k0),       rel(*led.kappa_i[0], k1),
                         rel(*led.kappa_i[1], k2)};
        for (double e : errs) {
            worst = std::max(worst, e);
            if (e > 1e-12) pass = false;
        }

        // linear scaling spot check: doubling N_F and N_G doubles eta0
        p.declared.n_f = 2 * nf;
        p.declared.n_g = 2 * ng;
        auto led_scaled = solver::ledger_evaluate(p, bounds, r);
        if (rel(*led_scaled.eta0, 2 * *led.eta0) > 1e-13) pass = false;
    }
    report(5, "ledger formulas vs independent hand arithmetic (10 random sets)", pass,
           "worst relative " + fnum(worst));
}

// ---- criterion 6: controllability ----------------------------------------------

void criterion_6() {
    Timer timer;
    std::string detail;
    bool pass = true;

    // (a) scalar Gramian closed form
    {
        auto zero_mode = ml::SpectralOperator::from_eigenvalues({0.0});
        auto act = control::Actuator::identity(1, 1.0);
        auto g = control::gramian(0.75, zero_mode, act, 0.0, 1.0, 256);
        double exact = 2.0 / std::pow(std::tgamma(0.75), 2);
        double err = std::fabs(g.matrix(0, 0) - exact);
        detail += "gramian err " + fnum(err);
        if (err > 1e-4) pass = false;
    }

    // (b) discrete steering identity in the deterministic linear case
    {
        scenario::ScenarioParams sp;
        sp.name = "heat5-linear";
        sp.modes = 8;
        sp.dt = 1.0 / 256.0;
        sp.partition_points = {1};
        auto built = scenario::build(sp);
        noise::NoiseRealization nr;
        nr.grid = built.problem.global_grid();
        nr.wiener = MatrixXd::Zero(8, nr.grid.size());
        nr.fbm = MatrixXd::Zero(8, nr.grid.size());
        control::ClosedLoopEngine engine(built.problem, built.actuator, built.target);
        double worst = 0.0;
        for (double lam : {1e-1, 1e-3, 1e-5}) {
            auto res = engine.run(lam, nr);
            auto delta = control::resolvent_delta(lam, engine.interval_gramian(0));
            VectorXd lhs = res.trajectory.states.col(res.trajectory.times.size() - 1) -
                           built.target.per_interval[0];
            VectorXd rhs = -lam * delta.apply(res.p_values[0]);
            worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
        }
        detail += ", identity " + fnum(worst);
        if (worst > 1e-8) pass = false;
    }

    // (c) noiseless sweep vs the closed-form oracle
    {
        scenario::ScenarioParams sp;
        sp.name = "heat5-linear";
        sp.modes = 8;
        sp.dt = 1.0 / 1024.0;
        sp.partition_points = {1};
        auto built = scenario::build(sp);
        std::vector<double> lambdas = {1e-1, 1e-2, 1e-3, 1e-4, 1e-5};
        auto rows =
            control::lambda_sweep(built.problem, built.actuator, built.target, lambdas, 1, 7);
        double worst_rel = 0.0;
        double prev = std::numeric_limits<double>::infinity();
        for (std::size_t li = 0; li < lambdas.size(); ++li) {
            double closed = 0.0;
            for (int n = 0; n < 8; ++n) {
                double m = 1.0 / (2.0 * built.problem.q - 1.0);
                auto f = [&](double w) {
                    double u = std::pow(w, m);
                    double e = ml::ml_eval(
                        {built.problem.q, built.problem.q,
                         built.problem.op.eigenvalues[n] * std::pow(u, built.problem.q)});
                    return m * e * e;
                };
                double gam = oracles::adaptive_trapezoid(f, 0.0, 1.0, 1e-11);
                double zn = built.target.per_interval[0](n);
                closed += std::pow(lambdas[li] / (lambdas[li] + gam) * zn, 2);
            }
            double rel = std::fabs(rows[li].mean_sq_error - closed) / closed;
            worst_rel = std::max(worst_rel, rel);
            if (!(rows[li].mean_sq_error < prev)) pass = false;
            prev = rows[li].mean_sq_error;
            if (rel > 1e-3) pass = false;
        }
        detail += ", sweep oracle rel " + fnum(worst_rel);
    }

    // (d) noisy sweep: mean error decreases to the reported floor
    {
        scenario::ScenarioParams sp;
        sp.name = "heat5";
        sp.modes = 8;
        sp.dt = 1.0 / 64.0;
        sp.partition_points = {1, 2, 3, 4, 5};
        sp.f_scale = 0.5;
        sp.g_scale = 0.5;
        sp.sigma_scale = 0.05;
        auto built = scenario::build(sp);
        std::vector<double> lambdas = {1e-1, 1e-2, 1e-3, 1e-4, 1e-5};
        auto rows = control::lambda_sweep(built.problem, built.actuator, built.target, lambdas,
                                          1000, 90210, harness::worker_count(1000));
        const int flows = built.problem.partition.flow_count();
        double floor_val = 0.0;
        for (int i = 0; i < flows; ++i) {
            std::size_t argmin = 0;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t li = 0; li < lambdas.size(); ++li) {
                double v = rows[li * flows + i].mean_sq_error;
                if (v < best) {
                    best = v;
                    argmin = li;
                }
            }
            floor_val = std::max(floor_val, best);
            for (std::size_t li = 0; li + 1 <= argmin; ++li) {
                const auto& a = rows[li * flows + i];
                const auto& b = rows[(li + 1) * flows + i];
                if (!(b.mean_sq_error <=
                      a.mean_sq_error + 3.0 * (a.std_error + b.std_error)))
                    pass = false;
            }
        }
        detail += ", noisy floor " + fnum(floor_val);
    }

    double secs = timer.seconds();
    if (secs >= 300.0) pass = false;
    report(6, "Gramian value, steering identity, noiseless oracle sweep, noisy sweep", pass,
           detail + ", " + fnum(secs) + " s");
}

// ---- criterion 7: reproducibility ----------------------------------------------

void criterion_7() {
    namespace fs = std::filesystem;
    cfg::RunConfig config = cfg::parse_config(
        "[run]\nscenario = heat5\nseed = 31415\nreplicates = 10\n"
        "[model]\nmodes = 4\ndt = 0.03125\npartition = 1 2 3\n"
        "[scenario]\nf_scale = 0.4\ng_scale = 0.4\n"
        "[sweep]\nlambdas = 0.1 0.001\n");
    auto read_all = [](const fs::path& dir) {
        std::map<std::string, std::string> files;
        for (const auto& entry : fs::directory_iterator(dir)) {
            std::ifstream in(entry.path(), std::ios::binary);
            std::ostringstream buf;
            buf << in.rdbuf();
            files[entry.path().filename().string()] = buf.str();
        }
        return files;
    };
    fs::path base = fs::temp_directory_path() / "fracsteer_accept7";
    fs::remove_all(base);
    config.out_dir = (base / "a").string();
    harness::run("all", config);
    auto a = read_all(config.out_dir);
    config.out_dir = (base / "b").string();
    harness::run("all", config);
    auto b = read_all(config.out_dir);

    bool pass = !a.empty() && a.size() == b.size();
    for (const auto& [name, content] : a) {
        auto it = b.find(name);
        if (it == b.end() || it->second != content) pass = false;
    }
    report(7, "identical config + seed gives byte-identical CSVs", pass,
           std::to_string(a.size()) + " files compared");
}

}  // namespace

int main() {
    Timer total;
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    std::printf("%d criteria failed, total %.1f s\n", failures, total.seconds());
    return failures;
}
