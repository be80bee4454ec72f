#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fracsteer/controllability.hpp"
#include "fracsteer/scenario.hpp"
#include "oracles.hpp"

using namespace fracsteer;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// per-mode Gramian entry by independent quadrature: substitution v = u^{2q-1}
// turns int_0^T u^{2q-2} E_{q,q}(lambda u^q)^2 du into a smooth integral
double gramian_mode_oracle(double q, double lambda, double span, double tol = 1e-9) {
    double m = 1.0 / (2.0 * q - 1.0);
    auto f = [&](double w) {
        double u = std::pow(w, m);
        double e = ml::ml_eval({q, q, lambda * std::pow(u, q)});
        return m * e * e;
    };
    return oracles::adaptive_trapezoid(f, 0.0, std::pow(span, 1.0 / m), tol);
}

}  // namespace

TEST_CASE("gramian: closed form, diagonal oracle, domain errors") {
    auto zero_mode = ml::SpectralOperator::from_eigenvalues({0.0});
    auto act1 = control::Actuator::identity(1, 1.0);

    // lambda = 0, A = 1, q = 0.75, [0,1]: Gamma = 2 / Gamma(3/4)^2
    auto g = control::gramian(0.75, zero_mode, act1, 0.0, 1.0, 256);
    double exact = 2.0 / std::pow(std::tgamma(0.75), 2);
    CHECK(g.matrix(0, 0) == doctest::Approx(exact).epsilon(1e-10));

    // zero actuator gives the zero matrix
    control::Actuator zero_act;
    zero_act.matrix = MatrixXd::Zero(1, 1);
    auto g0 = control::gramian(0.75, zero_mode, zero_act, 0.0, 1.0, 64);
    CHECK(g0.matrix.cwiseAbs().maxCoeff() == 0.0);

    // diagonal case: per-mode 1-D quadrature oracle vs matrix assembly
    auto op = ml::SpectralOperator::dirichlet_laplacian(3);
    auto act3 = control::Actuator::identity(3, 1.0);
    auto g3 = control::gramian(0.75, op, act3, 0.0, 1.0, 512);
    for (int n = 0; n < 3; ++n) {
        double oracle = gramian_mode_oracle(0.75, op.eigenvalues[n], 1.0);
        CHECK(g3.matrix(n, n) == doctest::Approx(oracle).epsilon(1e-6));
    }
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (i != j) CHECK(g3.matrix(i, j) == 0.0);  // diagonal actuator

    CHECK_THROWS_AS(control::gramian(0.5, op, act3, 0.0, 1.0, 64), std::domain_error);
    CHECK_THROWS_AS(control::gramian(0.75, op, act3, 1.0, 1.0, 64), std::domain_error);
}

TEST_CASE("gramian: symmetric PSD for a full actuator") {
    auto op = ml::SpectralOperator::dirichlet_laplacian(4);
    control::Actuator act;
    act.matrix = MatrixXd(4, 2);
    act.matrix << 1.0, 0.2, -0.5, 1.0, 0.3, 0.3, 0.0, -1.0;
    auto g = control::gramian(0.8, op, act, 0.0, 1.0, 128);
    CHECK((g.matrix - g.matrix.transpose()).cwiseAbs().maxCoeff() <= 1e-14);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(g.matrix);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
}

TEST_CASE("resolvent_delta: trivial cases, dense oracle, spectral bound") {
    auto zero_mode = ml::SpectralOperator::from_eigenvalues({0.0});
    control::GramianOp gz;
    gz.matrix = MatrixXd::Zero(3, 3);
    auto dz = control::resolvent_delta(0.25, gz);
    CHECK((dz.dense() - 4.0 * MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-12);

    control::GramianOp g1;
    g1.matrix = MatrixXd::Ones(1, 1);
    CHECK(control::resolvent_delta(1.0, g1).apply(VectorXd::Ones(1))(0) ==
          doctest::Approx(0.5).epsilon(1e-14));

    // random SPD Gamma vs dense inversion
    oracles::TestRng rng(17);
    MatrixXd b(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) b(i, j) = rng.uniform(-1.0, 1.0);
    control::GramianOp gr;
    gr.matrix = b * b.transpose();
    auto d = control::resolvent_delta(1e-3, gr);
    MatrixXd shifted = gr.matrix + 1e-3 * MatrixXd::Identity(4, 4);
    MatrixXd direct = shifted.inverse();
    CHECK((d.dense() - direct).cwiseAbs().maxCoeff() <= 1e-8);

    // ||Lambda Delta v|| <= ||v||
    for (double lam : {1e-4, 1e-2, 1.0}) {
        auto dd = control::resolvent_delta(lam, gr);
        for (int c = 0; c < 10; ++c) {
            VectorXd v(4);
            for (int i = 0; i < 4; ++i) v(i) = rng.uniform(-2.0, 2.0);
            CHECK((lam * dd.apply(v)).norm() <= v.norm() * (1.0 + 1e-12));
        }
    }
    CHECK_THROWS_AS(control::resolvent_delta(0.0, gr), std::domain_error);
    (void)zero_mode;
}

namespace {

scenario::BuiltScenario linear_bed(int modes, double dt, std::vector<double> partition = {1}) {
    scenario::ScenarioParams sp;
    sp.name = "heat5-linear";
    sp.modes = modes;
    sp.dt = dt;
    sp.partition_points = std::move(partition);
    return scenario::build(sp);
}

noise::NoiseRealization silent_noise(const solver::ProblemSpec& p) {
    noise::NoiseRealization nr;
    nr.grid = p.global_grid();
    nr.wiener = MatrixXd::Zero(p.q1.dim(), nr.grid.size());
    nr.fbm = MatrixXd::Zero(p.q2.dim(), nr.grid.size());
    return nr;
}

}  // namespace

TEST_CASE("residual_p: zero coefficients, affine target, constant drift") {
    auto built = linear_bed(4, 1.0 / 64.0);
    auto nr = silent_noise(built.problem);
    auto traj = solver::simulate(built.problem, nr);

    VectorXd target = VectorXd::LinSpaced(4, 1.0, 4.0);
    VectorXd p0 = control::residual_p(built.problem, 0, traj, nr, target);
    CHECK((p0 - target).cwiseAbs().maxCoeff() <= 1e-14);

    // affine in the target with unit coefficient
    VectorXd target2 = 2.0 * target;
    VectorXd p1 = control::residual_p(built.problem, 0, traj, nr, target2);
    CHECK((p1 - p0 - (target2 - target)).cwiseAbs().maxCoeff() <= 1e-14);

    // constant drift: p = target - analytic drift value
    auto pr = built.problem;
    const double c = 0.9, q = pr.q;
    pr.drift = [c](const solver::SegmentContext&) {
        return (c * VectorXd::Ones(4)).eval();
    };
    auto traj2 = solver::simulate(pr, nr);
    VectorXd p2 = control::residual_p(pr, 0, traj2, nr, VectorXd::Zero(4));
    double drift_exact = c / std::tgamma(1.0 + q);  // lambda = 0 only in mode... (heat modes differ)
    // use the simulated terminal state itself as the cross-check instead
    CHECK((p2 + traj2.states.col(traj2.times.size() - 1)).cwiseAbs().maxCoeff() <= 1e-9);
    (void)drift_exact;
}

TEST_CASE("control_law: trivia and the scalar formula") {
    auto zero_mode = ml::SpectralOperator::from_eigenvalues({0.0});
    auto act = control::Actuator::identity(1, 1.0);
    auto g = control::gramian(0.75, zero_mode, act, 0.0, 1.0, 64);
    auto delta = control::resolvent_delta(0.1, g);

    CHECK(control::control_law(0.4, 1.0, delta, VectorXd::Zero(1), 0.75, zero_mode, act).norm() ==
          0.0);
    VectorXd p1 = VectorXd::Ones(1);
    double expect = ml::propagator_S(0.75, 0.0, 0.6) * 1.0 / (0.1 + g.matrix(0, 0));
    CHECK(control::control_law(0.4, 1.0, delta, p1, 0.75, zero_mode, act)(0) ==
          doctest::Approx(expect).epsilon(1e-12));
    CHECK_THROWS_AS(control::control_law(1.0, 1.0, delta, p1, 0.75, zero_mode, act),
                    std::domain_error);

    control::Actuator zero_act;
    zero_act.matrix = MatrixXd::Zero(1, 1);
    auto gz = control::gramian(0.75, zero_mode, zero_act, 0.0, 1.0, 64);
    auto dz = control::resolvent_delta(0.1, gz);
    CHECK(control::control_law(0.4, 1.0, dz, p1, 0.75, zero_mode, zero_act).norm() == 0.0);
}

TEST_CASE("closed loop: deterministic linear case satisfies the discrete identity") {
    auto built = linear_bed(8, 1.0 / 256.0);
    auto nr = silent_noise(built.problem);
    control::ClosedLoopEngine engine(built.problem, built.actuator, built.target);

    for (double lam : {1e-1, 1e-3}) {
        auto res = engine.run(lam, nr);
        // z(T) - target = -Lambda Delta p, and squared error = sum (Lambda z_n/(Lambda+Gamma_n))^2
        auto delta = control::resolvent_delta(lam, engine.interval_gramian(0));
        VectorXd lhs = res.trajectory.states.col(res.trajectory.times.size() - 1) -
                       built.target.per_interval[0];
        VectorXd rhs = -lam * delta.apply(res.p_values[0]);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-8);

        double closed = 0.0;
        const auto& gm = engine.interval_gramian(0).matrix;
        for (int n = 0; n < 8; ++n) {
            double zn = built.target.per_interval[0](n);
            closed += std::pow(lam / (lam + gm(n, n)) * zn, 2);
        }
        CHECK(res.terminal_sq_error[0] == doctest::Approx(closed).epsilon(1e-10));
    }
}

TEST_CASE("closed loop: noiseless steering error is componentwise monotone in lambda") {
    auto built = linear_bed(6, 1.0 / 128.0);
    auto nr = silent_noise(built.problem);
    control::ClosedLoopEngine engine(built.problem, built.actuator, built.target);
    VectorXd prev = VectorXd::Constant(6, std::numeric_limits<double>::infinity());
    for (double lam : {1e-1, 1e-2, 1e-3, 1e-4}) {
        auto res = engine.run(lam, nr);
        VectorXd err = (res.trajectory.states.col(res.trajectory.times.size() - 1) -
                        built.target.per_interval[0])
                           .cwiseAbs();
        for (int n = 0; n < 6; ++n) CHECK(err(n) < prev(n));
        prev = err;
    }
}

TEST_CASE("closed loop: huge regularization leaves the system uncontrolled") {
    auto built = linear_bed(4, 1.0 / 64.0);
    // give the problem some forcing so the uncontrolled path is nonzero
    auto pr = built.problem;
    pr.drift = [](const solver::SegmentContext&) {
        return (0.5 * VectorXd::Ones(4)).eval();
    };
    auto nr = silent_noise(pr);
    auto uncontrolled = solver::simulate(pr, nr);
    control::ClosedLoopEngine engine(pr, built.actuator, built.target);
    auto res = engine.run(1e9, nr);
    CHECK((res.trajectory.states - uncontrolled.states).cwiseAbs().maxCoeff() <= 1e-7);
}

TEST_CASE("closed loop: zero target and zero forcing stay identically zero") {
    scenario::ScenarioParams sp;
    sp.name = "zero";
    sp.modes = 3;
    sp.dt = 1.0 / 32.0;
    sp.partition_points = {1, 2, 3};
    auto built = scenario::build(sp);
    auto nr = silent_noise(built.problem);
    control::ClosedLoopEngine engine(built.problem, built.actuator, built.target);
    auto res = engine.run(1e-3, nr);
    CHECK(res.trajectory.states.cwiseAbs().maxCoeff() == 0.0);
    for (double e : res.terminal_sq_error) CHECK(e == 0.0);
}

TEST_CASE("lambda sweep: noiseless errors strictly decrease and match the oracle") {
    auto built = linear_bed(8, 1.0 / 512.0);
    std::vector<double> lambdas = {1e-1, 1e-2, 1e-3, 1e-4, 1e-5};
    auto rows = control::lambda_sweep(built.problem, built.actuator, built.target, lambdas, 1, 7);
    REQUIRE(rows.size() == lambdas.size());

    std::vector<double> gamma_oracle(8);
    for (int n = 0; n < 8; ++n)
        gamma_oracle[n] = gramian_mode_oracle(built.problem.q,
                                              built.problem.op.eigenvalues[n], 1.0, 3e-8);

    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t li = 0; li < lambdas.size(); ++li) {
        double closed = 0.0;
        for (int n = 0; n < 8; ++n) {
            double zn = built.target.per_interval[0](n);
            closed += std::pow(lambdas[li] / (lambdas[li] + gamma_oracle[n]) * zn, 2);
        }
        CHECK(rows[li].mean_sq_error == doctest::Approx(closed).epsilon(1e-3));
        CHECK(rows[li].mean_sq_error < prev);
        prev = rows[li].mean_sq_error;
    }

    // scalar ratio structure err(lambda)/err(10 lambda) for a single mode
    auto single = linear_bed(1, 1.0 / 512.0);
    auto rows1 = control::lambda_sweep(single.problem, single.actuator, single.target,
                                       {1e-2, 1e-3}, 1, 7);
    double gam = gramian_mode_oracle(single.problem.q, single.problem.op.eigenvalues[0], 1.0, 1e-10);
    double z0 = single.target.per_interval[0](0);
    double expect_ratio = std::pow((1e-3 / (1e-3 + gam)) / (1e-2 / (1e-2 + gam)), 2);
    CHECK(rows1[1].mean_sq_error / rows1[0].mean_sq_error ==
          doctest::Approx(expect_ratio).epsilon(1e-6));
    (void)z0;

    CHECK_THROWS_AS(control::lambda_sweep(built.problem, built.actuator, built.target,
                                          {1e-3, 1e-2}, 1, 7),
                    std::domain_error);
}

TEST_CASE("lambda sweep: noisy errors decrease toward a floor (smoke scale)") {
    scenario::ScenarioParams sp;
    sp.modes = 4;
    sp.dt = 1.0 / 32.0;
    sp.partition_points = {1};
    sp.sigma_scale = 0.02;
    sp.g_scale = 0.3;
    auto built = scenario::build(sp);
    std::vector<double> lambdas = {1e-1, 1e-3};
    auto rows = control::lambda_sweep(built.problem, built.actuator, built.target, lambdas, 40,
                                      2024, 1);
    CHECK(rows[1].mean_sq_error <=
          rows[0].mean_sq_error + 3.0 * (rows[0].std_error + rows[1].std_error));
    CHECK(rows[1].mean_sq_error > 0.0);

    std::ostringstream a, b;
    control::export_csv(rows, a);
    auto rows2 = control::lambda_sweep(built.problem, built.actuator, built.target, lambdas, 40,
                                       2024, 1);
    control::export_csv(rows2, b);
    CHECK(a.str() == b.str());
    CHECK(a.str().substr(0, 50) ==
          "lambda,interval_index,mean_sq_error,std_error,repl");
}
