#pragma once

// Two-parameter Mittag-Leffler function E_{alpha,beta}(z) for real z, and the
// per-eigenmode propagators of the linear Caputo problem
//
//   T_q(t) = E_q(lambda t^q),   S_q(t) = t^{q-1} E_{q,q}(lambda t^q),
//
// together with the uniform bounds M1 = sup |T_q|, M2 = sup t^{1-q}|S_q|
// measured on a dense log grid.

#include <vector>

#include "fracsteer/numerics.hpp"

namespace fracsteer::ml {

struct MlArgs {
    double alpha;  // in (0, 2]
    double beta;   // > 0
    double z;      // finite real
};

// E_{alpha,beta}(z). Absolute error <= 1e-10 for z in [-50, 5] (and well beyond
// on the negative axis for alpha in (1/2,1)). Throws std::domain_error for
// invalid parameters or z past the positive divergence threshold.
double ml_eval(const MlArgs& args);

struct SpectralOperator {
    int dim = 0;
    std::vector<double> eigenvalues;  // sorted non-increasing, all <= 0
    std::string basis_id = "sine";

    static SpectralOperator dirichlet_laplacian(int n_modes);  // lambda_n = -n^2
    static SpectralOperator from_eigenvalues(std::vector<double> lambdas, std::string basis = "custom");
    void validate() const;
};

struct PropagatorBounds {
    double m1 = 0.0;
    double m2 = 0.0;
    double horizon = 0.0;
};

// E_q(lambda t^q); equals 1 at t = 0. Requires q in (1/2,1), lambda <= 0.
double propagator_T(double q, double lambda, double t);

// t^{q-1} E_{q,q}(lambda t^q); kernel is singular at t = 0, so t > 0 required.
double propagator_S(double q, double lambda, double t);

// Grid-measured bounds over 10^4 log-spaced times in (0, T] and all eigenvalues.
PropagatorBounds operator_bounds(double q, const SpectralOperator& spec, double horizon,
                                 int grid_points = 10000);

}  // namespace fracsteer::ml
