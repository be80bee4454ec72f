#pragma once

// Q-Wiener and Q-fractional-Brownian path generation (Hurst H in (1/2,1)) on a
// time grid, plus the stochastic integrals used by the mild solution:
// left-point Ito sums against the Wiener paths and pathwise Riemann-Stieltjes
// sums against the fBm paths.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "fracsteer/numerics.hpp"

namespace fracsteer::noise {

struct QStructure {
    std::vector<double> eigenvalues;  // all >= 0; finite trace by construction

    int dim() const { return static_cast<int>(eigenvalues.size()); }
    void validate() const;
    // default trace-class sequence lambda_i = 1/i^2
    static QStructure inverse_square(int n);
    static QStructure constant(int n, double value);
};

struct FbmParams {
    double hurst = 0.75;
    double c_h = 0.0;  // kernel normalization X_H

    static FbmParams make(double hurst);
};

// X_H = [H(2H-1) / Beta(2-2H, H-1/2)]^{1/2}; H in the open interval (1/2,1).
double x_h_constant(double hurst);

// R(t,s) = (t^{2H} + s^{2H} - |t-s|^{2H}) / 2
inline double fbm_covariance(double hurst, double t, double s) {
    double th = 2.0 * hurst;
    return 0.5 * (std::pow(t, th) + std::pow(s, th) - std::pow(std::fabs(t - s), th));
}

// Volterra kernel: 0 for t <= e, otherwise
//   X_H e^{1/2-H} int_e^t (tau-e)^{H-3/2} tau^{H-1/2} dtau,
// the endpoint singularity removed by the substitution u = (tau-e)^{H-1/2}.
// Relative error ~1e-6. e must be positive.
double kernel_K(const FbmParams& params, double t, double e);

struct NoiseRealization {
    std::vector<double> grid;  // t_0 = 0 < t_1 < ... strictly increasing
    Eigen::MatrixXd wiener;    // modes x grid points, rows start at 0
    Eigen::MatrixXd fbm;       // modes x grid points, rows start at 0
    std::uint64_t seed = 0;

    int steps() const { return static_cast<int>(grid.size()) - 1; }
};

// Exact-covariance generator: Cholesky factor of
// R(t,s) = (t^{2H} + s^{2H} - |t-s|^{2H}) / 2 on the positive grid points,
// reusable across replicates.
class FbmCholesky {
public:
    FbmCholesky(double hurst, std::vector<double> grid);
    // mode_count independent paths; per-mode streams derived from (seed, mode)
    Eigen::MatrixXd sample(int mode_count, std::uint64_t seed) const;
    const std::vector<double>& grid() const { return grid_; }

private:
    std::vector<double> grid_;
    Eigen::MatrixXd chol_;  // lower factor on grid[1..]
};

// Kernel-representation generator: B^H(t_k) = sum_j K_H(t_k, mid_j) dW_j with
// one set of Wiener increments shared across all t_k of a path.
class FbmVolterra {
public:
    FbmVolterra(double hurst, std::vector<double> grid);
    Eigen::MatrixXd sample(int mode_count, std::uint64_t seed) const;
    const std::vector<double>& grid() const { return grid_; }

private:
    std::vector<double> grid_;
    Eigen::MatrixXd kernel_;  // kernel_(k, j) = K_H(t_k, mid_j)
};

Eigen::MatrixXd fbm_paths_cholesky(double hurst, const std::vector<double>& grid, int mode_count,
                                   std::uint64_t seed);
Eigen::MatrixXd fbm_paths_volterra(double hurst, const std::vector<double>& grid, int mode_count,
                                   std::uint64_t seed);
Eigen::MatrixXd wiener_paths(const std::vector<double>& grid, int mode_count, std::uint64_t seed);

// Full mixed realization; wiener and fbm streams are independent
// (tags 1 and 2 of the seed mix).
NoiseRealization make_realization(double hurst, const std::vector<double>& grid,
                                  int wiener_modes, int fbm_modes, std::uint64_t seed,
                                  bool volterra_fbm = false);

// Left-point Ito sum sum_j sum_i sqrt(lambda_i) integrand(j,i) dW_i(j).
// integrand: steps x modes, values at the left endpoint of each grid step.
double ito_integral(const Eigen::MatrixXd& integrand, const NoiseRealization& r,
                    const QStructure& q1);

// Pathwise Riemann-Stieltjes sum against the fBm paths (valid for H > 1/2,
// deterministic integrand).
double fbm_integral(const Eigen::MatrixXd& psi, const NoiseRealization& r,
                    const QStructure& q2);

// CSV columns: t,mode,wiener,fbm (equal mode counts required).
void export_csv(const NoiseRealization& r, std::ostream& os);

}  // namespace fracsteer::noise
