#include "fracsteer/noise.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace fracsteer::noise {

namespace {

void validate_grid(const std::vector<double>& grid) {
    if (grid.size() < 2) throw std::domain_error("noise: grid needs at least two points");
    if (grid[0] != 0.0) throw std::domain_error("noise: grid must start at 0");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw std::domain_error("noise: grid must be strictly increasing");
}

constexpr std::uint64_t kWienerTag = 1;
constexpr std::uint64_t kFbmTag = 2;

}  // namespace

void QStructure::validate() const {
    if (eigenvalues.empty()) throw std::domain_error("QStructure: empty eigenvalue sequence");
    for (double v : eigenvalues)
        if (!(v >= 0.0)) throw std::domain_error("QStructure: eigenvalues must be >= 0");
}

QStructure QStructure::inverse_square(int n) {
    QStructure q;
    q.eigenvalues.resize(n);
    for (int i = 1; i <= n; ++i) q.eigenvalues[i - 1] = 1.0 / (double(i) * double(i));
    return q;
}

QStructure QStructure::constant(int n, double value) {
    QStructure q;
    q.eigenvalues.assign(n, value);
    q.validate();
    return q;
}

double x_h_constant(double hurst) {
    if (!(hurst > 0.5) || !(hurst < 1.0))
        throw std::domain_error("x_h_constant: hurst must lie in (1/2,1)");
    double num_part = hurst * (2.0 * hurst - 1.0);
    double den = num::beta_function(2.0 - 2.0 * hurst, hurst - 0.5);
    return std::sqrt(num_part / den);
}

FbmParams FbmParams::make(double hurst) {
    FbmParams p;
    p.hurst = hurst;
    p.c_h = x_h_constant(hurst);
    return p;
}

double kernel_K(const FbmParams& params, double t, double e) {
    if (!(e > 0.0)) throw std::domain_error("kernel_K: e must be positive");
    if (t <= e) return 0.0;
    const double h = params.hurst;
    const double p = h - 0.5;  // in (0, 1/2)
    // u = (tau - e)^p  =>  integral = (1/p) int_0^U (e + u^{1/p})^p du, U = (t-e)^p
    const double upper = std::pow(t - e, p);
    auto f = [&](double u) { return std::pow(e + std::pow(u, 1.0 / p), p); };
    double integral = num::gauss_panels(f, 0.0, upper, 32, 8) / p;
    return params.c_h * std::pow(e, 0.5 - h) * integral;
}

FbmCholesky::FbmCholesky(double hurst, std::vector<double> grid) : grid_(std::move(grid)) {
    validate_grid(grid_);
    if (!(hurst > 0.5) || !(hurst < 1.0))
        throw std::domain_error("fbm: hurst must lie in (1/2,1)");
    const int n = static_cast<int>(grid_.size()) - 1;
    Eigen::MatrixXd cov(n, n);
    const double th = 2.0 * hurst;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double ti = grid_[i + 1], tj = grid_[j + 1];
            double v = 0.5 * (std::pow(ti, th) + std::pow(tj, th) - std::pow(std::fabs(ti - tj), th));
            cov(i, j) = v;
            cov(j, i) = v;
        }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
        // fine grids make the covariance nearly singular
        cov.diagonal().array() += 1e-12;
        llt.compute(cov);
        if (llt.info() != Eigen::Success)
            throw NumericError("fbm_paths_cholesky: covariance not positive definite after jitter");
    }
    chol_ = llt.matrixL();
}

Eigen::MatrixXd FbmCholesky::sample(int mode_count, std::uint64_t seed) const {
    const int n = static_cast<int>(grid_.size()) - 1;
    Eigen::MatrixXd paths = Eigen::MatrixXd::Zero(mode_count, n + 1);
    for (int m = 0; m < mode_count; ++m) {
        num::GaussianStream g(num::mix_seed(seed, m));
        Eigen::VectorXd xi(n);
        for (int i = 0; i < n; ++i) xi(i) = g.next();
        paths.row(m).tail(n) = (chol_ * xi).transpose();
    }
    return paths;
}

FbmVolterra::FbmVolterra(double hurst, std::vector<double> grid) : grid_(std::move(grid)) {
    validate_grid(grid_);
    FbmParams params = FbmParams::make(hurst);
    const int n = static_cast<int>(grid_.size()) - 1;
    kernel_ = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < n; ++k) {
        double tk = grid_[k + 1];
        for (int j = 0; j <= k; ++j) {
            double mid = 0.5 * (grid_[j] + grid_[j + 1]);
            kernel_(k, j) = kernel_K(params, tk, mid);
        }
    }
}

Eigen::MatrixXd FbmVolterra::sample(int mode_count, std::uint64_t seed) const {
    const int n = static_cast<int>(grid_.size()) - 1;
    Eigen::MatrixXd paths = Eigen::MatrixXd::Zero(mode_count, n + 1);
    for (int m = 0; m < mode_count; ++m) {
        num::GaussianStream g(num::mix_seed(seed, m));
        Eigen::VectorXd dw(n);
        for (int j = 0; j < n; ++j) dw(j) = std::sqrt(grid_[j + 1] - grid_[j]) * g.next();
        paths.row(m).tail(n) = (kernel_ * dw).transpose();
    }
    return paths;
}

Eigen::MatrixXd fbm_paths_cholesky(double hurst, const std::vector<double>& grid, int mode_count,
                                   std::uint64_t seed) {
    return FbmCholesky(hurst, grid).sample(mode_count, seed);
}

Eigen::MatrixXd fbm_paths_volterra(double hurst, const std::vector<double>& grid, int mode_count,
                                   std::uint64_t seed) {
    return FbmVolterra(hurst, grid).sample(mode_count, seed);
}

Eigen::MatrixXd wiener_paths(const std::vector<double>& grid, int mode_count, std::uint64_t seed) {
    validate_grid(grid);
    const int n = static_cast<int>(grid.size()) - 1;
    Eigen::MatrixXd paths = Eigen::MatrixXd::Zero(mode_count, n + 1);
    for (int m = 0; m < mode_count; ++m) {
        num::GaussianStream g(num::mix_seed(seed, m));
        double acc = 0.0;
        for (int j = 0; j < n; ++j) {
            acc += std::sqrt(grid[j + 1] - grid[j]) * g.next();
            paths(m, j + 1) = acc;
        }
    }
    return paths;
}

NoiseRealization make_realization(double hurst, const std::vector<double>& grid,
                                  int wiener_modes, int fbm_modes, std::uint64_t seed,
                                  bool volterra_fbm) {
    NoiseRealization r;
    r.grid = grid;
    r.seed = seed;
    r.wiener = wiener_paths(grid, wiener_modes, num::mix_seed(seed, kWienerTag));
    std::uint64_t fseed = num::mix_seed(seed, kFbmTag);
    r.fbm = volterra_fbm ? fbm_paths_volterra(hurst, grid, fbm_modes, fseed)
                         : fbm_paths_cholesky(hurst, grid, fbm_modes, fseed);
    return r;
}

namespace {

double stieltjes_sum(const Eigen::MatrixXd& values, const Eigen::MatrixXd& paths,
                     const std::vector<double>& grid, const QStructure& q, const char* what) {
    q.validate();
    const int steps = static_cast<int>(grid.size()) - 1;
    if (values.rows() != steps || values.cols() != q.dim() || paths.rows() < q.dim())
        throw std::domain_error(std::string(what) + ": grid/mode dimensions mismatch");
    num::Kahan<double> acc;
    for (int i = 0; i < q.dim(); ++i) {
        double w = std::sqrt(q.eigenvalues[i]);
        for (int j = 0; j < steps; ++j)
            acc.add(w * values(j, i) * (paths(i, j + 1) - paths(i, j)));
    }
    return acc.sum;
}

}  // namespace

double ito_integral(const Eigen::MatrixXd& integrand, const NoiseRealization& r,
                    const QStructure& q1) {
    return stieltjes_sum(integrand, r.wiener, r.grid, q1, "ito_integral");
}

double fbm_integral(const Eigen::MatrixXd& psi, const NoiseRealization& r,
                    const QStructure& q2) {
    return stieltjes_sum(psi, r.fbm, r.grid, q2, "fbm_integral");
}

void export_csv(const NoiseRealization& r, std::ostream& os) {
    if (r.wiener.rows() != r.fbm.rows())
        throw std::domain_error("export_csv: wiener/fbm mode counts differ");
    os << "t,mode,wiener,fbm\n";
    char buf[96];
    for (std::size_t k = 0; k < r.grid.size(); ++k) {
        for (int m = 0; m < r.wiener.rows(); ++m) {
            std::snprintf(buf, sizeof(buf), "%.17g,%d,%.17g,%.17g\n", r.grid[k], m,
                          r.wiener(m, k), r.fbm(m, k));
            os << buf;
        }
    }
}

}  // namespace fracsteer::noise
