#pragma once

// Shared numeric utilities: gamma-function helpers, compensated summation,
// quadrature building blocks, deterministic RNG streams, grid helpers.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fracsteer {

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConvergenceError : NumericError {
    ConvergenceError(const std::string& msg, std::vector<double> residual_history)
        : NumericError(msg), residuals(std::move(residual_history)) {}
    std::vector<double> residuals;
};

namespace num {

// sin(pi*x) with exact integer-argument zeros.
double sinpi(double x);

// 1/Gamma(x), entire in x. Uses the reflection formula for x <= 0.
double recip_gamma(double x);

// log Gamma for x > 0.
double log_gamma(double x);

// Euler Beta function, a, b > 0.
double beta_function(double a, double b);

// Kahan-compensated accumulator.
template <typename T>
struct Kahan {
    T sum = 0;
    T carry = 0;
    void add(T v) {
        T y = v - carry;
        T t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

// Adaptive Simpson on [a,b], absolute tolerance. Throws NumericError if the
// recursion bottoms out without reaching the tolerance.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double abs_tol, int max_depth = 48);

// Nodes/weights of n-point Gauss-Legendre on [-1,1]; cached per order.
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;
};
const GaussLegendre& gauss_legendre(int n);

// tanh-sinh quadrature on [a,b]: robust to integrable algebraic endpoint
// singularities. Points that round onto an endpoint are skipped. Refines the
// trapezoid level until successive levels agree to rel_tol.
double tanh_sinh(const std::function<double(double)>& f, double a, double b, double rel_tol);

// Fixed-order composite Gauss-Legendre of f over [a,b] split into panels.
double gauss_panels(const std::function<double(double)>& f, double a, double b,
                    int order, int panels);

// ---- Deterministic seeding -------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derived stream seed: mix(base, tag) chains splitmix64 once per component.
// Documented in the README; identical across platforms.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t tag, std::uint64_t replicate = 0) {
    std::uint64_t s = base;
    s ^= 0x9e3779b97f4a7c15ULL * (tag + 1);
    (void)splitmix64(s);
    s ^= 0x9e3779b97f4a7c15ULL * (replicate + 1);
    (void)splitmix64(s);
    return s;
}

// Deterministic N(0,1) stream: splitmix64 uniforms through Box-Muller.
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : state_(seed) {}
    double next();

private:
    double uniform01();  // in (0,1]
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// ---- Grids -----------------------------------------------------------------

std::vector<double> linspace(double a, double b, int n);
// n points in (0, t_max], log-spaced over `decades` decades ending at t_max.
std::vector<double> logspace_upto(double t_max, int n, double decades = 8.0);

}  // namespace num
}  // namespace fracsteer
