#include "fracsteer/numerics.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace fracsteer::num {

double sinpi(double x) {
    double n = std::nearbyint(x);
    double r = x - n;
    double s = std::sin(M_PI * r);
    // sin(pi(n+r)) = (-1)^n sin(pi r)
    return (std::fmod(n, 2.0) == 0.0) ? s : -s;
}

double recip_gamma(double x) {
    if (x > 0.0) {
        if (x > 170.0) return 0.0;  // Gamma overflows double; reciprocal underflows
        return 1.0 / std::tgamma(x);
    }
    // reflection: 1/Gamma(x) = Gamma(1-x) sin(pi x)/pi, entire
    double s = sinpi(x);
    if (s == 0.0) return 0.0;  // pole of Gamma
    double y = 1.0 - x;
    if (y > 170.0) {
        // Gamma(1-x) overflows; work in logs, result may still overflow to inf
        double lg = std::lgamma(y);
        double mag = lg + std::log(std::fabs(s) / M_PI);
        double v = std::exp(mag);
        return (s > 0.0) ? v : -v;
    }
    return std::tgamma(y) * s / M_PI;
}

double log_gamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("log_gamma: argument must be positive");
    return std::lgamma(x);
}

double beta_function(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw std::domain_error("beta_function: arguments must be positive");
    return std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
}

namespace {

double simpson_rule(const std::function<double(double)>& f, double a, double fa, double b,
                    double fb, double m, double fm) {
    (void)m;
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double fa,
                            double b, double fb, double m, double fm, double whole,
                            double tol, int depth) {
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = simpson_rule(f, a, fa, m, fm, lm, flm);
    double right = simpson_rule(f, m, fm, b, fb, rm, frm);
    double delta = left + right - whole;
    // refining below the roundoff floor of the partial sums cannot help
    double floor = 4e-16 * (std::fabs(left) + std::fabs(right));
    if (std::fabs(delta) <= std::max(15.0 * tol, floor) || depth <= 0) {
        if (depth <= 0 && std::fabs(delta) > std::max(15.0 * tol, floor))
            throw NumericError("adaptive_simpson: tolerance not reached at max depth");
        return left + right + delta / 15.0;
    }
    return adaptive_simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double abs_tol, int max_depth) {
    if (a == b) return 0.0;
    double fa = f(a), fb = f(b), m = 0.5 * (a + b), fm = f(m);
    double whole = simpson_rule(f, a, fa, b, fb, m, fm);
    return adaptive_simpson_rec(f, a, fa, b, fb, m, fm, whole, abs_tol, max_depth);
}

const GaussLegendre& gauss_legendre(int n) {
    static std::map<int, GaussLegendre> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    GaussLegendre gl;
    gl.nodes.resize(n);
    gl.weights.resize(n);
    // Newton iteration on P_n with Chebyshev initial guess
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            pp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / pp;
            x -= dx;
            if (std::fabs(dx) < 1e-15) break;
        }
        gl.nodes[i] = -x;
        gl.nodes[n - 1 - i] = x;
        double w = 2.0 / ((1.0 - x * x) * pp * pp);
        gl.weights[i] = w;
        gl.weights[n - 1 - i] = w;
    }
    auto [pos, inserted] = cache.emplace(n, std::move(gl));
    (void)inserted;
    return pos->second;
}

double tanh_sinh(const std::function<double(double)>& f, double a, double b, double rel_tol) {
    if (a == b) return 0.0;
    const double r = 0.5 * (b - a);
    const double c = M_PI / 2.0;
    const double s_max = 6.0;
    // sum at level h; endpoint offsets computed cancellation-free via
    // 1 - tanh(y) = 2 e^{-2y} / (1 + e^{-2y})
    auto level_sum = [&](double h, bool odd_only) {
        Kahan<double> acc;
        for (double s = odd_only ? h : 0.0; s <= s_max; s += odd_only ? 2.0 * h : h) {
            double y = c * std::sinh(s);
            double e2 = std::exp(-2.0 * y);
            double delta = 2.0 * e2 / (1.0 + e2);          // 1 - tanh(y)
            double sech2 = 4.0 * e2 / ((1.0 + e2) * (1.0 + e2));
            double w = r * c * std::cosh(s) * sech2;
            if (w == 0.0) break;
            double x_hi = b - r * delta;
            double x_lo = a + r * delta;
            if (s == 0.0) {
                acc.add(w * f(a + r));  // midpoint, counted once
            } else {
                if (x_hi > a && x_hi < b) acc.add(w * f(x_hi));
                if (x_lo > a && x_lo < b) acc.add(w * f(x_lo));
            }
        }
        return acc.sum;
    };
    double h = 0.5;
    double total = h * level_sum(h, false);
    for (int level = 0; level < 6; ++level) {
        double refined = 0.5 * total + 0.5 * h * level_sum(0.5 * h, true);
        double change = std::fabs(refined - total);
        total = refined;
        h *= 0.5;
        if (level >= 1 && change <= rel_tol * (std::fabs(total) + 1e-300)) return total;
    }
    throw NumericError("tanh_sinh: levels exhausted before reaching tolerance");
}

double gauss_panels(const std::function<double(double)>& f, double a, double b,
                    int order, int panels) {
    const GaussLegendre& gl = gauss_legendre(order);
    Kahan<double> acc;
    double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        double lo = a + p * h;
        double c = lo + 0.5 * h, half = 0.5 * h;
        for (int i = 0; i < order; ++i) acc.add(half * gl.weights[i] * f(c + half * gl.nodes[i]));
    }
    return acc.sum;
}

double GaussianStream::uniform01() {
    // 53-bit mantissa in (0,1]
    std::uint64_t r = splitmix64(state_);
    return ((r >> 11) + 1.0) * 0x1.0p-53;
}

double GaussianStream::next() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    double rad = std::sqrt(-2.0 * std::log(u1));
    double ang = 2.0 * M_PI * u2;
    spare_ = rad * std::sin(ang);
    has_spare_ = true;
    return rad * std::cos(ang);
}

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(n);
    if (n == 1) {
        v[0] = a;
        return v;
    }
    for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
    v.back() = b;
    return v;
}

std::vector<double> logspace_upto(double t_max, int n, double decades) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) {
        double e = -decades * (1.0 - double(i) / (n - 1));
        v[i] = t_max * std::pow(10.0, e);
    }
    v.back() = t_max;
    return v;
}

}  // namespace fracsteer::num
