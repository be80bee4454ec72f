#include "fracsteer/phase_space.hpp"

#include <algorithm>
#include <cmath>

namespace fracsteer::phase {

double varpi(const std::function<double(double)>& h, double tail_tol, double* tau_end,
             double* tail_mass) {
    double total = 0.0;
    double tau = 1.0;
    total = num::adaptive_simpson(h, -tau, 0.0, 1e-10);
    double prev_piece = total;
    while (tau < 200.0) {
        double piece = num::adaptive_simpson(h, -2.0 * tau, -tau, 1e-10);
        total += piece;
        tau *= 2.0;
        // geometric decay certificate: remaining tail <= piece
        if (piece < 0.5 * tail_tol && piece <= 0.5 * prev_piece) {
            if (tau_end) *tau_end = tau;
            if (tail_mass) *tail_mass = piece;
            return total;
        }
        prev_piece = piece;
    }
    throw std::domain_error("varpi: tail not resolved by tau_max = 200");
}

WeightFunction make_weight(std::function<double(double)> h, double tail_tol, double tau_override) {
    WeightFunction w;
    double tau_end = 0.0, tail = 0.0;
    w.varpi = varpi(h, tail_tol, &tau_end, &tail);
    if (tau_override > 0.0) {
        double trunc = num::adaptive_simpson(h, -tau_override, 0.0, 1e-10);
        w.tau_max = tau_override;
        w.tail_mass = std::max(0.0, w.varpi - trunc) + tail;
    } else {
        w.tau_max = tau_end;
        w.tail_mass = tail;
    }
    w.h = std::move(h);
    return w;
}

void HistoryBuffer::validate() const {
    if (offsets.size() < 2 || offsets.size() != values.size())
        throw std::domain_error("HistoryBuffer: offsets/values size mismatch");
    if (offsets.front() != 0.0) throw std::domain_error("HistoryBuffer: grid must start at 0");
    for (std::size_t i = 1; i < offsets.size(); ++i)
        if (!(offsets[i] < offsets[i - 1]))
            throw std::domain_error("HistoryBuffer: offsets must decrease");
}

Eigen::VectorXd HistoryBuffer::at(double theta) const {
    if (theta >= 0.0) return values.front();
    if (theta <= offsets.back()) return values.back();
    // offsets decrease; locate the bracketing pair
    auto it = std::lower_bound(offsets.begin(), offsets.end(), theta, std::greater<double>());
    std::size_t hi = static_cast<std::size_t>(it - offsets.begin());  // offsets[hi] <= theta
    std::size_t lo = hi - 1;                                          // offsets[lo] > theta
    double span = offsets[lo] - offsets[hi];
    double w = (offsets[lo] - theta) / span;
    return (1.0 - w) * values[lo] + w * values[hi];
}

HistoryBuffer HistoryBuffer::sampled(const std::function<Eigen::VectorXd(double)>& phi,
                                     double tau_max, double step) {
    if (!(tau_max > 0.0) || !(step > 0.0))
        throw std::domain_error("HistoryBuffer: tau_max and step must be positive");
    HistoryBuffer b;
    int n = static_cast<int>(std::ceil(tau_max / step - 1e-12));
    b.offsets.reserve(n + 1);
    b.values.reserve(n + 1);
    for (int i = 0; i <= n; ++i) {
        double theta = -std::min(i * step, tau_max);
        b.offsets.push_back(theta);
        b.values.push_back(phi(theta));
    }
    b.validate();
    return b;
}

HistoryBuffer HistoryBuffer::initial(const std::function<Eigen::VectorXd(double)>& phi,
                                     double tau_max, double step) {
    HistoryBuffer b = sampled(phi, tau_max, step);
    if (b.values.front().norm() > 1e-12)
        throw std::domain_error("HistoryBuffer::initial: initial data must vanish at theta = 0");
    return b;
}

HistoryBuffer HistoryBuffer::zero(int dim, double tau_max, double step) {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(dim);
    return sampled([&](double) { return z; }, tau_max, step);
}

double dh_norm(const HistoryBuffer& hist, const WeightFunction& w) {
    hist.validate();
    const std::size_t n = hist.offsets.size();
    std::vector<double> runmax(n);
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        m = std::max(m, hist.values[i].norm());
        runmax[i] = m;
    }
    num::Kahan<double> acc;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        double de = hist.offsets[i] - hist.offsets[i + 1];
        acc.add(0.5 * de * (w.h(hist.offsets[i]) * runmax[i] + w.h(hist.offsets[i + 1]) * runmax[i + 1]));
    }
    return acc.sum;
}

Eigen::VectorXd PathView::value(double s) const {
    if (s <= 0.0) return history->at(s);
    const std::vector<double>& ts = *times;
    if (s >= ts.back()) return states->col(states->cols() - 1);
    auto it = std::upper_bound(ts.begin(), ts.end(), s);
    std::size_t hi = static_cast<std::size_t>(it - ts.begin());
    std::size_t lo = hi - 1;
    double w = (s - ts[lo]) / (ts[hi] - ts[lo]);
    return (1.0 - w) * states->col(lo) + w * states->col(hi);
}

HistoryBuffer segment(const PathView& path, double t, double tau_max, double step) {
    if (!(t >= 0.0) || t > path.horizon() + 1e-12)
        throw std::domain_error("segment: t outside [0, horizon]");
    return HistoryBuffer::sampled([&](double theta) { return path.value(t + theta); }, tau_max,
                                  step);
}

LemmaCheck lemma_lm1_check(const PathView& path, double t, const WeightFunction& w, double step) {
    HistoryBuffer seg_t = segment(path, t, w.tau_max, step);
    HistoryBuffer seg_0 = segment(path, 0.0, w.tau_max, step);

    LemmaCheck c;
    c.lhs = dh_norm(seg_t, w);
    double z0_norm = dh_norm(seg_0, w);

    double sup = 0.0;
    for (Eigen::Index k = 0; k < path.states->cols(); ++k)
        sup = std::max(sup, path.states->col(k).norm());

    // trapezoid mass of h on the same offsets as the norm evaluations
    num::Kahan<double> mass;
    for (std::size_t i = 0; i + 1 < seg_t.offsets.size(); ++i) {
        double de = seg_t.offsets[i] - seg_t.offsets[i + 1];
        mass.add(0.5 * de * (w.h(seg_t.offsets[i]) + w.h(seg_t.offsets[i + 1])));
    }
    c.rhs = mass.sum * sup + z0_norm;
    c.holds = c.lhs <= c.rhs + 1e-9;
    return c;
}

}  // namespace fracsteer::phase
