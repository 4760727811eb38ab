#include "wsub/errors.hpp"
#include "wsub/flows.hpp"

#include <algorithm>
#include <cmath>

namespace wsub {

Eigen::VectorXd dyson_velocity(const Eigen::VectorXd& x, double lambda) {
    const Eigen::Index n = x.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    Eigen::VectorXd v = -lambda * x;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double r = inv_n / (x[i] - x[j]);
            v[i] += r;
            v[j] -= r;
        }
    return v;
}

double dyson_energy(const Eigen::VectorXd& x, double lambda) {
    const double n = static_cast<double>(x.size());
    return 0.5 * lambda * x.squaredNorm() / n + 0.5 * log_energy(x);
}

namespace {

bool ordered(const Eigen::VectorXd& x) {
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i)
        if (!(x[i] < x[i + 1])) return false;
    return true;
}

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                 e7 = -1.0 / 40;

}  // namespace

FlowTrace dyson_ou(const ParticleState& x0, double t_end, int n_steps, const DysonOptions& opts) {
    const Eigen::Index n = x0.positions.size();
    const double lambda = x0.lambda;
    if (n < 2) throw DomainError("Dyson flow needs at least two particles");
    if (!(lambda > 0.0)) throw DomainError("Dyson flow needs lambda > 0");
    if (!ordered(x0.positions)) throw DomainError("particles must be strictly increasing");
    if (n_steps < 1 || !(t_end > 0.0)) throw DomainError("flow needs t_end > 0 and at least one step");

    FlowTrace tr;
    tr.lambda = lambda;
    auto rec = [&](double t, const Eigen::VectorXd& x) {
        const Eigen::VectorXd v = dyson_velocity(x, lambda);
        tr.times.push_back(t);
        tr.particles.push_back(x);
        tr.mean.push_back(x.mean());
        tr.m2.push_back(x.squaredNorm() / static_cast<double>(n));
        tr.energy.push_back(dyson_energy(x, lambda));
        tr.dissipation.push_back(v.squaredNorm() / static_cast<double>(n));
    };

    Eigen::VectorXd x = x0.positions;
    double t = 0.0;
    double h = std::min(1e-3, t_end / n_steps);
    rec(t, x);
    auto f = [&](const Eigen::VectorXd& y) { return dyson_velocity(y, lambda); };
    Eigen::VectorXd k1 = f(x);
    for (int s = 1; s <= n_steps; ++s) {
        const double t_out = t_end * s / n_steps;
        while (t_out - t > 1e-14 * std::max(1.0, t_out)) {
            const double step = std::min(h, t_out - t);
            if (step < opts.dt_min) throw DegenerateInput("Dyson step underflow near t = " + std::to_string(t));
            const Eigen::VectorXd y2 = x + step * a21 * k1;
            if (!ordered(y2)) { h = 0.5 * step; continue; }
            const Eigen::VectorXd k2 = f(y2);
            const Eigen::VectorXd y3 = x + step * (a31 * k1 + a32 * k2);
            if (!ordered(y3)) { h = 0.5 * step; continue; }
            const Eigen::VectorXd k3 = f(y3);
            const Eigen::VectorXd y4 = x + step * (a41 * k1 + a42 * k2 + a43 * k3);
            if (!ordered(y4)) { h = 0.5 * step; continue; }
            const Eigen::VectorXd k4 = f(y4);
            const Eigen::VectorXd y5 = x + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
            if (!ordered(y5)) { h = 0.5 * step; continue; }
            const Eigen::VectorXd k5 = f(y5);
            const Eigen::VectorXd y6 = x + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
            if (!ordered(y6)) { h = 0.5 * step; continue; }
            const Eigen::VectorXd k6 = f(y6);
            const Eigen::VectorXd xn = x + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            if (!ordered(xn)) { h = 0.5 * step; continue; }
            const Eigen::VectorXd k7 = f(xn);
            const Eigen::VectorXd err = step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            const Eigen::ArrayXd scale = opts.atol + opts.rtol * x.array().abs().max(xn.array().abs());
            const double e = (err.array().abs() / scale).maxCoeff();
            const double grow = e > 0.0 ? 0.9 * std::pow(e, -0.2) : 5.0;
            if (e <= 1.0) {
                x = xn;
                k1 = k7;
                t += step;
                h = step * std::clamp(grow, 0.2, 5.0);
            } else {
                h = step * std::clamp(grow, 0.1, 0.9);
            }
        }
        t = t_out;
        rec(t, x);
    }
    return tr;
}

}  // namespace wsub
