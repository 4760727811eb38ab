#include "wsub/errors.hpp"
#include "wsub/geodesics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wsub {

namespace {

double ipow(double x, int k) {
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= x;
    return r;
}

double poly_t(const std::vector<double>& c, double t) {
    double s = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) s = s * t + *it;
    return s;
}

constexpr double kAdmissibleSlack = 1e-10;

double grid_pairing(const DualCertificate& c, const Eigen::VectorXd& mi, const Eigen::VectorXd& mf) {
    const Eigen::Index T = c.time_steps;
    const double dt = 1.0 / static_cast<double>(T);
    double v = c.constraint_term;
    v -= c.phi.row(0).dot(mi);
    v += c.phi.row(T - 1).dot(mf);
    v += 0.5 * dt * (c.a.row(0).dot(mi) + c.a.row(T - 1).dot(mf));
    return v;
}

void require_admissible(const DualCertificate& c) {
    if (c.margin > kAdmissibleSlack)
        throw InadmissibleCertificate("certificate violates the Hamilton-Jacobi inequality by " +
                                          std::to_string(c.margin),
                                      c.margin_t, c.margin_x, c.margin);
}

}  // namespace

DualCertificate DualCertificate::zero() { return DualCertificate{}; }

DualCertificate DualCertificate::translation(double shift) {
    DualCertificate c;
    c.phi_terms = {{0, 1, shift}, {1, 0, -0.5 * shift * shift}};
    return c;
}

double DualCertificate::phi_value(double t, double x) const {
    double s = 0.0;
    for (const auto& term : phi_terms) s += term.coeff * ipow(t, term.t_power) * ipow(x, term.x_power);
    return s;
}

double DualCertificate::hj_value(double t, double x) const {
    double dt = 0.0, dx = 0.0;
    for (const auto& term : phi_terms) {
        if (term.t_power > 0) dt += term.coeff * term.t_power * ipow(t, term.t_power - 1) * ipow(x, term.x_power);
        if (term.x_power > 0) dx += term.coeff * term.x_power * ipow(t, term.t_power) * ipow(x, term.x_power - 1);
    }
    double g = 0.0;
    for (std::size_t r = 0; r < g_coeffs.size() && r < constraints.polynomials.size(); ++r) {
        const auto& f = constraints.polynomials[r];
        g += poly_t(g_coeffs[r], t) * (f(x) - f.target);
    }
    return dt + 0.5 * dx * dx + g;
}

void DualCertificate::evaluate_margin(const Axis& axis, int time_nodes) {
    if (kind != Kind::Polynomial) return;
    margin = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= time_nodes; ++k) {
        const double t = static_cast<double>(k) / time_nodes;
        for (Eigen::Index i = 0; i < axis.n; ++i) {
            const double v = hj_value(t, axis.center(i));
            if (v > margin) {
                margin = v;
                margin_t = t;
                margin_x = axis.center(i);
            }
        }
    }
}

double dual_value(const DualCertificate& cert, const GridMeasure1D& rho_i, const GridMeasure1D& rho_f) {
    if (!(rho_i.axis == rho_f.axis)) throw DomainError("endpoints live on different grids");
    if (cert.kind == DualCertificate::Kind::Polynomial) {
        DualCertificate c = cert;
        c.evaluate_margin(rho_i.axis);
        require_admissible(c);
        double v = 0.0;
        for (Eigen::Index i = 0; i < rho_i.size(); ++i) {
            const double x = rho_i.axis.center(i);
            v += c.phi_value(1.0, x) * rho_f.mass[i] - c.phi_value(0.0, x) * rho_i.mass[i];
        }
        return v;
    }
    if (cert.dim != 1 || !(cert.axis0 == rho_i.axis)) throw DomainError("certificate grid differs from endpoint grid");
    require_admissible(cert);
    return grid_pairing(cert, rho_i.mass, rho_f.mass);
}

double dual_value(const DualCertificate& cert, const GridMeasure2D& rho_i, const GridMeasure2D& rho_f) {
    if (cert.kind != DualCertificate::Kind::Grid || cert.dim != 2 || !(cert.axis0 == rho_i.axis0) ||
        !(cert.axis1 == rho_i.axis1) || !(rho_f.axis0 == rho_i.axis0) || !(rho_f.axis1 == rho_i.axis1))
        throw DomainError("certificate grid differs from endpoint grid");
    require_admissible(cert);
    auto flat = [](const Eigen::MatrixXd& m) {
        Eigen::VectorXd v(m.size());
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) v[i * m.cols() + j] = m(i, j);
        return v;
    };
    return grid_pairing(cert, flat(rho_i.mass), flat(rho_f.mass));
}

double sphere_distance_from_w2(double w2, int d, double theta) {
    if (d < 1 || !(theta > 0.0)) throw DomainError("sphere distance needs d >= 1 and theta > 0");
    if (w2 < 0.0) throw DomainError("negative Wasserstein distance");
    const double r = std::sqrt(static_cast<double>(d) * theta);
    return 2.0 * r * std::asin(std::min(1.0, w2 / (2.0 * r)));
}

double sphere_distance(const GridMeasure1D& mu, const GridMeasure1D& nu, double theta, double u) {
    const ConstraintSet s = ConstraintSet::sphere(u, theta);
    const double res = std::max(s.max_residual(mu), s.max_residual(nu));
    if (res > 1e-6) throw Infeasible("measure is not on the sphere (residual " + std::to_string(res) + ")");
    return sphere_distance_from_w2(w2_1d(mu, nu), 1, theta);
}

GridMeasure1D sphere_geodesic_point(const GridMeasure1D& mu, const GridMeasure1D& nu, double t, const Axis& out,
                                    double theta) {
    if (t < 0.0 || t > 1.0) throw DomainError("geodesic parameter outside [0, 1]");
    const double u = 0.5 * (mu.mean() + nu.mean());
    const double w = w2_1d(mu, nu);
    const double ang = 2.0 * std::asin(std::min(1.0, w / (2.0 * std::sqrt(theta))));
    double c0 = 1.0 - t, c1 = t;
    if (ang > 1e-12) {
        c0 = std::sin((1.0 - t) * ang) / std::sin(ang);
        c1 = std::sin(t * ang) / std::sin(ang);
    }
    // Merged quantile partition; both quantile functions are linear between knots.
    std::vector<double> knots{0.0, 1.0};
    for (const auto* m : {&mu, &nu}) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < m->size(); ++i) {
            acc += m->mass[i];
            knots.push_back(std::min(acc, 1.0));
        }
    }
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end(), [](double a, double b) { return b - a < 1e-15; }),
                knots.end());
    auto q = [&](double p) {
        return u + c0 * (quantile(mu, p) - u) + c1 * (quantile(nu, p) - u);
    };
    Eigen::VectorXd mass = Eigen::VectorXd::Zero(out.n);
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
        const double dp = knots[k + 1] - knots[k];
        if (dp <= 0.0) continue;
        // Evaluate just inside the segment so atoms at the knots do not leak in.
        const double eps = 1e-9 * dp;
        double xa = q(knots[k] + eps), xb = q(knots[k + 1] - eps);
        const double slope = (xb - xa) / (dp - 2.0 * eps);
        xa -= slope * eps;
        xb += slope * eps;
        if (xb < xa) std::swap(xa, xb);
        if (xb - xa < 1e-14) {
            const auto i = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor((xa - out.min) / out.dx)), 0,
                                                    out.n - 1);
            mass[i] += dp;
            continue;
        }
        const auto i0 = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor((xa - out.min) / out.dx)), 0,
                                                 out.n - 1);
        const auto i1 = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor((xb - out.min) / out.dx)), 0,
                                                 out.n - 1);
        for (Eigen::Index i = i0; i <= i1; ++i) {
            const double lo = std::max(xa, i == i0 ? -std::numeric_limits<double>::infinity() : out.edge(i));
            const double hi = std::min(xb, i == i1 ? std::numeric_limits<double>::infinity() : out.edge(i + 1));
            if (hi > lo) mass[i] += dp * (hi - lo) / (xb - xa);
        }
    }
    return GridMeasure1D::normalized(out, mass);
}

}  // namespace wsub
