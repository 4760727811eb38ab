#include "wsub/constraints.hpp"

#include "wsub/errors.hpp"

#include <cmath>

namespace wsub {

namespace {

double ipow(double x, int k) {
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= x;
    return r;
}

}  // namespace

int PolynomialConstraint::degree() const {
    int d = 0;
    for (const auto& t : terms) {
        int s = 0;
        for (int p : t.powers) s += p;
        d = std::max(d, s);
    }
    return d;
}

double PolynomialConstraint::operator()(double x) const {
    double s = 0.0;
    for (const auto& t : terms) s += t.coeff * ipow(x, t.powers.empty() ? 0 : t.powers[0]);
    return s;
}

double PolynomialConstraint::operator()(double x0, double x1) const {
    double s = 0.0;
    for (const auto& t : terms) {
        const int p0 = t.powers.size() > 0 ? t.powers[0] : 0;
        const int p1 = t.powers.size() > 1 ? t.powers[1] : 0;
        s += t.coeff * ipow(x0, p0) * ipow(x1, p1);
    }
    return s;
}

void ConstraintSet::validate() const {
    if (dim != 1 && dim != 2) throw DomainError("constraint sets are defined for d = 1 or 2");
    for (const auto& p : polynomials) {
        if (p.degree() > kMaxDegree) throw DomainError("constraint polynomial degree exceeds 6");
        if (!std::isfinite(p.target)) throw DomainError("constraint target must be finite");
        for (const auto& t : p.terms) {
            if (static_cast<int>(t.powers.size()) != dim) throw DomainError("monomial arity differs from dimension");
            if (!std::isfinite(t.coeff)) throw DomainError("monomial coefficient must be finite");
            for (int e : t.powers)
                if (e < 0) throw DomainError("negative monomial exponent");
        }
    }
    for (const auto& m : marginals) {
        if (dim != 2 || (m.axis != 0 && m.axis != 1)) throw DomainError("marginal constraints need a 2D grid");
        if (!m.marginal.allFinite()) throw DomainError("marginal histogram must be finite");
    }
}

ConstraintSet ConstraintSet::sphere(double u, double theta) {
    if (!(theta > 0.0)) throw DomainError("degenerate sphere: theta must be positive");
    ConstraintSet c;
    c.polynomials.push_back({{{{1}, 1.0}}, u, "mean"});
    // (x-u)^2 = x^2 - 2ux + u^2, target theta
    c.polynomials.push_back({{{{2}, 1.0}, {{1}, -2.0 * u}, {{0}, u * u}}, theta, "centered_m2"});
    return c;
}

std::vector<double> hermite_coefficients(int k) {
    // He_{k+1} = x He_k - k He_{k-1}
    std::vector<double> prev{1.0};
    if (k == 0) return prev;
    std::vector<double> cur{0.0, 1.0};
    for (int n = 1; n < k; ++n) {
        std::vector<double> next(static_cast<std::size_t>(n + 2), 0.0);
        for (int i = 0; i <= n; ++i) next[static_cast<std::size_t>(i + 1)] += cur[static_cast<std::size_t>(i)];
        for (int i = 0; i < n; ++i)
            next[static_cast<std::size_t>(i)] -= static_cast<double>(n) * prev[static_cast<std::size_t>(i)];
        prev = std::move(cur);
        cur = std::move(next);
    }
    return cur;
}

double hermite(int k, double x) {
    if (k == 0) return 1.0;
    double hm = 1.0, h = x;
    for (int n = 1; n < k; ++n) {
        const double hn = x * h - static_cast<double>(n) * hm;
        hm = h;
        h = hn;
    }
    return h;
}

ConstraintSet ConstraintSet::hermite(int q, double u, double theta) {
    if (q < 1 || q > kMaxDegree) throw DomainError("Hermite order must lie in 1..6");
    if (!(theta > 0.0)) throw DomainError("theta must be positive");
    ConstraintSet c;
    const double s = 1.0 / std::sqrt(theta);
    for (int k = 1; k <= q; ++k) {
        // He_k(s (x - u)) expanded in powers of x.
        const auto he = hermite_coefficients(k);
        std::vector<double> poly(static_cast<std::size_t>(k + 1), 0.0);
        for (int j = 0; j <= k; ++j) {
            const double a = he[static_cast<std::size_t>(j)] * ipow(s, j);
            if (a == 0.0) continue;
            // (x - u)^j = sum_i C(j,i) x^i (-u)^{j-i}
            double binom = 1.0;
            for (int i = 0; i <= j; ++i) {
                poly[static_cast<std::size_t>(i)] += a * binom * ipow(-u, j - i);
                binom = binom * static_cast<double>(j - i) / static_cast<double>(i + 1);
            }
        }
        PolynomialConstraint pc;
        pc.label = "He" + std::to_string(k);
        for (int i = 0; i <= k; ++i)
            if (poly[static_cast<std::size_t>(i)] != 0.0) pc.terms.push_back({{i}, poly[static_cast<std::size_t>(i)]});
        c.polynomials.push_back(std::move(pc));
    }
    return c;
}

ConstraintSet ConstraintSet::moments(const Eigen::VectorXd& targets) {
    ConstraintSet c;
    for (Eigen::Index k = 0; k < targets.size(); ++k)
        c.polynomials.push_back({{{{static_cast<int>(k + 1)}, 1.0}}, targets[k], "m" + std::to_string(k + 1)});
    c.validate();
    return c;
}

ConstraintSet ConstraintSet::marginals_of(const GridMeasure2D& rho) {
    ConstraintSet c;
    c.dim = 2;
    c.marginals.push_back({0, rho.mass.rowwise().sum()});
    c.marginals.push_back({1, rho.mass.colwise().sum().transpose()});
    return c;
}

Eigen::VectorXd ConstraintSet::residuals(const GridMeasure1D& rho) const {
    if (dim != 1) throw DomainError("1D residuals requested for a 2D constraint set");
    Eigen::VectorXd r(static_cast<Eigen::Index>(polynomials.size()));
    for (std::size_t k = 0; k < polynomials.size(); ++k) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < rho.size(); ++i) s += rho.mass[i] * polynomials[k](rho.axis.center(i));
        r[static_cast<Eigen::Index>(k)] = s - polynomials[k].target;
    }
    return r;
}

double ConstraintSet::max_residual(const GridMeasure1D& rho) const {
    const auto r = residuals(rho);
    return r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
}

double ConstraintSet::max_residual(const GridMeasure2D& rho) const {
    double worst = 0.0;
    for (const auto& p : polynomials) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < rho.mass.rows(); ++i)
            for (Eigen::Index j = 0; j < rho.mass.cols(); ++j)
                s += rho.mass(i, j) * p(rho.axis0.center(i), rho.axis1.center(j));
        worst = std::max(worst, std::abs(s - p.target));
    }
    for (const auto& m : marginals) {
        const Eigen::VectorXd got = m.axis == 0 ? Eigen::VectorXd(rho.mass.rowwise().sum())
                                                : Eigen::VectorXd(rho.mass.colwise().sum().transpose());
        if (got.size() != m.marginal.size()) throw DomainError("marginal histogram length differs from grid");
        worst = std::max(worst, (got - m.marginal).cwiseAbs().maxCoeff());
    }
    return worst;
}

}  // namespace wsub
