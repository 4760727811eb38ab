#include "wsub/functionals.hpp"

#include "wsub/errors.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace wsub {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSupportFloor = 1e-14;

double xlogx_over(double m, double v) { return m > 0.0 ? m * std::log(m / v) : 0.0; }

// G'' = log|z|; the cell-pair integral of log|x - y| over [0,h]^2 shifted by d
// is the second difference G(d+h) - 2G(d) + G(d-h).
double G(double z) {
    if (z == 0.0) return 0.0;
    return 0.5 * z * z * std::log(std::abs(z)) - 0.75 * z * z;
}

double cell_pair_log(Eigen::Index offset, double h) {
    const double d = static_cast<double>(offset) * h;
    if (offset < 32) return G(d + h) - 2.0 * G(d) + G(d - h);
    // Taylor series of the second difference; avoids cancellation for far pairs.
    const double r2 = (h / d) * (h / d);
    return h * h * (std::log(d) - r2 / 12.0 - r2 * r2 / 60.0);
}

}  // namespace

double entropy(const GridMeasure1D& mu) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i) s += xlogx_over(mu.mass[i], mu.axis.dx);
    return s;
}

double entropy(const GridMeasure2D& mu) {
    const double v = mu.cell_volume();
    double s = 0.0;
    for (Eigen::Index i = 0; i < mu.mass.size(); ++i) s += xlogx_over(mu.mass.data()[i], v);
    return s;
}

Flagged relative_entropy_checked(const GridMeasure1D& mu, const GridMeasure1D& pi) {
    if (!(mu.axis == pi.axis)) throw DomainError("relative entropy needs both measures on one grid");
    double s = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
        if (mu.mass[i] <= 0.0) continue;
        if (pi.mass[i] <= 0.0) return {kInf, true};
        s += mu.mass[i] * std::log(mu.mass[i] / pi.mass[i]);
    }
    return {std::max(s, 0.0), false};
}

double relative_entropy(const GridMeasure1D& mu, const GridMeasure1D& pi) {
    return relative_entropy_checked(mu, pi).value;
}

double relative_entropy(const GridMeasure2D& mu, const GridMeasure2D& pi) {
    if (!(mu.axis0 == pi.axis0) || !(mu.axis1 == pi.axis1))
        throw DomainError("relative entropy needs both measures on one grid");
    double s = 0.0;
    for (Eigen::Index i = 0; i < mu.mass.size(); ++i) {
        const double m = mu.mass.data()[i], p = pi.mass.data()[i];
        if (m <= 0.0) continue;
        if (p <= 0.0) return kInf;
        s += m * std::log(m / p);
    }
    return std::max(s, 0.0);
}

double relative_entropy_gaussian(const GridMeasure1D& mu) {
    return entropy(mu) + 0.5 * mu.moment(2) + 0.5 * std::log(2.0 * std::numbers::pi);
}

Flagged fisher_information_checked(const GridMeasure1D& mu, const GridMeasure1D& pi) {
    if (!(mu.axis == pi.axis)) throw DomainError("Fisher information needs both measures on one grid");
    const Eigen::Index n = mu.size();
    std::vector<char> in(static_cast<std::size_t>(n), 0);
    Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (mu.mass[i] < kSupportFloor) continue;
        if (pi.mass[i] <= 0.0) return {kInf, true};
        in[static_cast<std::size_t>(i)] = 1;
        f[i] = std::log(mu.mass[i] / pi.mass[i]);
    }
    const double h = mu.axis.dx;
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!in[static_cast<std::size_t>(i)]) continue;
        const bool l = i > 0 && in[static_cast<std::size_t>(i - 1)];
        const bool r = i + 1 < n && in[static_cast<std::size_t>(i + 1)];
        double g = 0.0;
        if (l && r) g = (f[i + 1] - f[i - 1]) / (2.0 * h);
        else if (r) g = (f[i + 1] - f[i]) / h;
        else if (l) g = (f[i] - f[i - 1]) / h;
        s += mu.mass[i] * g * g;
    }
    return {s, false};
}

double fisher_information(const GridMeasure1D& mu, const GridMeasure1D& pi) {
    return fisher_information_checked(mu, pi).value;
}

double fisher_information(const GridMeasure1D& mu) {
    const GridMeasure1D leb(mu.axis, Eigen::VectorXd::Constant(mu.size(), 1.0 / static_cast<double>(mu.size())));
    return fisher_information(mu, leb);
}

double log_energy(const GridMeasure1D& mu) {
    const Eigen::Index n = mu.size();
    const double h = mu.axis.dx;
    Eigen::VectorXd k(n);
    for (Eigen::Index d = 0; d < n; ++d) k[d] = cell_pair_log(d, h) / (h * h);
    // Toeplitz quadratic form, restricted to the support.
    std::vector<Eigen::Index> sup;
    for (Eigen::Index i = 0; i < n; ++i)
        if (mu.mass[i] > 0.0) sup.push_back(i);
    double s = 0.0;
    for (std::size_t a = 0; a < sup.size(); ++a) {
        const Eigen::Index i = sup[a];
        double row = mu.mass[i] * k[0];
        for (std::size_t b = a + 1; b < sup.size(); ++b) row += 2.0 * mu.mass[sup[b]] * k[sup[b] - i];
        s += mu.mass[i] * row;
    }
    return -s;
}

double log_energy(const Eigen::VectorXd& x) {
    const Eigen::Index n = x.size();
    if (n < 2) throw DomainError("log energy of particles needs n >= 2");
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) s += std::log(std::abs(x[i] - x[j]));
    return -2.0 * s / (static_cast<double>(n) * static_cast<double>(n));
}

Flagged alpha_checked(double x, int d) {
    if (d < 1) throw DomainError("alpha needs d >= 1");
    const double dd = static_cast<double>(d);
    if (x < 0.0 || x > 4.0 * dd) return {kInf, false};
    const double arg = std::min(1.0, std::sqrt(x) / (2.0 * std::sqrt(dd)));
    const double a = std::asin(arg);
    return {2.0 * dd * a * a, x > 2.0 * std::sqrt(dd)};
}

double alpha(double x, int d) { return alpha_checked(x, d).value; }

double rate_I(const GridMeasure1D& mu) {
    const double m1 = mu.mean(), m2 = mu.moment(2);
    if (std::abs(m1) > 1e-8 || m2 > 1.0 + 1e-8) return kInf;
    return relative_entropy_gaussian(mu) + 0.5 * (1.0 - m2);
}

double rate_Ilog(const GridMeasure1D& mu) { return log_energy(mu) + 0.5 * mu.moment(2) - 0.75; }

double potential_energy(const GridMeasure1D& mu, const std::vector<double>& coeffs) {
    return mu.expectation([&](double x) {
        double v = 0.0;
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) v = v * x + *it;
        return v;
    });
}

Functional Functional::entropy() { return Functional{}; }

Functional Functional::relative_entropy(const GridMeasure1D& pi) {
    Functional f;
    f.kind_ = Kind::RelativeEntropy;
    if ((pi.mass.array() <= 0.0).any()) throw DomainError("reference measure must be strictly positive");
    f.ref1_ = std::make_shared<const GridMeasure1D>(pi);
    return f;
}

Functional Functional::relative_entropy(const GridMeasure2D& pi) {
    Functional f;
    f.kind_ = Kind::RelativeEntropy;
    if ((pi.mass.array() <= 0.0).any()) throw DomainError("reference measure must be strictly positive");
    f.ref2_ = std::make_shared<const GridMeasure2D>(pi);
    return f;
}

Functional Functional::potential(std::vector<double> coeffs) {
    Functional f;
    f.kind_ = Kind::Potential;
    f.coeffs_ = std::move(coeffs);
    return f;
}

Functional Functional::log_energy() {
    Functional f;
    f.kind_ = Kind::LogEnergy;
    return f;
}

Functional Functional::combination(std::vector<std::pair<double, Functional>> parts) {
    for (const auto& p : parts)
        if (!std::isfinite(p.first)) throw DomainError("combination coefficients must be finite");
    Functional f;
    f.kind_ = Kind::Combination;
    f.parts_ = std::move(parts);
    return f;
}

double Functional::operator()(const GridMeasure1D& mu) const {
    switch (kind_) {
        case Kind::Entropy:
            return wsub::entropy(mu);
        case Kind::RelativeEntropy:
            if (!ref1_) throw DomainError("functional has a 2D reference");
            return wsub::relative_entropy(mu, *ref1_);
        case Kind::Potential:
            return potential_energy(mu, coeffs_);
        case Kind::LogEnergy:
            return wsub::log_energy(mu);
        case Kind::Combination: {
            double s = 0.0;
            for (const auto& [c, f] : parts_) s += c * f(mu);
            return s;
        }
    }
    return 0.0;
}

double Functional::operator()(const GridMeasure2D& mu) const {
    switch (kind_) {
        case Kind::Entropy:
            return wsub::entropy(mu);
        case Kind::RelativeEntropy:
            if (!ref2_) throw DomainError("functional has a 1D reference");
            return wsub::relative_entropy(mu, *ref2_);
        case Kind::Combination: {
            double s = 0.0;
            for (const auto& [c, f] : parts_) s += c * f(mu);
            return s;
        }
        default:
            throw DomainError("functional is only defined for 1D measures");
    }
}

double convexity_violation(const std::vector<double>& v, double lambda, double dist) {
    if (v.size() < 3) throw DomainError("convexity profile needs at least three samples");
    const double n = static_cast<double>(v.size() - 1);
    double worst = -kInf;
    for (std::size_t k = 1; k + 1 < v.size(); ++k) {
        const double t = static_cast<double>(k) / n;
        worst = std::max(worst, v[k] - (1.0 - t) * v.front() - t * v.back() + 0.5 * lambda * t * (1.0 - t) * dist * dist);
    }
    return worst;
}

double convexity_profile(const std::vector<GridMeasure1D>& curve, const Functional& f, double lambda, double dist) {
    std::vector<double> v;
    v.reserve(curve.size());
    for (const auto& m : curve) v.push_back(f(m));
    return convexity_violation(v, lambda, dist);
}

double convexity_profile(const std::vector<GridMeasure2D>& curve, const Functional& f, double lambda, double dist) {
    std::vector<double> v;
    v.reserve(curve.size());
    for (const auto& m : curve) v.push_back(f(m));
    return convexity_violation(v, lambda, dist);
}

InequalityReport hwi_residual(const GridMeasure1D& mu, const GridMeasure1D& nu, const GridMeasure1D& pi, double lambda,
                              double dist, double tolerance) {
    const double lhs = relative_entropy(mu, pi) - relative_entropy(nu, pi);
    const double info = fisher_information(mu, pi);
    const double rhs = dist * std::sqrt(info) - 0.5 * lambda * dist * dist;
    return InequalityReport::make("hwi", lhs, rhs, tolerance)
        .with("lambda", lambda)
        .with("dist", dist)
        .with("fisher", info)
        .with("cells", static_cast<double>(mu.size()));
}

}  // namespace wsub
