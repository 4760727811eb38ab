#include "wsub/measures.hpp"

#include "wsub/errors.hpp"
#include "wsub/transport_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace wsub {

namespace {

constexpr double kMassTol = 1e-12;

void check_axis(const Axis& axis) {
    if (axis.n <= 0) throw DomainError("grid must have at least one cell");
    if (!(axis.dx > 0.0) || !std::isfinite(axis.dx) || !std::isfinite(axis.min))
        throw DomainError("grid spacing must be positive and finite");
}

void check_masses(const Eigen::Ref<const Eigen::VectorXd>& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        if (!std::isfinite(m[i]) || m[i] < 0.0)
            throw InvalidMeasure("cell mass " + std::to_string(i) + " is negative or not finite");
    }
    const double total = m.sum();
    if (std::abs(total - 1.0) > kMassTol)
        throw InvalidMeasure("total mass " + std::to_string(total) + " differs from 1");
}

// Quantile function piece: over a mass slab of size w the quantile runs
// linearly from a to b (a == b for atoms).
struct Piece {
    double w;
    double a;
    double b;
};

std::vector<Piece> pieces(const GridMeasure1D& mu) {
    std::vector<Piece> out;
    out.reserve(static_cast<std::size_t>(mu.size()));
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
        if (mu.mass[i] > 0.0) out.push_back({mu.mass[i], mu.axis.edge(i), mu.axis.edge(i + 1)});
    }
    return out;
}

std::vector<Piece> pieces(const PointCloud& mu) {
    if (mu.dim() != 1) throw DomainError("1D transport requires a one-dimensional point cloud");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(mu.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index l, Eigen::Index r) { return mu.points(l, 0) < mu.points(r, 0); });
    std::vector<Piece> out;
    out.reserve(order.size());
    for (auto k : order) {
        if (mu.weights[k] > 0.0) out.push_back({mu.weights[k], mu.points(k, 0), mu.points(k, 0)});
    }
    return out;
}

// Exact integral over p of |Q_A(p) - Q_B(p)|^power for power 1 or 2, using
// that both quantiles are linear on every merged slab.
double quantile_cost(const std::vector<Piece>& A, const std::vector<Piece>& B, int power) {
    std::size_t i = 0, j = 0;
    double ua = 0.0, ub = 0.0;
    double total = 0.0;
    while (i < A.size() && j < B.size()) {
        const Piece& pa = A[i];
        const Piece& pb = B[j];
        const double ra = pa.w - ua;
        const double rb = pb.w - ub;
        const bool end_a = ra <= rb;
        const bool end_b = rb <= ra;
        const double step = std::min(ra, rb);
        const double xa0 = pa.a + (pa.b - pa.a) * (ua / pa.w);
        const double xb0 = pb.a + (pb.b - pb.a) * (ub / pb.w);
        const double xa1 = end_a ? pa.b : pa.a + (pa.b - pa.a) * ((ua + step) / pa.w);
        const double xb1 = end_b ? pb.b : pb.a + (pb.b - pb.a) * ((ub + step) / pb.w);
        const double d0 = xa0 - xb0;
        const double d1 = xa1 - xb1;
        if (power == 2) {
            total += step * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
        } else {
            const double s0 = std::abs(d0), s1 = std::abs(d1);
            if (d0 * d1 >= 0.0) {
                total += step * 0.5 * (s0 + s1);
            } else {
                total += step * 0.5 * (d0 * d0 + d1 * d1) / (s0 + s1);
            }
        }
        if (end_a) { ++i; ua = 0.0; } else { ua += step; }
        if (end_b) { ++j; ub = 0.0; } else { ub += step; }
    }
    return total;
}

}  // namespace

// ---------------------------------------------------------------------------

Eigen::VectorXd Axis::centers() const {
    Eigen::VectorXd c(n);
    for (Eigen::Index i = 0; i < n; ++i) c[i] = center(i);
    return c;
}

Axis Axis::span(double lo, double hi, Eigen::Index n) {
    if (!(hi > lo) || n <= 0) throw DomainError("axis span requires lo < hi and n > 0");
    return Axis{lo, (hi - lo) / static_cast<double>(n), n};
}

Axis Axis::symmetric(double mid, double half_width, Eigen::Index n) {
    return span(mid - half_width, mid + half_width, n);
}

bool operator==(const Axis& a, const Axis& b) {
    return a.n == b.n && a.min == b.min && a.dx == b.dx;
}

GridMeasure1D::GridMeasure1D(Axis ax, Eigen::VectorXd m) : axis(ax), mass(std::move(m)) {
    check_axis(axis);
    if (mass.size() != axis.n) throw DomainError("mass vector length differs from cell count");
    check_masses(mass);
}

GridMeasure1D GridMeasure1D::normalized(Axis axis, Eigen::VectorXd weights) {
    const double total = weights.sum();
    if (!(total > 0.0) || !std::isfinite(total)) throw DegenerateInput("weights have no positive total mass");
    weights /= total;
    return GridMeasure1D(axis, std::move(weights));
}

GridMeasure1D GridMeasure1D::from_density(Axis axis, const std::function<double(double)>& f) {
    check_axis(axis);
    Eigen::VectorXd w(axis.n);
    for (Eigen::Index i = 0; i < axis.n; ++i) w[i] = f(axis.center(i));
    return normalized(axis, std::move(w));
}

double GridMeasure1D::mean() const { return mass.dot(centers()); }

double GridMeasure1D::moment(int k) const {
    return mass.dot(centers().array().pow(static_cast<double>(k)).matrix());
}

double GridMeasure1D::variance() const {
    const double m = mean();
    return mass.dot((centers().array() - m).square().matrix());
}

double GridMeasure1D::expectation(const std::function<double(double)>& f) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < size(); ++i) s += mass[i] * f(axis.center(i));
    return s;
}

GridMeasure2D::GridMeasure2D(Axis a0, Axis a1, Eigen::MatrixXd m)
    : axis0(a0), axis1(a1), mass(std::move(m)) {
    check_axis(axis0);
    check_axis(axis1);
    if (mass.rows() != axis0.n || mass.cols() != axis1.n)
        throw DomainError("mass matrix shape differs from grid");
    if ((mass.array() < 0.0).any() || !mass.allFinite())
        throw InvalidMeasure("2D mass has negative or non-finite entries");
    if (std::abs(mass.sum() - 1.0) > kMassTol) throw InvalidMeasure("2D total mass differs from 1");
}

GridMeasure2D GridMeasure2D::normalized(Axis a0, Axis a1, Eigen::MatrixXd weights) {
    const double total = weights.sum();
    if (!(total > 0.0)) throw DegenerateInput("weights have no positive total mass");
    weights /= total;
    return GridMeasure2D(a0, a1, std::move(weights));
}

GridMeasure2D GridMeasure2D::product(const GridMeasure1D& m0, const GridMeasure1D& m1) {
    return GridMeasure2D::normalized(m0.axis, m1.axis, m0.mass * m1.mass.transpose());
}

GridMeasure1D GridMeasure2D::marginal(int axis) const {
    if (axis == 0) return GridMeasure1D::normalized(axis0, mass.rowwise().sum());
    return GridMeasure1D::normalized(axis1, mass.colwise().sum().transpose());
}

PointCloud::PointCloud(Eigen::MatrixXd p, Eigen::VectorXd w) : points(std::move(p)), weights(std::move(w)) {
    if (points.rows() == 0 || points.cols() == 0) throw DomainError("point cloud must be nonempty");
    if (weights.size() != points.rows()) throw DomainError("one weight per point required");
    if (!points.allFinite()) throw InvalidMeasure("point coordinates must be finite");
    check_masses(weights);
}

PointCloud PointCloud::uniform(Eigen::MatrixXd points) {
    const auto n = points.rows();
    if (n == 0) throw DomainError("point cloud must be nonempty");
    return PointCloud(std::move(points), Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
}

PointCloud PointCloud::from_grid(const GridMeasure1D& mu) {
    return PointCloud(mu.centers(), mu.mass);
}

Eigen::VectorXd PointCloud::mean() const { return points.transpose() * weights; }

double PointCloud::second_moment() const {
    return weights.dot(points.rowwise().squaredNorm());
}

// ---------------------------------------------------------------------------

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("probability outside [0,1]");
    if (p == 0.0) return -INFINITY;
    if (p == 1.0) return INFINITY;
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01, -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    for (int it = 0; it < 2; ++it) {
        const double e = normal_cdf(x) - p;
        const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    return x;
}

double semicircle_cdf(double x, double radius) {
    if (x <= -radius) return 0.0;
    if (x >= radius) return 1.0;
    const double r2 = radius * radius;
    return 0.5 + x * std::sqrt(r2 - x * x) / (std::numbers::pi * r2) + std::asin(x / radius) / std::numbers::pi;
}

GridMeasure1D gaussian(const Axis& axis, double mean, double variance) {
    if (!(variance > 0.0)) throw DomainError("Gaussian variance must be positive");
    const double inv = 1.0 / (2.0 * variance);
    Eigen::VectorXd w = (axis.centers().array() - mean).square().unaryExpr([inv](double s) {
        return std::exp(-s * inv);
    });
    return GridMeasure1D::normalized(axis, std::move(w));
}

GridMeasure1D semicircle(const Axis& axis, double radius) {
    check_axis(axis);
    Eigen::VectorXd w(axis.n);
    for (Eigen::Index i = 0; i < axis.n; ++i)
        w[i] = semicircle_cdf(axis.edge(i + 1), radius) - semicircle_cdf(axis.edge(i), radius);
    return GridMeasure1D::normalized(axis, std::move(w));
}

GridMeasure1D uniform(const Axis& axis, double lo, double hi) {
    check_axis(axis);
    if (!(hi > lo)) throw DomainError("uniform requires lo < hi");
    Eigen::VectorXd w(axis.n);
    for (Eigen::Index i = 0; i < axis.n; ++i)
        w[i] = std::max(0.0, std::min(hi, axis.edge(i + 1)) - std::max(lo, axis.edge(i)));
    return GridMeasure1D::normalized(axis, std::move(w));
}

GridMeasure1D point_mass(const Axis& axis, double x) {
    check_axis(axis);
    const auto i = static_cast<Eigen::Index>(std::floor((x - axis.min) / axis.dx));
    if (i < 0 || i >= axis.n) throw DomainError("point mass location outside the grid");
    Eigen::VectorXd w = Eigen::VectorXd::Zero(axis.n);
    w[i] = 1.0;
    return GridMeasure1D(axis, std::move(w));
}

// ---------------------------------------------------------------------------

double cdf(const GridMeasure1D& mu, double x) {
    if (x <= mu.axis.min) return 0.0;
    if (x >= mu.axis.max()) return 1.0;
    const double s = (x - mu.axis.min) / mu.axis.dx;
    const auto i = std::min(static_cast<Eigen::Index>(std::floor(s)), mu.size() - 1);
    return mu.mass.head(i).sum() + mu.mass[i] * (s - static_cast<double>(i));
}

double quantile(const GridMeasure1D& mu, double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile level outside [0,1]");
    double acc = 0.0;
    Eigen::Index last_positive = -1;
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
        const double m = mu.mass[i];
        if (m <= 0.0) continue;
        last_positive = i;
        if (acc + m >= p) {
            const double frac = std::clamp((p - acc) / m, 0.0, 1.0);
            return mu.axis.edge(i) + frac * mu.axis.dx;
        }
        acc += m;
    }
    return mu.axis.edge(last_positive + 1);
}

double w2_1d(const GridMeasure1D& mu, const GridMeasure1D& nu) {
    return std::sqrt(std::max(0.0, quantile_cost(pieces(mu), pieces(nu), 2)));
}
double w1_1d(const GridMeasure1D& mu, const GridMeasure1D& nu) {
    return quantile_cost(pieces(mu), pieces(nu), 1);
}
double w2_1d(const PointCloud& mu, const GridMeasure1D& nu) {
    return std::sqrt(std::max(0.0, quantile_cost(pieces(mu), pieces(nu), 2)));
}
double w1_1d(const PointCloud& mu, const GridMeasure1D& nu) {
    return quantile_cost(pieces(mu), pieces(nu), 1);
}
double w2_1d(const PointCloud& mu, const PointCloud& nu) {
    return std::sqrt(std::max(0.0, quantile_cost(pieces(mu), pieces(nu), 2)));
}
double w1_1d(const PointCloud& mu, const PointCloud& nu) {
    return quantile_cost(pieces(mu), pieces(nu), 1);
}

double w2_discrete(const PointCloud& mu, const PointCloud& nu) {
    if (mu.dim() != nu.dim()) throw DomainError("point clouds live in different dimensions");
    if (mu.size() + nu.size() > kMaxDiscreteSupport)
        throw SizeError("total support " + std::to_string(mu.size() + nu.size()) +
                        " exceeds the exact-solver limit of " + std::to_string(kMaxDiscreteSupport) +
                        "; subsample first");
    Eigen::MatrixXd cost(mu.size(), nu.size());
    for (Eigen::Index i = 0; i < mu.size(); ++i)
        for (Eigen::Index j = 0; j < nu.size(); ++j)
            cost(i, j) = (mu.points.row(i) - nu.points.row(j)).squaredNorm();
    const auto plan = solve_transport(cost, mu.weights, nu.weights);
    return std::sqrt(std::max(0.0, plan.cost));
}

// ---------------------------------------------------------------------------

GridMeasure1D project_to_sphere(const GridMeasure1D& mu, double u, double theta) {
    if (!(theta > 0.0)) throw DomainError("sphere radius parameter theta must be positive");
    const double m = mu.mean();
    const double var = mu.variance();
    if (!(var > 0.0)) throw DegenerateInput("cannot project a zero-variance measure onto a sphere");
    const double s = std::sqrt(theta / var);
    Axis ax{u + s * (mu.axis.min - m), s * mu.axis.dx, mu.axis.n};
    return GridMeasure1D(ax, mu.mass);
}

PointCloud project_to_sphere(const PointCloud& mu, const Eigen::VectorXd& u, double theta) {
    if (!(theta > 0.0)) throw DomainError("sphere radius parameter theta must be positive");
    if (u.size() != mu.dim()) throw DomainError("sphere center dimension mismatch");
    const Eigen::VectorXd m = mu.mean();
    const Eigen::MatrixXd centered = mu.points.rowwise() - m.transpose();
    const double var = mu.weights.dot(centered.rowwise().squaredNorm());
    if (!(var > 0.0)) throw DegenerateInput("cannot project a zero-variance measure onto a sphere");
    const double s = std::sqrt(static_cast<double>(mu.dim()) * theta / var);
    Eigen::MatrixXd p = (s * centered).rowwise() + u.transpose();
    return PointCloud(std::move(p), mu.weights);
}

GridMeasure1D resample(const GridMeasure1D& mu, const Axis& target) {
    check_axis(target);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(target.n);
    double lost = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
        const double m = mu.mass[i];
        if (m <= 0.0) continue;
        const double a = mu.axis.edge(i), b = mu.axis.edge(i + 1);
        const double dens = m / (b - a);
        auto j0 = static_cast<Eigen::Index>(std::floor((a - target.min) / target.dx));
        auto j1 = static_cast<Eigen::Index>(std::floor((b - target.min) / target.dx));
        double placed = 0.0;
        for (auto j = std::max<Eigen::Index>(j0, 0); j <= std::min(j1, target.n - 1); ++j) {
            const double ov = std::min(b, target.edge(j + 1)) - std::max(a, target.edge(j));
            if (ov > 0.0) {
                w[j] += dens * ov;
                placed += dens * ov;
            }
        }
        lost += m - placed;
    }
    if (lost > 1e-12) throw DomainError("resampling target grid does not cover the measure's support");
    return GridMeasure1D::normalized(target, std::move(w));
}

GridMeasure1D tilt_to_moments(const GridMeasure1D& mu,
                              const std::vector<std::function<double(double)>>& fs,
                              const Eigen::VectorXd& targets, double tol) {
    const auto k = static_cast<Eigen::Index>(fs.size());
    if (targets.size() != k) throw DomainError("one target per tilt function required");
    std::vector<Eigen::Index> support;
    for (Eigen::Index i = 0; i < mu.size(); ++i)
        if (mu.mass[i] > 0.0) support.push_back(i);
    const auto n = static_cast<Eigen::Index>(support.size());
    Eigen::MatrixXd F(n, k);
    Eigen::VectorXd logm(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const double x = mu.axis.center(support[r]);
        for (Eigen::Index c = 0; c < k; ++c) F(r, c) = fs[c](x);
        logm[r] = std::log(mu.mass[support[r]]);
    }

    Eigen::VectorXd a = Eigen::VectorXd::Zero(k);
    auto weights_for = [&](const Eigen::VectorXd& coef, double& lse) {
        Eigen::VectorXd e = logm + F * coef;
        const double mx = e.maxCoeff();
        Eigen::VectorXd w = (e.array() - mx).exp();
        const double s = w.sum();
        lse = mx + std::log(s);
        return Eigen::VectorXd(w / s);
    };
    auto dual = [&](const Eigen::VectorXd& coef) {
        double lse;
        weights_for(coef, lse);
        return lse - coef.dot(targets);
    };

    double lse = 0.0;
    Eigen::VectorXd w = weights_for(a, lse);
    for (int it = 0; it < 200; ++it) {
        const Eigen::VectorXd mean = F.transpose() * w;
        const Eigen::VectorXd g = mean - targets;
        if (g.lpNorm<Eigen::Infinity>() <= tol) break;
        const Eigen::MatrixXd Fc = F.rowwise() - mean.transpose();
        Eigen::MatrixXd H = Fc.transpose() * w.asDiagonal() * Fc;
        H.diagonal().array() += 1e-14 * (1.0 + H.diagonal().array());
        const Eigen::VectorXd step = H.ldlt().solve(-g);
        // Near the solution the dual decrease drops below roundoff; a full step
        // that shrinks the moment residual is accepted without the Armijo test.
        double lse_full = 0.0;
        const Eigen::VectorXd w_full = weights_for(a + step, lse_full);
        const double g_full = (F.transpose() * w_full - targets).lpNorm<Eigen::Infinity>();
        if (std::isfinite(g_full) && g_full < 0.5 * g.lpNorm<Eigen::Infinity>()) {
            a += step;
            w = w_full;
            continue;
        }
        const double f0 = dual(a);
        double t = 1.0;
        while (t > 1e-12 && dual(a + t * step) > f0 + 1e-4 * t * g.dot(step)) t *= 0.5;
        a += t * step;
        w = weights_for(a, lse);
    }
    const Eigen::VectorXd resid = F.transpose() * w - targets;
    if (resid.lpNorm<Eigen::Infinity>() > std::max(tol, 1e-10))
        throw Infeasible("moment targets are not reachable by tilting this measure");

    Eigen::VectorXd out = Eigen::VectorXd::Zero(mu.size());
    for (Eigen::Index r = 0; r < n; ++r) out[support[r]] = w[r];
    return GridMeasure1D::normalized(mu.axis, std::move(out));
}

GridMeasure1D tilt_to_sphere(const GridMeasure1D& mu, double u, double theta) {
    if (!(theta > 0.0)) throw DomainError("sphere radius parameter theta must be positive");
    std::vector<std::function<double(double)>> fs{[u](double x) { return x - u; },
                                                  [u](double x) { return (x - u) * (x - u); }};
    Eigen::Vector2d t(0.0, theta);
    return tilt_to_moments(mu, fs, t);
}

}  // namespace wsub
