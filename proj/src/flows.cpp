#include "wsub/flows.hpp"

#include "wsub/errors.hpp"
#include "wsub/io.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace wsub {

namespace {

double bernoulli(double z) { return std::abs(z) < 1e-12 ? 1.0 - 0.5 * z : z / std::expm1(z); }

// Generator of the Scharfetter-Gummel scheme acting on cell masses. Columns sum
// to zero and off-diagonals are positive, so I - dt A is an M-matrix.
Eigen::SparseMatrix<double> fp_operator(const Axis& axis, const std::function<double(double)>& V) {
    const Eigen::Index n = axis.n;
    const double inv = 1.0 / (axis.dx * axis.dx);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(4 * n));
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        const double w = V(axis.center(i + 1)) - V(axis.center(i));
        const double bp = bernoulli(w) * inv, bm = bernoulli(-w) * inv;
        trip.emplace_back(i, i, -bp);
        trip.emplace_back(i, i + 1, bm);
        trip.emplace_back(i + 1, i, bp);
        trip.emplace_back(i + 1, i + 1, -bm);
    }
    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    return A;
}

using Solver = Eigen::SparseLU<Eigen::SparseMatrix<double>>;

void factor_step(Solver& lu, const Eigen::SparseMatrix<double>& A, double dt) {
    Eigen::SparseMatrix<double> I(A.rows(), A.cols());
    I.setIdentity();
    Eigen::SparseMatrix<double> M = I - dt * A;
    M.makeCompressed();
    lu.compute(M);
    if (lu.info() != Eigen::Success) throw DomainError("flow step matrix could not be factored");
}

GridMeasure1D stationary(const Axis& axis, const std::function<double(double)>& V) {
    Eigen::VectorXd v(axis.n);
    for (Eigen::Index i = 0; i < axis.n; ++i) v[i] = V(axis.center(i));
    const double vmin = v.minCoeff();
    return GridMeasure1D::normalized(axis, (-(v.array() - vmin)).exp().matrix());
}

Eigen::VectorXd clean(Eigen::VectorXd m) {
    m = m.cwiseMax(0.0);
    return m / m.sum();
}

void check_boundary(const GridMeasure1D& rho, double tol, double t) {
    const double edge = std::max(rho.mass[0], rho.mass[rho.size() - 1]);
    if (edge <= tol) return;
    const double mid = 0.5 * (rho.axis.min + rho.axis.max());
    const double half = 0.5 * (rho.axis.max() - rho.axis.min);
    std::ostringstream os;
    os << "boundary cell mass " << edge << " exceeds " << tol << " at t = " << t << "; widen the grid to half-width "
       << 1.5 * half << " around " << mid;
    throw BoundaryMassError(os.str(), 1.5 * half);
}

void record(FlowTrace& tr, double t, const GridMeasure1D& rho, int q) {
    tr.times.push_back(t);
    tr.states.push_back(rho);
    tr.entropy.push_back(entropy(rho));
    tr.rel_entropy.push_back(relative_entropy(rho, tr.reference));
    tr.fisher.push_back(fisher_information(rho, tr.reference));
    tr.mean.push_back(rho.mean());
    tr.m2.push_back(rho.moment(2));
    Eigen::VectorXd mom(q);
    for (int k = 1; k <= q; ++k) mom[k - 1] = rho.moment(k);
    tr.moments.push_back(mom);
}

void fill_speeds(FlowTrace& tr) {
    const std::size_t n = tr.states.size();
    tr.speed.assign(n, 0.0);
    for (std::size_t k = 0; k + 1 < n; ++k)
        tr.speed[k] = w2_1d(tr.states[k], tr.states[k + 1]) / (tr.times[k + 1] - tr.times[k]);
    if (n >= 2) tr.speed[n - 1] = tr.speed[n - 2];
}

double poly(const std::vector<double>& c, double x) {
    double v = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * x + *it;
    return v;
}

}  // namespace

std::string FlowTrace::to_csv() const {
    std::ostringstream os;
    if (!particles.empty()) {
        os << "t,energy,dissipation,mean,m2\n";
        for (std::size_t k = 0; k < times.size(); ++k)
            os << format_double(times[k]) << ',' << format_double(energy[k]) << ',' << format_double(dissipation[k])
               << ',' << format_double(mean[k]) << ',' << format_double(m2[k]) << '\n';
        return os.str();
    }
    os << "t,entropy,rel_entropy,fisher,mean,m2,speed\n";
    for (std::size_t k = 0; k < times.size(); ++k) {
        auto at = [&](const std::vector<double>& v) { return k < v.size() ? format_double(v[k]) : std::string(); };
        os << format_double(times[k]) << ',' << at(entropy) << ',' << at(rel_entropy) << ',' << at(fisher) << ','
           << at(mean) << ',' << at(m2) << ',' << at(speed) << '\n';
    }
    return os.str();
}

FlowTrace fokker_planck_1d(const GridMeasure1D& rho0, const std::function<double(double)>& V, double lambda,
                           double t_end, int n_steps, const GridFlowOptions& opts) {
    if (n_steps < 1 || !(t_end > 0.0)) throw DomainError("flow needs t_end > 0 and at least one step");
    if (opts.record_every < 1) throw DomainError("record_every must be positive");
    const double dt = t_end / n_steps;
    const auto A = fp_operator(rho0.axis, V);
    Solver start, lu;
    factor_step(start, A, dt);
    factor_step(lu, A, 2.0 * dt / 3.0);

    FlowTrace tr;
    tr.lambda = lambda;
    tr.reference = stationary(rho0.axis, V);
    check_boundary(rho0, opts.boundary_tol, 0.0);
    record(tr, 0.0, rho0, opts.moment_degree);

    // BDF2 after one backward Euler step.
    Eigen::VectorXd m = rho0.mass, prev;
    for (int k = 1; k <= n_steps; ++k) {
        Eigen::VectorXd next = k == 1 ? Eigen::VectorXd(start.solve(m)) : Eigen::VectorXd(lu.solve((4.0 * m - prev) / 3.0));
        prev = std::move(m);
        m = std::move(next);
        if (k % opts.record_every == 0 || k == n_steps) {
            m = clean(m);
            GridMeasure1D rho(rho0.axis, m);
            check_boundary(rho, opts.boundary_tol, k * dt);
            record(tr, k * dt, rho, opts.moment_degree);
        }
    }
    fill_speeds(tr);
    return tr;
}

FlowTrace ou_flow_grid(const GridMeasure1D& rho0, double u, double theta, double t_end, int n_steps,
                       const GridFlowOptions& opts) {
    if (!(theta > 0.0)) throw DomainError("theta must be positive");
    return fokker_planck_1d(
        rho0, [u, theta](double x) { return (x - u) * (x - u) / (2.0 * theta); }, 1.0 / theta, t_end, n_steps, opts);
}

std::pair<double, double> moment_ode(double f0, double g0, double theta, double t) {
    return {f0 * std::exp(-t / theta), g0 * std::exp(-2.0 * t / theta)};
}

InequalityReport invariance_check(const FlowTrace& trace, const ConstraintSet& constraints, double tolerance) {
    double drift = 0.0;
    for (const auto& s : trace.states) drift = std::max(drift, constraints.max_residual(s));
    for (const auto& s : trace.states2d) drift = std::max(drift, constraints.max_residual(s));
    return InequalityReport::make("invariance", drift, tolerance, 0.0)
        .with("times", static_cast<double>(trace.size()));
}

std::vector<HermiteDecay> hermite_decay(const FlowTrace& trace, int q, double u, double theta) {
    std::vector<HermiteDecay> out;
    const double s = std::sqrt(theta);
    for (int k = 1; k <= q; ++k) {
        HermiteDecay h;
        h.k = k;
        h.expected_rate = k / theta;
        std::vector<double> val;
        for (const auto& st : trace.states) val.push_back(st.expectation([&](double x) { return hermite(k, (x - u) / s); }));
        double sx = 0, sy = 0, sxx = 0, sxy = 0, cnt = 0;
        for (std::size_t i = 0; i < val.size(); ++i) {
            const double pred = std::exp(-h.expected_rate * trace.times[i]) * val.front();
            h.max_deviation = std::max(h.max_deviation, std::abs(val[i] - pred));
            if (std::abs(val[i]) < 1e-9) continue;
            const double t = trace.times[i], y = std::log(std::abs(val[i]));
            sx += t, sy += y, sxx += t * t, sxy += t * y, cnt += 1;
        }
        const double den = cnt * sxx - sx * sx;
        h.fitted_rate = (cnt >= 2 && den > 0) ? -(cnt * sxy - sx * sy) / den : std::numeric_limits<double>::quiet_NaN();
        out.push_back(h);
    }
    return out;
}

InequalityReport hermite_decay_check(const FlowTrace& trace, int q, double u, double theta, double rel_tol) {
    const auto decay = hermite_decay(trace, q, u, theta);
    double worst = 0.0;
    for (const auto& h : decay)
        worst = std::max(worst, std::isfinite(h.fitted_rate) ? std::abs(h.fitted_rate / h.expected_rate - 1.0)
                                                             : std::numeric_limits<double>::infinity());
    auto r = InequalityReport::make("hermite_decay", worst, rel_tol, 0.0);
    for (const auto& h : decay) r.with("rate_" + std::to_string(h.k), h.fitted_rate);
    return r;
}

InequalityReport evi_residual(const FlowTrace& trace, const GridMeasure1D& reference, double lambda,
                              const Functional& E, double tolerance) {
    const std::size_t n = trace.states.size();
    if (n < 3) throw DomainError("EVI residual needs at least three recorded states");
    std::vector<double> half_w2(n), energy(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double w = w2_1d(trace.states[k], reference);
        half_w2[k] = 0.5 * w * w;
        energy[k] = E(trace.states[k]);
    }
    const double ex = E(reference);
    double worst = -std::numeric_limits<double>::infinity();
    double t_worst = 0.0;
    for (std::size_t k = 0; k + 2 < n; ++k) {
        const double h1 = trace.times[k + 1] - trace.times[k];
        const double h2 = trace.times[k + 2] - trace.times[k];
        const double d1 = (half_w2[k + 1] - half_w2[k]) / h1;
        const double d2 = (half_w2[k + 2] - half_w2[k]) / h2;
        const double deriv = 2.0 * d1 - d2;
        const double defect = deriv + lambda * half_w2[k] - (ex - energy[k]);
        if (defect > worst) worst = defect, t_worst = trace.times[k];
    }
    return InequalityReport::make("evi", worst, 0.0, tolerance).with("lambda", lambda).with("t_worst", t_worst);
}

InequalityReport energy_identity_residual(const FlowTrace& trace, double t_min, double t_max, double tolerance) {
    // Particle traces carry the energy and (1/n) sum xdot^2 instead.
    const bool particles = !trace.particles.empty();
    const auto& energy = particles ? trace.energy : trace.rel_entropy;
    const auto& slope = particles ? trace.dissipation : trace.fisher;
    double worst = 0.0, t_worst = 0.0;
    for (std::size_t k = 1; k + 1 < trace.size(); ++k) {
        const double t = trace.times[k];
        if (t < t_min || t > t_max) continue;
        const double dE = (energy[k + 1] - energy[k - 1]) / (trace.times[k + 1] - trace.times[k - 1]);
        const double I = slope[k];
        const double err = std::abs(dE + I) / std::max(I, 1e-300);
        if (err > worst) worst = err, t_worst = t;
    }
    return InequalityReport::make("energy_identity", worst, tolerance, 0.0).with("t_worst", t_worst);
}

namespace {

template <class F>
void over_fisher_window(const FlowTrace& trace, double beta, int d, double t_min, double t_max, F&& f) {
    for (std::size_t k = 0; k < trace.size(); ++k) {
        const double t = trace.times[k];
        if (t <= 0.0 || t < t_min || t > t_max) continue;
        const double bound = d * beta / (-std::expm1(-2.0 * beta * t));
        f(t, fisher_information(trace.states[k]), bound);
    }
}

}  // namespace

InequalityReport fisher_regularization_check(const FlowTrace& trace, double beta, int d, double t_min, double t_max,
                                             double rel_tol) {
    double worst = -std::numeric_limits<double>::infinity(), lhs = 0.0, rhs = 0.0, t_worst = 0.0;
    over_fisher_window(trace, beta, d, t_min, t_max, [&](double t, double info, double bound) {
        if (info / bound - 1.0 > worst) worst = info / bound - 1.0, lhs = info, rhs = bound, t_worst = t;
    });
    return InequalityReport::make("fisher_regularization", worst, rel_tol, 0.0)
        .with("fisher", lhs)
        .with("bound", rhs)
        .with("t_worst", t_worst);
}

double fisher_equality_error(const FlowTrace& trace, double beta, int d, double t_min, double t_max) {
    double worst = 0.0;
    over_fisher_window(trace, beta, d, t_min, t_max,
                       [&](double, double info, double bound) { worst = std::max(worst, std::abs(info / bound - 1.0)); });
    return worst;
}

InequalityReport flow_tail_length(const FlowTrace& trace, double lambda, double tolerance) {
    const std::size_t n = trace.states.size();
    if (n < 2) throw DomainError("tail length needs at least two recorded states");
    std::vector<double> tail(n, 0.0);
    for (std::size_t k = n - 1; k-- > 0;) tail[k] = tail[k + 1] + w2_1d(trace.states[k], trace.states[k + 1]);
    double worst = std::numeric_limits<double>::infinity(), lhs = 0.0, rhs = 0.0, t_worst = 0.0;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double bound = std::sqrt(2.0 / lambda * std::max(trace.rel_entropy[k], 0.0));
        if (bound - tail[k] < worst) worst = bound - tail[k], lhs = tail[k], rhs = bound, t_worst = trace.times[k];
    }
    return InequalityReport::make("tail_length", lhs, rhs, tolerance).with("lambda", lambda).with("t_worst", t_worst);
}

FlowTrace product_ou_2d(const GridMeasure2D& rho0, const std::vector<double>& V1, const std::vector<double>& V2,
                        double t_end, int n_steps, int record_every) {
    if (n_steps < 1 || !(t_end > 0.0) || record_every < 1) throw DomainError("invalid 2D flow step settings");
    const double dt = t_end / n_steps;
    auto v1 = [&](double x) { return poly(V1, x); };
    auto v2 = [&](double x) { return poly(V2, x); };
    Solver lu0, lu1;
    factor_step(lu0, fp_operator(rho0.axis0, v1), dt);
    factor_step(lu1, fp_operator(rho0.axis1, v2), dt);
    const GridMeasure2D ref = GridMeasure2D::product(stationary(rho0.axis0, v1), stationary(rho0.axis1, v2));

    FlowTrace tr;
    auto rec = [&](double t, const GridMeasure2D& r) {
        tr.times.push_back(t);
        tr.states2d.push_back(r);
        tr.entropy.push_back(entropy(r));
        tr.rel_entropy.push_back(relative_entropy(r, ref));
        const GridMeasure1D a = r.marginal(0), b = r.marginal(1);
        tr.marginal0.push_back(a.mass);
        tr.marginal1.push_back(b.mass);
        tr.mean.push_back(a.mean());
        tr.m2.push_back(a.moment(2));
    };
    rec(0.0, rho0);
    Eigen::MatrixXd m = rho0.mass;
    for (int k = 1; k <= n_steps; ++k) {
        m = lu0.solve(m);
        m = lu1.solve(Eigen::MatrixXd(m.transpose())).transpose();
        if (k % record_every == 0 || k == n_steps) {
            m = m.cwiseMax(0.0);
            m /= m.sum();
            rec(k * dt, GridMeasure2D(rho0.axis0, rho0.axis1, m));
        }
    }
    return tr;
}

}  // namespace wsub
