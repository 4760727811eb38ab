// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "wsub/constraints.hpp"
#include "wsub/flows.hpp"
#include "wsub/functionals.hpp"
#include "wsub/geodesics.hpp"
#include "wsub/ldp.hpp"
#include "wsub/measures.hpp"
#include "wsub/suites.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

using namespace wsub;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// Quantile W2 of two cell-uniform densities: midpoint rule in u on inverse CDFs.
double quantile_w2(const GridMeasure1D& a, const GridMeasure1D& b) {
    auto inverse = [](const GridMeasure1D& m) {
        std::vector<double> cdf(m.mass.size() + 1, 0.0);
        for (Eigen::Index i = 0; i < m.mass.size(); ++i) cdf[i + 1] = cdf[i] + m.mass[i];
        return [&m, cdf](double u) {
            u *= cdf.back();
            const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
            const auto i = std::clamp<std::ptrdiff_t>(it - cdf.begin() - 1, 0, m.mass.size() - 1);
            const double frac = m.mass[i] > 0 ? (u - cdf[i]) / m.mass[i] : 0.5;
            return m.axis.edge(i) + std::clamp(frac, 0.0, 1.0) * m.axis.dx;
        };
    };
    const auto qa = inverse(a), qb = inverse(b);
    const int n = 200000;
    double s = 0.0;
    for (int k = 0; k < n; ++k) {
        const double u = (k + 0.5) / n;
        s += std::pow(qa(u) - qb(u), 2);
    }
    return std::sqrt(s / n);
}

double alpha1(double x) { return 2.0 * std::pow(std::asin(std::sqrt(x) / 2.0), 2); }
double arc(double w) { return 2.0 * std::asin(w / 2.0); }

double he(int k, double x) {
    double p0 = 1.0, p1 = x;
    if (k == 0) return p0;
    for (int j = 1; j < k; ++j) {
        const double p2 = x * p1 - j * p0;
        p0 = p1;
        p1 = p2;
    }
    return p1;
}

struct Solved {
    std::string name;
    SpaceTimePath path;
    std::function<double()> recompute_dual;
};

std::vector<Solved> solved;

void keep(const std::string& name, const SpaceTimePath& p, const GridMeasure1D& a, const GridMeasure1D& b) {
    solved.push_back({name, p, [cert = p.certificate, a, b] { return dual_value(cert, a, b); }});
}

void keep(const std::string& name, const SpaceTimePath& p, const GridMeasure2D& a, const GridMeasure2D& b) {
    solved.push_back({name, p, [cert = p.certificate, a, b] { return dual_value(cert, a, b); }});
}

GridMeasure1D two_bumps(const Axis& axis, double w, double a, double va, double b, double vb) {
    return tilt_to_sphere(GridMeasure1D::from_density(axis, [=](double x) {
                              return w * std::exp(-(x - a) * (x - a) / (2 * va)) +
                                     (1 - w) * std::exp(-(x - b) * (x - b) / (2 * vb));
                          }),
                          0.0, 1.0);
}

GridMeasure1D reflect(const GridMeasure1D& m) { return GridMeasure1D(m.axis, m.mass.reverse().eval()); }

Outcome unconstrained_solver() {
    const Axis axis = Axis::span(-5.0, 5.0, 256);
    const std::vector<std::array<double, 4>> pairs{
        {-0.3, 0.04, 0.3, 0.04}, {0.0, 0.25, 0.0, 1.0}, {-1.0, 0.5, 1.0, 0.5}, {-0.5, 0.3, 0.8, 0.15}, {0.4, 0.6, -0.2, 0.2}};
    double worst = 0.0, slowest = 0.0;
    for (const auto& [m1, v1, m2, v2] : pairs) {
        const auto a = gaussian(axis, m1, v1), b = gaussian(axis, m2, v2);
        const auto t0 = std::chrono::steady_clock::now();
        const auto p = solve_geodesic(a, b, ConstraintSet{}, 32);
        slowest = std::max(slowest, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        const double w = quantile_w2(a, b);
        worst = std::max(worst, std::abs(std::sqrt(2.0 * p.action) - w) / w);
        keep(fmt("gaussian (%g,%g)->(%g,%g)", m1, v1, m2, v2), p, a, b);
    }
    return {worst <= 0.02 && slowest <= 60.0, fmt("max rel err %.4f (<= 0.02), slowest solve %.1f s (<= 60)", worst, slowest)};
}

Outcome sphere_distance_consistency() {
    const Axis axis = Axis::span(-5.0, 5.0, 256);
    // W2 >= 0.5 on every pair, where the predicted excess over W2 is at least 1%
    const auto skew = two_bumps(axis, 0.85, -0.4, 0.15, 2.2, 0.1);
    const auto split = two_bumps(axis, 0.5, -1.0, 0.02, 1.0, 0.02);
    const auto normal = tilt_to_sphere(gaussian(axis, 0.0, 1.0), 0.0, 1.0);
    const std::vector<std::pair<GridMeasure1D, GridMeasure1D>> pairs{
        {skew, reflect(skew)}, {split, normal}, {skew, split}};
    const auto S = ConstraintSet::sphere(0.0, 1.0);
    double worst = 0.0, min_excess = kInf;
    bool exceeds = true;
    int checked = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& [a, b] = pairs[i];
        const auto p = solve_geodesic(a, b, S, 32);
        keep("sphere pair " + std::to_string(i + 1), p, a, b);
        const double w = quantile_w2(a, b), ds = arc(w), L = p.length();
        worst = std::max(worst, std::abs(L - ds) / ds);
        if (!(L > w)) exceeds = false;
        if (w >= 0.5) {
            ++checked;
            min_excess = std::min(min_excess, (L - w) / w);
            if ((L - w) / w < 0.005) exceeds = false;
        }
    }
    return {worst <= 0.03 && exceeds && checked > 0,
            fmt("max rel err vs 2 arcsin(W2/2) %.4f (<= 0.03), min excess over W2 %.4f (>= 0.005) on %d pairs with "
                "W2 >= 0.5",
                worst, min_excess, checked)};
}

Outcome flow_invariance() {
    const Axis axis = Axis::span(-10.0, 10.0, 1000);
    std::mt19937_64 rng(301);
    double drift = 0.0, floor_spread = 0.0, order = kInf;
    for (int i = 0; i < 5; ++i) {
        const auto rho0 = random_sphere_measure(axis, rng);
        std::vector<Eigen::VectorXd> finals;
        std::vector<double> drifts;
        for (int steps : {500, 1000, 2000}) {  // dt = 4e-3, 2e-3, 1e-3 on [0, 2]
            const auto tr = ou_flow_grid(rho0, 0.0, 1.0, 2.0, steps);
            double d = 0.0;
            for (std::size_t k = 0; k < tr.size(); ++k) {
                const auto& s = tr.states[k];
                const double m = s.mean();
                d = std::max({d, std::abs(m), std::abs(s.moment(2) - m * m - 1.0)});
            }
            drifts.push_back(d);
            finals.push_back(tr.states.back().mass);
        }
        drift = std::max(drift, drifts.back());
        floor_spread = std::max(floor_spread, std::abs(drifts.front() - drifts.back()));
        // The drift does not depend on dt, so the time order is measured by self-convergence of the states.
        const double e1 = (finals[0] - finals[1]).lpNorm<1>(), e2 = (finals[1] - finals[2]).lpNorm<1>();
        order = std::min(order, std::log2(e1 / e2));
    }
    return {drift <= 1e-4 && order >= 1.8,
            fmt("max drift %.2e at dt=1e-3 (<= 1e-4), drift change under dt refinement %.1e, "
                "state self-convergence order %.3f (>= 1.8)",
                drift, floor_spread, order)};
}

Outcome talagrand() {
    const Axis axis = Axis::span(-10.0, 10.0, 2000);
    const auto g = gaussian(axis, 0.0, 1.0);
    std::mt19937_64 rng(401);
    double worst = kInf, min_gap = kInf;
    int far = 0;
    for (int i = 0; i < 50; ++i) {
        const auto mu = random_sphere_measure(axis, rng);
        const double w = quantile_w2(mu, g);
        worst = std::min(worst, relative_entropy(mu, g) - alpha1(w * w));
        if (w >= 0.3) {
            ++far;
            min_gap = std::min(min_gap, alpha1(w * w) - 0.5 * w * w);
        }
    }
    return {worst >= -1e-3 && far > 0 && min_gap > 0.0,
            fmt("min slack %.4f (>= -1e-3), strengthening gap %.3e on %d samples with W2 >= 0.3", worst, min_gap, far)};
}

Outcome hwi() {
    const Axis axis = Axis::span(-10.0, 10.0, 2000);
    const auto g = gaussian(axis, 0.0, 1.0);
    std::mt19937_64 rng(501);
    double worst = kInf;
    for (int i = 0; i < 25; ++i) {
        const auto mu = random_sphere_measure(axis, rng), nu = random_sphere_measure(axis, rng);
        const double d = arc(quantile_w2(mu, nu));
        const double lhs = relative_entropy(mu, g) - relative_entropy(nu, g);
        const double rhs = d * std::sqrt(fisher_information(mu, g)) - 0.5 * d * d;
        worst = std::min(worst, rhs - lhs);
    }
    return {worst >= -1e-2, fmt("min slack %.4f over 25 pairs (>= -1e-2)", worst)};
}

Outcome energy_identity() {
    const Axis axis = Axis::span(-10.0, 10.0, 1000);
    const std::vector<GridMeasure1D> inits{
        gaussian(axis, 0.0, 0.25), gaussian(axis, 1.0, 2.0), GridMeasure1D::from_density(axis, [](double x) {
            return std::exp(-(x - 0.8) * (x - 0.8) / 0.5) + 0.5 * std::exp(-(x + 1.0) * (x + 1.0) / 0.3);
        })};
    double worst = 0.0;
    for (const auto& rho0 : inits) {
        const auto tr = ou_flow_grid(rho0, 0.0, 1.0, 1.2, 1200);
        for (std::size_t k = 1; k + 1 < tr.size(); ++k) {
            const double t = tr.times[k];
            if (t < 0.1 - 1e-12 || t > 1.0 + 1e-12) continue;
            const double dE = (tr.rel_entropy[k + 1] - tr.rel_entropy[k - 1]) / (tr.times[k + 1] - tr.times[k - 1]);
            const double I = fisher_information(tr.states[k], tr.reference);
            worst = std::max(worst, std::abs(dE + I) / I);
        }
    }
    return {worst <= 0.02, fmt("max |dE/dt + I| / I = %.2e on [0.1, 1] (<= 0.02)", worst)};
}

Outcome fisher_regularization() {
    const Axis axis = Axis::symmetric(0.0, 8.0, 1601);
    auto bound = [](double t) { return 1.0 / (1.0 - std::exp(-2.0 * t)); };
    const auto point = ou_flow_grid(point_mass(axis, 0.0), 0.0, 1.0, 1.0, 2000);
    double eq = 0.0;
    for (std::size_t k = 0; k < point.size(); ++k) {
        const double t = point.times[k];
        if (t < 0.05 - 1e-12) continue;
        eq = std::max(eq, std::abs(fisher_information(point.states[k]) - bound(t)) / bound(t));
    }
    const auto mix = GridMeasure1D::from_density(axis, [](double x) {
        return std::exp(-(x - 1.0) * (x - 1.0) / 0.02) + std::exp(-(x + 1.5) * (x + 1.5) / 0.1);
    });
    const auto tr = ou_flow_grid(mix, 0.0, 1.0, 1.0, 2000);
    double excess = -kInf;
    for (std::size_t k = 1; k < tr.size(); ++k)
        excess = std::max(excess, fisher_information(tr.states[k]) / bound(tr.times[k]) - 1.0);
    return {eq <= 0.03 && excess <= 0.03,
            fmt("equality case max rel err %.4f (<= 0.03), mixture max excess %.4f (<= 0.03)", eq, excess)};
}

Outcome convexity() {
    const Axis axis = Axis::span(-5.0, 5.0, 256);
    const auto g = gaussian(axis, 0.0, 1.0);
    const auto H = Functional::relative_entropy(g);
    const auto S = ConstraintSet::sphere(0.0, 1.0);
    const auto m1 = two_bumps(axis, 0.8, -0.5, 0.2, 2.0, 0.2), m2 = two_bumps(axis, 0.7, -0.6, 0.3, 1.4, 0.5);
    const auto m3 = two_bumps(axis, 0.5, -1.0, 0.1, 1.0, 0.1);
    const std::vector<std::pair<GridMeasure1D, GridMeasure1D>> pairs{
        {m1, reflect(m1)}, {m2, reflect(m2)}, {m3, tilt_to_sphere(gaussian(axis, 0.3, 0.6), 0.0, 1.0)}};
    double worst_h = -kInf, control = -kInf;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto p = solve_geodesic(pairs[i].first, pairs[i].second, S, 32);
        keep("entropy geodesic " + std::to_string(i + 1), p, pairs[i].first, pairs[i].second);
        const auto sl = p.slices();
        worst_h = std::max(worst_h, convexity_profile(sl, H, 1.0, p.length()));
        control = std::max(control, convexity_profile(sl, H, 3.0, p.length()));
    }

    const Axis sa = Axis::span(-3.0, 3.0, 240);
    auto semi = [&](double eps, int k) {
        return tilt_to_sphere(GridMeasure1D::from_density(sa, [=](double x) {
                                  return std::abs(x) >= 2.0 ? 0.0 : std::sqrt(4.0 - x * x) * (1.0 + eps * he(k, x));
                              }),
                              0.0, 1.0);
    };
    const std::vector<std::pair<GridMeasure1D, GridMeasure1D>> spairs{{semi(0.45, 3), semi(-0.45, 3)},
                                                                       {semi(0.15, 4), semi(-0.3, 4)}};
    double worst_log = -kInf;
    for (std::size_t i = 0; i < spairs.size(); ++i) {
        const auto p = solve_geodesic(spairs[i].first, spairs[i].second, S, 32);
        keep("log-energy geodesic " + std::to_string(i + 1), p, spairs[i].first, spairs[i].second);
        worst_log = std::max(worst_log, convexity_profile(p.slices(), Functional::log_energy(), 1.0, p.length()));
    }

    const Axis ca = Axis::span(-4.0, 4.0, 32);
    const auto g1 = gaussian(ca, 0.0, 1.0);
    auto coupling = [&](double rho) {
        Eigen::MatrixXd m(ca.n, ca.n);
        for (Eigen::Index i = 0; i < ca.n; ++i)
            for (Eigen::Index j = 0; j < ca.n; ++j) {
                const double x = ca.center(i), y = ca.center(j);
                m(i, j) = std::exp(-(x * x - 2 * rho * x * y + y * y) / (2 * (1 - rho * rho)));
            }
        for (int it = 0; it < 500; ++it) {
            m = (g1.mass.array() / m.rowwise().sum().array()).matrix().asDiagonal() * m;
            m = m * (g1.mass.array() / m.colwise().sum().transpose().array()).matrix().asDiagonal();
        }
        return GridMeasure2D(ca, ca, m / m.sum());
    };
    const auto ci = coupling(0.6), cf = coupling(-0.6);
    const auto p = coupling_geodesic(ci, cf, 8);
    keep("coupling geodesic", p, ci, cf);
    const auto Hc = Functional::relative_entropy(GridMeasure2D::product(g1, g1));
    const auto sl = p.slices2d();
    const double worst_c = convexity_profile(sl, Hc, 1.0, p.length());
    control = std::max(control, convexity_profile(sl, Hc, 3.0, p.length()));

    const double tol = 5e-3;
    return {worst_h <= tol && worst_log <= tol && worst_c <= tol && control > tol,
            fmt("entropy %.2e, log energy %.2e, coupling %.2e (each <= 5e-3); lambda x3 violation %.3f (> 5e-3)",
                worst_h, worst_log, worst_c, control)};
}

Outcome weak_duality() {
    double worst = -kInf, lowest = kInf, mismatch = 0.0;
    bool ok = !solved.empty();
    for (const auto& s : solved) {
        const double dual = s.recompute_dual();
        mismatch = std::max(mismatch, std::abs(dual - s.path.dual_value));
        const double gap = s.path.action - dual;
        const double rel = gap / s.path.action;
        worst = std::max(worst, rel);
        lowest = std::min(lowest, rel);
        if (gap < -1e-12 * std::max(1.0, s.path.action) || rel > 0.05) {
            ok = false;
            std::printf("      %s: action %.6g dual %.6g\n", s.name.c_str(), s.path.action, dual);
        }
    }
    return {ok, fmt("%zu instances, relative gap in [%.2e, %.2e] (within [0, 0.05]), recomputed dual mismatch %.1e",
                    solved.size(), lowest, worst, mismatch)};
}

Outcome anchors() {
    const auto sigma = semicircle(Axis::span(-2.0, 2.0, 1000));
    const double e = log_energy(sigma), i = e + 0.5 * sigma.moment(2) - 0.75;
    const Axis axis = Axis::span(-10.0, 10.0, 1000);
    const auto skew = GridMeasure1D::from_density(axis, [](double x) {
        return std::exp(-(x - 0.8) * (x - 0.8) / 0.5) + 0.5 * std::exp(-(x + 1.0) * (x + 1.0) / 0.3);
    });
    const auto tr = ou_flow_grid(skew, 0.0, 1.0, 1.0, 1000);
    double worst_rate = 0.0;
    for (int k = 1; k <= 4; ++k) {
        // least squares slope of log|He_k moment| against t
        double st = 0, sy = 0, stt = 0, sty = 0;
        const double n = static_cast<double>(tr.size());
        for (std::size_t j = 0; j < tr.size(); ++j) {
            const auto& s = tr.states[j];
            double m = 0.0;
            for (Eigen::Index c = 0; c < s.mass.size(); ++c) m += s.mass[c] * he(k, s.axis.center(c));
            const double t = tr.times[j], y = std::log(std::abs(m));
            st += t, sy += y, stt += t * t, sty += t * y;
        }
        const double rate = -(n * sty - st * sy) / (n * stt - st * st);
        worst_rate = std::max(worst_rate, std::abs(rate - k) / k);
    }
    const bool pass = std::abs(e - 0.25) <= 5e-3 && std::abs(i) <= 5e-3 && worst_rate <= 0.02;
    return {pass, fmt("E_log(sigma) %.5f (0.25 +- 5e-3), I_log(sigma) %.2e (+- 5e-3), Hermite rates max rel err %.2e "
                      "(<= 0.02)",
                      e, i, worst_rate)};
}

Outcome ldp_tails() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string detail;
    for (const auto& [n, r] : std::vector<std::pair<int, double>>{{100, 0.2}, {200, 0.25}}) {
        const auto e = tail_estimate(n, r, 100000, 1101);
        const double lhs = std::log(e.ci_hi) / n, rhs = -alpha1(r * r) + 0.05;
        ok = ok && lhs <= rhs;
        detail += fmt("(n=%d, r=%.2f): %.4f <= %.4f; ", n, r, lhs, rhs);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {ok && secs <= 600.0, detail + fmt("%.1f s (<= 600)", secs)};
}

Outcome envelope() {
    const Axis axis = Axis::span(-20.0, 20.0, 8000);
    std::mt19937_64 rng(1201);
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
        const double m2 = std::uniform_real_distribution<double>(0.94, 0.99)(rng);
        const auto mu = random_centered_measure(axis, m2, rng);
        const double target = relative_entropy_gaussian(mu) + 0.5 * (1.0 - mu.moment(2));
        worst = std::max(worst, std::abs(relative_entropy_gaussian(envelope_mixture(mu, 64)) - target));
    }
    const double zero = rate_I(gaussian(axis, 0.0, 1.0));
    return {worst <= 1e-2 && std::abs(zero) <= 1e-12,
            fmt("max |J(mu_64) - rate_I(mu)| %.2e (<= 1e-2) for m2 in [0.94, 0.99], rate_I(gamma) = %.1e", worst, zero)};
}

Outcome biane_voiculescu() {
    const Axis sa = Axis::span(-2.5, 2.5, 1000);
    const auto sigma = semicircle(sa);
    std::mt19937_64 rng(1301);
    double worst = kInf;
    for (int i = 0; i < 20; ++i) {
        const auto mu = perturbed_semicircle(sa, rng);
        const double a = std::asin(std::min(1.0, 0.5 * quantile_w2(mu, sigma)));
        const double ilog = log_energy(mu) + 0.5 * mu.moment(2) - 0.75;
        worst = std::min(worst, 2.0 * ilog - 4.0 * a * a);
    }
    return {worst >= -1e-2, fmt("min slack %.4f over 20 samples (>= -1e-2)", worst)};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, Outcome (*)()>> criteria{
        {"unconstrained solver matches quantile W2", unconstrained_solver},
        {"sphere geodesic length matches the arcsin distance", sphere_distance_consistency},
        {"OU flow keeps the sphere invariant", flow_invariance},
        {"strengthened Talagrand on the sphere", talagrand},
        {"HWI on the sphere", hwi},
        {"energy identity along OU flows", energy_identity},
        {"Fisher information regularization", fisher_regularization},
        {"geodesic convexity certificates", convexity},
        {"weak duality on every solved instance", weak_duality},
        {"closed-form anchors", anchors},
        {"LDP tails of sphere empirical measures", ldp_tails},
        {"lsc envelope by mixtures", envelope},
        {"Biane-Voiculescu strengthening", biane_voiculescu},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !o.pass;
        std::printf("%s %2zu %s [%.1f s]\n     %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), secs,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
