#include "wsub/suites.hpp"

#include "wsub/errors.hpp"
#include "wsub/flows.hpp"
#include "wsub/functionals.hpp"
#include "wsub/geodesics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wsub {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Profile {
    const SuiteOptions& o;
    double tol(double t) const { return t * o.tol_scale * (o.quick ? 2.0 : 1.0); }
    int count(int n) const { return o.quick ? std::max(1, n / 2) : n; }
    Eigen::Index cells(Eigen::Index n) const { return o.quick ? n / 2 : n; }
    double lambda(double l) const { return l * o.lambda_scale; }
};

InequalityReport& tag(InequalityReport& r, const SuiteOptions& o) {
    r.with("profile", o.quick ? "quick" : "full");
    if (o.lambda_scale != 1.0) r.with("lambda_scale", o.lambda_scale);
    return r;
}

std::mt19937_64 suite_rng(const SuiteOptions& o, std::uint64_t salt) {
    std::seed_seq seq{static_cast<std::uint32_t>(o.seed), static_cast<std::uint32_t>(o.seed >> 32),
                      static_cast<std::uint32_t>(salt)};
    return std::mt19937_64(seq);
}

double uni(std::mt19937_64& rng, double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }

GridMeasure1D mixture(const Axis& axis, std::mt19937_64& rng) {
    const int comps = uni(rng, 0.0, 1.0) < 0.5 ? 2 : 3;
    std::vector<double> w, m, v;
    for (int c = 0; c < comps; ++c) {
        w.push_back(uni(rng, 0.2, 1.0));
        m.push_back(uni(rng, -2.0, 2.0));
        v.push_back(uni(rng, 0.05, 0.8));
    }
    return GridMeasure1D::from_density(axis, [&](double x) {
        double s = 0.0;
        for (int c = 0; c < comps; ++c) s += w[c] * std::exp(-(x - m[c]) * (x - m[c]) / (2.0 * v[c])) / std::sqrt(v[c]);
        return s;
    });
}

InequalityReport negative_control(const std::string& name, double violation, double threshold) {
    // Passes when the inflated constant is detected, i.e. violation > threshold.
    return InequalityReport::make(name, threshold, violation, 0.0).with("detected_violation", violation);
}

InequalityReport duality_report(const std::string& name, const SpaceTimePath& p, double rel_tol) {
    auto r = InequalityReport::make(name, p.duality_gap, rel_tol * p.action, 0.0);
    if (p.duality_gap < -1e-12 * std::max(1.0, p.action)) r.pass = false;
    return r.with("action", p.action)
        .with("dual_value", p.dual_value)
        .with("iterations", static_cast<double>(p.iterations))
        .with("converged", p.converged ? "true" : "false");
}

}  // namespace

const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names{"evi", "talagrand", "hwi", "convexity", "fisher-reg", "duality",
                                                "envelope"};
    return names;
}

GridMeasure1D random_sphere_measure(const Axis& axis, std::mt19937_64& rng) {
    return tilt_to_sphere(mixture(axis, rng), 0.0, 1.0);
}

GridMeasure1D perturbed_semicircle(const Axis& axis, std::mt19937_64& rng) {
    const int k = uni(rng, 0.0, 1.0) < 0.5 ? 3 : 4;
    const double eps = k == 3 ? uni(rng, -0.4, 0.4) : uni(rng, -0.25, 0.14);
    const auto base = GridMeasure1D::from_density(axis, [&](double x) {
        if (std::abs(x) >= 2.0) return 0.0;
        return std::sqrt(4.0 - x * x) * (1.0 + eps * hermite(k, x));
    });
    return tilt_to_sphere(base, 0.0, 1.0);
}

GridMeasure1D random_centered_measure(const Axis& axis, double m2, std::mt19937_64& rng) {
    const std::vector<std::function<double(double)>> fs{[](double x) { return x; }, [](double x) { return x * x; }};
    return tilt_to_moments(mixture(axis, rng), fs, Eigen::Vector2d(0.0, m2));
}

GridMeasure1D envelope_mixture(const GridMeasure1D& mu, int k) {
    if (k < 2) throw DomainError("envelope mixture needs k >= 2");
    const double m2 = mu.moment(2);
    if (m2 >= 1.0) throw DomainError("envelope mixture needs m2 < 1");
    const double s = std::sqrt(k - 1.0);
    const auto eta = GridMeasure1D::from_density(mu.axis, [s](double x) {
        return std::exp(-0.5 * (x - s) * (x - s)) + std::exp(-0.5 * (x + s) * (x + s));
    });
    const double c = (k - 1.0) / (k - m2);
    return GridMeasure1D::normalized(mu.axis, c * mu.mass + (1.0 - c) * eta.mass);
}

std::vector<InequalityReport> suite_evi(const SuiteOptions& o) {
    const Profile P{o};
    std::vector<InequalityReport> out;
    const Axis axis = Axis::span(-10.0, 10.0, P.cells(1000));
    const int steps = o.quick ? 1000 : 2000;  // t in [0, 2]
    const double lam = P.lambda(1.0);

    // EVI against the minimizer from a translated Gaussian.
    const auto shifted = gaussian(axis, 0.5, 1.0);
    const auto tr = ou_flow_grid(shifted, 0.0, 1.0, 2.0, steps);
    const auto E = Functional::relative_entropy(tr.reference);
    auto evi = evi_residual(tr, tr.reference, lam, E, P.tol(1e-3));
    out.push_back(tag(evi, o));
    auto neg = negative_control("evi_negative_control", evi_residual(tr, tr.reference, 2.0, E).lhs, P.tol(1e-3));
    out.push_back(tag(neg, o));

    // Energy identity from a narrow Gaussian.
    const auto narrow = ou_flow_grid(gaussian(axis, 0.0, 0.25), 0.0, 1.0, 1.2, steps * 6 / 10);
    auto ei = energy_identity_residual(narrow, 0.1, 1.0, P.tol(0.02));
    out.push_back(tag(ei, o));

    // Tail length along a long run.
    const auto longrun = ou_flow_grid(shifted, 0.0, 1.0, 10.0, steps * 5, {5});
    auto tail = flow_tail_length(longrun, lam, P.tol(1e-3));
    out.push_back(tag(tail, o));

    // Sphere invariance from random initial data.
    auto rng = suite_rng(o, 1);
    double drift = 0.0;
    const auto sphere = ConstraintSet::sphere(0.0, 1.0);
    for (int i = 0; i < P.count(5); ++i) {
        const auto rho0 = random_sphere_measure(axis, rng);
        drift = std::max(drift, invariance_check(ou_flow_grid(rho0, 0.0, 1.0, 2.0, steps), sphere).lhs);
    }
    auto inv = InequalityReport::make("sphere_invariance", drift, P.tol(1e-4), 0.0);
    out.push_back(tag(inv.with("samples", P.count(5)), o));

    // Hermite eigenfunction decay from skewed data.
    const auto skew = GridMeasure1D::from_density(axis, [](double x) {
        return std::exp(-(x - 0.8) * (x - 0.8) / 0.5) + 0.5 * std::exp(-(x + 1.0) * (x + 1.0) / 0.3);
    });
    auto hd = hermite_decay_check(ou_flow_grid(skew, 0.0, 1.0, 2.0, steps), 4, 0.0, 1.0, P.tol(0.02));
    out.push_back(tag(hd, o));
    return out;
}

std::vector<InequalityReport> suite_talagrand(const SuiteOptions& o) {
    const Profile P{o};
    std::vector<InequalityReport> out;
    const Axis axis = Axis::span(-10.0, 10.0, P.cells(2000));
    const auto gamma = gaussian(axis, 0.0, 1.0);
    const double lam = P.lambda(1.0);
    auto rng = suite_rng(o, 2);

    double worst = -kInf, min_gap = kInf;
    int far = 0;
    const int n = P.count(50);
    for (int i = 0; i < n; ++i) {
        const auto mu = random_sphere_measure(axis, rng);
        const double w = w2_1d(mu, gamma);
        const double a = alpha(w * w);
        worst = std::max(worst, lam * a - relative_entropy(mu, gamma));
        if (w >= 0.3) {
            ++far;
            min_gap = std::min(min_gap, a - 0.5 * w * w);
        }
    }
    auto t = InequalityReport::make("talagrand_alpha", worst, 0.0, P.tol(1e-3));
    out.push_back(tag(t.with("samples", n), o));
    // alpha(W^2) - W^2/2 > 0 on every far sample.
    auto s = InequalityReport::make("talagrand_strengthening", 0.0, far > 0 ? min_gap : 0.0, 0.0);
    if (far > 0 && !(min_gap > 0.0)) s.pass = false;
    out.push_back(tag(s.with("far_samples", far), o));

    // Free analogue against the semicircle.
    const Axis sa = Axis::span(-2.5, 2.5, P.cells(1000));
    const auto sigma = semicircle(sa);
    auto srng = suite_rng(o, 3);
    double bv = -kInf;
    const int nb = P.count(20);
    for (int i = 0; i < nb; ++i) {
        const auto mu = perturbed_semicircle(sa, srng);
        const double w = w2_1d(mu, sigma);
        const double a = std::asin(std::min(1.0, 0.5 * w));
        bv = std::max(bv, lam * 4.0 * a * a - 2.0 * rate_Ilog(mu));
    }
    auto b = InequalityReport::make("biane_voiculescu", bv, 0.0, P.tol(1e-2));
    out.push_back(tag(b.with("samples", nb), o));
    return out;
}

std::vector<InequalityReport> suite_hwi(const SuiteOptions& o) {
    const Profile P{o};
    const Axis axis = Axis::span(-10.0, 10.0, P.cells(2000));
    const auto gamma = gaussian(axis, 0.0, 1.0);
    auto rng = suite_rng(o, 4);
    const int n = P.count(25);
    InequalityReport worst;
    worst.slack = kInf;
    for (int i = 0; i < n; ++i) {
        const auto mu = random_sphere_measure(axis, rng);
        const auto nu = random_sphere_measure(axis, rng);
        auto r = hwi_residual(mu, nu, gamma, P.lambda(1.0), sphere_distance(mu, nu), P.tol(1e-2));
        if (r.slack < worst.slack) worst = r;
    }
    worst.name = "hwi";
    worst.with("samples", n);
    return {tag(worst, o)};
}

std::vector<InequalityReport> suite_convexity(const SuiteOptions& o) {
    const Profile P{o};
    std::vector<InequalityReport> out;
    const double lam = P.lambda(1.0);
    const double tol = P.tol(5e-3);
    const int T = o.quick ? 16 : 32;
    double control = -kInf;

    // Relative entropy along sphere geodesics.
    const Axis axis = Axis::span(-5.0, 5.0, 256);  // coarser grids resolve the narrow bumps poorly
    const auto gamma = gaussian(axis, 0.0, 1.0);
    const auto H = Functional::relative_entropy(gamma);
    auto mix = [&](double w, double a, double va, double b, double vb) {
        return tilt_to_sphere(GridMeasure1D::from_density(axis, [=](double x) {
                                  return w * std::exp(-(x - a) * (x - a) / (2 * va)) +
                                         (1 - w) * std::exp(-(x - b) * (x - b) / (2 * vb));
                              }),
                              0.0, 1.0);
    };
    auto reflect = [&](const GridMeasure1D& m) { return GridMeasure1D(axis, m.mass.reverse().eval()); };
    const auto m1 = mix(0.8, -0.5, 0.2, 2.0, 0.2), m2 = mix(0.7, -0.6, 0.3, 1.4, 0.5), m3 = mix(0.5, -1, 0.1, 1, 0.1);
    const std::vector<std::pair<GridMeasure1D, GridMeasure1D>> pairs{
        {m1, reflect(m1)}, {m2, reflect(m2)}, {m3, tilt_to_sphere(gaussian(axis, 0.3, 0.6), 0.0, 1.0)}};
    const auto sphere = ConstraintSet::sphere(0.0, 1.0);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto p = solve_geodesic(pairs[i].first, pairs[i].second, sphere, T);
        const auto sl = p.slices();
        auto r = InequalityReport::make("convexity_entropy_" + std::to_string(i + 1),
                                        convexity_profile(sl, H, lam, p.length()), 0.0, tol);
        out.push_back(tag(r.with("length", p.length()).with("duality_gap", p.duality_gap), o));
        control = std::max(control, convexity_profile(sl, H, 3.0, p.length()));
    }

    // Logarithmic energy near the semicircle.
    const Axis sa = Axis::span(-3.0, 3.0, P.cells(240));
    auto semi = [&](double eps, int k) {
        return tilt_to_sphere(GridMeasure1D::from_density(sa, [=](double x) {
                                  return std::abs(x) >= 2.0 ? 0.0 : std::sqrt(4.0 - x * x) * (1.0 + eps * hermite(k, x));
                              }),
                              0.0, 1.0);
    };
    const std::vector<std::pair<GridMeasure1D, GridMeasure1D>> spairs{{semi(0.45, 3), semi(-0.45, 3)},
                                                                       {semi(0.15, 4), semi(-0.3, 4)}};
    const auto El = Functional::log_energy();
    for (std::size_t i = 0; i < spairs.size(); ++i) {
        const auto p = solve_geodesic(spairs[i].first, spairs[i].second, sphere, T);
        auto r = InequalityReport::make("convexity_log_energy_" + std::to_string(i + 1),
                                        convexity_profile(p.slices(), El, lam, p.length()), 0.0, tol);
        out.push_back(tag(r.with("length", p.length()).with("duality_gap", p.duality_gap), o));
    }

    // Entropy along a coupling geodesic with N(0,1) marginals.
    const Axis ca = Axis::span(-4.0, 4.0, P.cells(32));
    const auto g1 = gaussian(ca, 0.0, 1.0);
    auto coupling = [&](double rho) {
        Eigen::MatrixXd m(ca.n, ca.n);
        for (Eigen::Index i = 0; i < ca.n; ++i)
            for (Eigen::Index j = 0; j < ca.n; ++j) {
                const double x = ca.center(i), y = ca.center(j);
                m(i, j) = std::exp(-(x * x - 2 * rho * x * y + y * y) / (2 * (1 - rho * rho)));
            }
        for (int it = 0; it < 500; ++it) {
            const Eigen::VectorXd rs = m.rowwise().sum();
            for (Eigen::Index i = 0; i < ca.n; ++i) m.row(i) *= g1.mass[i] / rs[i];
            const Eigen::RowVectorXd cs = m.colwise().sum();
            for (Eigen::Index j = 0; j < ca.n; ++j) m.col(j) *= g1.mass[j] / cs[j];
        }
        return GridMeasure2D(ca, ca, m / m.sum());
    };
    const auto p = coupling_geodesic(coupling(0.6), coupling(-0.6), 8);
    const auto Hc = Functional::relative_entropy(GridMeasure2D::product(g1, g1));
    const auto sl = p.slices2d();
    auto r = InequalityReport::make("convexity_coupling", convexity_profile(sl, Hc, lam, p.length()), 0.0, tol);
    out.push_back(tag(r.with("length", p.length()).with("duality_gap", p.duality_gap), o));
    control = std::max(control, convexity_profile(sl, Hc, 3.0, p.length()));

    auto neg = negative_control("convexity_negative_control", control, tol);
    out.push_back(tag(neg, o));
    return out;
}

std::vector<InequalityReport> suite_fisher_reg(const SuiteOptions& o) {
    const Profile P{o};
    std::vector<InequalityReport> out;
    const Axis axis = Axis::symmetric(0.0, 8.0, o.quick ? 801 : 1601);
    const int steps = o.quick ? 1000 : 2000;
    const auto point = ou_flow_grid(point_mass(axis, 0.0), 0.0, 1.0, 1.0, steps);
    auto eq = InequalityReport::make("fisher_equality_case", fisher_equality_error(point, 1.0), P.tol(0.03), 0.0);
    out.push_back(tag(eq, o));
    const auto mix = GridMeasure1D::from_density(axis, [](double x) {
        return std::exp(-(x - 1.0) * (x - 1.0) / 0.02) + std::exp(-(x + 1.5) * (x + 1.5) / 0.1);
    });
    auto fr = fisher_regularization_check(ou_flow_grid(mix, 0.0, 1.0, 1.0, steps), 1.0, 1, 0.05, 1.0, P.tol(0.03));
    out.push_back(tag(fr, o));
    return out;
}

std::vector<InequalityReport> suite_duality(const SuiteOptions& o) {
    const Profile P{o};
    std::vector<InequalityReport> out;
    const double tol = 0.05 * o.tol_scale;
    const Axis axis = Axis::span(-5.0, 5.0, P.cells(256));
    const int T = o.quick ? 16 : 32;

    const auto a = gaussian(axis, -0.3, 0.04), b = gaussian(axis, 0.3, 0.04);
    auto r1 = duality_report("duality_unconstrained", solve_geodesic(a, b, ConstraintSet{}, T), tol);
    out.push_back(tag(r1, o));

    const auto u = tilt_to_sphere(GridMeasure1D::from_density(axis, [](double x) {
                                      return 0.7 * std::exp(-(x + 0.6) * (x + 0.6) / 0.6) +
                                             0.3 * std::exp(-(x - 1.4) * (x - 1.4) / 1.0);
                                  }),
                                  0.0, 1.0);
    const GridMeasure1D v(axis, u.mass.reverse().eval());
    auto r2 = duality_report("duality_sphere", solve_geodesic(u, v, ConstraintSet::sphere(0.0, 1.0), T), tol);
    out.push_back(tag(r2, o));

    // Closed-form certificate for a rigid translation.
    const double shift = 0.6;
    const double exact = 0.5 * shift * shift;
    auto r3 = InequalityReport::make("duality_translation_certificate",
                                     std::abs(dual_value(DualCertificate::translation(shift), a, b) - exact), 1e-9, 0.0);
    out.push_back(tag(r3, o));
    return out;
}

std::vector<InequalityReport> suite_envelope(const SuiteOptions& o) {
    const Profile P{o};
    std::vector<InequalityReport> out;
    const Axis axis = Axis::span(-20.0, 20.0, P.cells(8000));
    auto rng = suite_rng(o, 5);
    const int n = P.count(10);
    double worst = 0.0;
    bool monotone = true;
    for (int i = 0; i < n; ++i) {
        const double m2 = uni(rng, 0.94, 0.99);
        const auto mu = random_centered_measure(axis, m2, rng);
        const double target = rate_I(mu);
        double prev = -kInf;
        for (int k : {2, 4, 8, 16, 32, 64}) {
            const double j = relative_entropy_gaussian(envelope_mixture(mu, k));
            if (j < prev - 1e-9) monotone = false;
            prev = j;
            if (k == 64) worst = std::max(worst, std::abs(j - target));
        }
    }
    auto e = InequalityReport::make("envelope_k64", worst, P.tol(1e-2), 0.0);
    e.with("samples", n).with("monotone", monotone ? "true" : "false").with("m2_range", "[0.94, 0.99]");
    out.push_back(tag(e, o));
    auto g = InequalityReport::make("envelope_gaussian_zero", std::abs(rate_I(gaussian(axis, 0.0, 1.0))), 1e-12, 0.0);
    out.push_back(tag(g, o));
    return out;
}

std::vector<InequalityReport> run_suite(const std::string& name, const SuiteOptions& opts) {
    if (name == "all") {
        std::vector<InequalityReport> all;
        for (const auto& s : suite_names()) {
            auto r = run_suite(s, opts);
            all.insert(all.end(), r.begin(), r.end());
        }
        return all;
    }
    if (name == "evi") return suite_evi(opts);
    if (name == "talagrand") return suite_talagrand(opts);
    if (name == "hwi") return suite_hwi(opts);
    if (name == "convexity") return suite_convexity(opts);
    if (name == "fisher-reg") return suite_fisher_reg(opts);
    if (name == "duality") return suite_duality(opts);
    if (name == "envelope") return suite_envelope(opts);
    throw DomainError("unknown suite '" + name + "'");
}

}  // namespace wsub
