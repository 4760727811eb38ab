#include "wsub/ldp.hpp"

#include "wsub/errors.hpp"
#include "wsub/functionals.hpp"

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace wsub {

namespace {

// E[(x - X)^+], the antiderivative of the CDF.
double gauss_K(double x) { return x * normal_cdf(x) + normal_pdf(x); }

double semi_K(double x) {
    if (x <= -2.0) return 0.0;
    if (x >= 2.0) return x;
    const double s = std::sqrt(4.0 - x * x);
    return 0.5 * x + (x * std::asin(0.5 * x) + s) / std::numbers::pi - s * s * s / (12.0 * std::numbers::pi);
}

double semi_quantile(double p) {
    double lo = -2.0, hi = 2.0;
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        (semicircle_cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// int |F_n - F| for the empirical CDF of sorted equal-weight points, F of mean zero.
template <class Cdf, class K, class Q>
double w1_exact(const std::vector<double>& u, Cdf F, K k, Q q) {
    const std::size_t n = u.size();
    double s = k(u.front()) + (k(u.back()) - u.back());
    for (std::size_t i = 1; i < n; ++i) {
        const double a = u[i - 1], b = u[i];
        if (b <= a) continue;
        const double c = static_cast<double>(i) / static_cast<double>(n);
        const double ka = k(a), kb = k(b);
        if (F(a) >= c) {
            s += kb - ka - c * (b - a);
        } else if (F(b) <= c) {
            s += c * (b - a) - (kb - ka);
        } else {
            const double z = q(c), kz = k(z);
            s += c * (z - a) - (kz - ka) + (kb - kz) - c * (b - z);
        }
    }
    return s;
}

void finish(TailEstimate& e, std::chrono::steady_clock::time_point t0) {
    e.p_hat = static_cast<double>(e.hits) / static_cast<double>(e.replicates);
    std::tie(e.ci_lo, e.ci_hi) = wilson_interval(e.hits, e.replicates);
    e.bound = std::exp(-e.n * e.rate);
    e.log_ratio_per_n = (std::log(e.ci_hi) - std::log(e.bound)) / e.n;
    e.pass = e.log_ratio_per_n <= e.slack;
    if (e.status.empty()) e.status = e.pass ? "pass" : "fail";
    e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> centered_sorted(const PointCloud& c) {
    std::vector<double> x(c.points.data(), c.points.data() + c.size());
    const double m = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    for (auto& v : x) v -= m;
    std::sort(x.begin(), x.end());
    return x;
}

void check_replicates(long reps) {
    if (reps < 1 || reps > 1000000) throw DomainError("replicates must lie in [1, 1e6]");
}

}  // namespace

std::pair<double, double> wilson_interval(long hits, long trials, double z) {
    if (trials <= 0 || hits < 0 || hits > trials) throw DomainError("invalid binomial counts");
    const double n = static_cast<double>(trials), p = static_cast<double>(hits) / n, z2 = z * z;
    const double mid = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n);
    return {std::clamp(mid - half, 0.0, p), std::clamp(mid + half, p, 1.0)};
}

std::mt19937_64 replicate_rng(std::uint64_t seed, std::uint64_t i) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32)};
    return std::mt19937_64(seq);
}

PointCloud sample_sphere_blocks(int n, int d, std::mt19937_64& rng) {
    if (n < 1 || d < 1) throw DomainError("sphere blocks need n, d >= 1");
    std::normal_distribution<double> g;
    Eigen::MatrixXd x(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) x(i, j) = g(rng);
    x *= std::sqrt(static_cast<double>(d) * n) / x.norm();
    return PointCloud::uniform(std::move(x));
}

PointCloud sample_sphere_blocks(int n, int d, std::uint64_t seed) {
    auto rng = replicate_rng(seed, 0);
    return sample_sphere_blocks(n, d, rng);
}

PointCloud center(const PointCloud& cloud) {
    PointCloud out = cloud;
    const Eigen::RowVectorXd m = cloud.mean().transpose();
    // A mean at roundoff level means the cloud is already centered; leaving it
    // untouched makes centering exactly idempotent.
    const double scale = cloud.points.size() ? cloud.points.cwiseAbs().maxCoeff() : 0.0;
    if (m.cwiseAbs().maxCoeff() <= 8.0 * std::numeric_limits<double>::epsilon() * scale) return out;
    out.points.rowwise() -= m;
    return out;
}

double w1_to_gaussian(std::vector<double> x) {
    if (x.empty()) throw DomainError("empty sample");
    std::sort(x.begin(), x.end());
    return w1_exact(x, normal_cdf, gauss_K, normal_quantile);
}

double w1_to_semicircle(std::vector<double> x) {
    if (x.empty()) throw DomainError("empty sample");
    std::sort(x.begin(), x.end());
    return w1_exact(x, [](double v) { return semicircle_cdf(v); }, semi_K, semi_quantile);
}

double PiecewiseLinear::operator()(double x) const {
    if (knots.empty()) return 0.0;
    if (x <= knots.front()) return values.front() + left_slope * (x - knots.front());
    if (x >= knots.back()) return values.back() + right_slope * (x - knots.back());
    const auto it = std::upper_bound(knots.begin(), knots.end(), x);
    const std::size_t j = static_cast<std::size_t>(it - knots.begin());
    const double t = (x - knots[j - 1]) / (knots[j] - knots[j - 1]);
    return (1.0 - t) * values[j - 1] + t * values[j];
}

double PiecewiseLinear::lipschitz() const {
    double l = std::max(std::abs(left_slope), std::abs(right_slope));
    for (std::size_t j = 1; j < knots.size(); ++j)
        l = std::max(l, std::abs((values[j] - values[j - 1]) / (knots[j] - knots[j - 1])));
    return l;
}

double PiecewiseLinear::gaussian_mean() const {
    std::vector<double> br{-12.0, 12.0};
    for (double k : knots)
        if (k > -12.0 && k < 12.0) br.push_back(k);
    std::sort(br.begin(), br.end());
    double s = 0.0;
    for (std::size_t j = 1; j < br.size(); ++j) {
        const double a = br[j - 1], b = br[j];
        if (b <= a) continue;
        const int m = 2000;
        const double h = (b - a) / m;
        double acc = 0.0;
        for (int i = 0; i <= m; ++i) {
            const double x = a + i * h;
            const double w = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
            acc += w * (*this)(x)*normal_pdf(x);
        }
        s += acc * h / 3.0;
    }
    return s;
}

TailEstimate tail_estimate(int n, double r, long replicates, std::uint64_t seed, int d, double slack) {
    if (d != 1) throw DomainError("tail_estimate supports d = 1");
    check_replicates(replicates);
    const auto t0 = std::chrono::steady_clock::now();
    TailEstimate e;
    e.statistic = "w1";
    e.n = n, e.d = d, e.r = r, e.replicates = replicates, e.seed = seed, e.slack = slack;
    e.rate = alpha(r * r, d);
    for (long i = 0; i < replicates; ++i) {
        auto rng = replicate_rng(seed, static_cast<std::uint64_t>(i));
        if (w1_to_gaussian(centered_sorted(sample_sphere_blocks(n, d, rng))) >= r) ++e.hits;
    }
    finish(e, t0);
    return e;
}

TailEstimate lipschitz_tail(int n, const PiecewiseLinear& f, double r, long replicates, std::uint64_t seed,
                            double slack) {
    check_replicates(replicates);
    if (f.knots.size() != f.values.size()) throw DomainError("knots and values differ in length");
    if (!std::is_sorted(f.knots.begin(), f.knots.end())) throw DomainError("knots must be sorted");
    if (f.lipschitz() > 1.0 + 1e-12) throw DomainError("test function is not 1-Lipschitz");
    const auto t0 = std::chrono::steady_clock::now();
    TailEstimate e;
    e.statistic = "lipschitz";
    e.n = n, e.d = 1, e.r = r, e.replicates = replicates, e.seed = seed, e.slack = slack;
    e.rate = alpha(r * r, 1);
    const double level = f.gaussian_mean() + r;
    for (long i = 0; i < replicates; ++i) {
        auto rng = replicate_rng(seed, static_cast<std::uint64_t>(i));
        const auto x = centered_sorted(sample_sphere_blocks(n, 1, rng));
        double s = 0.0;
        for (double v : x) s += f(v);
        if (s / n >= level) ++e.hits;
    }
    finish(e, t0);
    return e;
}

PointCloud gue_fixed_trace(int n, std::mt19937_64& rng) {
    if (n < 1) throw DomainError("GUE size must be positive");
    if (n > 512) throw SizeError("GUE samples are capped at n = 512");
    std::normal_distribution<double> g;
    Eigen::MatrixXcd H(n, n);
    for (int i = 0; i < n; ++i) {
        H(i, i) = g(rng);
        for (int j = i + 1; j < n; ++j) {
            const std::complex<double> z(g(rng) / std::numbers::sqrt2, g(rng) / std::numbers::sqrt2);
            H(i, j) = z;
            H(j, i) = std::conj(z);
        }
    }
    H *= static_cast<double>(n) / H.norm();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H, Eigen::EigenvaluesOnly);
    Eigen::MatrixXd ev = es.eigenvalues() / std::sqrt(static_cast<double>(n));
    return center(PointCloud::uniform(std::move(ev)));
}

PointCloud gue_fixed_trace(int n, std::uint64_t seed) {
    auto rng = replicate_rng(seed, 0);
    return gue_fixed_trace(n, rng);
}

TailEstimate gue_tail_probe(int n, double r, long replicates, std::uint64_t seed) {
    check_replicates(replicates);
    const auto t0 = std::chrono::steady_clock::now();
    TailEstimate e;
    e.statistic = "gue_w1";
    e.n = n, e.r = r, e.replicates = replicates, e.seed = seed;
    const double a = std::asin(std::min(1.0, 0.5 * r));
    e.rate = 2.0 * a * a;
    e.status = "report-only";
    for (long i = 0; i < replicates; ++i) {
        auto rng = replicate_rng(seed, static_cast<std::uint64_t>(i));
        const PointCloud c = gue_fixed_trace(n, rng);
        std::vector<double> x(c.points.data(), c.points.data() + c.size());
        if (w1_to_semicircle(std::move(x)) >= r) ++e.hits;
    }
    finish(e, t0);
    return e;
}

EnergyTest energy_distance_test(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int permutations,
                                std::uint64_t seed) {
    if (a.cols() != b.cols() || a.rows() < 2 || b.rows() < 2) throw DomainError("energy test needs matching samples");
    const Eigen::Index na = a.rows(), n = a.rows() + b.rows();
    Eigen::MatrixXd z(n, a.cols());
    z << a, b;
    Eigen::MatrixXd D(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) D(i, j) = (z.row(i) - z.row(j)).norm();

    auto stat = [&](const std::vector<Eigen::Index>& idx) {
        double xy = 0, xx = 0, yy = 0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) {
                const double v = D(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
                const bool ia = i < na, ja = j < na;
                if (ia && ja) xx += v;
                else if (!ia && !ja) yy += v;
                else xy += v;
            }
        const double ma = static_cast<double>(na), mb = static_cast<double>(n - na);
        return xy / (ma * mb) - xx / (ma * ma) - yy / (mb * mb);
    };

    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    EnergyTest t;
    t.statistic = stat(idx);
    auto rng = replicate_rng(seed, 0);
    int above = 0;
    for (int p = 0; p < permutations; ++p) {
        std::shuffle(idx.begin(), idx.end(), rng);
        if (stat(idx) >= t.statistic) ++above;
    }
    t.p_value = (1.0 + above) / (1.0 + permutations);
    return t;
}

std::string to_jsonl(const std::vector<TailEstimate>& es) {
    std::ostringstream os;
    for (const auto& e : es) {
        nlohmann::ordered_json j;
        j["statistic"] = e.statistic;
        j["n"] = e.n;
        j["d"] = e.d;
        j["r"] = e.r;
        j["replicates"] = e.replicates;
        j["hits"] = e.hits;
        j["p_hat"] = e.p_hat;
        j["ci_lo"] = e.ci_lo;
        j["ci_hi"] = e.ci_hi;
        j["rate"] = e.rate;
        j["bound"] = e.bound;
        j["slack"] = e.slack;
        j["log_ratio_per_n"] = e.log_ratio_per_n;
        j["pass"] = e.pass;
        j["status"] = e.status;
        j["seed"] = e.seed;
        os << j.dump() << '\n';
    }
    return os.str();
}

std::string to_csv(const std::vector<TailEstimate>& es) {
    std::ostringstream os;
    os.precision(17);
    os << "n,r,p_hat,ci_lo,ci_hi,bound,log_ratio_per_n\n";
    for (const auto& e : es)
        os << e.n << ',' << e.r << ',' << e.p_hat << ',' << e.ci_lo << ',' << e.ci_hi << ',' << e.bound << ','
           << e.log_ratio_per_n << '\n';
    return os.str();
}

}  // namespace wsub
