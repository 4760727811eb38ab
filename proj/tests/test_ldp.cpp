#include <doctest.h>

#include "wsub/errors.hpp"
#include "wsub/functionals.hpp"
#include "wsub/ldp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace wsub;

namespace {

// int |F_n - F| over [lo, hi] by a fine midpoint rule.
template <class Cdf>
double w1_oracle(std::vector<double> x, Cdf F, double lo, double hi) {
    std::sort(x.begin(), x.end());
    const int m = 400000;
    const double h = (hi - lo) / m;
    double s = 0.0;
    std::size_t k = 0;
    for (int i = 0; i < m; ++i) {
        const double t = lo + (i + 0.5) * h;
        while (k < x.size() && x[k] <= t) ++k;
        s += std::abs(static_cast<double>(k) / x.size() - F(t)) * h;
    }
    return s;
}

double phi_cdf(double t) { return 0.5 * std::erfc(-t / std::sqrt(2.0)); }

double semicircle_cdf_oracle(double t) {
    if (t <= -2.0) return 0.0;
    if (t >= 2.0) return 1.0;
    return 0.5 + t * std::sqrt(4.0 - t * t) / (4.0 * std::numbers::pi) + std::asin(t / 2.0) / std::numbers::pi;
}

}  // namespace

TEST_CASE("sphere blocks") {
    for (int d : {1, 2, 3}) {
        const auto c = sample_sphere_blocks(50, d, 42);
        CHECK(c.size() == 50);
        CHECK(c.dim() == d);
        CHECK(c.points.squaredNorm() == doctest::Approx(50.0 * d).epsilon(1e-9));
        CHECK(c.weights.sum() == doctest::Approx(1.0));
    }
    int plus = 0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        const auto c = sample_sphere_blocks(1, 1, s);
        CHECK(std::abs(std::abs(c.points(0, 0)) - 1.0) <= 1e-12);
        plus += c.points(0, 0) > 0;
    }
    CHECK(plus > 70);
    CHECK(plus < 130);

    const auto big = sample_sphere_blocks(10000, 1, 1);
    CHECK(std::abs(big.second_moment() - 1.0) <= 0.05);

    const auto again = sample_sphere_blocks(50, 2, 42);
    CHECK((again.points - sample_sphere_blocks(50, 2, 42).points).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("centering") {
    Eigen::MatrixXd one(1, 1);
    one << 5.0;
    CHECK(center(PointCloud::uniform(one)).points(0, 0) == 0.0);

    Eigen::MatrixXd sym(2, 1);
    sym << -1.0, 1.0;
    CHECK(center(PointCloud::uniform(sym)).points == sym);

    std::mt19937_64 rng(4);
    std::normal_distribution<double> N(1.0, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd p(30, 2);
        for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = N(rng);
        const auto c = center(PointCloud::uniform(p));
        CHECK(c.mean().cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(center(c).points == c.points);
    }
}

TEST_CASE("exact W1 against continuous laws") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> N(0.2, 1.3);
    std::vector<double> x(25);
    for (auto& v : x) v = N(rng);
    CHECK(w1_to_gaussian(x) == doctest::Approx(w1_oracle(x, phi_cdf, -12.0, 12.0)).epsilon(1e-5));

    std::uniform_real_distribution<double> U(-2.5, 2.5);
    for (auto& v : x) v = U(rng);
    CHECK(w1_to_semicircle(x) == doctest::Approx(w1_oracle(x, semicircle_cdf_oracle, -3.0, 3.0)).epsilon(1e-5));

    CHECK(w1_to_gaussian({0.0}) == doctest::Approx(std::sqrt(2.0 / std::numbers::pi)).epsilon(1e-12));
    CHECK_THROWS_AS(w1_to_gaussian({}), DomainError);
}

TEST_CASE("piecewise-linear test functions") {
    const PiecewiseLinear abs{{0.0}, {0.0}, -1.0, 1.0};
    CHECK(abs(-2.5) == 2.5);
    CHECK(abs.lipschitz() == 1.0);
    CHECK(abs.gaussian_mean() == doctest::Approx(std::sqrt(2.0 / std::numbers::pi)).epsilon(1e-10));
    const PiecewiseLinear hat{{-1.0, 0.0, 1.0}, {0.0, 1.0, 0.0}, 0.0, 0.0};
    CHECK(hat(0.5) == 0.5);
    // int (1 - |x|)^+ dgamma = 2 (Phi(1) - 1/2) - 2 (phi(0) - phi(1))
    const double pdf0 = 1.0 / std::sqrt(2 * std::numbers::pi), pdf1 = pdf0 * std::exp(-0.5);
    CHECK(hat.gaussian_mean() == doctest::Approx(2 * (phi_cdf(1.0) - 0.5) - 2 * (pdf0 - pdf1)).epsilon(1e-10));
    const PiecewiseLinear steep{{0.0}, {0.0}, 0.0, 2.0};
    CHECK_THROWS_AS(lipschitz_tail(10, steep, 0.1, 10, 1), DomainError);
}

TEST_CASE("Wilson interval") {
    const auto [lo, hi] = wilson_interval(30, 100);
    CHECK(lo < 0.3);
    CHECK(hi > 0.3);
    // closed form at z = 2.5758
    const double z = 2.5758293035489004, p = 0.3, n = 100;
    const double c = (p + z * z / (2 * n)) / (1 + z * z / n);
    const double h = z * std::sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n);
    CHECK(lo == doctest::Approx(c - h));
    CHECK(hi == doctest::Approx(c + h));
    CHECK(wilson_interval(0, 50).first == 0.0);
    CHECK(wilson_interval(50, 50).second == doctest::Approx(1.0));
}

TEST_CASE("tail estimates") {
    const auto zero = tail_estimate(50, 0.0, 200, 1);
    CHECK(zero.p_hat == 1.0);
    CHECK(zero.bound == 1.0);
    CHECK(zero.pass);

    const auto e = tail_estimate(100, 0.2, 20000, 7);
    CHECK(e.rate == doctest::Approx(2.0 * std::pow(std::asin(0.1), 2)));
    CHECK(e.ci_lo <= e.p_hat);
    CHECK(e.p_hat <= e.ci_hi);
    CHECK(e.hits <= e.replicates);
    CHECK(e.pass);
    CHECK(alpha(0.0625) == doctest::Approx(0.03134).epsilon(1e-3));

    // same samples, larger threshold, fewer hits
    long prev = 20001;
    for (double r : {0.05, 0.1, 0.15, 0.2}) {
        const auto t = tail_estimate(60, r, 4000, 99);
        CHECK(t.hits <= prev);
        prev = t.hits;
    }

    const auto small = tail_estimate(50, 0.1, 20000, 3), large = tail_estimate(400, 0.1, 20000, 3);
    CHECK(std::log(large.ci_lo > 0 ? large.ci_lo : 1e-300) / 400 <= std::log(small.ci_hi) / 50);
    CHECK(std::log(large.p_hat) / 400 <= std::log(small.p_hat) / 50);

    CHECK_THROWS_AS(tail_estimate(10, 0.1, 10, 1, 2), DomainError);
    CHECK_THROWS_AS(tail_estimate(10, 0.1, 2000000, 1), DomainError);
}

TEST_CASE("Lipschitz tails") {
    const PiecewiseLinear zero{{0.0}, {0.0}, 0.0, 0.0};
    CHECK(lipschitz_tail(40, zero, 0.1, 500, 2).hits == 0);
    const PiecewiseLinear id{{0.0}, {0.0}, 1.0, 1.0};
    CHECK(lipschitz_tail(40, id, 0.1, 500, 2).hits == 0);
    const PiecewiseLinear abs{{0.0}, {0.0}, -1.0, 1.0};
    const auto e = lipschitz_tail(200, abs, 0.2, 5000, 2);
    CHECK(e.pass);
    CHECK(e.log_ratio_per_n <= 0.05);
}

TEST_CASE("determinism and export") {
    const auto a = tail_estimate(30, 0.2, 3000, 11), b = tail_estimate(30, 0.2, 3000, 11);
    CHECK(to_jsonl({a}) == to_jsonl({b}));
    CHECK(to_csv({a}).rfind("n,r,p_hat,ci_lo,ci_hi,bound,log_ratio_per_n\n", 0) == 0);
    CHECK(to_jsonl({a}).find("\"seconds\"") == std::string::npos);
}

TEST_CASE("fixed-trace GUE") {
    const auto s = gue_fixed_trace(256, 5);
    CHECK(s.size() == 256);
    CHECK(s.second_moment() <= 1.0 + 1e-9);
    CHECK(s.second_moment() > 0.99);
    CHECK(std::abs(s.mean()[0]) <= 1e-12);
    std::vector<double> x(s.points.data(), s.points.data() + s.size());
    CHECK(w1_to_semicircle(x) <= 0.1);
    CHECK((gue_fixed_trace(16, 3).points - gue_fixed_trace(16, 3).points).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(gue_fixed_trace(600, 1), SizeError);

    const auto probe = gue_tail_probe(32, 0.15, 300, 4);
    CHECK(probe.status == "report-only");
    CHECK(gue_tail_probe(32, 0.0, 50, 4).p_hat == 1.0);
    for (int k = 1; k <= 20; ++k) {
        const double r = 0.1 * k;
        CHECK(2.0 * std::pow(std::asin(r / 2.0), 2) >= r * r / 2.0);
    }
}

TEST_CASE("sphere blocks are asymptotically Gaussian pairs") {
    const int m = 300;
    Eigen::MatrixXd pairs(m, 2), gauss(m, 2);
    std::mt19937_64 rng(12);
    std::normal_distribution<double> N(0.0, 1.0);
    for (int i = 0; i < m; ++i) {
        const auto c = sample_sphere_blocks(10000, 1, 1000 + i);
        pairs(i, 0) = c.points(0, 0);
        pairs(i, 1) = c.points(1, 0);
        gauss(i, 0) = N(rng);
        gauss(i, 1) = N(rng);
    }
    CHECK(energy_distance_test(pairs, gauss, 500, 3).p_value >= 0.01);
    CHECK(energy_distance_test(1.6 * pairs, gauss, 500, 3).p_value < 0.01);
}
