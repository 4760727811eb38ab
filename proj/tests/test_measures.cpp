#include <doctest.h>

#include "wsub/errors.hpp"
#include "wsub/io.hpp"
#include "wsub/measures.hpp"
#include "wsub/transport_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

using namespace wsub;

namespace {

// Test-side inverse normal CDF by bisection on erfc.
double inv_phi(double p) {
    double lo = -40.0, hi = 40.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

GridMeasure1D random_measure(const Axis& axis, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const double a = 4.0 * U(rng) - 2.0, b = 4.0 * U(rng) - 2.0, w = U(rng);
    const double s1 = 0.2 + U(rng), s2 = 0.2 + U(rng);
    return GridMeasure1D::from_density(axis, [=](double x) {
        return w * std::exp(-(x - a) * (x - a) / (2 * s1 * s1)) +
               (1 - w) * std::exp(-(x - b) * (x - b) / (2 * s2 * s2));
    });
}

// North-west corner rule: optimal for convex costs between sorted 1D supports.
double northwest_cost(const Eigen::VectorXd& x, Eigen::VectorXd a, const Eigen::VectorXd& y, Eigen::VectorXd b) {
    double cost = 0.0;
    Eigen::Index i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const double f = std::min(a[i], b[j]);
        cost += f * (x[i] - y[j]) * (x[i] - y[j]);
        a[i] -= f;
        b[j] -= f;
        if (a[i] <= 1e-15) ++i;
        else ++j;
    }
    return cost;
}

}  // namespace

TEST_CASE("axis geometry") {
    const Axis a = Axis::symmetric(0.5, 2.0, 9);
    CHECK(a.center(4) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(a.min == doctest::Approx(-1.5));
    CHECK(a.max() == doctest::Approx(2.5));
    const Axis b = Axis::span(-1.0, 3.0, 8);
    CHECK(b.dx == doctest::Approx(0.5));
    CHECK(b.center(0) == doctest::Approx(-0.75));
}

TEST_CASE("measure invariants are enforced") {
    const Axis a = Axis::span(0.0, 1.0, 4);
    CHECK_THROWS_AS(GridMeasure1D(a, Eigen::Vector4d(0.5, 0.5, 0.5, -0.5)), InvalidMeasure);
    CHECK_THROWS_AS(GridMeasure1D(a, Eigen::Vector4d(0.2, 0.2, 0.2, 0.2)), InvalidMeasure);
    CHECK_THROWS_AS(GridMeasure1D::normalized(a, Eigen::Vector4d::Zero()), DomainError);
    CHECK_NOTHROW(GridMeasure1D(a, Eigen::Vector4d(0.25, 0.25, 0.25, 0.25)));
}

TEST_CASE("quantile examples") {
    const Axis a = Axis::symmetric(0.0, 5.0, 1001);
    CHECK(std::abs(quantile(point_mass(a, 0.0), 0.5)) <= a.dx / 2);

    const Axis unit = Axis::span(-1.0, 2.0, 300);
    const auto u = uniform(unit, 0.0, 1.0);
    CHECK(std::abs(quantile(u, 0.25) - 0.25) <= unit.dx);

    const Axis wide = Axis::span(-8.0, 8.0, 1600);
    const auto g = gaussian(wide, 0.0, 1.0);
    CHECK(std::abs(quantile(g, 0.975) - inv_phi(0.975)) <= 2 * wide.dx);
    CHECK(std::abs(inv_phi(0.975) - 1.95996) < 1e-5);

    CHECK_THROWS_AS(quantile(g, -0.1), DomainError);
    CHECK_THROWS_AS(quantile(g, 1.1), DomainError);
}

TEST_CASE("quantile and cdf round trip at partition knots") {
    std::mt19937_64 rng(7);
    const Axis a = Axis::span(-6.0, 6.0, 240);
    const auto mu = random_measure(a, rng);
    double cum = 0.0;
    for (Eigen::Index i = 0; i + 1 < mu.size(); ++i) {
        cum += mu.mass[i];
        if (mu.mass[i] < 1e-12 || mu.mass[i + 1] < 1e-12) continue;
        CHECK(std::abs(cdf(mu, quantile(mu, cum)) - cum) <= 1e-12);
    }
}

TEST_CASE("w2 examples") {
    const Axis a = Axis::symmetric(0.0, 4.0, 801);
    const auto g = gaussian(a, 0.3, 0.5);
    CHECK(w2_1d(g, g) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(std::abs(w2_1d(point_mass(a, 0.0), point_mass(a, 1.0)) - 1.0) <= a.dx);

    // N(0,1) vs N(0,4): the quantile functions differ by Q(p), so W2^2 = int Q^2 = 1.
    // Oracle: dense midpoint quadrature of (2Q - Q)^2 with a bisection quantile.
    double oracle = 0.0;
    const int m = 20000;
    for (int k = 0; k < m; ++k) {
        const double q = inv_phi((k + 0.5) / m);
        oracle += q * q / m;
    }
    const Axis wide = Axis::span(-14.0, 14.0, 5600);
    const double w = w2_1d(gaussian(wide, 0.0, 1.0), gaussian(wide, 0.0, 4.0));
    CHECK(std::abs(w - 1.0) <= 1e-3);
    CHECK(std::abs(w - std::sqrt(oracle)) <= 2e-3);
}

TEST_CASE("w1 examples") {
    const Axis a = Axis::symmetric(0.0, 2.0, 401);
    const auto g = gaussian(a, 0.0, 0.2);
    CHECK(w1_1d(g, g) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(std::abs(w1_1d(point_mass(a, 0.0), point_mass(a, 1.0)) - 1.0) <= a.dx);
    // int |F_u - F_delta| = 2 * int_0^1 (1 - (x+1)/2) dx = 1/2
    CHECK(std::abs(w1_1d(uniform(a, -1.0, 1.0), point_mass(a, 0.0)) - 0.5) <= a.dx);
}

TEST_CASE("w2 is a metric on random triples") {
    std::mt19937_64 rng(11);
    const Axis a = Axis::span(-6.0, 6.0, 300);
    for (int k = 0; k < 100; ++k) {
        const auto x = random_measure(a, rng), y = random_measure(a, rng), z = random_measure(a, rng);
        const double xy = w2_1d(x, y), yx = w2_1d(y, x), yz = w2_1d(y, z), xz = w2_1d(x, z);
        CHECK(std::abs(xy - yx) <= 1e-9);
        CHECK(xz <= xy + yz + 1e-9);
    }
}

TEST_CASE("w2_discrete") {
    Eigen::MatrixXd p(1, 2), q(1, 2);
    p << 0.0, 0.0;
    q << 3.0, 4.0;
    CHECK(w2_discrete(PointCloud::uniform(p), PointCloud::uniform(q)) == doctest::Approx(5.0));

    // Equal weights: an optimal coupling is a permutation (Birkhoff).
    std::mt19937_64 rng(3);
    std::normal_distribution<double> N(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::MatrixXd x(4, 2), y(4, 2);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 2; ++j) {
                x(i, j) = N(rng);
                y(i, j) = N(rng) + 1.0;
            }
        std::vector<int> perm{0, 1, 2, 3};
        double best = 1e300;
        do {
            double c = 0.0;
            for (int i = 0; i < 4; ++i) c += (x.row(i) - y.row(perm[i])).squaredNorm() / 4.0;
            best = std::min(best, c);
        } while (std::next_permutation(perm.begin(), perm.end()));
        CHECK(w2_discrete(PointCloud::uniform(x), PointCloud::uniform(y)) == doctest::Approx(std::sqrt(best)).epsilon(1e-10));
    }

    Eigen::MatrixXd big = Eigen::MatrixXd::Zero(400, 1);
    CHECK_THROWS_AS(w2_discrete(PointCloud::uniform(big), PointCloud::uniform(big)), SizeError);
}

TEST_CASE("w2_discrete agrees with w2_1d on cell centers") {
    std::mt19937_64 rng(5);
    const Axis a = Axis::span(-5.0, 5.0, 100);
    for (int k = 0; k < 5; ++k) {
        const auto x = random_measure(a, rng), y = random_measure(a, rng);
        const double d = w2_discrete(PointCloud::from_grid(x), PointCloud::from_grid(y));
        CHECK(std::abs(d - w2_1d(x, y)) <= 2 * a.dx);
    }
}

TEST_CASE("transportation simplex matches the north-west corner on sorted 1D supports") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 3 + trial % 5, m = 4 + trial % 3;
        Eigen::VectorXd x(n), y(m), a(n), b(m);
        for (int i = 0; i < n; ++i) x[i] = U(rng) * 4;
        for (int j = 0; j < m; ++j) y[j] = U(rng) * 4 - 1;
        std::sort(x.data(), x.data() + n);
        std::sort(y.data(), y.data() + m);
        for (int i = 0; i < n; ++i) a[i] = 0.1 + U(rng);
        for (int j = 0; j < m; ++j) b[j] = 0.1 + U(rng);
        a /= a.sum();
        b /= b.sum();
        Eigen::MatrixXd C(n, m);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) C(i, j) = (x[i] - y[j]) * (x[i] - y[j]);
        const auto plan = solve_transport(C, a, b);
        CHECK(plan.cost == doctest::Approx(northwest_cost(x, a, y, b)).epsilon(1e-10));
    }
}

TEST_CASE("projection onto the sphere") {
    const Axis a = Axis::span(-14.0, 18.0, 3200);
    const auto g = gaussian(a, 2.0, 4.0);
    const auto p = project_to_sphere(g, 0.0, 1.0);
    CHECK(std::abs(p.mean()) <= 1e-12);
    CHECK(std::abs(p.variance() - 1.0) <= 1e-12);
    // Affine image of N(2,4) is N(0,1): quantiles map as (q - 2)/2.
    for (double prob : {0.1, 0.5, 0.9})
        CHECK(std::abs(quantile(p, prob) - (quantile(g, prob) - 2.0) / 2.0) <= 1e-9);

    const auto pp = project_to_sphere(p, 0.0, 1.0);
    CHECK((pp.mass - p.mass).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(std::abs(pp.axis.min - p.axis.min) <= 1e-12);
    CHECK(std::abs(pp.axis.dx - p.axis.dx) <= 1e-12);

    Eigen::MatrixXd two(2, 1);
    two << -1.0, 3.0;
    const auto c = project_to_sphere(PointCloud::uniform(two), Eigen::VectorXd::Zero(1), 1.0);
    CHECK(c.points(0, 0) == doctest::Approx(-1.0));
    CHECK(c.points(1, 0) == doctest::Approx(1.0));

    CHECK_THROWS_AS(project_to_sphere(point_mass(a, 0.0), 0.0, 1.0), DegenerateInput);
    CHECK_THROWS_AS(project_to_sphere(g, 0.0, 0.0), DomainError);
}

TEST_CASE("tilting onto the sphere keeps the grid") {
    std::mt19937_64 rng(2);
    const Axis a = Axis::span(-8.0, 8.0, 800);
    const auto t = tilt_to_sphere(random_measure(a, rng), 0.0, 1.0);
    CHECK(t.axis == a);
    CHECK(std::abs(t.mean()) <= 1e-10);
    CHECK(std::abs(t.moment(2) - 1.0) <= 1e-10);
}

TEST_CASE("csv round trip is bit exact") {
    std::mt19937_64 rng(9);
    const Axis a = Axis::span(-3.0, 3.0, 60);
    const auto mu = random_measure(a, rng);
    std::stringstream ss;
    write_grid_csv(ss, mu);
    const auto back = read_grid_csv(ss);
    CHECK(back.axis == mu.axis);
    CHECK((back.mass - mu.mass).cwiseAbs().maxCoeff() == 0.0);

    const auto m2 = GridMeasure2D::product(mu, gaussian(Axis::span(-2.0, 2.0, 7), 0.0, 1.0));
    std::stringstream s2;
    write_grid_csv(s2, m2);
    const auto b2 = read_grid2d_csv(s2);
    CHECK((b2.mass - m2.mass).cwiseAbs().maxCoeff() <= 1e-16);

    Eigen::MatrixXd pts(3, 2);
    pts << 0.1, 0.2, -1.0 / 3.0, 5.0, 7.0, 1e-17;
    const PointCloud cloud(pts, Eigen::Vector3d(0.2, 0.3, 0.5));
    std::stringstream s3;
    write_cloud_csv(s3, cloud);
    const auto c3 = read_cloud_csv(s3);
    CHECK((c3.points - cloud.points).cwiseAbs().maxCoeff() == 0.0);
    CHECK((c3.weights - cloud.weights).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("malformed csv names the line") {
    std::stringstream bad("x,mass\n0.5,0.5\n1.5,abc\n");
    try {
        read_grid_csv(bad);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    std::stringstream header("a,b\n0,1\n");
    CHECK_THROWS_AS(read_grid_csv(header), ParseError);
    std::stringstream negative("x,mass\n0.5,1.5\n1.5,-0.5\n");
    CHECK_THROWS_AS(read_grid_csv(negative), ParseError);
}
