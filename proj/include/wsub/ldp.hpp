#pragma once

#include "wsub/measures.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace wsub {

/// Monte Carlo estimate of P(statistic >= threshold) compared with exp(-n rate).
struct TailEstimate {
    std::string statistic;   // "w1", "lipschitz" or "gue_w1"
    int n = 0;
    int d = 1;
    double r = 0.0;
    long replicates = 0;
    long hits = 0;
    double p_hat = 0.0;
    double ci_lo = 0.0;      // 99% Wilson interval
    double ci_hi = 0.0;
    double rate = 0.0;       // alpha(r^2), or 2 arcsin^2(r/2) for the GUE probe
    double bound = 0.0;      // exp(-n rate)
    double slack = 0.05;
    double log_ratio_per_n = 0.0;  // (log ci_hi - log bound) / n
    bool pass = false;       // log_ratio_per_n <= slack
    std::string status;      // "pass", "fail" or "report-only"
    std::uint64_t seed = 0;
    double seconds = 0.0;
};

std::string to_jsonl(const std::vector<TailEstimate>& es);
/// n,r,p_hat,ci_lo,ci_hi,bound,log_ratio_per_n
std::string to_csv(const std::vector<TailEstimate>& es);

/// Two-sided Wilson score interval for hits/trials at normal quantile z.
std::pair<double, double> wilson_interval(long hits, long trials, double z = 2.5758293035489004);

/// Generator of replicate i of a run: mt19937_64 seeded from (seed, i) through seed_seq.
std::mt19937_64 replicate_rng(std::uint64_t seed, std::uint64_t i);

/// n blocks of d coordinates of a uniform point on the sphere of radius sqrt(dn).
PointCloud sample_sphere_blocks(int n, int d, std::uint64_t seed);
PointCloud sample_sphere_blocks(int n, int d, std::mt19937_64& rng);
/// Translate to weighted mean zero.
PointCloud center(const PointCloud& cloud);

/// Exact W1 between equal-weight 1D samples and N(0,1) / the semicircle of radius 2.
double w1_to_gaussian(std::vector<double> x);
double w1_to_semicircle(std::vector<double> x);

/// Continuous piecewise-linear function: linear interpolation of (knots, values),
/// extended with the given end slopes.
struct PiecewiseLinear {
    std::vector<double> knots;
    std::vector<double> values;
    double left_slope = 0.0;
    double right_slope = 0.0;

    double operator()(double x) const;
    double lipschitz() const;
    /// int f d gamma by composite Simpson on [-12, 12] with kinks as breakpoints.
    double gaussian_mean() const;
};

TailEstimate tail_estimate(int n, double r, long replicates, std::uint64_t seed, int d = 1, double slack = 0.05);
TailEstimate lipschitz_tail(int n, const PiecewiseLinear& f, double r, long replicates, std::uint64_t seed,
                            double slack = 0.05);

/// Centered eigenvalues of M / sqrt(n), M a GUE matrix rescaled to tr(M^2) = n^2.
PointCloud gue_fixed_trace(int n, std::uint64_t seed);
PointCloud gue_fixed_trace(int n, std::mt19937_64& rng);
/// Report only: frequency of W1(spectrum, semicircle) >= r against exp(-2n arcsin^2(r/2)).
TailEstimate gue_tail_probe(int n, double r, long replicates, std::uint64_t seed);

/// Two-sample energy-distance permutation test on points in R^k (rows).
struct EnergyTest {
    double statistic = 0.0;
    double p_value = 1.0;
};
EnergyTest energy_distance_test(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int permutations,
                                std::uint64_t seed);

}  // namespace wsub
