#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace wsub {

/// Uniform cell partition of an interval: cells [min + i dx, min + (i+1) dx), i < n.
struct Axis {
    double min = 0.0;
    double dx = 1.0;
    Eigen::Index n = 0;

    double max() const { return min + static_cast<double>(n) * dx; }
    double edge(Eigen::Index i) const { return min + static_cast<double>(i) * dx; }
    double center(Eigen::Index i) const { return min + (static_cast<double>(i) + 0.5) * dx; }
    Eigen::VectorXd centers() const;

    /// n cells covering [lo, hi].
    static Axis span(double lo, double hi, Eigen::Index n);
    /// n cells centered on `mid` with one cell centered exactly at `mid` when n is odd.
    static Axis symmetric(double mid, double half_width, Eigen::Index n);
};

bool operator==(const Axis& a, const Axis& b);

/// Probability measure on a 1D uniform grid, stored as cell masses.
/// Inside a cell the density is constant (mass / dx).
struct GridMeasure1D {
    Axis axis;
    Eigen::VectorXd mass;

    GridMeasure1D() = default;
    /// Validates nonnegativity and unit total mass (1e-12).
    GridMeasure1D(Axis axis, Eigen::VectorXd mass);

    /// Rescales to unit mass; throws on negative entries or zero total.
    static GridMeasure1D normalized(Axis axis, Eigen::VectorXd weights);
    /// Cell masses proportional to f(center).
    static GridMeasure1D from_density(Axis axis, const std::function<double(double)>& f);

    Eigen::Index size() const { return mass.size(); }
    Eigen::VectorXd density() const { return mass / axis.dx; }
    Eigen::VectorXd centers() const { return axis.centers(); }

    /// Moments evaluated with all cell mass at the cell center.
    double mean() const;
    double moment(int k) const;
    double variance() const;
    double expectation(const std::function<double(double)>& f) const;
};

/// Probability measure on a 2D tensor grid; mass(i, j) sits in cell (i along axis 0, j along axis 1).
struct GridMeasure2D {
    Axis axis0;
    Axis axis1;
    Eigen::MatrixXd mass;

    GridMeasure2D() = default;
    GridMeasure2D(Axis a0, Axis a1, Eigen::MatrixXd mass);
    static GridMeasure2D normalized(Axis a0, Axis a1, Eigen::MatrixXd weights);
    static GridMeasure2D product(const GridMeasure1D& m0, const GridMeasure1D& m1);

    double cell_volume() const { return axis0.dx * axis1.dx; }
    GridMeasure1D marginal(int axis) const;
};

/// Weighted point cloud in R^dim; points are rows.
struct PointCloud {
    Eigen::MatrixXd points;
    Eigen::VectorXd weights;

    PointCloud() = default;
    PointCloud(Eigen::MatrixXd points, Eigen::VectorXd weights);
    static PointCloud uniform(Eigen::MatrixXd points);
    static PointCloud from_grid(const GridMeasure1D& mu);

    Eigen::Index size() const { return points.rows(); }
    Eigen::Index dim() const { return points.cols(); }
    Eigen::VectorXd mean() const;
    double second_moment() const;
};

// ---------------------------------------------------------------------------
// Standard distributions on grids.

double normal_pdf(double x);
double normal_cdf(double x);
/// Inverse standard normal CDF (Acklam initial guess + two Halley steps).
double normal_quantile(double p);
double semicircle_cdf(double x, double radius = 2.0);

/// Density-sampled, renormalized Gaussian. Midpoint sampling keeps moments
/// spectrally accurate on wide grids.
GridMeasure1D gaussian(const Axis& axis, double mean, double variance);
/// Cell masses from the exact semicircle CDF.
GridMeasure1D semicircle(const Axis& axis, double radius = 2.0);
GridMeasure1D uniform(const Axis& axis, double lo, double hi);
/// All mass in the cell containing x.
GridMeasure1D point_mass(const Axis& axis, double x);

// ---------------------------------------------------------------------------
// Quantiles and 1D transport.

double cdf(const GridMeasure1D& mu, double x);
double quantile(const GridMeasure1D& mu, double p);

double w2_1d(const GridMeasure1D& mu, const GridMeasure1D& nu);
double w1_1d(const GridMeasure1D& mu, const GridMeasure1D& nu);
/// 1D point clouds against grid measures and each other (quantile coupling).
double w2_1d(const PointCloud& mu, const GridMeasure1D& nu);
double w1_1d(const PointCloud& mu, const GridMeasure1D& nu);
double w2_1d(const PointCloud& mu, const PointCloud& nu);
double w1_1d(const PointCloud& mu, const PointCloud& nu);

/// Exact W2 between weighted point clouds; total support <= 512.
double w2_discrete(const PointCloud& mu, const PointCloud& nu);
inline constexpr Eigen::Index kMaxDiscreteSupport = 512;

// ---------------------------------------------------------------------------
// Carlen-Gangbo sphere S_{u,theta}: mean u, centered second moment d*theta.

/// Affine push-forward x -> u + s(x - m). Grid measures get a new axis, so the
/// map is exact and the cell-center moments land on (u, theta) to roundoff.
GridMeasure1D project_to_sphere(const GridMeasure1D& mu, double u, double theta);
PointCloud project_to_sphere(const PointCloud& mu, const Eigen::VectorXd& u, double theta);

/// Mass-conservative rebinning onto another axis (piecewise-constant density).
GridMeasure1D resample(const GridMeasure1D& mu, const Axis& target);

/// Exponential tilt m_i <- m_i exp(sum_j a_j f_j(x_i)) with a solved by Newton
/// so that sum m_i f_j(x_i) = targets_j. Keeps positivity and support.
GridMeasure1D tilt_to_moments(const GridMeasure1D& mu,
                              const std::vector<std::function<double(double)>>& fs,
                              const Eigen::VectorXd& targets,
                              double tol = 1e-13);

/// Tilt onto S_{u,theta} on the measure's own grid.
GridMeasure1D tilt_to_sphere(const GridMeasure1D& mu, double u, double theta);

}  // namespace wsub
