#pragma once

#include "wsub/constraints.hpp"
#include "wsub/errors.hpp"
#include "wsub/measures.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace wsub {

/// Admissible dual pair (phi, g) for the constrained dynamic problem.
///
/// Two representations share the type:
///  - Polynomial: phi(t, x) = sum c t^p x^q and g(t, x) = sum_r a_r(t) (f_r(x) - c_r)
///    with a_r polynomial in t; 1D only.
///  - Grid: the discrete multipliers produced by the solver. phi lives on time
///    midpoints x cells, (a, b) is the centered Hamilton-Jacobi field
///    (a ~ d_t phi + g, b ~ grad phi) whose admissibility is exact in the
///    discrete problem.
struct DualCertificate {
    enum class Kind { Polynomial, Grid };
    Kind kind = Kind::Polynomial;

    struct Term {
        int t_power = 0;
        int x_power = 0;
        double coeff = 0.0;
    };
    std::vector<Term> phi_terms;
    ConstraintSet constraints;                     // polynomial g uses these f_r, c_r
    std::vector<std::vector<double>> g_coeffs;     // per constraint, polynomial in t

    // Grid representation (rows = time midpoints, cols = flattened cells).
    int dim = 1;
    Axis axis0;
    Axis axis1;
    int time_steps = 0;
    Eigen::MatrixXd phi;
    Eigen::MatrixXd a;
    std::vector<Eigen::MatrixXd> b;                // one per axis
    Eigen::MatrixXd g;                             // (T-1) x constraint count
    double constraint_term = 0.0;

    double margin = 0.0;      // max over the grid of d_t phi + |grad phi|^2 / 2 + g
    double margin_t = 0.0;    // location of the worst point
    double margin_x = 0.0;

    static DualCertificate zero();
    /// Hopf-Lax solution phi(t, x) = a x - a^2 t / 2 for a rigid translation by a.
    static DualCertificate translation(double shift);

    double phi_value(double t, double x) const;
    /// Hamilton-Jacobi expression at (t, x) for polynomial certificates.
    double hj_value(double t, double x) const;
    /// Sets margin and its location by sampling the polynomial on `axis` x (T+1 times).
    void evaluate_margin(const Axis& axis, int time_nodes = 64);
};

/// Thrown by dual_value on a certificate with a positive feasibility margin.
class InadmissibleCertificate : public DomainError {
public:
    InadmissibleCertificate(const std::string& what, double t, double x, double value)
        : DomainError(what), t_(t), x_(x), value_(value) {}
    double t() const noexcept { return t_; }
    double x() const noexcept { return x_; }
    double value() const noexcept { return value_; }

private:
    double t_, x_, value_;
};

/// int phi(1, .) d rho_f - int phi(0, .) d rho_i. For grid certificates the
/// discrete boundary pairing is used, which is an exact lower bound for the
/// discrete action with the same grid and T.
double dual_value(const DualCertificate& cert, const GridMeasure1D& rho_i, const GridMeasure1D& rho_f);
double dual_value(const DualCertificate& cert, const GridMeasure2D& rho_i, const GridMeasure2D& rho_f);

struct GeodesicOptions {
    double tol = 1e-5;          // residuals and relative action change over one check window
    double gap_tol = 0.02;      // relative duality gap required for convergence
    long max_iters = 40000;
    int check_every = 50;
    double step_ratio = 0.3;    // tau / sigma balance; sigma * tau * |K|^2 = 0.99
    bool reparametrize = true;  // constant-speed resampling after the solve
    double max_seconds = 0.0;   // 0 = unlimited
};

/// Discrete space-time path: densities on time nodes, momenta on interfaces x time midpoints.
struct SpaceTimePath {
    int dim = 1;
    Axis axis0;
    Axis axis1;
    int time_steps = 0;
    std::vector<Eigen::VectorXd> mass;                    // T+1 slices, flattened (axis1 fastest)
    std::vector<std::vector<Eigen::VectorXd>> momentum;   // [axis][k], interface values

    double action = 0.0;                 // sum |m|^2 / (2 rho) cellvol dt, approximately d^2 / 2
    double continuity_residual = 0.0;
    double constraint_residual = 0.0;
    double relative_change = 0.0;
    double min_density = 0.0;            // most negative density clipped from the iterate
    double dual_value = 0.0;
    double duality_gap = 0.0;            // action - dual_value
    long iterations = 0;
    bool converged = false;
    double seconds = 0.0;
    DualCertificate certificate;

    double length() const;               // sqrt(2 action)
    GridMeasure1D slice(int k) const;
    GridMeasure2D slice2d(int k) const;
    std::vector<GridMeasure1D> slices() const;
    std::vector<GridMeasure2D> slices2d() const;
    /// Kinetic energy sum |m|^2/rho cellvol of each time step (squared metric speed).
    Eigen::VectorXd step_energy() const;
};

SpaceTimePath solve_geodesic(const GridMeasure1D& rho_i, const GridMeasure1D& rho_f,
                             const ConstraintSet& constraints, int time_steps,
                             const GeodesicOptions& opts = {});

/// Desk-scale caps: 48 x 48 cells, T <= 16.
SpaceTimePath coupling_geodesic(const GridMeasure2D& rho_i, const GridMeasure2D& rho_f, int time_steps,
                                const GeodesicOptions& opts = {});

/// Generic 2D entry point with an explicit constraint set (marginal and/or polynomial).
SpaceTimePath solve_geodesic(const GridMeasure2D& rho_i, const GridMeasure2D& rho_f,
                             const ConstraintSet& constraints, int time_steps,
                             const GeodesicOptions& opts = {});

/// 2 sqrt(d theta) arcsin(W2 / (2 sqrt(d theta))) between two members of S_{u,theta}.
double sphere_distance(const GridMeasure1D& mu, const GridMeasure1D& nu, double theta = 1.0, double u = 0.0);
double sphere_distance_from_w2(double w2, int d = 1, double theta = 1.0);

/// Great-circle interpolation of quantile functions between two members of
/// S_{0,theta}; the constrained geodesic in d = 1.
GridMeasure1D sphere_geodesic_point(const GridMeasure1D& mu, const GridMeasure1D& nu, double t,
                                    const Axis& out, double theta = 1.0);

/// Parameters of the concatenated-flow curve.
struct FlowCurveOptions {
    double u = 0.0;
    double theta = 1.0;
    double t_end = 6.0;      // flow horizon from each endpoint toward the minimizer
    int steps = 600;
};

/// OU flows from y1 and from y2 toward N(u, theta), the second reversed and
/// concatenated. Action is L^2/2 with L the summed W2 length, an upper bound for d^2/2.
SpaceTimePath finite_length_curve(const GridMeasure1D& y1, const GridMeasure1D& y2,
                                  const FlowCurveOptions& opts = {});

/// {action, length, residuals, iterations, converged, ...}
std::string path_meta_json(const SpaceTimePath& path);
/// Polynomial terms or grid summary, with the feasibility margin.
std::string certificate_json(const DualCertificate& cert);
/// Writes slice_000.csv ... and meta.json into `dir` (created if missing).
void save_path(const SpaceTimePath& path, const std::string& dir);

}  // namespace wsub
