#pragma once

#include "wsub/constraints.hpp"
#include "wsub/functionals.hpp"
#include "wsub/measures.hpp"
#include "wsub/report.hpp"

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace wsub {

/// Trajectory of a gradient flow with per-time diagnostics. Grid flows fill
/// `states` (or `states2d`), particle flows fill `particles`.
struct FlowTrace {
    std::vector<double> times;
    std::vector<GridMeasure1D> states;
    std::vector<GridMeasure2D> states2d;
    std::vector<Eigen::VectorXd> particles;

    GridMeasure1D reference;  // stationary measure e^{-V} on the flow grid (1D)
    double lambda = 0.0;      // convexity constant of V

    std::vector<double> entropy;
    std::vector<double> rel_entropy;
    std::vector<double> fisher;       // relative to the reference
    std::vector<double> mean;
    std::vector<double> m2;           // raw second moment
    std::vector<double> speed;        // W2(rho_{k+1}, rho_k) / dt, backward at the last time
    std::vector<Eigen::VectorXd> moments;    // raw moments 1..q
    std::vector<Eigen::VectorXd> marginal0;  // 2D flows
    std::vector<Eigen::VectorXd> marginal1;
    std::vector<double> energy;       // particle flows: the gradient-flow energy
    std::vector<double> dissipation;  // particle flows: (1/n) sum xdot^2

    std::size_t size() const { return times.size(); }
    /// CSV t,entropy,rel_entropy,fisher,mean,m2,speed
    std::string to_csv() const;
};

struct GridFlowOptions {
    int record_every = 1;
    int moment_degree = 4;
    double boundary_tol = 1e-10;  // largest mass allowed in the two boundary cells
};

/// d rho/dt = d/dx(rho V' + d rho/dx) on the grid of rho0 with no-flux walls.
/// Scharfetter-Gummel (exponentially fitted Chang-Cooper) fluxes, BDF2 in time after one backward Euler step.
FlowTrace fokker_planck_1d(const GridMeasure1D& rho0, const std::function<double(double)>& V, double lambda,
                           double t_end, int n_steps, const GridFlowOptions& opts = {});

/// OU flow toward N(u, theta): V(x) = (x - u)^2 / (2 theta), lambda = 1/theta.
FlowTrace ou_flow_grid(const GridMeasure1D& rho0, double u, double theta, double t_end, int n_steps,
                       const GridFlowOptions& opts = {});

/// Exact moment ODE solution (f0 e^{-t/theta}, g0 e^{-2t/theta}).
std::pair<double, double> moment_ode(double f0, double g0, double theta, double t);

/// max over recorded times of |int f d rho_t - c_f|; passes iff <= tolerance.
InequalityReport invariance_check(const FlowTrace& trace, const ConstraintSet& constraints, double tolerance = 1e-5);

/// Per k <= q: worst deviation of the Hermite moment from e^{-kt/theta} times its
/// initial value, and the decay rate fitted by least squares on log|moment|.
struct HermiteDecay {
    int k = 0;
    double fitted_rate = 0.0;
    double expected_rate = 0.0;
    double max_deviation = 0.0;
};
std::vector<HermiteDecay> hermite_decay(const FlowTrace& trace, int q, double u = 0.0, double theta = 1.0);
InequalityReport hermite_decay_check(const FlowTrace& trace, int q, double u = 0.0, double theta = 1.0,
                                     double rel_tol = 0.02);

/// max_t of the EVI defect  d+/dt (W2^2/2) + (lambda/2) W2^2 - (E(x) - E(rho_t)) with
/// the forward difference extrapolated as 2 D_dt - D_2dt. E is relative entropy to the trace reference.
InequalityReport evi_residual(const FlowTrace& trace, const GridMeasure1D& reference, double lambda,
                              const Functional& E, double tolerance = 1e-3);

/// max relative error |dE/dt + I| / I on [t_min, t_max] (centered differences).
InequalityReport energy_identity_residual(const FlowTrace& trace, double t_min = 0.1, double t_max = 1.0,
                                          double tolerance = 0.02);

/// Plain Fisher information against d beta / (1 - e^{-2 beta t}).
InequalityReport fisher_regularization_check(const FlowTrace& trace, double beta, int d = 1,
                                             double t_min = 0.05, double t_max = 1.0, double rel_tol = 0.03);
/// Largest relative deviation from the equality case on [t_min, t_max].
double fisher_equality_error(const FlowTrace& trace, double beta, int d = 1, double t_min = 0.05, double t_max = 1.0);

/// int_t^T |gamma'| (sum of consecutive W2) against sqrt((2/lambda)(E(rho_t) - inf E)), inf E = 0.
InequalityReport flow_tail_length(const FlowTrace& trace, double lambda, double tolerance = 1e-3);

/// Positions of a Dyson-OU system, strictly increasing.
struct ParticleState {
    Eigen::VectorXd positions;
    double lambda = 1.0;
};

struct DysonOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double dt_min = 1e-14;
};

/// xdot_i = -lambda x_i + (1/n) sum_{j != i} 1/(x_i - x_j), Dormand-Prince 5(4) with
/// a collision guard: steps that break the ordering are rejected and halved.
FlowTrace dyson_ou(const ParticleState& x0, double t_end, int n_steps, const DysonOptions& opts = {});
/// (lambda/2) m2 - (1/(2 n^2)) sum_{i != j} log|x_i - x_j|
double dyson_energy(const Eigen::VectorXd& x, double lambda);
Eigen::VectorXd dyson_velocity(const Eigen::VectorXd& x, double lambda);

/// Product Fokker-Planck flow with V(x) = V1(x1) + V2(x2) (polynomial coefficients),
/// dimension-split backward Euler. The axis operators commute, so products and
/// marginals evolve exactly as the 1D flows.
FlowTrace product_ou_2d(const GridMeasure2D& rho0, const std::vector<double>& V1, const std::vector<double>& V2,
                        double t_end, int n_steps, int record_every = 1);

}  // namespace wsub
