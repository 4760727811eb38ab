#pragma once

#include <Eigen/Dense>

#include <vector>

namespace wsub {

struct TransportFlow {
    Eigen::Index from;
    Eigen::Index to;
    double amount;
};

struct TransportPlan {
    double cost = 0.0;
    std::vector<TransportFlow> flows;  // basic cells with positive flow
    long pivots = 0;
};

/// Exact balanced transportation problem min <C, P> over couplings of (a, b),
/// solved by the primal transportation simplex (u-v potentials on a spanning
/// tree basis, Dantzig entering rule with a Bland fallback on degenerate runs).
TransportPlan solve_transport(const Eigen::MatrixXd& cost, const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace wsub
