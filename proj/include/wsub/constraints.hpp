#pragma once

#include "wsub/measures.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace wsub {

/// coeff * prod_k x_k^powers[k]
struct Monomial {
    std::vector<int> powers;
    double coeff = 1.0;
};

/// Test function f given as a sparse polynomial, together with its target:
/// the constraint reads  int f d rho = target.
struct PolynomialConstraint {
    std::vector<Monomial> terms;
    double target = 0.0;
    std::string label;

    int degree() const;
    double operator()(double x) const;
    double operator()(double x0, double x1) const;
};

/// Per-bin equality of one axis marginal with a fixed histogram.
struct MarginalConstraint {
    int axis = 0;
    Eigen::VectorXd marginal;
};

/// The family F of test functions cutting out F^perp, enforced on every time slice.
struct ConstraintSet {
    int dim = 1;
    std::vector<PolynomialConstraint> polynomials;
    std::vector<MarginalConstraint> marginals;

    static constexpr int kMaxDegree = 6;

    bool empty() const { return polynomials.empty() && marginals.empty(); }
    /// Throws DomainError on degree > 6, non-finite targets or wrong arity.
    void validate() const;

    /// Mean u and centered second moment theta (d = 1).
    static ConstraintSet sphere(double u, double theta);
    /// int He_k((x - u)/sqrt(theta)) d rho = 0 for k = 1..q.
    static ConstraintSet hermite(int q, double u = 0.0, double theta = 1.0);
    /// Raw moments int x^k d rho = targets[k-1], k = 1..q.
    static ConstraintSet moments(const Eigen::VectorXd& targets);
    /// Both marginals of a 2D coupling pinned.
    static ConstraintSet marginals_of(const GridMeasure2D& rho);

    /// Signed residuals int f d rho - target, one per polynomial constraint.
    Eigen::VectorXd residuals(const GridMeasure1D& rho) const;
    /// Largest absolute residual over all constraints, including marginal bins.
    double max_residual(const GridMeasure1D& rho) const;
    double max_residual(const GridMeasure2D& rho) const;
};

/// Probabilists' Hermite polynomial He_k as monomial coefficients (index = power).
std::vector<double> hermite_coefficients(int k);
double hermite(int k, double x);

}  // namespace wsub
