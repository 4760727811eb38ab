#pragma once

#include "wsub/measures.hpp"
#include "wsub/report.hpp"

#include <Eigen/Dense>

#include <memory>
#include <vector>

namespace wsub {

/// A value together with a warning flag (absolute-continuity violation,
/// out-of-domain argument, ...).
struct Flagged {
    double value = 0.0;
    bool flag = false;
};

// Entropy-type functionals. Grid sums use cell masses and cell volumes.

/// sum m log(m / cellvol), 0 log 0 = 0.
double entropy(const GridMeasure1D& mu);
double entropy(const GridMeasure2D& mu);

/// sum m log(m / pi); +inf (flagged) if mu charges a cell where pi vanishes.
Flagged relative_entropy_checked(const GridMeasure1D& mu, const GridMeasure1D& pi);
double relative_entropy(const GridMeasure1D& mu, const GridMeasure1D& pi);
double relative_entropy(const GridMeasure2D& mu, const GridMeasure2D& pi);

/// H(mu | N(0,1)) against the continuous standard Gaussian density:
/// entropy(mu) + m2/2 + log(2 pi)/2.
double relative_entropy_gaussian(const GridMeasure1D& mu);

/// int |grad log(dmu/dpi)|^2 dmu with centered differences of the log ratio,
/// one-sided next to the support boundary; cells below 1e-14 mass are ignored.
Flagged fisher_information_checked(const GridMeasure1D& mu, const GridMeasure1D& pi);
double fisher_information(const GridMeasure1D& mu, const GridMeasure1D& pi);
/// Plain Fisher information (Lebesgue reference).
double fisher_information(const GridMeasure1D& mu);

/// -int int log|x - y| with exact cell-pair integrals of the kernel.
double log_energy(const GridMeasure1D& mu);
/// Empirical log energy -(1/n^2) sum_{i != j} log|x_i - x_j| of equal-weight particles.
double log_energy(const Eigen::VectorXd& particles);

/// 2 d arcsin^2(sqrt(x) / (2 sqrt d)) on [0, 4d], +inf outside.
/// The flag is raised for 2 sqrt(d) < x <= 4d.
Flagged alpha_checked(double x, int d = 1);
double alpha(double x, int d = 1);

/// H(mu | gamma) + (d - m2)/2 on {m1 = 0, m2 <= d} (1e-8), +inf otherwise. d = 1.
double rate_I(const GridMeasure1D& mu);
/// E_log + m2/2 - 3/4, minimized by the semicircle law.
double rate_Ilog(const GridMeasure1D& mu);

/// Polynomial potential V(x) = sum c_k x^k.
double potential_energy(const GridMeasure1D& mu, const std::vector<double>& coeffs);

/// Energy functional of the kinds used by the verification suites.
class Functional {
public:
    enum class Kind { Entropy, RelativeEntropy, Potential, LogEnergy, Combination };

    static Functional entropy();
    static Functional relative_entropy(const GridMeasure1D& pi);
    static Functional relative_entropy(const GridMeasure2D& pi);
    static Functional potential(std::vector<double> coeffs);
    static Functional log_energy();
    static Functional combination(std::vector<std::pair<double, Functional>> parts);

    Kind kind() const { return kind_; }
    double operator()(const GridMeasure1D& mu) const;
    double operator()(const GridMeasure2D& mu) const;

private:
    Kind kind_ = Kind::Entropy;
    std::shared_ptr<const GridMeasure1D> ref1_;
    std::shared_ptr<const GridMeasure2D> ref2_;
    std::vector<double> coeffs_;
    std::vector<std::pair<double, Functional>> parts_;
};

/// max over interior samples of F_k - (1-t)F_0 - t F_1 + (lambda/2) t(1-t) dist^2,
/// samples at uniform t. Throws DomainError with fewer than three values.
double convexity_violation(const std::vector<double>& values, double lambda, double dist);
double convexity_profile(const std::vector<GridMeasure1D>& curve, const Functional& f, double lambda, double dist);
double convexity_profile(const std::vector<GridMeasure2D>& curve, const Functional& f, double lambda, double dist);

/// lhs = H(mu|pi) - H(nu|pi), rhs = dist sqrt(I(mu|pi)) - (lambda/2) dist^2.
InequalityReport hwi_residual(const GridMeasure1D& mu, const GridMeasure1D& nu, const GridMeasure1D& pi,
                              double lambda, double dist, double tolerance = 1e-2);

}  // namespace wsub
