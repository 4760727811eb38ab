#pragma once

#include "wsub/measures.hpp"
#include "wsub/report.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace wsub {

struct SuiteOptions {
    bool quick = false;            // halved grids and sample counts, tolerances x2
    std::uint64_t seed = 20240901;
    double tol_scale = 1.0;        // multiplies every declared tolerance
    double lambda_scale = 1.0;     // multiplies every convexity constant (failure injection)
};

/// evi, talagrand, hwi, convexity, fisher-reg, duality, envelope
const std::vector<std::string>& suite_names();
/// Runs one suite or "all". Throws DomainError on an unknown name.
std::vector<InequalityReport> run_suite(const std::string& name, const SuiteOptions& opts = {});

std::vector<InequalityReport> suite_evi(const SuiteOptions& opts);
std::vector<InequalityReport> suite_talagrand(const SuiteOptions& opts);
std::vector<InequalityReport> suite_hwi(const SuiteOptions& opts);
std::vector<InequalityReport> suite_convexity(const SuiteOptions& opts);
std::vector<InequalityReport> suite_fisher_reg(const SuiteOptions& opts);
std::vector<InequalityReport> suite_duality(const SuiteOptions& opts);
std::vector<InequalityReport> suite_envelope(const SuiteOptions& opts);

// Random test measures shared by the suites and the tests.

/// Two- or three-component Gaussian mixture tilted onto S_{0,1}.
GridMeasure1D random_sphere_measure(const Axis& axis, std::mt19937_64& rng);
/// Semicircle density times (1 + eps He_k) with random k in 3..4, tilted onto S_{0,1}.
GridMeasure1D perturbed_semicircle(const Axis& axis, std::mt19937_64& rng);
/// Random mixture with mean 0 and second moment m2.
GridMeasure1D random_centered_measure(const Axis& axis, double m2, std::mt19937_64& rng);
/// The mixture c_k mu + (1 - c_k) eta_k with eta_k = law of eps (Z + sqrt(k - 1)), second moment 1.
GridMeasure1D envelope_mixture(const GridMeasure1D& mu, int k);

}  // namespace wsub
