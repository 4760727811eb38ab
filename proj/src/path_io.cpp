#include "wsub/geodesics.hpp"
#include "wsub/io.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace wsub {

namespace {

nlohmann::ordered_json number(double v) {
    if (std::isfinite(v)) return v;
    return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
}

}  // namespace

std::string path_meta_json(const SpaceTimePath& p) {
    nlohmann::ordered_json j;
    j["dim"] = p.dim;
    j["time_steps"] = p.time_steps;
    j["action"] = number(p.action);
    j["length"] = number(p.length());
    j["continuity_residual"] = number(p.continuity_residual);
    j["constraint_residual"] = number(p.constraint_residual);
    j["relative_change"] = number(p.relative_change);
    j["min_density"] = number(p.min_density);
    j["dual_value"] = number(p.dual_value);
    j["duality_gap"] = number(p.duality_gap);
    j["iterations"] = p.iterations;
    j["converged"] = p.converged;
    return j.dump(2);
}

std::string certificate_json(const DualCertificate& c) {
    nlohmann::ordered_json j;
    j["kind"] = c.kind == DualCertificate::Kind::Polynomial ? "polynomial" : "grid";
    if (c.kind == DualCertificate::Kind::Polynomial) {
        j["phi_terms"] = nlohmann::ordered_json::array();
        for (const auto& t : c.phi_terms)
            j["phi_terms"].push_back({{"t_power", t.t_power}, {"x_power", t.x_power}, {"coeff", t.coeff}});
        j["g_coeffs"] = c.g_coeffs;
    } else {
        j["dim"] = c.dim;
        j["time_steps"] = c.time_steps;
        j["constraint_term"] = number(c.constraint_term);
        j["phi"] = nlohmann::ordered_json::array();
        for (Eigen::Index k = 0; k < c.phi.rows(); ++k) {
            const Eigen::VectorXd row = c.phi.row(k).transpose();
            j["phi"].push_back(std::vector<double>(row.data(), row.data() + row.size()));
        }
    }
    j["margin"] = number(c.margin);
    j["margin_t"] = number(c.margin_t);
    j["margin_x"] = number(c.margin_x);
    return j.dump(2);
}

void save_path(const SpaceTimePath& p, const std::string& dir) {
    std::filesystem::create_directories(dir);
    for (int k = 0; k <= p.time_steps; ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "slice_%03d.csv", k);
        const auto file = (std::filesystem::path(dir) / name).string();
        if (p.dim == 1) save(file, p.slice(k));
        else save(file, p.slice2d(k));
    }
    std::ofstream(std::filesystem::path(dir) / "meta.json") << path_meta_json(p) << '\n';
}

}  // namespace wsub
