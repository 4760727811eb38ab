#include "wsub/report.hpp"

#include "wsub/io.hpp"

#include <json.hpp>

#include <cmath>
#include <sstream>

namespace wsub {

namespace {

nlohmann::ordered_json number(double v) {
    if (std::isfinite(v)) return v;
    return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
}

nlohmann::ordered_json as_json(const InequalityReport& r) {
    nlohmann::ordered_json j;
    j["name"] = r.name;
    j["lhs"] = number(r.lhs);
    j["rhs"] = number(r.rhs);
    j["slack"] = number(r.slack);
    j["tolerance"] = number(r.tolerance);
    j["pass"] = r.pass;
    j["metadata"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.metadata) j["metadata"][k] = v;
    return j;
}

}  // namespace

InequalityReport InequalityReport::make(std::string name, double lhs, double rhs, double tolerance) {
    InequalityReport r;
    r.name = std::move(name);
    r.lhs = lhs;
    r.rhs = rhs;
    r.slack = rhs - lhs;
    r.tolerance = tolerance;
    r.pass = r.slack >= -tolerance;
    return r;
}

InequalityReport& InequalityReport::with(const std::string& key, const std::string& value) {
    metadata[key] = value;
    return *this;
}

InequalityReport& InequalityReport::with(const std::string& key, double value) {
    metadata[key] = format_double(value);
    return *this;
}

std::string to_json(const InequalityReport& r, int indent) { return as_json(r).dump(indent); }

std::string to_json(const std::vector<InequalityReport>& rs, int indent) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : rs) arr.push_back(as_json(r));
    return arr.dump(indent);
}

std::string to_csv(const std::vector<InequalityReport>& rs) {
    std::ostringstream os;
    os << "name,lhs,rhs,slack,tolerance,pass\n";
    for (const auto& r : rs)
        os << r.name << ',' << format_double(r.lhs) << ',' << format_double(r.rhs) << ',' << format_double(r.slack)
           << ',' << format_double(r.tolerance) << ',' << (r.pass ? "true" : "false") << '\n';
    return os.str();
}

bool all_pass(const std::vector<InequalityReport>& rs) {
    for (const auto& r : rs)
        if (!r.pass) return false;
    return true;
}

}  // namespace wsub
