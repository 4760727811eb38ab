#pragma once

#include <map>
#include <string>
#include <vector>

namespace wsub {

/// One verified inequality lhs <= rhs. pass <=> slack >= -tolerance.
struct InequalityReport {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::map<std::string, std::string> metadata;

    static InequalityReport make(std::string name, double lhs, double rhs, double tolerance);
    InequalityReport& with(const std::string& key, const std::string& value);
    InequalityReport& with(const std::string& key, double value);
};

std::string to_json(const InequalityReport& r, int indent = -1);
std::string to_json(const std::vector<InequalityReport>& rs, int indent = 2);
/// name,lhs,rhs,slack,tolerance,pass
std::string to_csv(const std::vector<InequalityReport>& rs);
bool all_pass(const std::vector<InequalityReport>& rs);

}  // namespace wsub
