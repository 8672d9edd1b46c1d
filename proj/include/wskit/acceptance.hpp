#pragma once

#include <string>
#include <vector>

namespace wskit {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

// Runs every acceptance criterion at its pinned tolerance.
std::vector<CriterionResult> run_acceptance();

std::string acceptance_to_json(const std::vector<CriterionResult>& results, int indent = -1);

}  // namespace wskit
