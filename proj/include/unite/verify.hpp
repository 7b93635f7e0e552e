#pragma once

// Built-in identity/oracle checks behind the `verify` subcommand. Each check
// pins its tolerance in code and reports the measured value next to it.

#include <string>
#include <vector>

namespace unite {

struct CheckResult {
    std::string name;
    bool pass = false;
    double measured = 0.0;
    double threshold = 0.0;
    std::string detail;
};

std::vector<CheckResult> run_verification();

}  // namespace unite
