#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace riftort {

struct PropertyResult {
    std::string name;
    bool passed = false;
    std::string detail;  // failure explanation, empty on pass
    double seconds = 0.0;
};

// Runs every registered library property (invariant checks, cross-validation
// against closed forms and brute-force oracles, determinism checks).  Fully
// deterministic: fixed internal seeds, no wall-clock dependence in outcomes.
std::vector<PropertyResult> run_property_suite();

}  // namespace riftort
