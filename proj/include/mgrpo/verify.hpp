#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mgrpo {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Property checks backed by the brute-force oracles. Each runs at the
// tolerances the acceptance suite asserts; seeds are fixed so statistical
// checks are reproducible.
CheckResult check_reverse_rule_normalization();
CheckResult check_estimator_identities();
CheckResult check_mask_statistics();
CheckResult check_elbo_ordering_consistency();
CheckResult check_gradient_fidelity();
CheckResult check_sampler_fidelity();

/// Runs every check above, streaming one line per result. Returns false
/// if any check failed.
bool run_verify(std::ostream& report);

}  // namespace mgrpo
