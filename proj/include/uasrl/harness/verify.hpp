#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "uasrl/grad/tensor.hpp"

namespace uasrl::harness {

struct CheckResult {
    std::string name;
    bool passed = false;
    double measured = 0.0;
    double tolerance = 0.0;
};

struct VerifyReport {
    std::string suite;
    bool passed = false;
    std::vector<CheckResult> checks;

    nlohmann::json to_json() const;
};

/// suites: gradcheck | proposition | igm | masks
VerifyReport verify_suite(const std::string& name);

/// Central finite differences against the tape gradient. `build` must
/// reconstruct the scalar loss from the current leaf values on every call.
/// Returns the max of |analytic - numeric| / max(1, |analytic|, |numeric|).
double gradcheck_max_rel_err(const std::vector<grad::Tensor*>& leaves,
                             const std::function<grad::Tensor()>& build, double h = 1e-5);

} // namespace uasrl::harness
