#pragma once

#include <cstdint>
#include <string>

#include "ldb/network.hpp"

namespace ldb {

struct GradcheckOptions {
    int selected_sets = 10;   // random selections checked per preset
    double step = 1e-5;       // central-difference step
    double tolerance = 1e-4;  // max allowed relative error
    bool corrupt_dense = false; // negative control: perturb a dense gradient
};

struct GradcheckResult {
    bool pass = false;
    double max_rel_err = 0.0;
    std::string worst; // human-readable description of the worst entry
    int entries_checked = 0;
};

/// Compares every weight/bias gradient computed by the selective backward
/// against central finite differences of the loss, over random selected
/// sets; also verifies that unselected layers' gradients stay exactly zero.
/// Presets are instantiated at small widths so the full parameter set can
/// be probed.
GradcheckResult gradcheck_preset(const std::string& preset, std::uint64_t seed,
                                 const GradcheckOptions& opts = {});

} // namespace ldb
