#pragma once

#include <string>
#include <vector>

#include "qpcert/config.hpp"

namespace qpcert {

// Committed desk-scale experiment configurations:
//   uqp-k1, nnls-desk, num-desk, lasso-desk, control-desk, nphard-n2
ExperimentConfig fixture(const std::string& name);

std::vector<std::string> fixture_names();

}  // namespace qpcert
