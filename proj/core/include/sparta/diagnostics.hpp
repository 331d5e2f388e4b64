#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparta/gradcheck.hpp"
#include "sparta/model.hpp"

namespace sparta {

struct GradSuiteCase {
  std::string name;
  std::size_t scalars = 0;  // trainable coordinates checked
  GradCheckReport report;
};

/// A fixed 3-utterance dialogue with speaker roles and labels.
Dialogue gradient_probe_dialogue();

/// Full-model loss gradients against central differences for the TAA and
/// MHA variants (d = 8, k = 2, dropout off, every stream on), plus the
/// speaker cross-entropy through each encoder backend.
std::vector<GradSuiteCase> run_gradient_suite(std::uint64_t seed = 0, double epsilon = 1e-5,
                                              double tolerance = 1e-4);

}  // namespace sparta
