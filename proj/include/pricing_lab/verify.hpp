#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pricing_lab {

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 20240611;
  /// Test hook: analytic gradients in the gradient check are scaled by this.
  double gradient_fault = 1.0;
};

/// Fast property suite over all modules, one result per property.
std::vector<PropertyResult> run_verify(const VerifyOptions& options = {});

}  // namespace pricing_lab
