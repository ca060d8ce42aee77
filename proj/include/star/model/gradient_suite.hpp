#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "star/numerics/gradcheck.hpp"

namespace star {

struct GradientSuiteEntry {
    std::string component;
    GradCheckResult result;
};

/// Finite-difference checks of every primitive, the attention and graph
/// layers, both encoder stacks and the full rollout loss of a 3-pedestrian
/// 8+2-step scene. `corrupt_analytic` scales the analytic gradients.
std::vector<GradientSuiteEntry> run_gradient_suite(std::uint64_t seed, double corrupt_analytic = 1.0);

inline constexpr double kGradientTolerance = 1e-4;

} // namespace star
