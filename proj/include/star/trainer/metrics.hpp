#pragma once

#include <span>
#include <vector>

#include "star/numerics/tensor.hpp"

namespace star {

/// Pedestrians × steps coordinate grids.
struct Trajectories {
    Eigen::MatrixXd x;
    Eigen::MatrixXd y;

    Index pedestrians() const { return x.rows(); }
    Index steps() const { return x.cols(); }
};

/// Mean Euclidean error over valid (pedestrian, step) entries, or the mean
/// squared error when `squared` is set. `valid` is pedestrians × steps.
double ade(const Trajectories& pred, const Trajectories& truth, const Mask& valid, bool squared = false);

/// Mean Euclidean error at the last step over pedestrians valid there.
double fde(const Trajectories& pred, const Trajectories& truth, const Mask& valid);

struct SampleMetrics {
    double ade = 0.0;
    double fde = 0.0;
};

enum class BestOfKPairing {
    min_ade_sample,   // ADE and FDE of the sample with the lowest ADE
    independent,      // lowest ADE and lowest FDE, possibly from different samples
};

struct BestOfK {
    double ade = 0.0;
    double fde = 0.0;
    std::size_t best_sample = 0;
};

BestOfK best_of_k(std::span<const SampleMetrics> samples, BestOfKPairing pairing = BestOfKPairing::min_ade_sample);

} // namespace star
