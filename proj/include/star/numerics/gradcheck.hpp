#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "star/numerics/tensor.hpp"

namespace star {

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::string worst_input;
    std::size_t probes = 0;
    std::size_t kinks_skipped = 0;
};

struct GradCheckOptions {
    double step = 1e-5;
    // Entries checked per input; 0 checks every entry.
    std::size_t max_entries_per_input = 0;
    std::uint64_t seed = 0;
    // Test hook: scales the analytic gradient to prove the detector fires.
    double corrupt_analytic = 1.0;
    // Probes whose one-sided differences disagree straddle a non-differentiable
    // point (a ReLU kink) and are left out.
    bool skip_kinks = true;
};

/// Relative error between two gradient vectors, ‖a − n‖ / max(‖a‖, ‖n‖, floor).
/// The floor keeps gradients that are exactly zero in theory (such as an
/// attention key bias, which cancels in the softmax) from turning
/// finite-difference round-off into a relative error of one.
inline constexpr double kGradientNormFloor = 1e-4;

inline double relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
    const double diff = (analytic - numeric).norm();
    return diff / std::max({analytic.norm(), numeric.norm(), kGradientNormFloor});
}

/// Compares reverse-mode gradients of `loss_fn` against central finite
/// differences for every tensor in `inputs`. `loss_fn` must be deterministic.
template <typename Scalar>
GradCheckResult gradient_check(const std::function<BasicTensor<Scalar>()>& loss_fn,
                               std::vector<BasicTensor<Scalar>> inputs,
                               const std::vector<std::string>& names,
                               const GradCheckOptions& options = {}) {
    for (auto& in : inputs) {
        in.set_requires_grad(true);
        in.zero_grad();
    }
    {
        auto loss = loss_fn();
        backward(loss);
    }

    GradCheckResult result;
    std::mt19937_64 rng(options.seed);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        auto& in = inputs[k];
        const Mat<Scalar> analytic = in.grad() * Scalar(options.corrupt_analytic);
        std::vector<Index> entries(static_cast<std::size_t>(in.size()));
        std::iota(entries.begin(), entries.end(), Index(0));
        if (options.max_entries_per_input > 0 && entries.size() > options.max_entries_per_input) {
            std::shuffle(entries.begin(), entries.end(), rng);
            entries.resize(options.max_entries_per_input);
        }
        std::vector<double> a, n;
        NoGradGuard no_grad;
        const double center = options.skip_kinks ? double(loss_fn().item()) : 0.0;
        for (Index entry : entries) {
            Scalar& slot = in.mutable_value().data()[entry];
            const Scalar original = slot;
            slot = original + Scalar(options.step);
            const double plus = double(loss_fn().item());
            slot = original - Scalar(options.step);
            const double minus = double(loss_fn().item());
            slot = original;
            ++result.probes;
            if (options.skip_kinks) {
                const double forward = (plus - center) / options.step;
                const double backward = (center - minus) / options.step;
                if (std::abs(forward - backward) > 1e-3 * std::max(std::abs(forward), std::abs(backward)) + 1e-7) {
                    ++result.kinks_skipped;
                    continue;
                }
            }
            n.push_back((plus - minus) / (2.0 * options.step));
            a.push_back(double(analytic.data()[entry]));
        }
        const double err = relative_error(Eigen::Map<Eigen::VectorXd>(a.data(), Index(a.size())),
                                          Eigen::Map<Eigen::VectorXd>(n.data(), Index(n.size())));
        if (err >= result.max_relative_error) {
            result.max_relative_error = err;
            result.worst_input = k < names.size() ? names[k] : "input " + std::to_string(k);
        }
    }
    for (auto& in : inputs) in.zero_grad();
    return result;
}

} // namespace star
