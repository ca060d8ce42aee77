#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "star/numerics/tensor.hpp"

namespace star {

template <typename Scalar>
struct BasicAdamState {
    Scalar learning_rate = Scalar(0.0015);
    Scalar beta1 = Scalar(0.9);
    Scalar beta2 = Scalar(0.999);
    Scalar epsilon = Scalar(1e-8);
    std::int64_t step_count = 0;
    std::vector<Mat<Scalar>> first_moment;
    std::vector<Mat<Scalar>> second_moment;
};

using AdamState = BasicAdamState<double>;

/// One bias-corrected Adam update over `params` using their accumulated
/// gradients. Tensors without a gradient are treated as having g = 0.
template <typename Scalar>
void adam_step(std::vector<BasicTensor<Scalar>>& params, BasicAdamState<Scalar>& state) {
    if (state.step_count < 0) throw NumericError("adam_step: negative step count");
    if (state.first_moment.empty()) {
        for (const auto& p : params) {
            state.first_moment.push_back(Mat<Scalar>::Zero(p.rows(), p.cols()));
            state.second_moment.push_back(Mat<Scalar>::Zero(p.rows(), p.cols()));
        }
    }
    if (state.first_moment.size() != params.size())
        throw DimensionError("adam_step: optimizer state tracks " +
                             std::to_string(state.first_moment.size()) + " tensors, got " +
                             std::to_string(params.size()));
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (state.first_moment[k].rows() != params[k].rows() ||
            state.first_moment[k].cols() != params[k].cols())
            throw DimensionError("adam_step: moment shape " +
                                 shape_string(state.first_moment[k].rows(), state.first_moment[k].cols()) +
                                 " does not match parameter " + params[k].shape_str());
        if (params[k].has_grad() && !params[k].node()->grad.allFinite())
            throw NumericError("adam_step: non-finite gradient in parameter tensor " + std::to_string(k));
    }

    state.step_count += 1;
    const Scalar t = Scalar(state.step_count);
    const Scalar correction1 = Scalar(1) - std::pow(state.beta1, t);
    const Scalar correction2 = Scalar(1) - std::pow(state.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& m = state.first_moment[k];
        auto& v = state.second_moment[k];
        const Mat<Scalar> g = params[k].grad();
        m = state.beta1 * m + (Scalar(1) - state.beta1) * g;
        v = state.beta2 * v + (Scalar(1) - state.beta2) * g.cwiseAbs2();
        auto m_hat = m.array() / correction1;
        auto v_hat = v.array() / correction2;
        params[k].mutable_value().array() -=
            state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
    }
}

} // namespace star
