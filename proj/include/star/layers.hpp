#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "star/numerics/ops.hpp"
#include "star/numerics/random.hpp"

namespace star {

// Fully connected layer, weight stored in×out.
struct LinearParams {
    Tensor weight;
    Tensor bias;

    Index in_features() const { return weight.rows(); }
    Index out_features() const { return weight.cols(); }

    template <typename F>
    void for_each(const std::string& prefix, F&& f) const {
        f(prefix + ".weight", weight);
        f(prefix + ".bias", bias);
    }
};

struct LayerNormParams {
    Tensor gain;
    Tensor bias;

    template <typename F>
    void for_each(const std::string& prefix, F&& f) const {
        f(prefix + ".gain", gain);
        f(prefix + ".bias", bias);
    }
};

// Uniform(-1/sqrt(in), 1/sqrt(in)) for weight and bias.
inline LinearParams make_linear(Index in, Index out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(double(std::max<Index>(in, 1)));
    return {Tensor(uniform_matrix(in, out, -bound, bound, rng), true),
            Tensor(uniform_matrix(Index(1), out, -bound, bound, rng), true)};
}

inline LayerNormParams make_layer_norm(Index features) {
    return {Tensor(Matrix::Ones(1, features), true), Tensor(Matrix::Zero(1, features), true)};
}

inline Tensor apply(const LinearParams& p, const Tensor& x) { return linear(x, p.weight, p.bias); }

inline Tensor apply(const LayerNormParams& p, const Tensor& x) {
    return layer_norm(x, p.gain, p.bias);
}

} // namespace star
