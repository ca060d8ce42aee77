#pragma once

#include <random>

#include "star/numerics/tensor.hpp"

namespace star {

using Rng = std::mt19937_64;

template <typename Scalar = double>
Mat<Scalar> uniform_matrix(Index rows, Index cols, Scalar lo, Scalar hi, Rng& rng) {
    std::uniform_real_distribution<Scalar> dist(lo, hi);
    Mat<Scalar> m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    return m;
}

template <typename Scalar = double>
Mat<Scalar> normal_matrix(Index rows, Index cols, Rng& rng) {
    std::normal_distribution<Scalar> dist(Scalar(0), Scalar(1));
    Mat<Scalar> m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    return m;
}

} // namespace star
