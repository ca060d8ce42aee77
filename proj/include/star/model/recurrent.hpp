#pragma once

#include <string>

#include "star/layers.hpp"
#include "star/layout.hpp"

namespace star {

/// Single-layer LSTM. Gate columns are ordered input, forget, cell, output.
struct RecurrentParams {
    LinearParams input;   // d_in -> 4·hidden
    Tensor recurrent;     // hidden × 4·hidden

    Index hidden() const { return recurrent.rows(); }

    template <typename F>
    void for_each(const std::string& prefix, F&& f) const {
        input.for_each(prefix + ".input", f);
        f(prefix + ".recurrent", recurrent);
    }
};

RecurrentParams make_recurrent(Index input_dim, Index hidden, Rng& rng);

/// Runs the LSTM along every pedestrian's steps of `layout` (rows of x in
/// layout order) from a zero state; returns the hidden state per node.
/// A pedestrian's state restarts from zero after a step where it is absent.
Tensor recurrent_encode(const Tensor& x, const NodeLayout& layout, const RecurrentParams& params);

} // namespace star
