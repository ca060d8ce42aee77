#include "star/model/recurrent.hpp"

#include <cmath>

namespace star {

RecurrentParams make_recurrent(Index input_dim, Index hidden, Rng& rng) {
    const double bound = 1.0 / std::sqrt(double(hidden));
    RecurrentParams p;
    p.input = {Tensor(uniform_matrix(input_dim, 4 * hidden, -bound, bound, rng), true),
               Tensor(uniform_matrix(Index(1), 4 * hidden, -bound, bound, rng), true)};
    p.recurrent = Tensor(uniform_matrix(hidden, 4 * hidden, -bound, bound, rng), true);
    return p;
}

Tensor recurrent_encode(const Tensor& x, const NodeLayout& layout, const RecurrentParams& params) {
    if (x.rows() != layout.size())
        throw DimensionError("recurrent_encode: input " + x.shape_str() + " but layout has " +
                             std::to_string(layout.size()) + " nodes");
    if (x.cols() != params.input.in_features())
        throw DimensionError("recurrent_encode: input width " + std::to_string(x.cols()) + " but LSTM expects " +
                             std::to_string(params.input.in_features()));
    const Index hidden = params.hidden();
    const Tensor gates_in = apply(params.input, x);

    std::vector<Tensor> outputs;
    Tensor prev_h, prev_c;
    for (int s = 0; s < layout.steps(); ++s) {
        const Index begin = layout.step_begin(s);
        const Index n = layout.step_size(s);
        if (n == 0) continue;
        std::vector<Index> rows(static_cast<std::size_t>(n));
        std::vector<Index> prev(static_cast<std::size_t>(n), -1);
        bool any_prev = false;
        for (Index a = 0; a < n; ++a) {
            rows[static_cast<std::size_t>(a)] = begin + a;
            if (s > 0) {
                const Index before = layout.node(layout.pedestrian_of(begin + a), s - 1);
                if (before >= 0) {
                    prev[static_cast<std::size_t>(a)] = before - layout.step_begin(s - 1);
                    any_prev = true;
                }
            }
        }
        Tensor gates = gather_rows(gates_in, rows);
        Tensor c_prev = Tensor::zeros(n, hidden);
        if (any_prev) {
            gates = gates + matmul(gather_rows(prev_h, prev), params.recurrent);
            c_prev = gather_rows(prev_c, prev);
        }
        Tensor i = sigmoid(slice_cols(gates, 0, hidden));
        Tensor f = sigmoid(slice_cols(gates, hidden, hidden));
        Tensor g = tanh(slice_cols(gates, 2 * hidden, hidden));
        Tensor o = sigmoid(slice_cols(gates, 3 * hidden, hidden));
        Tensor c = hadamard(f, c_prev) + hadamard(i, g);
        Tensor h = hadamard(o, tanh(c));
        outputs.push_back(h);
        prev_h = h;
        prev_c = c;
    }
    if (outputs.empty()) return Tensor::zeros(0, hidden);
    return concat_rows<double>(std::span<const Tensor>(outputs));
}

} // namespace star
