#pragma once

#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "star/numerics/tensor.hpp"

namespace star {

namespace detail {

template <typename Scalar>
void require_same_shape(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                             b.shape_str());
}

// Rows where at least one position is allowed; max-subtracted exp-normalize.
template <typename Scalar>
Mat<Scalar> softmax_rows(const Mat<Scalar>& x, const Mask* mask) {
    Mat<Scalar> out = Mat<Scalar>::Zero(x.rows(), x.cols());
    for (Index i = 0; i < x.rows(); ++i) {
        Scalar peak = -std::numeric_limits<Scalar>::infinity();
        for (Index j = 0; j < x.cols(); ++j)
            if (!mask || (*mask)(i, j)) peak = std::max(peak, x(i, j));
        if (peak == -std::numeric_limits<Scalar>::infinity())
            throw DimensionError("softmax: row " + std::to_string(i) + " has no unmasked entry");
        Scalar total = 0;
        for (Index j = 0; j < x.cols(); ++j) {
            if (mask && !(*mask)(i, j)) continue;
            out(i, j) = std::exp(x(i, j) - peak);
            total += out(i, j);
        }
        out.row(i) /= total;
    }
    return out;
}

// Gradient of a row-wise softmax given its output w and upstream g.
template <typename Scalar>
Mat<Scalar> softmax_rows_backward(const Mat<Scalar>& w, const Mat<Scalar>& g) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dot = (w.array() * g.array()).rowwise().sum();
    return (w.array() * (g.array().colwise() - dot.array())).matrix();
}

} // namespace detail

template <typename Scalar>
BasicTensor<Scalar> matmul(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
    if (a.cols() != b.rows())
        throw DimensionError("matmul: inner dimensions differ, " + a.shape_str() + " x " +
                             b.shape_str());
    return BasicTensor<Scalar>::from_op(
        a.value() * b.value(), {a, b},
        [](Node<Scalar>& self) {
            auto* pa = self.parents[0].get();
            auto* pb = self.parents[1].get();
            if (pa->requires_grad) pa->accumulate_expr(self.grad * pb->value.transpose());
            if (pb->requires_grad) pb->accumulate_expr(pa->value.transpose() * self.grad);
        },
        "matmul");
}

template <typename Scalar>
BasicTensor<Scalar> transpose(const BasicTensor<Scalar>& a) {
    return BasicTensor<Scalar>::from_op(
        a.value().transpose(), {a},
        [](Node<Scalar>& self) { self.parents[0]->accumulate_expr(self.grad.transpose()); },
        "transpose");
}

/// Elementwise sum. `b` may also be a 1×n row that broadcasts over a's rows.
template <typename Scalar>
BasicTensor<Scalar> add(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
    if (b.rows() == 1 && a.rows() != 1 && b.cols() == a.cols()) {
        return BasicTensor<Scalar>::from_op(
            a.value().rowwise() + b.value().row(0), {a, b},
            [](Node<Scalar>& self) {
                self.parents[0]->accumulate(self.grad);
                self.parents[1]->accumulate_expr(self.grad.colwise().sum());
            },
            "add");
    }
    detail::require_same_shape(a, b, "add");
    return BasicTensor<Scalar>::from_op(
        a.value() + b.value(), {a, b},
        [](Node<Scalar>& self) {
            self.parents[0]->accumulate(self.grad);
            self.parents[1]->accumulate(self.grad);
        },
        "add");
}

template <typename Scalar>
BasicTensor<Scalar> subtract(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
    detail::require_same_shape(a, b, "subtract");
    return BasicTensor<Scalar>::from_op(
        a.value() - b.value(), {a, b},
        [](Node<Scalar>& self) {
            self.parents[0]->accumulate(self.grad);
            self.parents[1]->accumulate_expr(-self.grad);
        },
        "subtract");
}

template <typename Scalar>
BasicTensor<Scalar> hadamard(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
    detail::require_same_shape(a, b, "hadamard");
    return BasicTensor<Scalar>::from_op(
        a.value().cwiseProduct(b.value()), {a, b},
        [](Node<Scalar>& self) {
            auto* pa = self.parents[0].get();
            auto* pb = self.parents[1].get();
            if (pa->requires_grad) pa->accumulate_expr(self.grad.cwiseProduct(pb->value));
            if (pb->requires_grad) pb->accumulate_expr(self.grad.cwiseProduct(pa->value));
        },
        "hadamard");
}

template <typename Scalar>
BasicTensor<Scalar> scale(const BasicTensor<Scalar>& a, Scalar factor) {
    return BasicTensor<Scalar>::from_op(
        a.value() * factor, {a},
        [factor](Node<Scalar>& self) { self.parents[0]->accumulate_expr(self.grad * factor); },
        "scale");
}

template <typename Scalar>
BasicTensor<Scalar> operator+(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
    return add(a, b);
}

template <typename Scalar>
BasicTensor<Scalar> operator-(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
    return subtract(a, b);
}

template <typename Scalar>
BasicTensor<Scalar> operator*(const BasicTensor<Scalar>& a, Scalar factor) {
    return scale(a, factor);
}

template <typename Scalar>
BasicTensor<Scalar> operator*(Scalar factor, const BasicTensor<Scalar>& a) {
    return scale(a, factor);
}

template <typename Scalar>
BasicTensor<Scalar> relu(const BasicTensor<Scalar>& x) {
    return BasicTensor<Scalar>::from_op(
        x.value().cwiseMax(Scalar(0)), {x},
        [](Node<Scalar>& self) {
            const auto& in = self.parents[0]->value;
            self.parents[0]->accumulate_expr(
                (in.array() > Scalar(0)).select(self.grad.array(), Scalar(0)).matrix());
        },
        "relu");
}

template <typename Scalar>
BasicTensor<Scalar> sigmoid(const BasicTensor<Scalar>& x) {
    Mat<Scalar> y = (Scalar(1) / (Scalar(1) + (-x.value().array()).exp())).matrix();
    return BasicTensor<Scalar>::from_op(
        std::move(y), {x},
        [](Node<Scalar>& self) {
            const auto& y = self.value.array();
            self.parents[0]->accumulate_expr((self.grad.array() * y * (Scalar(1) - y)).matrix());
        },
        "sigmoid");
}

template <typename Scalar>
BasicTensor<Scalar> tanh(const BasicTensor<Scalar>& x) {
    return BasicTensor<Scalar>::from_op(
        x.value().array().tanh().matrix(), {x},
        [](Node<Scalar>& self) {
            const auto& y = self.value.array();
            self.parents[0]->accumulate_expr((self.grad.array() * (Scalar(1) - y * y)).matrix());
        },
        "tanh");
}

/// Softmax along `axis` (1 normalizes each row, 0 each column).
template <typename Scalar>
BasicTensor<Scalar> softmax(const BasicTensor<Scalar>& x, int axis = 1) {
    if (axis != 0 && axis != 1) throw DimensionError("softmax: axis must be 0 or 1");
    if ((axis == 1 && x.cols() == 0) || (axis == 0 && x.rows() == 0))
        throw DimensionError("softmax: empty axis in " + x.shape_str());
    if (axis == 1) {
        return BasicTensor<Scalar>::from_op(
            detail::softmax_rows<Scalar>(x.value(), nullptr), {x},
            [](Node<Scalar>& self) {
                self.parents[0]->accumulate(detail::softmax_rows_backward<Scalar>(self.value, self.grad));
            },
            "softmax");
    }
    Mat<Scalar> xt = x.value().transpose();
    return BasicTensor<Scalar>::from_op(
        detail::softmax_rows<Scalar>(xt, nullptr).transpose(), {x},
        [](Node<Scalar>& self) {
            Mat<Scalar> w = self.value.transpose();
            Mat<Scalar> g = self.grad.transpose();
            self.parents[0]->accumulate_expr(detail::softmax_rows_backward<Scalar>(w, g).transpose());
        },
        "softmax");
}

/// Row-wise softmax restricted to entries where `allowed` is true. Disallowed
/// entries receive exactly zero weight and never influence the allowed ones.
template <typename Scalar>
BasicTensor<Scalar> masked_softmax(const BasicTensor<Scalar>& x, const Mask& allowed) {
    if (allowed.rows() != x.rows() || allowed.cols() != x.cols())
        throw DimensionError("masked_softmax: mask " + shape_string(allowed.rows(), allowed.cols()) +
                             " does not match logits " + x.shape_str());
    return BasicTensor<Scalar>::from_op(
        detail::softmax_rows<Scalar>(x.value(), &allowed), {x},
        [](Node<Scalar>& self) {
            self.parents[0]->accumulate(detail::softmax_rows_backward<Scalar>(self.value, self.grad));
        },
        "masked_softmax");
}

inline constexpr double kLayerNormEpsilon = 1e-5;

/// Row-wise layer normalization with affine gain/bias rows (1×n).
template <typename Scalar>
BasicTensor<Scalar> layer_norm(const BasicTensor<Scalar>& x, const BasicTensor<Scalar>& gain,
                               const BasicTensor<Scalar>& bias) {
    const Index n = x.cols();
    if (n < 1) throw DimensionError("layer_norm: empty normalized axis");
    if (gain.rows() != 1 || gain.cols() != n || bias.rows() != 1 || bias.cols() != n)
        throw DimensionError("layer_norm: gain/bias " + gain.shape_str() + "/" + bias.shape_str() +
                             " do not match input " + x.shape_str());
    const Mat<Scalar>& v = x.value();
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mean = v.rowwise().mean();
    Mat<Scalar> centered = v.colwise() - mean;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std =
        ((centered.array().square().rowwise().sum() / Scalar(n)) + Scalar(kLayerNormEpsilon))
            .rsqrt()
            .matrix();
    Mat<Scalar> normalized = centered.array().colwise() * inv_std.array();
    Mat<Scalar> out = (normalized.array().rowwise() * gain.value().row(0).array()).rowwise() +
                      bias.value().row(0).array();
    return BasicTensor<Scalar>::from_op(
        std::move(out), {x, gain, bias},
        [normalized = std::move(normalized), inv_std = std::move(inv_std)](Node<Scalar>& self) {
            auto* px = self.parents[0].get();
            auto* pg = self.parents[1].get();
            auto* pb = self.parents[2].get();
            if (pg->requires_grad)
                pg->accumulate_expr((self.grad.array() * normalized.array()).colwise().sum().matrix());
            if (pb->requires_grad) pb->accumulate_expr(self.grad.colwise().sum());
            if (px->requires_grad) {
                Mat<Scalar> gn = self.grad.array().rowwise() * pg->value.row(0).array();
                Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mean_g = gn.rowwise().mean();
                Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mean_gn =
                    (gn.array() * normalized.array()).rowwise().mean();
                Mat<Scalar> dx = (gn.colwise() - mean_g).array() -
                                 normalized.array().colwise() * mean_gn.array();
                px->accumulate_expr((dx.array().colwise() * inv_std.array()).matrix());
            }
        },
        "layer_norm");
}

/// x·W + b with W stored in×out and b a 1×out row.
template <typename Scalar>
BasicTensor<Scalar> linear(const BasicTensor<Scalar>& x, const BasicTensor<Scalar>& weight,
                           const BasicTensor<Scalar>& bias) {
    if (x.cols() != weight.rows() || bias.rows() != 1 || bias.cols() != weight.cols())
        throw DimensionError("linear: input " + x.shape_str() + " weight " + weight.shape_str() +
                             " bias " + bias.shape_str());
    Mat<Scalar> out = (x.value() * weight.value()).rowwise() + bias.value().row(0);
    return BasicTensor<Scalar>::from_op(
        std::move(out), {x, weight, bias},
        [](Node<Scalar>& self) {
            auto* px = self.parents[0].get();
            auto* pw = self.parents[1].get();
            auto* pb = self.parents[2].get();
            if (px->requires_grad) px->accumulate_expr(self.grad * pw->value.transpose());
            if (pw->requires_grad) pw->accumulate_expr(px->value.transpose() * self.grad);
            if (pb->requires_grad) pb->accumulate_expr(self.grad.colwise().sum());
        },
        "linear");
}

template <typename Scalar>
BasicTensor<Scalar> concat_cols(std::span<const BasicTensor<Scalar>> parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no inputs");
    const Index rows = parts.front().rows();
    Index cols = 0;
    for (const auto& p : parts) {
        if (p.rows() != rows)
            throw DimensionError("concat_cols: row counts differ, " + parts.front().shape_str() +
                                 " vs " + p.shape_str());
        cols += p.cols();
    }
    Mat<Scalar> out(rows, cols);
    std::vector<Index> offsets;
    Index at = 0;
    for (const auto& p : parts) {
        offsets.push_back(at);
        out.middleCols(at, p.cols()) = p.value();
        at += p.cols();
    }
    return BasicTensor<Scalar>::from_op(
        std::move(out), std::vector<BasicTensor<Scalar>>(parts.begin(), parts.end()),
        [offsets = std::move(offsets)](Node<Scalar>& self) {
            for (std::size_t k = 0; k < self.parents.size(); ++k) {
                auto* p = self.parents[k].get();
                if (p->requires_grad) p->accumulate_expr(self.grad.middleCols(offsets[k], p->value.cols()));
            }
        },
        "concat_cols");
}

template <typename Scalar>
BasicTensor<Scalar> concat_cols(std::initializer_list<BasicTensor<Scalar>> parts) {
    std::vector<BasicTensor<Scalar>> v(parts);
    return concat_cols<Scalar>(std::span<const BasicTensor<Scalar>>(v));
}

template <typename Scalar>
BasicTensor<Scalar> concat_rows(std::span<const BasicTensor<Scalar>> parts) {
    if (parts.empty()) throw DimensionError("concat_rows: no inputs");
    const Index cols = parts.front().cols();
    Index rows = 0;
    for (const auto& p : parts) {
        if (p.cols() != cols)
            throw DimensionError("concat_rows: column counts differ, " + parts.front().shape_str() +
                                 " vs " + p.shape_str());
        rows += p.rows();
    }
    Mat<Scalar> out(rows, cols);
    std::vector<Index> offsets;
    Index at = 0;
    for (const auto& p : parts) {
        offsets.push_back(at);
        out.middleRows(at, p.rows()) = p.value();
        at += p.rows();
    }
    return BasicTensor<Scalar>::from_op(
        std::move(out), std::vector<BasicTensor<Scalar>>(parts.begin(), parts.end()),
        [offsets = std::move(offsets)](Node<Scalar>& self) {
            for (std::size_t k = 0; k < self.parents.size(); ++k) {
                auto* p = self.parents[k].get();
                if (p->requires_grad) p->accumulate_expr(self.grad.middleRows(offsets[k], p->value.rows()));
            }
        },
        "concat_rows");
}

template <typename Scalar>
BasicTensor<Scalar> concat_rows(std::initializer_list<BasicTensor<Scalar>> parts) {
    std::vector<BasicTensor<Scalar>> v(parts);
    return concat_rows<Scalar>(std::span<const BasicTensor<Scalar>>(v));
}

template <typename Scalar>
BasicTensor<Scalar> slice_cols(const BasicTensor<Scalar>& x, Index start, Index count) {
    if (start < 0 || count < 0 || start + count > x.cols())
        throw DimensionError("slice_cols: [" + std::to_string(start) + ", +" + std::to_string(count) +
                             ") out of range for " + x.shape_str());
    return BasicTensor<Scalar>::from_op(
        x.value().middleCols(start, count), {x},
        [start, count](Node<Scalar>& self) {
            auto* p = self.parents[0].get();
            Mat<Scalar> g = Mat<Scalar>::Zero(p->value.rows(), p->value.cols());
            g.middleCols(start, count) = self.grad;
            p->accumulate(g);
        },
        "slice_cols");
}

/// Selects rows by index; an index of -1 yields a zero row.
template <typename Scalar>
BasicTensor<Scalar> gather_rows(const BasicTensor<Scalar>& x, std::vector<Index> indices) {
    Mat<Scalar> out = Mat<Scalar>::Zero(static_cast<Index>(indices.size()), x.cols());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const Index i = indices[r];
        if (i < -1 || i >= x.rows())
            throw DimensionError("gather_rows: index " + std::to_string(i) + " out of range for " +
                                 x.shape_str());
        if (i >= 0) out.row(static_cast<Index>(r)) = x.value().row(i);
    }
    return BasicTensor<Scalar>::from_op(
        std::move(out), {x},
        [indices = std::move(indices)](Node<Scalar>& self) {
            auto* p = self.parents[0].get();
            Mat<Scalar> g = Mat<Scalar>::Zero(p->value.rows(), p->value.cols());
            for (std::size_t r = 0; r < indices.size(); ++r)
                if (indices[r] >= 0) g.row(indices[r]) += self.grad.row(static_cast<Index>(r));
            p->accumulate(g);
        },
        "gather_rows");
}

/// Inverted dropout; the identity when `training` is false or rate is 0.
template <typename Scalar, typename Rng>
BasicTensor<Scalar> dropout(const BasicTensor<Scalar>& x, double rate, bool training, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw DimensionError("dropout: rate must lie in [0, 1)");
    if (!training || rate == 0.0) return x;
    std::bernoulli_distribution keep(1.0 - rate);
    const Scalar factor = Scalar(1.0 / (1.0 - rate));
    Mat<Scalar> mask(x.rows(), x.cols());
    for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? factor : Scalar(0);
    Mat<Scalar> out = x.value().cwiseProduct(mask);
    return BasicTensor<Scalar>::from_op(
        std::move(out), {x},
        [mask = std::move(mask)](Node<Scalar>& self) {
            self.parents[0]->accumulate_expr(self.grad.cwiseProduct(mask));
        },
        "dropout");
}

template <typename Scalar>
BasicTensor<Scalar> sum(const BasicTensor<Scalar>& x) {
    Mat<Scalar> out(1, 1);
    out(0, 0) = x.value().sum();
    return BasicTensor<Scalar>::from_op(
        std::move(out), {x},
        [](Node<Scalar>& self) {
            auto* p = self.parents[0].get();
            p->accumulate(Mat<Scalar>::Constant(p->value.rows(), p->value.cols(), self.grad(0, 0)));
        },
        "sum");
}

template <typename Scalar>
BasicTensor<Scalar> mean(const BasicTensor<Scalar>& x) {
    if (x.size() == 0) throw DimensionError("mean: empty tensor");
    return scale(sum(x), Scalar(1) / Scalar(x.size()));
}

template <typename Scalar>
BasicTensor<Scalar> sum_squares(const BasicTensor<Scalar>& x) {
    Mat<Scalar> out(1, 1);
    out(0, 0) = x.value().squaredNorm();
    return BasicTensor<Scalar>::from_op(
        std::move(out), {x},
        [](Node<Scalar>& self) {
            auto* p = self.parents[0].get();
            p->accumulate_expr(p->value * (Scalar(2) * self.grad(0, 0)));
        },
        "sum_squares");
}

} // namespace star
