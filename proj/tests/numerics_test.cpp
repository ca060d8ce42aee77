#include <gtest/gtest.h>

#include <cmath>

#include "star/errors.hpp"
#include "star/numerics/adam.hpp"
#include "star/numerics/gradcheck.hpp"
#include "star/numerics/ops.hpp"
#include "star/numerics/random.hpp"

using namespace star;

namespace {

Tensor randn(Index r, Index c, Rng& rng) { return Tensor(normal_matrix(r, c, rng), true); }

// Weighted sum so every output entry carries a distinct upstream gradient.
Tensor probe(const Tensor& y, Rng& rng) {
    return sum(hadamard(y, Tensor(normal_matrix(y.rows(), y.cols(), rng))));
}

double check(std::function<Tensor(const std::vector<Tensor>&)> f, std::vector<Tensor> inputs,
             std::uint64_t seed = 3) {
    Rng rng(seed);
    const Tensor y = f(inputs);
    const Matrix weights = normal_matrix(y.rows(), y.cols(), rng);
    auto loss = [&] { return sum(hadamard(f(inputs), Tensor(weights))); };
    return gradient_check<double>(loss, inputs, {}).max_relative_error;
}

} // namespace

TEST(Tensor, LeafGradientAccumulatesAcrossBackwardCalls) {
    Tensor x(Matrix::Constant(2, 2, 1.0), true);
    backward(sum(x));
    backward(sum(scale(x, 2.0)));
    EXPECT_TRUE(x.grad().isApproxToConstant(3.0));
    x.zero_grad();
    EXPECT_TRUE(x.grad().isZero());
}

TEST(Tensor, BackwardRequiresScalarLoss) {
    Tensor x(Matrix::Ones(2, 2), true);
    EXPECT_THROW(backward(x), DimensionError);
}

TEST(Tensor, NoGradGuardSkipsRecording) {
    Tensor x(Matrix::Ones(2, 2), true);
    Tensor y;
    {
        NoGradGuard guard;
        y = relu(x);
    }
    EXPECT_FALSE(y.requires_grad());
}

TEST(Tensor, NonFiniteResultIsRejected) {
    Tensor x(Matrix::Constant(1, 1, 1e308), true);
    EXPECT_THROW(scale(x, 10.0), NumericError);
}

TEST(Ops, ShapeMismatchNamesBothShapes) {
    Tensor a(Matrix::Ones(2, 3)), b(Matrix::Ones(2, 3));
    try {
        matmul(a, b);
        FAIL();
    } catch (const DimensionError& e) {
        EXPECT_NE(std::string(e.what()).find("[2x3]"), std::string::npos);
    }
}

TEST(Ops, SoftmaxMatchesClosedForm) {
    Matrix x(1, 3);
    x << 1.0, 2.0, 3.0;
    const Matrix w = softmax(Tensor(x)).value();
    EXPECT_NEAR(w(0, 0), 0.09003057317038046, 1e-15);
    EXPECT_NEAR(w(0, 1), 0.24472847105479764, 1e-15);
    EXPECT_NEAR(w(0, 2), 0.6652409557748218, 1e-15);
}

TEST(Ops, SoftmaxIsShiftInvariantAndStable) {
    Matrix x(2, 3);
    x << 1000.0, 1001.0, 1002.0, -1000.0, -999.0, -998.0;
    const Matrix w = softmax(Tensor(x)).value();
    EXPECT_NEAR(w(0, 2), 0.6652409557748218, 1e-14);
    EXPECT_NEAR(w(1, 2), 0.6652409557748218, 1e-14);
}

TEST(Ops, MaskedSoftmaxGivesExactZeros) {
    Rng rng(1);
    Mask allowed(3, 4);
    allowed << true, false, true, false, false, false, false, true, true, true, true, true;
    const Matrix w = masked_softmax(Tensor(normal_matrix(3, 4, rng)), allowed).value();
    for (Index i = 0; i < 3; ++i) {
        EXPECT_NEAR(w.row(i).sum(), 1.0, 1e-12);
        for (Index j = 0; j < 4; ++j)
            if (!allowed(i, j)) EXPECT_EQ(w(i, j), 0.0);
    }
    EXPECT_EQ(w(1, 3), 1.0);
}

TEST(Ops, MaskedSoftmaxRejectsEmptyRow) {
    Mask allowed = Mask::Constant(2, 2, true);
    allowed.row(1).setConstant(false);
    EXPECT_THROW(masked_softmax(Tensor(Matrix::Zero(2, 2)), allowed), DimensionError);
}

TEST(Ops, LayerNormMatchesClosedForm) {
    Matrix x(1, 3);
    x << 1.0, 2.0, 4.0;
    const Matrix y = layer_norm(Tensor(x), Tensor(Matrix::Ones(1, 3)), Tensor(Matrix::Zero(1, 3))).value();
    EXPECT_NEAR(y(0, 0), -1.0690415314502977, 1e-14);
    EXPECT_NEAR(y(0, 1), -0.26726038286257453, 1e-14);
    EXPECT_NEAR(y(0, 2), 1.3363019143128718, 1e-14);
}

TEST(Ops, LinearBroadcastsBias) {
    Matrix x(2, 2), w(2, 1), b(1, 1);
    x << 1, 2, 3, 4;
    w << 10, 100;
    b << 0.5;
    const Matrix y = linear(Tensor(x), Tensor(w), Tensor(b)).value();
    EXPECT_EQ(y(0, 0), 210.5);
    EXPECT_EQ(y(1, 0), 430.5);
}

TEST(Ops, GatherRowsZeroFillsMissing) {
    Matrix x(2, 2);
    x << 1, 2, 3, 4;
    const Matrix y = gather_rows(Tensor(x), {1, -1, 0}).value();
    EXPECT_EQ(y(0, 1), 4.0);
    EXPECT_TRUE(y.row(1).isZero());
    EXPECT_EQ(y(2, 0), 1.0);
}

TEST(Ops, DropoutIsIdentityOutsideTraining) {
    Rng rng(5);
    Tensor x = randn(4, 4, rng);
    EXPECT_TRUE(dropout(x, 0.5, false, rng).same_node(x));
    const Matrix y = dropout(x, 0.5, true, rng).value();
    for (Index i = 0; i < y.size(); ++i)
        EXPECT_TRUE(y.data()[i] == 0.0 || std::abs(y.data()[i] - 2.0 * x.value().data()[i]) < 1e-15);
}

TEST(Gradients, Primitives) {
    Rng rng(11);
    const double tol = 1e-6;
    EXPECT_LT(check([](auto& in) { return matmul(in[0], in[1]); }, {randn(3, 4, rng), randn(4, 2, rng)}), tol);
    EXPECT_LT(check([](auto& in) { return transpose(in[0]); }, {randn(3, 4, rng)}), tol);
    EXPECT_LT(check([](auto& in) { return in[0] + in[1]; }, {randn(3, 4, rng), randn(1, 4, rng)}), tol);
    EXPECT_LT(check([](auto& in) { return in[0] - in[1]; }, {randn(3, 4, rng), randn(3, 4, rng)}), tol);
    EXPECT_LT(check([](auto& in) { return hadamard(in[0], in[1]); }, {randn(3, 4, rng), randn(3, 4, rng)}), tol);
    EXPECT_LT(check([](auto& in) { return scale(in[0], -1.7); }, {randn(3, 4, rng)}), tol);
    EXPECT_LT(check([](auto& in) { return sigmoid(in[0]); }, {randn(3, 4, rng)}), tol);
    EXPECT_LT(check([](auto& in) { return tanh(in[0]); }, {randn(3, 4, rng)}), tol);
    EXPECT_LT(check([](auto& in) { return softmax(in[0]); }, {randn(3, 5, rng)}), tol);
    EXPECT_LT(check([](auto& in) { return softmax(in[0], 0); }, {randn(3, 5, rng)}), tol);
    EXPECT_LT(check([](auto& in) { return linear(in[0], in[1], in[2]); },
                    {randn(5, 3, rng), randn(3, 4, rng), randn(1, 4, rng)}),
              tol);
    EXPECT_LT(check([](auto& in) { return layer_norm(in[0], in[1], in[2]); },
                    {randn(4, 6, rng), randn(1, 6, rng), randn(1, 6, rng)}),
              tol);
    EXPECT_LT(check([](auto& in) { return concat_cols({in[0], in[1]}); }, {randn(3, 2, rng), randn(3, 4, rng)}), tol);
    EXPECT_LT(check([](auto& in) { return concat_rows({in[0], in[1]}); }, {randn(2, 3, rng), randn(4, 3, rng)}), tol);
    EXPECT_LT(check([](auto& in) { return slice_cols(in[0], 1, 2); }, {randn(3, 5, rng)}), tol);
    EXPECT_LT(check([](auto& in) { return gather_rows(in[0], {2, 0, 2, -1}); }, {randn(3, 5, rng)}), tol);
    EXPECT_LT(check([](auto& in) { return mean(in[0]); }, {randn(3, 5, rng)}), tol);
    EXPECT_LT(check([](auto& in) { return sum_squares(in[0]); }, {randn(3, 5, rng)}), tol);
}

TEST(Gradients, MaskedSoftmax) {
    Rng rng(12);
    Mask allowed = Mask::Constant(4, 4, true);
    allowed(0, 1) = allowed(2, 3) = allowed(3, 0) = false;
    EXPECT_LT(check([&](auto& in) { return masked_softmax(in[0], allowed); }, {randn(4, 4, rng)}), 1e-6);
}

TEST(Gradients, ReluAwayFromKink) {
    Matrix x(2, 3);
    x << 0.5, -0.7, 1.2, -2.0, 0.3, 0.9;
    EXPECT_LT(check([](auto& in) { return relu(in[0]); }, {Tensor(x, true)}), 1e-8);
}

TEST(Gradients, CorruptedAnalyticGradientIsDetected) {
    Rng rng(13);
    Tensor x = randn(3, 3, rng);
    GradCheckOptions opt;
    opt.corrupt_analytic = 1.01;
    auto loss = [&] { return sum_squares(tanh(x)); };
    EXPECT_GT(gradient_check<double>(loss, {x}, {"x"}, opt).max_relative_error, 1e-3);
}

TEST(Gradients, RelativeErrorIsNormWise) {
    Eigen::VectorXd a(2), n(2);
    a << 3.0, 4.0;
    n << 3.0, 4.5;
    EXPECT_DOUBLE_EQ(relative_error(a, n), 0.5 / std::hypot(3.0, 4.5));
}

TEST(Adam, TwoStepsMatchReference) {
    Matrix p0(1, 2);
    p0 << 1.0, -2.0;
    std::vector<Tensor> params{Tensor(p0, true)};
    AdamState state;
    const Matrix g1 = (Matrix(1, 2) << 0.5, -3.0).finished();
    const Matrix g2 = (Matrix(1, 2) << 0.1, 2.0).finished();
    backward(sum(hadamard(params[0], Tensor(g1))));
    adam_step(params, state);
    EXPECT_NEAR(params[0].value()(0, 0), 0.99850000003, 1e-15);
    EXPECT_NEAR(params[0].value()(0, 1), -1.998500000005, 1e-15);
    params[0].zero_grad();
    backward(sum(hadamard(params[0], Tensor(g2))));
    adam_step(params, state);
    EXPECT_NEAR(params[0].value()(0, 0), 0.9972954385957697, 1e-15);
    EXPECT_NEAR(params[0].value()(0, 1), -1.9982832192112756, 1e-15);
}

TEST(Adam, RejectsNonFiniteGradient) {
    std::vector<Tensor> params{Tensor(Matrix::Ones(1, 1), true)};
    params[0].node()->grad = Matrix::Constant(1, 1, std::nan(""));
    AdamState state;
    EXPECT_THROW(adam_step(params, state), NumericError);
}

TEST(Adam, ParameterWithoutGradientIsUnchanged) {
    std::vector<Tensor> params{Tensor(Matrix::Ones(2, 2), true)};
    AdamState state;
    adam_step(params, state);
    EXPECT_TRUE(params[0].value().isOnes());
}

// Property: on random shapes the row-broadcast add equals explicit replication.
TEST(Properties, RowBroadcastEqualsReplication) {
    Rng rng(21);
    std::uniform_int_distribution<int> dim(1, 6);
    for (int trial = 0; trial < 50; ++trial) {
        const Index r = dim(rng), c = dim(rng);
        const Matrix a = normal_matrix(r, c, rng), b = normal_matrix(1, c, rng);
        const Matrix got = (Tensor(a) + Tensor(b)).value();
        EXPECT_TRUE(got.isApprox(a + b.replicate(r, 1), 0.0) || (got - (a + b.replicate(r, 1))).isZero());
    }
}
