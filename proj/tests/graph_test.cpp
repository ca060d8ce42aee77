#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "star/errors.hpp"
#include "star/graph/graph.hpp"
#include "star/numerics/gradcheck.hpp"

using namespace star;

namespace {

std::vector<PositionRecord> random_positions(int n, double extent, Rng& rng) {
    std::uniform_real_distribution<double> u(-extent, extent);
    std::vector<PositionRecord> out;
    for (int i = 0; i < n; ++i) out.push_back({10 + i, u(rng), u(rng)});
    return out;
}

Matrix ln_rows(const Matrix& x, const Matrix& gain, const Matrix& bias) {
    Matrix out(x.rows(), x.cols());
    for (Index r = 0; r < x.rows(); ++r) {
        const double mu = x.row(r).mean();
        const double var = (x.row(r).array() - mu).square().mean();
        out.row(r) = ((x.row(r).array() - mu) / std::sqrt(var + 1e-5)).matrix().cwiseProduct(gain) + bias;
    }
    return out;
}

// Node-by-node TGConv written directly from its definition.
Matrix reference_tgconv(const Matrix& h, const InteractionGraph& g, const TGConvParams& p) {
    auto lin = [](const LinearParams& l, const Matrix& x) {
        return Matrix((x * l.weight.value()).rowwise() + l.bias.value().row(0));
    };
    const Matrix q = lin(p.query, h), k = lin(p.key, h), v = lin(p.value, h);
    const Index d = h.cols(), dh = d / p.heads;
    Matrix att = Matrix::Zero(h.rows(), d);
    for (Index i = 0; i < h.rows(); ++i) {
        std::vector<int> nb = g.neighbors[static_cast<std::size_t>(i)];
        nb.push_back(static_cast<int>(i));
        for (int head = 0; head < p.heads; ++head) {
            std::vector<double> logits;
            for (int j : nb) logits.push_back(q.row(i).segment(head * dh, dh).dot(k.row(j).segment(head * dh, dh)) /
                                              std::sqrt(double(dh)));
            const double hi = *std::max_element(logits.begin(), logits.end());
            double z = 0.0;
            for (double l : logits) z += std::exp(l - hi);
            for (std::size_t a = 0; a < nb.size(); ++a)
                att.row(i).segment(head * dh, dh) += std::exp(logits[a] - hi) / z * v.row(nb[a]).segment(head * dh, dh);
        }
    }
    const Matrix a = ln_rows(att + h, p.norm1.gain.value(), p.norm1.bias.value());
    return ln_rows(lin(p.out, a) + a, p.norm2.gain.value(), p.norm2.bias.value());
}

TGConvParams perturbed_norms(TGConvParams p, Rng& rng) {
    // Non-trivial gains and biases so the reference exercises them.
    for (LayerNormParams* n : {&p.norm1, &p.norm2}) {
        n->gain = Tensor(Matrix::Ones(1, n->gain.cols()) + 0.3 * normal_matrix(1, n->gain.cols(), rng), true);
        n->bias = Tensor(0.3 * normal_matrix(1, n->bias.cols(), rng), true);
    }
    return p;
}

} // namespace

TEST(BuildGraph, ThresholdIsStrict) {
    const std::vector<PositionRecord> pts{{1, 0.0, 0.0}, {2, 3.0, 4.0}, {3, 3.0, 3.9}};
    const InteractionGraph g = build_graph(pts, 5.0);
    EXPECT_FALSE(g.connected(1, 2));
    EXPECT_TRUE(g.connected(1, 3));
    EXPECT_TRUE(g.connected(2, 3));
    EXPECT_EQ(g.row_of(3), 2);
    EXPECT_EQ(g.row_of(99), -1);
}

TEST(BuildGraph, EmptyAndSingleton) {
    EXPECT_EQ(build_graph({}, 1.0).size(), 0);
    const std::vector<PositionRecord> one{{7, 1.0, 1.0}};
    const InteractionGraph g = build_graph(one, 10.0);
    ASSERT_EQ(g.size(), 1);
    EXPECT_TRUE(g.neighbors[0].empty());
}

TEST(BuildGraph, RejectsDuplicateIdsAndNonFinitePositions) {
    const std::vector<PositionRecord> dup{{1, 0, 0}, {1, 1, 1}};
    EXPECT_THROW(build_graph(dup, 1.0), DataError);
    const std::vector<PositionRecord> nan{{1, 0, 0}, {2, std::nan(""), 1}};
    EXPECT_THROW(build_graph(nan, 1.0), NumericError);
}

TEST(BuildGraph, MatchesBruteForceAndIsSymmetric) {
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const auto pts = random_positions(12, 5.0, rng);
        const InteractionGraph g = build_graph(pts, 3.0);
        for (std::size_t i = 0; i < pts.size(); ++i)
            for (std::size_t j = 0; j < pts.size(); ++j) {
                const bool expect = i != j && std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y) < 3.0;
                EXPECT_EQ(g.connected(pts[i].id, pts[j].id), expect);
            }
    }
}

TEST(TGConv, MatchesNodeByNodeReference) {
    Rng rng(2);
    const TGConvParams p = perturbed_norms(make_tgconv(8, 2, rng), rng);
    for (int trial = 0; trial < 10; ++trial) {
        const auto pts = random_positions(6, 4.0, rng);
        const InteractionGraph g = build_graph(pts, 3.0);
        const Matrix h = normal_matrix(6, 8, rng);
        const Matrix got = tgconv(Tensor(h), g, p).value();
        EXPECT_TRUE(got.isApprox(reference_tgconv(h, g, p), 1e-12));
    }
}

TEST(TGConv, IsolatedNodeSeesOnlyItsOwnValue) {
    Rng rng(3);
    const TGConvParams p = make_tgconv(4, 1, rng);
    const std::vector<PositionRecord> pts{{1, 0.0, 0.0}};
    const Matrix h = normal_matrix(1, 4, rng);
    const Matrix v = (h * p.value.weight.value()).rowwise() + p.value.bias.value().row(0);
    const Matrix a = ln_rows(v + h, p.norm1.gain.value(), p.norm1.bias.value());
    const Matrix f = (a * p.out.weight.value()).rowwise() + p.out.bias.value().row(0);
    const Matrix expected = ln_rows(f + a, p.norm2.gain.value(), p.norm2.bias.value());
    EXPECT_TRUE(tgconv(Tensor(h), build_graph(pts, 1.0), p).value().isApprox(expected, 1e-13));
}

TEST(TGConv, RowCountMustMatchGraph) {
    Rng rng(4);
    const TGConvParams p = make_tgconv(4, 2, rng);
    const std::vector<PositionRecord> pts{{1, 0.0, 0.0}, {2, 0.5, 0.0}};
    EXPECT_THROW(tgconv(Tensor(normal_matrix(3, 4, rng)), build_graph(pts, 1.0), p), DimensionError);
    EXPECT_THROW(make_tgconv(6, 4, rng), DimensionError);
}

TEST(TGConv, GradientsMatchFiniteDifferences) {
    Rng rng(5);
    const TGConvParams p = perturbed_norms(make_tgconv(4, 2, rng), rng);
    const InteractionGraph g = build_graph(random_positions(5, 2.0, rng), 2.0);
    Tensor h(normal_matrix(5, 4, rng), true);
    const Matrix w = normal_matrix(5, 4, rng);
    auto loss = [&] { return sum(hadamard(tgconv(h, g, p), Tensor(w))); };
    std::vector<Tensor> inputs{h};
    std::vector<std::string> names{"h"};
    p.for_each("tgconv", [&](const std::string& n, const Tensor& t) {
        inputs.push_back(t);
        names.push_back(n);
    });
    const GradCheckResult r = gradient_check<double>(loss, inputs, names);
    EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_input;
}

TEST(SpatialPlan, SceneMaskOverridesGraphEdges) {
    // Two pedestrians next to each other but in different scenes.
    const Mask presence = Mask::Constant(2, 1, true);
    const NodeLayout layout(presence);
    const std::vector<PositionRecord> pts{{0, 0.0, 0.0}, {1, 0.1, 0.0}};
    const std::vector<InteractionGraph> graphs{build_graph(pts, 1.0)};
    const std::vector<int> scene_of{0, 1};
    const AttentionPlan joint = spatial_plan(layout, graphs);
    EXPECT_TRUE(joint.groups[0].allowed(0, 1));
    const AttentionPlan split = spatial_plan(layout, graphs, scene_of);
    EXPECT_FALSE(split.groups[0].allowed(0, 1));
    EXPECT_FALSE(split.groups[0].allowed(1, 0));
}

TEST(SpatialPlan, GraphMustCoverPresentPedestrians) {
    Mask presence = Mask::Constant(2, 1, true);
    const NodeLayout layout(presence);
    const std::vector<PositionRecord> pts{{0, 0.0, 0.0}};
    const std::vector<InteractionGraph> graphs{build_graph(pts, 1.0)};
    EXPECT_THROW(spatial_plan(layout, graphs), DimensionError);
}

// Property: relabeling nodes permutes the output rows and nothing else.
TEST(Properties, TGConvPermutationEquivariance) {
    Rng rng(6);
    const TGConvParams p = make_tgconv(8, 4, rng);
    std::uniform_int_distribution<int> count(1, 9);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = count(rng);
        const auto pts = random_positions(n, 4.0, rng);
        const Matrix h = normal_matrix(n, 8, rng);
        std::vector<int> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<PositionRecord> pts2;
        Matrix h2(n, 8);
        for (int r = 0; r < n; ++r) {
            pts2.push_back(pts[static_cast<std::size_t>(perm[static_cast<std::size_t>(r)])]);
            h2.row(r) = h.row(perm[static_cast<std::size_t>(r)]);
        }
        const Matrix a = tgconv(Tensor(h), build_graph(pts, 3.0), p).value();
        const Matrix b = tgconv(Tensor(h2), build_graph(pts2, 3.0), p).value();
        for (int r = 0; r < n; ++r)
            EXPECT_LT((b.row(r) - a.row(perm[static_cast<std::size_t>(r)])).cwiseAbs().maxCoeff(), 1e-9);
    }
}

// Property: features of a non-neighbor never reach a node.
TEST(Properties, TGConvLocality) {
    Rng rng(7);
    const TGConvParams p = make_tgconv(8, 2, rng);
    for (int trial = 0; trial < 50; ++trial) {
        const auto pts = random_positions(8, 5.0, rng);
        const InteractionGraph g = build_graph(pts, 2.5);
        Matrix h = normal_matrix(8, 8, rng);
        const Matrix before = tgconv(Tensor(h), g, p).value();
        const int j = trial % 8;
        h.row(j) += normal_matrix(1, 8, rng);
        const Matrix after = tgconv(Tensor(h), g, p).value();
        for (int i = 0; i < 8; ++i)
            if (i != j && !g.connected(pts[static_cast<std::size_t>(i)].id, pts[static_cast<std::size_t>(j)].id))
                EXPECT_TRUE(before.row(i) == after.row(i));
    }
}
