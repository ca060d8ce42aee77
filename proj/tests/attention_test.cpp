#include <gtest/gtest.h>

#include <cmath>

#include "star/attention/attention.hpp"
#include "star/errors.hpp"
#include "star/numerics/gradcheck.hpp"

using namespace star;

namespace {

// Loop-based reference for one head of one group.
Matrix naive_attention(const Matrix& q, const Matrix& k, const Matrix& v, const Mask& allowed) {
    const Index n = q.rows();
    Matrix out = Matrix::Zero(n, v.cols());
    for (Index i = 0; i < n; ++i) {
        std::vector<double> logits(static_cast<std::size_t>(n), 0.0);
        double hi = -INFINITY;
        for (Index j = 0; j < n; ++j) {
            if (!allowed(i, j)) continue;
            double dot = 0.0;
            for (Index c = 0; c < q.cols(); ++c) dot += q(i, c) * k(j, c);
            logits[static_cast<std::size_t>(j)] = dot / std::sqrt(double(q.cols()));
            hi = std::max(hi, logits[static_cast<std::size_t>(j)]);
        }
        double z = 0.0;
        for (Index j = 0; j < n; ++j)
            if (allowed(i, j)) z += std::exp(logits[static_cast<std::size_t>(j)] - hi);
        for (Index j = 0; j < n; ++j)
            if (allowed(i, j)) out.row(i) += std::exp(logits[static_cast<std::size_t>(j)] - hi) / z * v.row(j);
    }
    return out;
}

Mask random_mask(Index n, Rng& rng, double density = 0.5) {
    std::bernoulli_distribution on(density);
    Mask m(n, n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) m(i, j) = on(rng);
        m(i, i) = true;
    }
    return m;
}

} // namespace

TEST(GroupedAttention, MatchesLoopReferencePerGroupAndHead) {
    Rng rng(1);
    const Index rows = 7, dim = 6;
    const int heads = 3;
    const Matrix q = normal_matrix(rows, dim, rng), k = normal_matrix(rows, dim, rng), v = normal_matrix(rows, dim, rng);
    AttentionPlan plan{rows, {}};
    plan.groups.push_back({{0, 3, 5}, random_mask(3, rng)});
    plan.groups.push_back({{1, 2, 4, 6}, random_mask(4, rng)});
    const Matrix out = grouped_attention(Tensor(q), Tensor(k), Tensor(v), plan, heads).value();

    const Index dh = dim / heads;
    for (const AttentionGroup& g : plan.groups) {
        const Index n = static_cast<Index>(g.members.size());
        for (int h = 0; h < heads; ++h) {
            Matrix gq(n, dh), gk(n, dh), gv(n, dh);
            for (Index a = 0; a < n; ++a) {
                gq.row(a) = q.row(g.members[a]).segment(h * dh, dh);
                gk.row(a) = k.row(g.members[a]).segment(h * dh, dh);
                gv.row(a) = v.row(g.members[a]).segment(h * dh, dh);
            }
            const Matrix ref = naive_attention(gq, gk, gv, g.allowed);
            for (Index a = 0; a < n; ++a)
                for (Index c = 0; c < dh; ++c) EXPECT_NEAR(out(g.members[a], h * dh + c), ref(a, c), 1e-12);
        }
    }
}

TEST(GroupedAttention, RowsOutsideEveryGroupAreZero) {
    Rng rng(2);
    AttentionPlan plan{4, {{{0, 2}, Mask::Constant(2, 2, true)}}};
    const Tensor x(normal_matrix(4, 4, rng));
    const Matrix out = grouped_attention(x, x, x, plan, 2).value();
    EXPECT_TRUE(out.row(1).isZero());
    EXPECT_TRUE(out.row(3).isZero());
}

TEST(GroupedAttention, FullyMaskedRowReportsGlobalIndex) {
    Mask allowed = Mask::Constant(2, 2, false);
    allowed(0, 0) = true;
    AttentionPlan plan{3, {{{0, 2}, allowed}}};
    const Tensor x(Matrix::Ones(3, 2));
    try {
        grouped_attention(x, x, x, plan, 1);
        FAIL();
    } catch (const DimensionError& e) {
        EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
    }
}

TEST(GroupedAttention, HeadsMustDivideWidth) {
    AttentionPlan plan{2, {{{0, 1}, Mask::Constant(2, 2, true)}}};
    const Tensor x(Matrix::Ones(2, 5));
    EXPECT_THROW(grouped_attention(x, x, x, plan, 2), DimensionError);
}

TEST(GroupedAttention, GradientsMatchFiniteDifferences) {
    Rng rng(3);
    AttentionPlan plan{6, {}};
    plan.groups.push_back({{0, 2, 4}, random_mask(3, rng)});
    plan.groups.push_back({{1, 5}, Mask::Constant(2, 2, true)});
    Tensor q(normal_matrix(6, 4, rng), true), k(normal_matrix(6, 4, rng), true), v(normal_matrix(6, 4, rng), true);
    const Matrix w = normal_matrix(6, 4, rng);
    auto loss = [&] { return sum(hadamard(grouped_attention(q, k, v, plan, 2), Tensor(w))); };
    EXPECT_LT(gradient_check<double>(loss, {q, k, v}, {"q", "k", "v"}).max_relative_error, 1e-6);
}

TEST(ScaledAttention, CapturedWeightsAreNormalizedAndMasked) {
    Rng rng(4);
    const Mask allowed = random_mask(5, rng, 0.3);
    Matrix weights;
    const Tensor x(normal_matrix(5, 3, rng));
    scaled_attention(x, x, x, allowed, &weights);
    for (Index i = 0; i < 5; ++i) {
        EXPECT_NEAR(weights.row(i).sum(), 1.0, 1e-12);
        for (Index j = 0; j < 5; ++j)
            if (!allowed(i, j)) EXPECT_EQ(weights(i, j), 0.0);
    }
}

TEST(PositionalEncoding, SinOnEvenCosOnOdd) {
    const Matrix pe = positional_encoding(4, 4);
    EXPECT_NEAR(pe(3, 0), 0.1411200080598672, 1e-15);
    EXPECT_NEAR(pe(3, 1), -0.9899924966004454, 1e-15);
    EXPECT_NEAR(pe(3, 2), 0.02999550020249566, 1e-15);
    EXPECT_NEAR(pe(3, 3), 0.9995500337489875, 1e-15);
    EXPECT_TRUE(pe.row(0).isApprox((Matrix(1, 4) << 0, 1, 0, 1).finished()));
    EXPECT_THROW(positional_encoding(2, 3), DimensionError);
}

TEST(TemporalPlan, GroupsFollowPedestriansAndSkipEmptyOnes) {
    Mask presence(3, 3);
    presence << true, true, true, false, false, false, false, true, true;
    const NodeLayout layout(presence);
    const SequencePlan seq = temporal_plan(layout, true);
    ASSERT_EQ(seq.plan.groups.size(), 2u);
    EXPECT_EQ(seq.plan.groups[1].members.size(), 2u);
    EXPECT_FALSE(seq.plan.groups[0].allowed(0, 1));
    EXPECT_TRUE(seq.plan.groups[0].allowed(2, 0));
    EXPECT_EQ(seq.positions[static_cast<std::size_t>(layout.node(2, 2))], 2);
}

TEST(TemporalBlock, PedestriansAreIndependent) {
    Rng rng(5);
    const TemporalBlockParams p = make_temporal_block(8, 2, 16, rng);
    const Mask presence = Mask::Constant(3, 4, true);
    const NodeLayout layout(presence);
    Matrix h = normal_matrix(layout.size(), 8, rng);
    const Matrix before = temporal_block(Tensor(h), presence, p).value();
    for (Index s = 0; s < 4; ++s) h.row(layout.node(1, int(s))).array() += 1.0;
    const Matrix after = temporal_block(Tensor(h), presence, p).value();
    for (int ped : {0, 2})
        for (int s = 0; s < 4; ++s) EXPECT_TRUE(before.row(layout.node(ped, s)) == after.row(layout.node(ped, s)));
    EXPECT_FALSE(before.row(layout.node(1, 0)) == after.row(layout.node(1, 0)));
}

TEST(TemporalBlock, CausalMaskHidesTheFuture) {
    Rng rng(6);
    const TemporalBlockParams p = make_temporal_block(8, 4, 16, rng);
    const Mask presence = Mask::Constant(1, 5, true);
    Matrix h = normal_matrix(5, 8, rng);
    const Matrix before = temporal_block(Tensor(h), presence, p, true).value();
    h.row(4).array() += 3.0;
    const Matrix after = temporal_block(Tensor(h), presence, p, true).value();
    EXPECT_TRUE(before.topRows(4) == after.topRows(4));
}

TEST(TemporalBlock, PedestrianWithoutStepsIsAnError) {
    Rng rng(7);
    const TemporalBlockParams p = make_temporal_block(4, 1, 4, rng);
    Mask presence = Mask::Constant(2, 3, true);
    presence.row(1).setConstant(false);
    EXPECT_THROW(temporal_block(Tensor(normal_matrix(3, 4, rng)), presence, p), DimensionError);
}

TEST(TemporalBlock, GradientsMatchFiniteDifferences) {
    Rng rng(8);
    const TemporalBlockParams p = make_temporal_block(4, 2, 6, rng);
    Mask presence = Mask::Constant(2, 3, true);
    presence(1, 0) = false;
    Tensor h(normal_matrix(5, 4, rng), true);
    const Matrix w = normal_matrix(5, 4, rng);
    auto loss = [&] { return sum(hadamard(temporal_block(h, presence, p), Tensor(w))); };
    std::vector<Tensor> inputs{h};
    std::vector<std::string> names{"h"};
    p.for_each("block", [&](const std::string& n, const Tensor& t) {
        inputs.push_back(t);
        names.push_back(n);
    });
    const GradCheckResult r = gradient_check<double>(loss, inputs, names);
    EXPECT_LT(r.max_relative_error, 1e-6) << r.worst_input;
}

// Property: for random sequences and masks every captured attention row sums
// to one over its allowed entries and is exactly zero elsewhere.
TEST(Properties, MultiHeadWeightsNormalized) {
    Rng rng(9);
    std::uniform_int_distribution<int> len(1, 9);
    for (int trial = 0; trial < 40; ++trial) {
        const Index n = len(rng);
        const AttentionParams params = make_attention(8, 4, rng);
        AttentionPlan plan{n, {{{}, random_mask(n, rng, 0.4)}}};
        for (Index i = 0; i < n; ++i) plan.groups[0].members.push_back(i);
        AttentionWeights w;
        multi_head(Tensor(normal_matrix(n, 8, rng) * 3.0), params, plan, &w);
        for (const Matrix& head : w.by_group[0])
            for (Index i = 0; i < n; ++i) {
                EXPECT_NEAR(head.row(i).sum(), 1.0, 1e-9);
                for (Index j = 0; j < n; ++j)
                    if (!plan.groups[0].allowed(i, j)) EXPECT_EQ(head(i, j), 0.0);
            }
    }
}
