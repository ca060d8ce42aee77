#include "star/attention/attention.hpp"

#include <cmath>
#include <string>

namespace star {

AttentionParams make_attention(Index model_dim, int heads, Rng& rng) {
    if (heads < 1 || model_dim % heads != 0)
        throw DimensionError("attention: model dim " + std::to_string(model_dim) +
                             " is not divisible by head count " + std::to_string(heads));
    AttentionParams p;
    p.query = make_linear(model_dim, model_dim, rng);
    p.key = make_linear(model_dim, model_dim, rng);
    p.value = make_linear(model_dim, model_dim, rng);
    p.output = make_linear(model_dim, model_dim, rng);
    p.heads = heads;
    return p;
}

TemporalBlockParams make_temporal_block(Index model_dim, int heads, Index hidden_dim, Rng& rng) {
    TemporalBlockParams p;
    p.attention = make_attention(model_dim, heads, rng);
    p.ff_hidden = make_linear(model_dim, hidden_dim, rng);
    p.ff_output = make_linear(hidden_dim, model_dim, rng);
    p.norm1 = make_layer_norm(model_dim);
    p.norm2 = make_layer_norm(model_dim);
    return p;
}

namespace {

Matrix gather(const Matrix& m, const std::vector<Index>& rows) {
    Matrix out(static_cast<Index>(rows.size()), m.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = m.row(rows[r]);
    return out;
}

void scatter_add(Matrix& m, const std::vector<Index>& rows, const Matrix& part) {
    for (std::size_t r = 0; r < rows.size(); ++r) m.row(rows[r]) += part.row(static_cast<Index>(r));
}

Matrix masked_softmax_rows(const Matrix& logits, const Mask& allowed, const std::vector<Index>& members) {
    Matrix w = Matrix::Zero(logits.rows(), logits.cols());
    for (Index i = 0; i < logits.rows(); ++i) {
        double peak = -std::numeric_limits<double>::infinity();
        for (Index j = 0; j < logits.cols(); ++j)
            if (allowed(i, j)) peak = std::max(peak, logits(i, j));
        if (peak == -std::numeric_limits<double>::infinity())
            throw DimensionError("attention: query row " + std::to_string(members[static_cast<std::size_t>(i)]) +
                                 " has every key masked");
        double total = 0.0;
        for (Index j = 0; j < logits.cols(); ++j) {
            if (!allowed(i, j)) continue;
            w(i, j) = std::exp(logits(i, j) - peak);
            total += w(i, j);
        }
        w.row(i) /= total;
    }
    return w;
}

} // namespace

Tensor grouped_attention(const Tensor& query, const Tensor& key, const Tensor& value,
                         const AttentionPlan& plan, int heads, AttentionWeights* capture) {
    if (query.rows() != plan.rows || key.rows() != plan.rows || value.rows() != plan.rows)
        throw DimensionError("attention: plan covers " + std::to_string(plan.rows) + " rows, got Q " +
                             query.shape_str() + " K " + key.shape_str() + " V " + value.shape_str());
    if (key.cols() != query.cols() || value.cols() != query.cols())
        throw DimensionError("attention: Q " + query.shape_str() + " K " + key.shape_str() + " V " +
                             value.shape_str() + " widths differ");
    if (heads < 1 || query.cols() % heads != 0)
        throw DimensionError("attention: width " + std::to_string(query.cols()) +
                             " is not divisible by head count " + std::to_string(heads));
    const Index head_dim = query.cols() / heads;
    const double inv_sqrt = 1.0 / std::sqrt(double(head_dim));

    // weights[g][h]
    std::vector<std::vector<Matrix>> weights(plan.groups.size());
    Matrix out = Matrix::Zero(plan.rows, query.cols());
    for (std::size_t g = 0; g < plan.groups.size(); ++g) {
        const auto& group = plan.groups[g];
        const Index n = static_cast<Index>(group.members.size());
        if (group.allowed.rows() != n || group.allowed.cols() != n)
            throw DimensionError("attention: group mask " +
                                 shape_string(group.allowed.rows(), group.allowed.cols()) +
                                 " does not match " + std::to_string(n) + " members");
        const Matrix q = gather(query.value(), group.members);
        const Matrix k = gather(key.value(), group.members);
        const Matrix v = gather(value.value(), group.members);
        Matrix o(n, query.cols());
        weights[g].reserve(static_cast<std::size_t>(heads));
        for (int h = 0; h < heads; ++h) {
            const Index c = h * head_dim;
            Matrix logits = q.middleCols(c, head_dim) * k.middleCols(c, head_dim).transpose() * inv_sqrt;
            Matrix w = masked_softmax_rows(logits, group.allowed, group.members);
            o.middleCols(c, head_dim).noalias() = w * v.middleCols(c, head_dim);
            weights[g].push_back(std::move(w));
        }
        for (Index r = 0; r < n; ++r) out.row(group.members[static_cast<std::size_t>(r)]) = o.row(r);
    }
    if (capture) capture->by_group = weights;

    auto plan_copy = std::make_shared<const AttentionPlan>(plan);
    return Tensor::from_op(
        std::move(out), {query, key, value},
        [plan_copy, weights = std::move(weights), heads, head_dim, inv_sqrt](Node<double>& self) {
            auto* pq = self.parents[0].get();
            auto* pk = self.parents[1].get();
            auto* pv = self.parents[2].get();
            const Index width = pq->value.cols();
            Matrix dq = Matrix::Zero(plan_copy->rows, width);
            Matrix dk = Matrix::Zero(plan_copy->rows, width);
            Matrix dv = Matrix::Zero(plan_copy->rows, width);
            for (std::size_t g = 0; g < plan_copy->groups.size(); ++g) {
                const auto& members = plan_copy->groups[g].members;
                const Matrix q = gather(pq->value, members);
                const Matrix k = gather(pk->value, members);
                const Matrix v = gather(pv->value, members);
                const Matrix go = gather(self.grad, members);
                const Index n = static_cast<Index>(members.size());
                Matrix gq(n, width), gk(n, width), gv(n, width);
                for (int h = 0; h < heads; ++h) {
                    const Index c = h * head_dim;
                    const Matrix& w = weights[g][static_cast<std::size_t>(h)];
                    const auto go_h = go.middleCols(c, head_dim);
                    Matrix dw = go_h * v.middleCols(c, head_dim).transpose();
                    gv.middleCols(c, head_dim).noalias() = w.transpose() * go_h;
                    Matrix dlogits = detail::softmax_rows_backward<double>(w, dw) * inv_sqrt;
                    gq.middleCols(c, head_dim).noalias() = dlogits * k.middleCols(c, head_dim);
                    gk.middleCols(c, head_dim).noalias() = dlogits.transpose() * q.middleCols(c, head_dim);
                }
                scatter_add(dq, members, gq);
                scatter_add(dk, members, gk);
                scatter_add(dv, members, gv);
            }
            pq->accumulate(dq);
            pk->accumulate(dk);
            pv->accumulate(dv);
        },
        "attention");
}

Tensor scaled_attention(const Tensor& query, const Tensor& key, const Tensor& value, const Mask& allowed,
                        Matrix* weights) {
    AttentionPlan plan;
    plan.rows = query.rows();
    AttentionGroup group;
    for (Index i = 0; i < query.rows(); ++i) group.members.push_back(i);
    group.allowed = allowed;
    plan.groups.push_back(std::move(group));
    AttentionWeights captured;
    Tensor out = grouped_attention(query, key, value, plan, 1, weights ? &captured : nullptr);
    if (weights) *weights = captured.by_group.front().front();
    return out;
}

Tensor multi_head(const Tensor& h, const AttentionParams& params, const AttentionPlan& plan,
                  AttentionWeights* capture) {
    if (h.cols() != params.model_dim())
        throw DimensionError("multi_head: input " + h.shape_str() + " does not match model dim " +
                             std::to_string(params.model_dim()));
    Tensor q = apply(params.query, h);
    Tensor k = apply(params.key, h);
    Tensor v = apply(params.value, h);
    return apply(params.output, grouped_attention(q, k, v, plan, params.heads, capture));
}

Matrix positional_encoding(Index max_len, Index model_dim) {
    if (model_dim % 2 != 0)
        throw DimensionError("positional_encoding: model dim " + std::to_string(model_dim) + " is odd");
    Matrix table(max_len, model_dim);
    for (Index pos = 0; pos < max_len; ++pos) {
        for (Index i = 0; i < model_dim; i += 2) {
            const double angle = double(pos) / std::pow(10000.0, double(i) / double(model_dim));
            table(pos, i) = std::sin(angle);
            table(pos, i + 1) = std::cos(angle);
        }
    }
    return table;
}

SequencePlan temporal_plan(const NodeLayout& layout, bool causal) {
    SequencePlan seq;
    seq.plan.rows = layout.size();
    seq.positions.resize(static_cast<std::size_t>(layout.size()));
    for (Index n = 0; n < layout.size(); ++n) seq.positions[static_cast<std::size_t>(n)] = layout.step_of(n);
    for (int p = 0; p < layout.pedestrians(); ++p) {
        AttentionGroup group;
        group.members = layout.pedestrian_nodes(p);
        if (group.members.empty()) continue;
        const Index n = static_cast<Index>(group.members.size());
        group.allowed = Mask::Constant(n, n, true);
        if (causal)
            for (Index a = 0; a < n; ++a)
                for (Index b = a + 1; b < n; ++b) group.allowed(a, b) = false;
        seq.plan.groups.push_back(std::move(group));
    }
    return seq;
}

Tensor temporal_block(const Tensor& h, const SequencePlan& sequence, const TemporalBlockParams& params,
                      AttentionWeights* capture) {
    if (h.rows() != sequence.plan.rows)
        throw DimensionError("temporal_block: input " + h.shape_str() + " but plan covers " +
                             std::to_string(sequence.plan.rows) + " rows");
    int max_pos = 0;
    for (int p : sequence.positions) max_pos = std::max(max_pos, p);
    const Matrix table = positional_encoding(max_pos + 1, h.cols());
    Matrix pe(h.rows(), h.cols());
    for (Index r = 0; r < h.rows(); ++r) pe.row(r) = table.row(sequence.positions[static_cast<std::size_t>(r)]);

    Tensor x = h + Tensor(std::move(pe));
    Tensor attended = apply(params.norm1, x + multi_head(x, params.attention, sequence.plan, capture));
    Tensor hidden = relu(apply(params.ff_hidden, attended));
    return apply(params.norm2, attended + apply(params.ff_output, hidden));
}

Tensor temporal_block(const Tensor& h, const Mask& time_mask, const TemporalBlockParams& params, bool causal) {
    for (Index p = 0; p < time_mask.rows(); ++p)
        if (!time_mask.row(p).any())
            throw DimensionError("temporal_block: pedestrian " + std::to_string(p) + " has no valid step");
    return temporal_block(h, temporal_plan(NodeLayout(time_mask), causal), params);
}

} // namespace star
