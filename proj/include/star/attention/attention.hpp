#pragma once

#include <string>
#include <vector>

#include "star/layers.hpp"
#include "star/layout.hpp"

namespace star {

/// Rows of a flat Q/K/V array that attend among themselves. `allowed(a, b)`
/// says whether member a may attend to member b.
struct AttentionGroup {
    std::vector<Index> members;
    Mask allowed;
};

/// Partition of attention into independent groups. Rows outside every group
/// produce zero output.
struct AttentionPlan {
    Index rows = 0;
    std::vector<AttentionGroup> groups;
};

/// Per-group, per-head attention weights captured during a forward pass.
struct AttentionWeights {
    std::vector<std::vector<Matrix>> by_group;  // [group][head], members × members
};

struct AttentionParams {
    LinearParams query;
    LinearParams key;
    LinearParams value;
    LinearParams output;
    int heads = 1;

    Index model_dim() const { return query.in_features(); }

    template <typename F>
    void for_each(const std::string& prefix, F&& f) const {
        query.for_each(prefix + ".query", f);
        key.for_each(prefix + ".key", f);
        value.for_each(prefix + ".value", f);
        output.for_each(prefix + ".output", f);
    }
};

/// Multi-head self-attention followed by two residual layer-norm stages and a
/// ReLU feed-forward network.
struct TemporalBlockParams {
    AttentionParams attention;
    LinearParams ff_hidden;
    LinearParams ff_output;
    LayerNormParams norm1;
    LayerNormParams norm2;

    template <typename F>
    void for_each(const std::string& prefix, F&& f) const {
        attention.for_each(prefix + ".attention", f);
        ff_hidden.for_each(prefix + ".ff_hidden", f);
        ff_output.for_each(prefix + ".ff_output", f);
        norm1.for_each(prefix + ".norm1", f);
        norm2.for_each(prefix + ".norm2", f);
    }
};

AttentionParams make_attention(Index model_dim, int heads, Rng& rng);
TemporalBlockParams make_temporal_block(Index model_dim, int heads, Index hidden_dim, Rng& rng);

/// Scaled dot-product attention evaluated independently inside every group of
/// `plan`, with Q/K/V split column-wise into `heads` heads. Logits are
/// q·k/sqrt(d_k); disallowed pairs get exactly zero weight.
/// Throws DimensionError when a query row has no allowed key.
Tensor grouped_attention(const Tensor& query, const Tensor& key, const Tensor& value,
                         const AttentionPlan& plan, int heads, AttentionWeights* capture = nullptr);

/// Single-head attention over all rows with an explicit t×t mask.
Tensor scaled_attention(const Tensor& query, const Tensor& key, const Tensor& value,
                        const Mask& allowed, Matrix* weights = nullptr);

/// f_O over the concatenated heads of grouped attention on projections of h.
Tensor multi_head(const Tensor& h, const AttentionParams& params, const AttentionPlan& plan,
                  AttentionWeights* capture = nullptr);

/// Sinusoidal table: sin on even columns, cos on odd, frequencies 10000^(-2i/d).
Matrix positional_encoding(Index max_len, Index model_dim);

/// Attention plan plus the time index used for each row's positional encoding.
struct SequencePlan {
    AttentionPlan plan;
    std::vector<int> positions;
};

/// One group per pedestrian over its present steps; `causal` limits each step
/// to itself and earlier steps. Pedestrians without nodes get no group.
SequencePlan temporal_plan(const NodeLayout& layout, bool causal = false);

/// Temporal transformer block over the rows described by `sequence`.
Tensor temporal_block(const Tensor& h, const SequencePlan& sequence, const TemporalBlockParams& params,
                      AttentionWeights* capture = nullptr);

/// Convenience form: rows of `h` are the present (pedestrian, step) pairs of
/// `time_mask` (pedestrians × steps) in step-major order. Throws when a
/// pedestrian has no valid step.
Tensor temporal_block(const Tensor& h, const Mask& time_mask, const TemporalBlockParams& params,
                      bool causal = false);

} // namespace star
