#pragma once

#include <span>
#include <string>
#include <vector>

#include "star/attention/attention.hpp"

namespace star {

struct PositionRecord {
    int id = 0;
    double x = 0.0;
    double y = 0.0;
};

/// Undirected proximity graph at one timestep. Row i of node features belongs
/// to node_ids[i]; neighbor lists hold row indices, ascending, without self.
struct InteractionGraph {
    std::vector<int> node_ids;
    std::vector<std::vector<int>> neighbors;
    double threshold = 0.0;

    Index size() const { return static_cast<Index>(node_ids.size()); }
    // Edge between node ids `a` and `b`; false when either is missing.
    bool connected(int a, int b) const;
    // Row of `id`, or -1.
    int row_of(int id) const;
};

/// Edge (i, j) iff i != j and the Euclidean distance is strictly below `threshold`.
InteractionGraph build_graph(std::span<const PositionRecord> positions, double threshold);

struct TGConvParams {
    LinearParams query;
    LinearParams key;
    LinearParams value;
    LinearParams out;
    LayerNormParams norm1;
    LayerNormParams norm2;
    int heads = 1;

    Index model_dim() const { return query.in_features(); }

    template <typename F>
    void for_each(const std::string& prefix, F&& f) const {
        query.for_each(prefix + ".query", f);
        key.for_each(prefix + ".key", f);
        value.for_each(prefix + ".value", f);
        out.for_each(prefix + ".out", f);
        norm1.for_each(prefix + ".norm1", f);
        norm2.for_each(prefix + ".norm2", f);
    }
};

TGConvParams make_tgconv(Index model_dim, int heads, Rng& rng);

/// Attention plan of a single graph: each node attends to its neighbors and itself.
AttentionPlan graph_plan(const InteractionGraph& graph);

/// Transformer graph convolution over the nodes of one graph (rows of h in
/// graph order): A = LN(att + h), out = LN(f_out(A) + A). Heads split q/k/v
/// column-wise and are concatenated back before the skip connection.
Tensor tgconv(const Tensor& h, const InteractionGraph& graph, const TGConvParams& params,
              AttentionWeights* capture = nullptr);

/// Same transform for an arbitrary precomputed plan.
Tensor tgconv(const Tensor& h, const AttentionPlan& plan, const TGConvParams& params,
              AttentionWeights* capture = nullptr);

/// One group per step of `layout`; graphs[s].node_ids are pedestrian indices.
/// When `scene_of` is given, pedestrians of different scenes never attend to
/// each other regardless of the graphs.
AttentionPlan spatial_plan(const NodeLayout& layout, std::span<const InteractionGraph> graphs,
                           std::span<const int> scene_of = {});

/// tgconv applied at every step of `layout` with shared weights.
Tensor spatial_block(const Tensor& h, const NodeLayout& layout, std::span<const InteractionGraph> graphs,
                     const TGConvParams& params, std::span<const int> scene_of = {},
                     AttentionWeights* capture = nullptr);

} // namespace star
