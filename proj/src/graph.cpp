#include "star/graph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace star {

bool InteractionGraph::connected(int a, int b) const {
    const int ra = row_of(a), rb = row_of(b);
    if (ra < 0 || rb < 0) return false;
    const auto& nb = neighbors[static_cast<std::size_t>(ra)];
    return std::binary_search(nb.begin(), nb.end(), rb);
}

int InteractionGraph::row_of(int id) const {
    auto it = std::find(node_ids.begin(), node_ids.end(), id);
    return it == node_ids.end() ? -1 : static_cast<int>(it - node_ids.begin());
}

InteractionGraph build_graph(std::span<const PositionRecord> positions, double threshold) {
    InteractionGraph graph;
    graph.threshold = threshold;
    std::unordered_set<int> seen;
    for (const auto& p : positions) {
        if (!seen.insert(p.id).second) throw DataError("build_graph: duplicate id " + std::to_string(p.id));
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw NumericError("build_graph: non-finite position for id " + std::to_string(p.id));
        graph.node_ids.push_back(p.id);
    }
    const int n = static_cast<int>(positions.size());
    graph.neighbors.assign(static_cast<std::size_t>(n), {});
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double dx = positions[i].x - positions[j].x;
            const double dy = positions[i].y - positions[j].y;
            if (std::hypot(dx, dy) < threshold) {
                graph.neighbors[static_cast<std::size_t>(i)].push_back(j);
                graph.neighbors[static_cast<std::size_t>(j)].push_back(i);
            }
        }
    }
    for (auto& nb : graph.neighbors) std::sort(nb.begin(), nb.end());
    return graph;
}

TGConvParams make_tgconv(Index model_dim, int heads, Rng& rng) {
    if (heads < 1 || model_dim % heads != 0)
        throw DimensionError("tgconv: model dim " + std::to_string(model_dim) +
                             " is not divisible by head count " + std::to_string(heads));
    TGConvParams p;
    p.query = make_linear(model_dim, model_dim, rng);
    p.key = make_linear(model_dim, model_dim, rng);
    p.value = make_linear(model_dim, model_dim, rng);
    p.out = make_linear(model_dim, model_dim, rng);
    p.norm1 = make_layer_norm(model_dim);
    p.norm2 = make_layer_norm(model_dim);
    p.heads = heads;
    return p;
}

AttentionPlan graph_plan(const InteractionGraph& graph) {
    AttentionPlan plan;
    plan.rows = graph.size();
    AttentionGroup group;
    const Index n = graph.size();
    for (Index i = 0; i < n; ++i) group.members.push_back(i);
    group.allowed = Mask::Constant(n, n, false);
    for (Index i = 0; i < n; ++i) {
        group.allowed(i, i) = true;
        for (int j : graph.neighbors[static_cast<std::size_t>(i)]) group.allowed(i, j) = true;
    }
    plan.groups.push_back(std::move(group));
    return plan;
}

Tensor tgconv(const Tensor& h, const AttentionPlan& plan, const TGConvParams& params, AttentionWeights* capture) {
    if (h.cols() != params.model_dim())
        throw DimensionError("tgconv: input " + h.shape_str() + " does not match model dim " +
                             std::to_string(params.model_dim()));
    Tensor q = apply(params.query, h);
    Tensor k = apply(params.key, h);
    Tensor v = apply(params.value, h);
    Tensor attended = apply(params.norm1, grouped_attention(q, k, v, plan, params.heads, capture) + h);
    return apply(params.norm2, apply(params.out, attended) + attended);
}

Tensor tgconv(const Tensor& h, const InteractionGraph& graph, const TGConvParams& params,
              AttentionWeights* capture) {
    if (h.rows() != graph.size())
        throw DimensionError("tgconv: " + std::to_string(h.rows()) + " feature rows but graph has " +
                             std::to_string(graph.size()) + " nodes");
    return tgconv(h, graph_plan(graph), params, capture);
}

AttentionPlan spatial_plan(const NodeLayout& layout, std::span<const InteractionGraph> graphs,
                           std::span<const int> scene_of) {
    if (static_cast<int>(graphs.size()) < layout.steps())
        throw DimensionError("spatial_plan: " + std::to_string(graphs.size()) + " graphs for " +
                             std::to_string(layout.steps()) + " steps");
    AttentionPlan plan;
    plan.rows = layout.size();
    for (int s = 0; s < layout.steps(); ++s) {
        const Index begin = layout.step_begin(s);
        const Index n = layout.step_size(s);
        if (n == 0) continue;
        const auto& graph = graphs[static_cast<std::size_t>(s)];
        std::unordered_map<int, int> row_of_ped;
        for (int r = 0; r < static_cast<int>(graph.node_ids.size()); ++r)
            row_of_ped[graph.node_ids[static_cast<std::size_t>(r)]] = r;
        if (static_cast<Index>(row_of_ped.size()) != n)
            throw DimensionError("spatial_plan: step " + std::to_string(s) + " has " + std::to_string(n) +
                                 " present pedestrians but its graph has " + std::to_string(row_of_ped.size()) +
                                 " nodes");

        AttentionGroup group;
        std::vector<int> graph_row(static_cast<std::size_t>(n));
        for (Index a = 0; a < n; ++a) {
            const Index node = begin + a;
            const int ped = layout.pedestrian_of(node);
            auto it = row_of_ped.find(ped);
            if (it == row_of_ped.end())
                throw DimensionError("spatial_plan: pedestrian " + std::to_string(ped) + " present at step " +
                                     std::to_string(s) + " is absent from the graph");
            group.members.push_back(node);
            graph_row[static_cast<std::size_t>(a)] = it->second;
        }
        // Graph row -> member position.
        std::vector<Index> member_of(static_cast<std::size_t>(n));
        for (Index a = 0; a < n; ++a) member_of[static_cast<std::size_t>(graph_row[static_cast<std::size_t>(a)])] = a;

        group.allowed = Mask::Constant(n, n, false);
        for (Index a = 0; a < n; ++a) {
            group.allowed(a, a) = true;
            for (int nb : graph.neighbors[static_cast<std::size_t>(graph_row[static_cast<std::size_t>(a)])])
                group.allowed(a, member_of[static_cast<std::size_t>(nb)]) = true;
        }
        if (!scene_of.empty()) {
            for (Index a = 0; a < n; ++a)
                for (Index b = 0; b < n; ++b)
                    if (scene_of[static_cast<std::size_t>(layout.pedestrian_of(begin + a))] !=
                        scene_of[static_cast<std::size_t>(layout.pedestrian_of(begin + b))])
                        group.allowed(a, b) = false;
        }
        plan.groups.push_back(std::move(group));
    }
    return plan;
}

Tensor spatial_block(const Tensor& h, const NodeLayout& layout, std::span<const InteractionGraph> graphs,
                     const TGConvParams& params, std::span<const int> scene_of, AttentionWeights* capture) {
    if (h.rows() != layout.size())
        throw DimensionError("spatial_block: input " + h.shape_str() + " but layout has " +
                             std::to_string(layout.size()) + " nodes");
    return tgconv(h, spatial_plan(layout, graphs, scene_of), params, capture);
}

} // namespace star
