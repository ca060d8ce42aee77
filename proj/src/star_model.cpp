#include "star/model/star.hpp"

#include <map>
#include <string>

namespace star {

void GraphMemory::write(Tensor embeddings, NodeLayout layout) {
    if (embeddings.rows() != layout.size())
        throw DimensionError("memory write: " + embeddings.shape_str() + " for a layout of " +
                             std::to_string(layout.size()) + " nodes");
    contents_ = std::move(embeddings);
    layout_ = std::move(layout);
}

Tensor GraphMemory::read() const {
    if (empty()) return Tensor::zeros(0, 0);
    return *contents_;
}

Tensor memory_read(const GraphMemory& memory) { return memory.read(); }

Embeddings embed_inputs(const Tensor& spatial_positions, const Tensor& temporal_positions, const StarParams& params,
                        const StarConfig& config, bool training, Rng& rng) {
    Tensor spatial = relu(apply(params.embed_spatial, spatial_positions));
    Tensor temporal = relu(apply(params.embed_temporal, temporal_positions));
    return {dropout(spatial, config.dropout, training, rng), dropout(temporal, config.dropout, training, rng)};
}

Tensor temporal_encode(const Tensor& h, const NodeLayout& layout, const TemporalEncoderParams& params,
                       AttentionWeights* capture) {
    if (params.kind == TemporalKind::recurrent) return recurrent_encode(h, layout, params.recurrent);
    return temporal_block(h, temporal_plan(layout), params.transformer, capture);
}

Tensor encoder1(const Tensor& h_spatial, const Tensor& h_temporal, const EncoderContext& context,
                const GraphMemory& memory, const StarParams& params, const StarConfig& config,
                const Tensor* spatial_branch) {
    const NodeLayout& layout = context.layout;
    Tensor spatial = spatial_branch
                         ? *spatial_branch
                         : spatial_block(h_spatial, layout, context.graphs, params.spatial1, context.scene_of);

    Tensor temporal_input = h_temporal;
    if (config.use_memory && !memory.empty()) {
        const int t = layout.steps();
        if (memory.steps() != t - 1 || !(memory.layout().presence() == layout.presence().leftCols(t - 1)).all())
            throw DimensionError("encoder1: memory holds " + std::to_string(memory.steps()) +
                                 " steps but the pass covers " + std::to_string(t));
        std::vector<Index> newest;
        for (Index n = layout.step_begin(t - 1); n < layout.size(); ++n) newest.push_back(n);
        temporal_input = concat_rows({memory.read(), gather_rows(h_temporal, newest)});
    }
    Tensor temporal = temporal_encode(temporal_input, layout, params.temporal1);
    return apply(params.fusion, concat_cols({temporal, spatial}));
}

Tensor encoder2(const Tensor& h, const EncoderContext& context, const StarParams& params, const StarConfig& config,
                GraphMemory* memory, AttentionWeights* spatial_capture) {
    Tensor out = h;
    if (config.use_encoder2) {
        if (!params.has_encoder2) throw ConfigError("encoder2 enabled but the parameters have no encoder 2");
        Tensor spatial = spatial_block(h, context.layout, context.graphs, params.spatial2, context.scene_of,
                                       spatial_capture);
        out = temporal_encode(spatial, context.layout, params.temporal2);
    }
    if (memory && config.use_memory) memory->write(out, context.layout);
    return out;
}

Tensor decode_step(const Tensor& h_last, const Tensor& noise, const StarParams& params) {
    if (noise.rows() != h_last.rows() && noise.cols() > 0)
        throw DimensionError("decode_step: noise " + noise.shape_str() + " for embeddings " + h_last.shape_str());
    if (params.decoder.in_features() != h_last.cols() + noise.cols())
        throw DimensionError("decode_step: decoder expects " + std::to_string(params.decoder.in_features()) +
                             " inputs, got " + std::to_string(h_last.cols() + noise.cols()));
    if (noise.cols() == 0) return apply(params.decoder, h_last);
    return apply(params.decoder, concat_cols({h_last, noise}));
}

InteractionGraph build_step_graph(std::span<const int> pedestrians, std::span<const Vec2> positions,
                                  std::span<const int> scene_of, double threshold) {
    std::map<int, std::vector<PositionRecord>> by_scene;
    for (std::size_t k = 0; k < pedestrians.size(); ++k) {
        const int p = pedestrians[k];
        by_scene[scene_of.empty() ? 0 : scene_of[static_cast<std::size_t>(p)]].push_back(
            {p, positions[k].x(), positions[k].y()});
    }
    InteractionGraph merged;
    merged.threshold = threshold;
    for (const auto& [scene, records] : by_scene) {
        const InteractionGraph g = build_graph(records, threshold);
        const int offset = static_cast<int>(merged.node_ids.size());
        for (std::size_t r = 0; r < g.node_ids.size(); ++r) {
            merged.node_ids.push_back(g.node_ids[r]);
            std::vector<int> nb;
            for (int j : g.neighbors[r]) nb.push_back(j + offset);
            merged.neighbors.push_back(std::move(nb));
        }
    }
    return merged;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> RolloutResult::local_positions(const Batch& batch) const {
    const Index n = static_cast<Index>(targets.size());
    const Index steps = static_cast<Index>(offsets.size());
    Eigen::MatrixXd x(n, steps), y(n, steps);
    for (Index i = 0; i < n; ++i) {
        const Vec2 ref = batch.reference(targets[static_cast<std::size_t>(i)]);
        for (Index s = 0; s < steps; ++s) {
            x(i, s) = ref.x() + offsets[static_cast<std::size_t>(s)].value()(i, 0);
            y(i, s) = ref.y() + offsets[static_cast<std::size_t>(s)].value()(i, 1);
        }
    }
    return {x, y};
}

namespace {

template <typename T>
std::vector<T> head(const std::vector<T>& v, int count) {
    return std::vector<T>(v.begin(), v.begin() + count);
}

} // namespace

RolloutResult rollout(const Batch& batch, const StarParams& params, const StarConfig& config, Rng& rng,
                      const RolloutOptions& options) {
    config.validate();
    if (batch.obs_len != config.obs_len || batch.pred_len != config.pred_len)
        throw ConfigError("rollout: batch window " + std::to_string(batch.obs_len) + "+" +
                          std::to_string(batch.pred_len) + " does not match config " +
                          std::to_string(config.obs_len) + "+" + std::to_string(config.pred_len));
    const int peds = batch.pedestrians();
    const int obs = config.obs_len;
    const int horizon = obs + config.pred_len - 1;

    RolloutResult result;
    result.targets = batch.target_indices();
    if (result.targets.empty()) throw DataError("rollout: batch has no target pedestrian");
    const Index n_targets = static_cast<Index>(result.targets.size());

    std::vector<Vec2> reference(static_cast<std::size_t>(peds));
    for (int p = 0; p < peds; ++p) reference[static_cast<std::size_t>(p)] = batch.reference(p);

    Mask presence = Mask::Constant(peds, horizon, false);
    presence.leftCols(obs) = batch.present.leftCols(obs);
    for (int p : result.targets) presence.row(p).rightCols(horizon - obs).setConstant(true);

    const std::span<const int> scene_of(batch.scene_of);
    std::vector<InteractionGraph> graphs;
    std::vector<Tensor> emb_spatial, emb_temporal, spatial_cache;

    // Registers step s given its present pedestrians and their local positions.
    auto add_step = [&](const std::vector<int>& members, const std::vector<Vec2>& positions,
                        const Tensor& spatial_in, const Tensor& temporal_in) {
        graphs.push_back(build_step_graph(members, positions, scene_of, config.threshold));
        Embeddings e = embed_inputs(spatial_in, temporal_in, params, config, options.training, rng);
        Mask single = Mask::Constant(peds, 1, false);
        for (int p : members) single(p, 0) = true;
        const NodeLayout step_layout(single);
        spatial_cache.push_back(spatial_block(e.spatial, step_layout, std::span(&graphs.back(), 1), params.spatial1,
                                              scene_of));
        emb_spatial.push_back(e.spatial);
        emb_temporal.push_back(e.temporal);
    };

    for (int s = 0; s < obs; ++s) {
        std::vector<int> members;
        std::vector<Vec2> positions;
        for (int p = 0; p < peds; ++p)
            if (presence(p, s)) {
                members.push_back(p);
                positions.push_back(batch.position(p, s));
            }
        Matrix spatial_in(static_cast<Index>(members.size()), 2);
        Matrix temporal_in(static_cast<Index>(members.size()), 2);
        for (std::size_t k = 0; k < members.size(); ++k) {
            spatial_in.row(static_cast<Index>(k)) = positions[k].transpose();
            temporal_in.row(static_cast<Index>(k)) =
                (positions[k] - reference[static_cast<std::size_t>(members[k])]).transpose();
        }
        add_step(members, positions, Tensor(std::move(spatial_in)), Tensor(std::move(temporal_in)));
    }

    const int noise_dim = config.effective_noise_dim();
    const Tensor noise = noise_dim > 0 ? Tensor(normal_matrix(n_targets, noise_dim, rng)) : Tensor::zeros(n_targets, 0);

    GraphMemory memory;
    auto pass = [&](int t, bool final_pass) {
        const NodeLayout layout(presence.leftCols(t));
        const std::span<const InteractionGraph> pass_graphs(graphs.data(), static_cast<std::size_t>(t));
        const EncoderContext context{layout, pass_graphs, scene_of};
        const auto sp = head(emb_spatial, t);
        const auto tp = head(emb_temporal, t);
        const auto cached = head(spatial_cache, t);
        const Tensor h_spatial = concat_rows<double>(std::span<const Tensor>(sp));
        const Tensor h_temporal = concat_rows<double>(std::span<const Tensor>(tp));
        const Tensor spatial_branch = concat_rows<double>(std::span<const Tensor>(cached));
        const Tensor fused = encoder1(h_spatial, h_temporal, context, memory, params, config, &spatial_branch);
        Tensor out = encoder2(fused, context, params, config, &memory,
                              final_pass ? options.final_spatial_attention : nullptr);
        if (final_pass && options.final_layout) *options.final_layout = layout;
        if (options.trace) options.trace->push_back({t, layout, out, memory.read()});
        return std::make_pair(out, layout);
    };

    if (config.use_memory)
        for (int t = 1; t < obs; ++t) pass(t, false);

    for (int k = 0; k < config.pred_len; ++k) {
        const int t = obs + k;
        auto [out, layout] = pass(t, k == config.pred_len - 1);
        std::vector<Index> rows;
        for (int p : result.targets) rows.push_back(layout.node(p, t - 1));
        Tensor offset = decode_step(gather_rows(out, rows), noise, params);
        result.offsets.push_back(offset);
        if (k == config.pred_len - 1) break;

        Matrix ref(n_targets, 2);
        std::vector<Vec2> positions;
        Matrix truth(n_targets, 2);
        bool truth_available = config.teacher_forcing;
        for (Index i = 0; i < n_targets; ++i) {
            const int p = result.targets[static_cast<std::size_t>(i)];
            const Vec2 r = reference[static_cast<std::size_t>(p)];
            ref.row(i) = r.transpose();
            positions.push_back(r + Vec2(offset.value()(i, 0), offset.value()(i, 1)));
            if (truth_available && batch.present(p, t)) truth.row(i) = (batch.position(p, t) - r).transpose();
            else truth_available = false;
        }
        Tensor temporal_in = truth_available ? Tensor(truth) : offset;
        Tensor spatial_in = temporal_in + Tensor(std::move(ref));
        if (truth_available)
            for (Index i = 0; i < n_targets; ++i)
                positions[static_cast<std::size_t>(i)] = Vec2(spatial_in.value()(i, 0), spatial_in.value()(i, 1));
        add_step(result.targets, positions, spatial_in, temporal_in);
    }
    return result;
}

} // namespace star
