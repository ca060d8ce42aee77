#pragma once

#include <optional>
#include <span>
#include <vector>

#include "star/data/batch.hpp"
#include "star/model/params.hpp"

namespace star {

/// External store of per-pedestrian embeddings, replaced wholesale on write
/// and read back verbatim.
class GraphMemory {
public:
    bool empty() const { return !contents_.has_value(); }
    int steps() const { return empty() ? 0 : layout_.steps(); }
    const NodeLayout& layout() const { return layout_; }

    void write(Tensor embeddings, NodeLayout layout);
    // Stored embeddings in layout order; a 0×0 tensor when empty.
    Tensor read() const;
    void clear() { contents_.reset(); layout_ = NodeLayout(); }

private:
    std::optional<Tensor> contents_;
    NodeLayout layout_;
};

Tensor memory_read(const GraphMemory& memory);

/// Nodes of one forward pass and the per-step graphs over them.
struct EncoderContext {
    const NodeLayout& layout;
    std::span<const InteractionGraph> graphs;
    std::span<const int> scene_of;
};

struct Embeddings {
    Tensor spatial;
    Tensor temporal;
};

/// Two independent linear+ReLU position embeddings, with input dropout in
/// training mode. Rows of both inputs are nodes; columns are (x, y).
Embeddings embed_inputs(const Tensor& spatial_positions, const Tensor& temporal_positions,
                        const StarParams& params, const StarConfig& config, bool training, Rng& rng);

/// Temporal transformer or LSTM over every pedestrian's sequence in `layout`.
Tensor temporal_encode(const Tensor& h, const NodeLayout& layout, const TemporalEncoderParams& params,
                       AttentionWeights* capture = nullptr);

/// Spatial branch ∥ temporal branch, fused 2·d → d. With a non-empty memory
/// the temporal branch sees the stored embeddings for all but the newest step.
/// `spatial_branch` may carry a precomputed spatial_block result.
Tensor encoder1(const Tensor& h_spatial, const Tensor& h_temporal, const EncoderContext& context,
                const GraphMemory& memory, const StarParams& params, const StarConfig& config,
                const Tensor* spatial_branch = nullptr);

/// spatial_block then temporal encoder (identity when encoder 2 is disabled);
/// overwrites `memory` with the full output when given.
Tensor encoder2(const Tensor& h, const EncoderContext& context, const StarParams& params, const StarConfig& config,
                GraphMemory* memory, AttentionWeights* spatial_capture = nullptr);

/// Linear map of [h ∥ noise] to (x, y) offsets from each pedestrian's last
/// observed position. `noise` may have zero columns.
Tensor decode_step(const Tensor& h_last, const Tensor& noise, const StarParams& params);

/// Snapshot after one encoder pass of a rollout.
struct PassTrace {
    int history = 0;
    NodeLayout layout;
    Tensor encoder2_output;
    Tensor memory;
};

struct RolloutOptions {
    bool training = false;
    std::vector<PassTrace>* trace = nullptr;
    // Encoder-2 spatial attention of the final pass, with its node layout.
    AttentionWeights* final_spatial_attention = nullptr;
    NodeLayout* final_layout = nullptr;
};

struct RolloutResult {
    std::vector<int> targets;       // batch pedestrian indices
    std::vector<Tensor> offsets;    // per predicted step: targets × 2

    /// Predicted positions in each scene's local frame: targets × steps for x and y.
    std::pair<Eigen::MatrixXd, Eigen::MatrixXd> local_positions(const Batch& batch) const;
};

/// Autoregressive prediction of pred_len steps for every target of the batch.
RolloutResult rollout(const Batch& batch, const StarParams& params, const StarConfig& config, Rng& rng,
                      const RolloutOptions& options = {});

/// Interaction graph over the pedestrians present at one step, built per
/// scene so that pedestrians of different scenes are never connected.
/// Node ids are batch pedestrian indices.
InteractionGraph build_step_graph(std::span<const int> pedestrians, std::span<const Vec2> positions,
                                  std::span<const int> scene_of, double threshold);

} // namespace star
