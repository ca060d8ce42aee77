#pragma once

#include <span>
#include <string>
#include <vector>

#include "star/data/scene.hpp"

namespace star {

/// Several scenes stacked along the pedestrian axis. Pedestrians of different
/// scenes must never attend to each other; `scene_of` carries that mask.
struct Batch {
    int obs_len = 8;
    int pred_len = 12;
    std::vector<std::size_t> scene_indices;
    std::vector<int> scene_of;
    std::vector<int> ids;
    Eigen::MatrixXd x;
    Eigen::MatrixXd y;
    Mask present;
    std::vector<bool> target;
    std::vector<Vec2> origins;
    bool oversized = false;

    int pedestrians() const { return static_cast<int>(ids.size()); }
    int scenes() const { return static_cast<int>(origins.size()); }
    int frames() const { return obs_len + pred_len; }
    Vec2 position(int ped, int frame) const { return {x(ped, frame), y(ped, frame)}; }
    Vec2 reference(int ped) const;
    bool allowed(int a, int b) const { return scene_of[static_cast<std::size_t>(a)] == scene_of[static_cast<std::size_t>(b)]; }
    // pedestrians × pedestrians, true where attention is permitted.
    Mask attention_mask() const;
    std::vector<int> target_indices() const;
};

/// Stacks preprocessed scenes (all with identical window lengths).
Batch make_batch(std::span<const TrajectoryScene> scenes, std::span<const std::size_t> indices);
Batch make_batch(const TrajectoryScene& scene);

/// Greedy packing in order: a scene joins the current batch while the
/// pedestrian total stays within `budget`. A scene larger than the budget is
/// emitted alone, flagged `oversized`, and reported through `warnings`.
std::vector<Batch> pack_batches(std::span<const TrajectoryScene> scenes, int budget,
                                std::vector<std::string>* warnings = nullptr);

void write_batch(std::ostream& out, const Batch& batch);

} // namespace star
