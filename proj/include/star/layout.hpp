#pragma once

#include <vector>

#include "star/numerics/tensor.hpp"

namespace star {

/// Flat indexing of the (pedestrian, step) pairs that exist in a sequence
/// window. Nodes are ordered step-major, pedestrians ascending within a step,
/// so the nodes of one step occupy a contiguous row range.
class NodeLayout {
public:
    NodeLayout() = default;
    // presence: pedestrians × steps
    explicit NodeLayout(Mask presence);

    Index size() const { return static_cast<Index>(pedestrian_of_.size()); }
    int pedestrians() const { return static_cast<int>(presence_.rows()); }
    int steps() const { return static_cast<int>(presence_.cols()); }
    const Mask& presence() const { return presence_; }

    // -1 when the pedestrian is absent at that step.
    Index node(int pedestrian, int step) const { return index_(pedestrian, step); }
    int pedestrian_of(Index node) const { return pedestrian_of_[static_cast<std::size_t>(node)]; }
    int step_of(Index node) const { return step_of_[static_cast<std::size_t>(node)]; }

    Index step_begin(int step) const { return step_offset_[static_cast<std::size_t>(step)]; }
    Index step_size(int step) const {
        return step_offset_[static_cast<std::size_t>(step) + 1] - step_offset_[static_cast<std::size_t>(step)];
    }
    std::vector<Index> pedestrian_nodes(int pedestrian) const;

    // Layout restricted to the first `steps` steps; its nodes are a prefix of this one's.
    NodeLayout prefix(int steps) const;

private:
    Mask presence_;
    Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> index_;
    std::vector<int> pedestrian_of_;
    std::vector<int> step_of_;
    std::vector<Index> step_offset_{0};
};

} // namespace star
