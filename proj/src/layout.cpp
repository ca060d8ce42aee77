#include "star/layout.hpp"

namespace star {

NodeLayout::NodeLayout(Mask presence) : presence_(std::move(presence)) {
    index_.setConstant(presence_.rows(), presence_.cols(), -1);
    step_offset_.assign(1, 0);
    for (int s = 0; s < steps(); ++s) {
        for (int p = 0; p < pedestrians(); ++p) {
            if (!presence_(p, s)) continue;
            index_(p, s) = static_cast<Index>(pedestrian_of_.size());
            pedestrian_of_.push_back(p);
            step_of_.push_back(s);
        }
        step_offset_.push_back(static_cast<Index>(pedestrian_of_.size()));
    }
}

std::vector<Index> NodeLayout::pedestrian_nodes(int pedestrian) const {
    std::vector<Index> out;
    for (int s = 0; s < steps(); ++s)
        if (index_(pedestrian, s) >= 0) out.push_back(index_(pedestrian, s));
    return out;
}

NodeLayout NodeLayout::prefix(int count) const {
    return NodeLayout(presence_.leftCols(count));
}

} // namespace star
