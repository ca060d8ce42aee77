#include "star/data/batch.hpp"

#include <ostream>

namespace star {

Vec2 Batch::reference(int ped) const {
    for (int t = obs_len - 1; t >= 0; --t)
        if (present(ped, t)) return position(ped, t);
    throw DataError("batch pedestrian " + std::to_string(ped) + " is never observed");
}

Mask Batch::attention_mask() const {
    const int n = pedestrians();
    Mask mask(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) mask(a, b) = allowed(a, b);
    return mask;
}

std::vector<int> Batch::target_indices() const {
    std::vector<int> out;
    for (int p = 0; p < pedestrians(); ++p)
        if (target[static_cast<std::size_t>(p)]) out.push_back(p);
    return out;
}

Batch make_batch(std::span<const TrajectoryScene> scenes, std::span<const std::size_t> indices) {
    if (indices.empty()) throw DataError("make_batch: no scenes");
    Batch batch;
    batch.obs_len = scenes[indices.front()].obs_len;
    batch.pred_len = scenes[indices.front()].pred_len;
    Index total = 0;
    for (std::size_t i : indices) {
        const auto& s = scenes[i];
        if (s.obs_len != batch.obs_len || s.pred_len != batch.pred_len)
            throw DataError("make_batch: scenes have different window lengths");
        total += s.pedestrians();
    }
    const Index frames = batch.frames();
    batch.x = Eigen::MatrixXd::Zero(total, frames);
    batch.y = Eigen::MatrixXd::Zero(total, frames);
    batch.present = Mask::Constant(total, frames, false);
    Index row = 0;
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const auto& s = scenes[indices[k]];
        const Index n = s.pedestrians();
        batch.scene_indices.push_back(indices[k]);
        batch.origins.push_back(s.origin);
        batch.x.middleRows(row, n) = s.x;
        batch.y.middleRows(row, n) = s.y;
        batch.present.middleRows(row, n) = s.present;
        for (Index p = 0; p < n; ++p) {
            batch.scene_of.push_back(static_cast<int>(k));
            batch.ids.push_back(s.ids[static_cast<std::size_t>(p)]);
            batch.target.push_back(s.target[static_cast<std::size_t>(p)]);
        }
        row += n;
    }
    return batch;
}

Batch make_batch(const TrajectoryScene& scene) {
    const std::size_t index = 0;
    return make_batch(std::span<const TrajectoryScene>(&scene, 1), std::span<const std::size_t>(&index, 1));
}

std::vector<Batch> pack_batches(std::span<const TrajectoryScene> scenes, int budget,
                                std::vector<std::string>* warnings) {
    if (budget < 1) throw DataError("pack_batches: budget must be positive");
    std::vector<Batch> batches;
    std::vector<std::size_t> current;
    int count = 0;
    auto flush = [&] {
        if (current.empty()) return;
        batches.push_back(make_batch(scenes, current));
        current.clear();
        count = 0;
    };
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const int n = scenes[i].pedestrians();
        if (n > budget) {
            flush();
            batches.push_back(make_batch(scenes, std::vector<std::size_t>{i}));
            batches.back().oversized = true;
            if (warnings)
                warnings->push_back("scene " + std::to_string(i) + " has " + std::to_string(n) +
                                    " pedestrians, above the batch budget of " + std::to_string(budget));
            continue;
        }
        if (count + n > budget) flush();
        current.push_back(i);
        count += n;
    }
    flush();
    return batches;
}

void write_batch(std::ostream& out, const Batch& batch) {
    out.precision(17);
    out << "batch scenes " << batch.scenes() << " pedestrians " << batch.pedestrians() << " obs " << batch.obs_len
        << " pred " << batch.pred_len << " oversized " << (batch.oversized ? 1 : 0) << '\n';
    for (int p = 0; p < batch.pedestrians(); ++p) {
        out << "ped " << batch.ids[static_cast<std::size_t>(p)] << " scene " << batch.scene_of[static_cast<std::size_t>(p)]
            << " target " << (batch.target[static_cast<std::size_t>(p)] ? 1 : 0) << '\n';
        for (int f = 0; f < batch.frames(); ++f)
            if (batch.present(p, f))
                out << "pos " << batch.ids[static_cast<std::size_t>(p)] << ' ' << f << ' ' << batch.x(p, f) << ' '
                    << batch.y(p, f) << '\n';
    }
    out << "end\n";
}

} // namespace star
