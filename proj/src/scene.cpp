#include "star/data/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

namespace star {

int TrajectoryScene::target_count() const {
    return static_cast<int>(std::count(target.begin(), target.end(), true));
}

Vec2 TrajectoryScene::reference(int ped) const {
    for (int t = obs_len - 1; t >= 0; --t)
        if (present(ped, t)) return position(ped, t);
    throw DataError("pedestrian " + std::to_string(ids[static_cast<std::size_t>(ped)]) +
                    " is never observed in the observation window");
}

std::vector<TrajectoryScene> make_scenes(const RawTrajectories& raw, int obs_len, int pred_len, int stride,
                                         bool require_future) {
    if (stride < 1) throw DataError("make_scenes: stride must be at least 1");
    if (obs_len < 1 || pred_len < 1) throw DataError("make_scenes: window lengths must be positive");
    const long frames = obs_len + pred_len;
    long timeline = 0;
    for (const auto& t : raw.tracklets) timeline = std::max(timeline, t.end());
    const long needed = require_future ? frames : obs_len;

    std::vector<TrajectoryScene> scenes;
    for (long w = 0; w + needed <= timeline; w += stride) {
        TrajectoryScene scene;
        scene.dataset = raw.dataset;
        scene.first_frame = raw.first_frame + w * raw.frame_step;
        scene.obs_len = obs_len;
        scene.pred_len = pred_len;
        std::vector<const Tracklet*> members;
        for (const auto& t : raw.tracklets)
            if (t.start < w + obs_len && t.end() > w) members.push_back(&t);
        const Index n = static_cast<Index>(members.size());
        scene.x = Eigen::MatrixXd::Zero(n, frames);
        scene.y = Eigen::MatrixXd::Zero(n, frames);
        scene.present = Mask::Constant(n, frames, false);
        for (Index p = 0; p < n; ++p) {
            const Tracklet& t = *members[static_cast<std::size_t>(p)];
            scene.ids.push_back(t.source_id);
            for (long f = 0; f < frames; ++f) {
                const long k = w + f - t.start;
                if (k < 0 || k >= t.length()) continue;
                scene.present(p, f) = true;
                scene.x(p, f) = t.positions(k, 0);
                scene.y(p, f) = t.positions(k, 1);
            }
            const long span = require_future ? frames : obs_len;
            scene.target.push_back(scene.present.row(p).head(span).all());
        }
        if (scene.target_count() > 0) scenes.push_back(std::move(scene));
    }
    return scenes;
}

TrajectoryScene preprocess(const TrajectoryScene& scene) {
    TrajectoryScene out = scene;
    Vec2 shift = Vec2::Zero();
    int count = 0;
    for (int p = 0; p < scene.pedestrians(); ++p) {
        if (!scene.target[static_cast<std::size_t>(p)]) continue;
        shift += scene.reference(p);
        ++count;
    }
    if (count == 0) {
        for (int p = 0; p < scene.pedestrians(); ++p) {
            shift += scene.reference(p);
            ++count;
        }
    }
    if (count > 0) shift /= double(count);
    for (Index p = 0; p < out.present.rows(); ++p)
        for (Index f = 0; f < out.present.cols(); ++f)
            if (out.present(p, f)) {
                out.x(p, f) -= shift.x();
                out.y(p, f) -= shift.y();
            }
    out.origin = scene.origin + shift;
    return out;
}

TrajectoryScene to_world(const TrajectoryScene& scene) {
    TrajectoryScene out = scene;
    for (Index p = 0; p < out.present.rows(); ++p)
        for (Index f = 0; f < out.present.cols(); ++f)
            if (out.present(p, f)) {
                out.x(p, f) += scene.origin.x();
                out.y(p, f) += scene.origin.y();
            }
    out.origin = Vec2::Zero();
    return out;
}

TrajectoryScene rotate(const TrajectoryScene& scene, double theta) {
    TrajectoryScene out = scene;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    for (Index p = 0; p < out.present.rows(); ++p)
        for (Index f = 0; f < out.present.cols(); ++f)
            if (out.present(p, f)) {
                const double x = scene.x(p, f);
                const double y = scene.y(p, f);
                out.x(p, f) = c * x - s * y;
                out.y(p, f) = s * x + c * y;
            }
    return out;
}

TrajectoryScene augment_rotation(const TrajectoryScene& scene, Rng& rng) {
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    return rotate(scene, angle(rng));
}

void write_scenes(std::ostream& out, std::span<const TrajectoryScene> scenes) {
    out.precision(17);
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const auto& s = scenes[i];
        out << "scene " << i << " dataset " << (s.dataset.empty() ? "-" : s.dataset) << " first_frame "
            << s.first_frame << " obs " << s.obs_len << " pred " << s.pred_len << " pedestrians "
            << s.pedestrians() << " origin " << s.origin.x() << ' ' << s.origin.y() << '\n';
        for (int p = 0; p < s.pedestrians(); ++p) {
            out << "ped " << s.ids[static_cast<std::size_t>(p)] << " target "
                << (s.target[static_cast<std::size_t>(p)] ? 1 : 0) << '\n';
            for (int f = 0; f < s.frames(); ++f)
                if (s.present(p, f))
                    out << "pos " << s.ids[static_cast<std::size_t>(p)] << ' ' << f << ' ' << s.x(p, f) << ' '
                        << s.y(p, f) << '\n';
        }
        out << "end\n";
    }
}

} // namespace star
