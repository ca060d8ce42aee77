#include "star/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "star/errors.hpp"

namespace star {

SyntheticCrowd simulate_crowd(int pedestrians, int frames, const SyntheticSpec& spec, Rng& rng) {
    if (pedestrians < 1 || frames < 1) throw ConfigError("simulate_crowd: need at least one pedestrian and frame");
    std::uniform_real_distribution<double> pos(-spec.arena, spec.arena);
    std::uniform_real_distribution<double> speed(spec.min_speed, spec.max_speed);
    std::uniform_real_distribution<double> heading(0.0, 2.0 * std::numbers::pi);

    std::vector<Vec2> p(static_cast<std::size_t>(pedestrians)), preferred(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = {pos(rng), pos(rng)};
        const double s = speed(rng), a = heading(rng);
        preferred[i] = {s * std::cos(a), s * std::sin(a)};
    }
    SyntheticCrowd crowd;
    crowd.tracks.assign(p.size(), Eigen::MatrixX2d(frames, 2));
    for (int f = 0; f < frames; ++f) {
        for (std::size_t i = 0; i < p.size(); ++i) crowd.tracks[i].row(f) = p[i].transpose();
        std::vector<Vec2> v = preferred;
        for (std::size_t i = 0; i < p.size(); ++i)
            for (std::size_t j = 0; j < p.size(); ++j) {
                if (i == j) continue;
                const Vec2 d = p[i] - p[j];
                const double r = d.norm();
                if (r < spec.avoid_radius && r > 1e-9)
                    v[i] += spec.avoid_strength * (spec.avoid_radius - r) / spec.avoid_radius * d / r;
            }
        for (std::size_t i = 0; i < p.size(); ++i) p[i] += v[i];
    }
    return crowd;
}

std::vector<TrajectoryScene> synthetic_scenes(const SyntheticSpec& spec) {
    if (spec.scenes < 1 || spec.min_pedestrians < 1 || spec.max_pedestrians < spec.min_pedestrians)
        throw ConfigError("synthetic_scenes: invalid scene or pedestrian counts");
    Rng rng(spec.seed);
    std::uniform_int_distribution<int> count(spec.min_pedestrians, spec.max_pedestrians);
    const int frames = spec.obs_len + spec.pred_len;
    std::vector<TrajectoryScene> scenes;
    int next_id = 1;
    for (int k = 0; k < spec.scenes; ++k) {
        const SyntheticCrowd crowd = simulate_crowd(count(rng), frames, spec, rng);
        TrajectoryScene s;
        s.dataset = "SYNTHETIC";
        s.first_frame = 10L * 2 * k * frames;
        s.obs_len = spec.obs_len;
        s.pred_len = spec.pred_len;
        const int n = static_cast<int>(crowd.tracks.size());
        s.x.resize(n, frames);
        s.y.resize(n, frames);
        s.present = Mask::Constant(n, frames, true);
        s.target.assign(static_cast<std::size_t>(n), true);
        for (int i = 0; i < n; ++i) {
            s.ids.push_back(next_id++);
            s.x.row(i) = crowd.tracks[static_cast<std::size_t>(i)].col(0).transpose();
            s.y.row(i) = crowd.tracks[static_cast<std::size_t>(i)].col(1).transpose();
        }
        scenes.push_back(preprocess(s));
    }
    return scenes;
}

RawTrajectories synthetic_recording(const SyntheticSpec& spec) {
    RawTrajectories raw;
    raw.dataset = "SYNTHETIC";
    raw.first_frame = 0;
    raw.frame_step = 10;
    for (const TrajectoryScene& s : synthetic_scenes(spec)) {
        for (int i = 0; i < s.pedestrians(); ++i) {
            Tracklet t;
            t.id = s.ids[static_cast<std::size_t>(i)];
            t.source_id = t.id;
            t.start = s.first_frame / raw.frame_step;
            t.positions.resize(s.frames(), 2);
            for (int f = 0; f < s.frames(); ++f) t.positions.row(f) = s.to_world(s.position(i, f)).transpose();
            raw.tracklets.push_back(std::move(t));
        }
    }
    return raw;
}

void write_recording(std::ostream& out, const RawTrajectories& raw) {
    struct Row {
        long frame;
        int id;
        double x, y;
    };
    std::vector<Row> rows;
    for (const Tracklet& t : raw.tracklets)
        for (long k = 0; k < t.length(); ++k)
            rows.push_back({raw.first_frame + (t.start + k) * raw.frame_step, t.source_id, t.positions(k, 0),
                            t.positions(k, 1)});
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.frame < b.frame; });
    const auto old = out.precision(17);
    for (const Row& r : rows) out << r.frame << ' ' << r.id << ' ' << r.x << ' ' << r.y << '\n';
    out.precision(old);
}

} // namespace star
