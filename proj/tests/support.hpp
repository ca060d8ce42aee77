#pragma once

#include <vector>

#include "star/data/batch.hpp"
#include "star/data/synthetic.hpp"
#include "star/model/star.hpp"

namespace star::testing {

inline Tensor random_tensor(Index rows, Index cols, Rng& rng, bool requires_grad = true) {
    return Tensor(normal_matrix(rows, cols, rng), requires_grad);
}

inline std::vector<PositionRecord> random_positions(int n, double extent, Rng& rng) {
    std::uniform_real_distribution<double> u(-extent, extent);
    std::vector<PositionRecord> out;
    for (int i = 0; i < n; ++i) out.push_back({i, u(rng), u(rng)});
    return out;
}

/// Small architecture that keeps finite-difference checks fast.
inline StarConfig tiny_config() {
    StarConfig c;
    c.d_model = 8;
    c.heads = 2;
    c.spatial_heads = 2;
    c.ff_hidden = 6;
    c.noise_dim = 3;
    c.dropout = 0.0;
    c.deterministic = true;
    return c;
}

/// Preprocessed scene with `pedestrians` walkers; the first `absent_tail`
/// non-target pedestrians leave after the observation window.
inline TrajectoryScene random_scene(int pedestrians, int obs, int pred, Rng& rng, double extent = 3.0,
                                    bool with_partial = true) {
    SyntheticSpec spec;
    spec.obs_len = obs;
    spec.pred_len = pred;
    spec.arena = extent;
    const SyntheticCrowd crowd = simulate_crowd(pedestrians, obs + pred, spec, rng);
    TrajectoryScene s;
    s.dataset = "TEST";
    s.obs_len = obs;
    s.pred_len = pred;
    const int frames = obs + pred;
    s.x.resize(pedestrians, frames);
    s.y.resize(pedestrians, frames);
    s.present = Mask::Constant(pedestrians, frames, true);
    s.target.assign(static_cast<std::size_t>(pedestrians), true);
    for (int i = 0; i < pedestrians; ++i) {
        s.ids.push_back(100 + i);
        s.x.row(i) = crowd.tracks[static_cast<std::size_t>(i)].col(0).transpose();
        s.y.row(i) = crowd.tracks[static_cast<std::size_t>(i)].col(1).transpose();
    }
    if (with_partial && pedestrians >= 3) {
        // Last pedestrian enters late and leaves early: a neighbor only.
        const int p = pedestrians - 1;
        s.present.row(p).head(2).setConstant(false);
        s.present.row(p).tail(pred).setConstant(false);
        s.target[static_cast<std::size_t>(p)] = false;
        for (int f = 0; f < frames; ++f)
            if (!s.present(p, f)) s.x(p, f) = s.y(p, f) = 0.0;
    }
    return preprocess(s);
}

} // namespace star::testing
