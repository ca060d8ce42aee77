#pragma once

#include <iosfwd>
#include <vector>

#include "star/data/scene.hpp"

namespace star {

/// Constant-velocity walkers with a short-range repulsion between pairs.
struct SyntheticSpec {
    int scenes = 20;
    int min_pedestrians = 2;
    int max_pedestrians = 5;
    int obs_len = 8;
    int pred_len = 12;
    double arena = 6.0;          // start positions uniform in [-arena, arena]²
    double min_speed = 0.25;     // per step
    double max_speed = 0.5;
    double avoid_radius = 1.5;
    double avoid_strength = 0.08;
    std::uint64_t seed = 7;
};

/// Positions of every pedestrian for `frames` steps, in order of creation.
struct SyntheticCrowd {
    std::vector<Eigen::MatrixX2d> tracks;   // frames × 2 each
};

SyntheticCrowd simulate_crowd(int pedestrians, int frames, const SyntheticSpec& spec, Rng& rng);

/// Every pedestrian present over the whole window, hence all are targets.
/// Scenes are preprocessed (local frame around the targets' reference mean).
std::vector<TrajectoryScene> synthetic_scenes(const SyntheticSpec& spec);

/// The same scenes laid out as one raw recording: scene k occupies timeline
/// steps [2kW, 2kW + W) with W = obs + pred; frame ids are 10 × step and
/// pedestrian ids are unique across scenes.
RawTrajectories synthetic_recording(const SyntheticSpec& spec);

/// Writes `frame ped x y` lines readable by load_dataset.
void write_recording(std::ostream& out, const RawTrajectories& raw);

} // namespace star
