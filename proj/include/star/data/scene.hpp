#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "star/numerics/random.hpp"

namespace star {

using Vec2 = Eigen::Vector2d;

/// Contiguous run of observations of one pedestrian. `start` is the index of
/// the first observation on the file's frame timeline (frame_id − first_frame)
/// / frame_step.
struct Tracklet {
    int id = 0;
    int source_id = 0;
    long start = 0;
    Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor> positions;

    long length() const { return static_cast<long>(positions.rows()); }
    long end() const { return start + length(); }
};

struct RawTrajectories {
    std::string dataset;
    long first_frame = 0;
    long frame_step = 1;
    std::vector<Tracklet> tracklets;
};

/// Parses `frame_id ped_id x y` lines ('#' comments and blank lines skipped).
/// Frames per pedestrian must increase; any missing frame starts a new tracklet.
RawTrajectories load_dataset(const std::filesystem::path& path, const std::string& dataset = {});
RawTrajectories parse_dataset(std::istream& in, const std::string& dataset = {});

/// Pedestrians × frames window. After preprocess() coordinates are relative
/// to `origin` (world coordinates of the shared scene origin).
struct TrajectoryScene {
    std::string dataset;
    long first_frame = 0;
    int obs_len = 8;
    int pred_len = 12;
    std::vector<int> ids;   // pedestrian ids of the source file; labels only
    Eigen::MatrixXd x;
    Eigen::MatrixXd y;
    Mask present;
    std::vector<bool> target;
    Vec2 origin = Vec2::Zero();

    int pedestrians() const { return static_cast<int>(ids.size()); }
    int frames() const { return obs_len + pred_len; }
    int target_count() const;
    Vec2 position(int ped, int frame) const { return {x(ped, frame), y(ped, frame)}; }
    // Last observed position inside the observation window.
    Vec2 reference(int ped) const;
    Vec2 to_world(const Vec2& local) const { return local + origin; }
};

/// Sliding windows of obs_len + pred_len frames. Pedestrians observed at any
/// observation frame are included; targets are present at every frame of the
/// window (or every observation frame when `require_future` is false). A
/// window yields a scene iff it has at least one target.
std::vector<TrajectoryScene> make_scenes(const RawTrajectories& raw, int obs_len, int pred_len, int stride,
                                         bool require_future = true);

/// Translates coordinates so the mean of the targets' last observed positions
/// becomes the origin; origin accumulates the world offset for inversion.
TrajectoryScene preprocess(const TrajectoryScene& scene);
TrajectoryScene to_world(const TrajectoryScene& scene);

/// Rotation about the scene origin by a uniform angle in [0, 2π).
TrajectoryScene augment_rotation(const TrajectoryScene& scene, Rng& rng);
TrajectoryScene rotate(const TrajectoryScene& scene, double theta);

/// Line-oriented dump (see README for the schema).
void write_scenes(std::ostream& out, std::span<const TrajectoryScene> scenes);

} // namespace star
