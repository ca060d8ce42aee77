#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "star/data/scene.hpp"

namespace star {

inline constexpr std::array<std::string_view, 5> kDatasetNames = {"ETH", "HOTEL", "ZARA1", "ZARA2", "UNIV"};

/// Upper-cased canonical name; throws DataError for anything outside kDatasetNames.
std::string canonical_dataset_name(std::string_view name);

struct Split {
    std::vector<std::string> train;
    std::string test;
};

/// Train on the four datasets other than `held_out`, test on `held_out`.
Split leave_one_out_split(std::string_view held_out);

/// Files for a dataset inside `data_dir`: `<name>.txt` (lower-case) if it
/// exists, otherwise every `*.txt` below `<name>/`, sorted by path.
std::vector<std::filesystem::path> dataset_files(const std::filesystem::path& data_dir, std::string_view name);

/// Loads and windows every file of a dataset; coordinates stay in world frame.
std::vector<TrajectoryScene> load_scenes(const std::filesystem::path& data_dir, std::string_view name,
                                         int obs_len, int pred_len, int stride);

} // namespace star
