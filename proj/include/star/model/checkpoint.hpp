#pragma once

#include <filesystem>
#include <iosfwd>

#include "star/model/config.hpp"
#include "star/model/params.hpp"

namespace star {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    StarConfig config;
    StarParams params;
    KeyValues metadata;   // free-form provenance such as seed and step
};

void write_checkpoint(std::ostream& out, const StarConfig& config, const StarParams& params,
                      const KeyValues& metadata = {});
void save_checkpoint(const std::filesystem::path& path, const StarConfig& config, const StarParams& params,
                     const KeyValues& metadata = {});

/// Rebuilds parameters from the stored config and fills them by name; every
/// stored tensor must match a parameter of that shape and vice versa.
Checkpoint read_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Loads and throws ConfigError when the stored architecture differs from
/// `expected` in any field that changes the parameter set.
Checkpoint load_checkpoint(const std::filesystem::path& path, const StarConfig& expected);

/// Field names whose values differ in a way that changes the parameter set.
std::vector<std::string> architecture_mismatches(const StarConfig& a, const StarConfig& b);

} // namespace star
