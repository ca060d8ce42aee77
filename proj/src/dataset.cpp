#include "star/data/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace star {

namespace {

struct Observation {
    long frame;
    double x;
    double y;
};

long gcd(long a, long b) {
    while (b != 0) {
        const long t = a % b;
        a = b;
        b = t;
    }
    return a;
}

} // namespace

RawTrajectories parse_dataset(std::istream& in, const std::string& dataset) {
    // Insertion order of pedestrians is kept so tracklet ids are reproducible.
    std::vector<int> order;
    std::map<int, std::vector<Observation>> by_ped;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream fields(line);
        double frame_value = 0, ped_value = 0, x = 0, y = 0;
        std::string extra;
        if (!(fields >> frame_value >> ped_value >> x >> y) || (fields >> extra))
            throw DataError("line " + std::to_string(line_no) + ": expected `frame_id ped_id x y`");
        if (frame_value != std::floor(frame_value) || ped_value != std::floor(ped_value))
            throw DataError("line " + std::to_string(line_no) + ": frame and pedestrian ids must be integers");
        if (!std::isfinite(x) || !std::isfinite(y))
            throw DataError("line " + std::to_string(line_no) + ": non-finite coordinate");
        const long frame = static_cast<long>(frame_value);
        const int ped = static_cast<int>(ped_value);
        auto& obs = by_ped[ped];
        if (obs.empty()) order.push_back(ped);
        if (!obs.empty() && frame <= obs.back().frame)
            throw DataError("line " + std::to_string(line_no) + ": frames of pedestrian " + std::to_string(ped) +
                            " are not increasing");
        obs.push_back({frame, x, y});
    }

    RawTrajectories raw;
    raw.dataset = dataset;
    if (by_ped.empty()) return raw;

    std::vector<long> frames;
    for (const auto& [ped, obs] : by_ped)
        for (const auto& o : obs) frames.push_back(o.frame);
    std::sort(frames.begin(), frames.end());
    frames.erase(std::unique(frames.begin(), frames.end()), frames.end());
    raw.first_frame = frames.front();
    long step = 0;
    for (std::size_t i = 1; i < frames.size(); ++i) step = gcd(step, frames[i] - frames[i - 1]);
    raw.frame_step = step > 0 ? step : 1;

    int next_id = 0;
    for (int ped : order) {
        const auto& obs = by_ped[ped];
        std::size_t begin = 0;
        for (std::size_t i = 1; i <= obs.size(); ++i) {
            const bool split = i == obs.size() || obs[i].frame - obs[i - 1].frame != raw.frame_step;
            if (!split) continue;
            Tracklet t;
            t.id = next_id++;
            t.source_id = ped;
            t.start = (obs[begin].frame - raw.first_frame) / raw.frame_step;
            t.positions.resize(static_cast<Index>(i - begin), 2);
            for (std::size_t k = begin; k < i; ++k) {
                t.positions(static_cast<Index>(k - begin), 0) = obs[k].x;
                t.positions(static_cast<Index>(k - begin), 1) = obs[k].y;
            }
            raw.tracklets.push_back(std::move(t));
            begin = i;
        }
    }
    return raw;
}

RawTrajectories load_dataset(const std::filesystem::path& path, const std::string& dataset) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return parse_dataset(in, dataset.empty() ? path.stem().string() : dataset);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::string canonical_dataset_name(std::string_view name) {
    std::string upper(name);
    std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
    for (auto known : kDatasetNames)
        if (upper == known) return upper;
    throw DataError("unknown dataset '" + std::string(name) + "' (expected ETH, HOTEL, ZARA1, ZARA2 or UNIV)");
}

Split leave_one_out_split(std::string_view held_out) {
    Split split;
    split.test = canonical_dataset_name(held_out);
    for (auto name : kDatasetNames)
        if (name != split.test) split.train.emplace_back(name);
    return split;
}

std::vector<std::filesystem::path> dataset_files(const std::filesystem::path& data_dir, std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    std::vector<std::filesystem::path> files;
    const auto single = data_dir / (lower + ".txt");
    if (std::filesystem::is_regular_file(single)) {
        files.push_back(single);
        return files;
    }
    const auto dir = data_dir / lower;
    if (std::filesystem::is_directory(dir)) {
        for (const auto& entry : std::filesystem::recursive_directory_iterator(dir))
            if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no trajectory files for " + std::string(name) + " under " + data_dir.string());
    return files;
}

std::vector<TrajectoryScene> load_scenes(const std::filesystem::path& data_dir, std::string_view name,
                                         int obs_len, int pred_len, int stride) {
    const std::string canonical = canonical_dataset_name(name);
    std::vector<TrajectoryScene> scenes;
    for (const auto& file : dataset_files(data_dir, canonical)) {
        auto part = make_scenes(load_dataset(file, canonical), obs_len, pred_len, stride);
        scenes.insert(scenes.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return scenes;
}

} // namespace star
