#pragma once

#include <iosfwd>
#include <map>
#include <string>

namespace star {

enum class TemporalKind { transformer, recurrent };

std::string to_string(TemporalKind kind);
TemporalKind parse_temporal_kind(const std::string& text);

struct StarConfig {
    int d_model = 32;
    int heads = 8;
    int spatial_heads = 8;
    int ff_hidden = 64;
    double dropout = 0.1;
    int noise_dim = 16;
    int obs_len = 8;
    int pred_len = 12;
    double threshold = 10.0;  // meters
    bool use_memory = true;
    TemporalKind temporal_kind = TemporalKind::transformer;
    bool use_encoder2 = true;
    bool deterministic = false;
    bool teacher_forcing = false;

    // Deterministic models drop the noise columns entirely.
    int effective_noise_dim() const { return deterministic ? 0 : noise_dim; }
    void validate() const;

    friend bool operator==(const StarConfig&, const StarConfig&) = default;
};

/// Flat `key = value` text, one entry per line, '#' comments.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::istream& in);
KeyValues read_key_values(const std::string& path);
void write_key_values(std::ostream& out, const KeyValues& values);

KeyValues to_key_values(const StarConfig& config);
/// Applies the StarConfig keys present in `values`; other keys are ignored.
void apply_key_values(StarConfig& config, const KeyValues& values);

bool parse_bool(const std::string& key, const std::string& text);
int parse_int(const std::string& key, const std::string& text);
double parse_double(const std::string& key, const std::string& text);
// Shortest text that reads back to exactly `v`.
std::string format_double(double v);

} // namespace star
