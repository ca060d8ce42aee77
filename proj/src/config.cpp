#include "star/model/config.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "star/errors.hpp"

namespace star {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string to_string(TemporalKind kind) {
    return kind == TemporalKind::transformer ? "transformer" : "recurrent";
}

TemporalKind parse_temporal_kind(const std::string& text) {
    if (text == "transformer") return TemporalKind::transformer;
    if (text == "recurrent" || text == "lstm") return TemporalKind::recurrent;
    throw ConfigError("temporal_kind must be 'transformer' or 'recurrent', got '" + text + "'");
}

void StarConfig::validate() const {
    if (d_model < 2 || d_model % 2 != 0) throw ConfigError("d_model must be even and positive");
    if (heads < 1 || d_model % heads != 0) throw ConfigError("heads must divide d_model");
    if (spatial_heads < 1 || d_model % spatial_heads != 0) throw ConfigError("spatial_heads must divide d_model");
    if (ff_hidden < 1) throw ConfigError("ff_hidden must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
    if (noise_dim < 0) throw ConfigError("noise_dim must be non-negative");
    if (obs_len < 2) throw ConfigError("obs_len must be at least 2");
    if (pred_len < 1) throw ConfigError("pred_len must be at least 1");
    if (!(threshold >= 0.0)) throw ConfigError("threshold must be non-negative");
}

KeyValues parse_key_values(std::istream& in) {
    KeyValues values;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected `key = value`");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        values[key] = trim(line.substr(eq + 1));
    }
    return values;
}

KeyValues read_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse_key_values(in);
}

void write_key_values(std::ostream& out, const KeyValues& values) {
    for (const auto& [k, v] : values) out << k << " = " << v << '\n';
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ConfigError(key + ": expected a boolean, got '" + text + "'");
}

int parse_int(const std::string& key, const std::string& text) {
    int v = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw ConfigError(key + ": expected an integer, got '" + text + "'");
    return v;
}

double parse_double(const std::string& key, const std::string& text) {
    double v = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw ConfigError(key + ": expected a number, got '" + text + "'");
    return v;
}

KeyValues to_key_values(const StarConfig& c) {
    return {
        {"d_model", std::to_string(c.d_model)},
        {"heads", std::to_string(c.heads)},
        {"spatial_heads", std::to_string(c.spatial_heads)},
        {"ff_hidden", std::to_string(c.ff_hidden)},
        {"dropout", format_double(c.dropout)},
        {"noise_dim", std::to_string(c.noise_dim)},
        {"obs_len", std::to_string(c.obs_len)},
        {"pred_len", std::to_string(c.pred_len)},
        {"threshold", format_double(c.threshold)},
        {"use_memory", c.use_memory ? "true" : "false"},
        {"temporal_kind", to_string(c.temporal_kind)},
        {"use_encoder2", c.use_encoder2 ? "true" : "false"},
        {"deterministic", c.deterministic ? "true" : "false"},
        {"teacher_forcing", c.teacher_forcing ? "true" : "false"},
    };
}

void apply_key_values(StarConfig& c, const KeyValues& values) {
    for (const auto& [k, v] : values) {
        if (k == "d_model") c.d_model = parse_int(k, v);
        else if (k == "heads") c.heads = parse_int(k, v);
        else if (k == "spatial_heads") c.spatial_heads = parse_int(k, v);
        else if (k == "ff_hidden") c.ff_hidden = parse_int(k, v);
        else if (k == "dropout") c.dropout = parse_double(k, v);
        else if (k == "noise_dim") c.noise_dim = parse_int(k, v);
        else if (k == "obs_len") c.obs_len = parse_int(k, v);
        else if (k == "pred_len") c.pred_len = parse_int(k, v);
        else if (k == "threshold") c.threshold = parse_double(k, v);
        else if (k == "use_memory") c.use_memory = parse_bool(k, v);
        else if (k == "temporal_kind") c.temporal_kind = parse_temporal_kind(v);
        else if (k == "use_encoder2") c.use_encoder2 = parse_bool(k, v);
        else if (k == "deterministic") c.deterministic = parse_bool(k, v);
        else if (k == "teacher_forcing") c.teacher_forcing = parse_bool(k, v);
    }
}

} // namespace star
