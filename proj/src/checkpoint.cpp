#include "star/model/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "star/errors.hpp"

namespace star {

void write_checkpoint(std::ostream& out, const StarConfig& config, const StarParams& params,
                      const KeyValues& metadata) {
    out << "star-checkpoint " << kCheckpointVersion << '\n';
    for (const auto& [k, v] : to_key_values(config)) out << "config " << k << ' ' << v << '\n';
    for (const auto& [k, v] : metadata) {
        if (k.find_first_of(" \t\n") != std::string::npos || v.find('\n') != std::string::npos)
            throw ConfigError("checkpoint metadata '" + k + "' must be a single token key and a one-line value");
        out << "meta " << k << ' ' << v << '\n';
    }
    params.for_each([&](const std::string& name, const Tensor& t) {
        out << "param " << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
        const Matrix& m = t.value();
        for (Index r = 0; r < m.rows(); ++r) {
            for (Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << format_double(m(r, c));
            out << '\n';
        }
    });
    out << "end\n";
}

void save_checkpoint(const std::filesystem::path& path, const StarConfig& config, const StarParams& params,
                     const KeyValues& metadata) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    write_checkpoint(out, config, params, metadata);
    if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(std::istream& in) {
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != "star-checkpoint")
        throw DataError("not a checkpoint file (missing 'star-checkpoint' header)");
    if (version != kCheckpointVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version));

    KeyValues config_values, metadata;
    std::map<std::string, Matrix> tensors;
    std::string tag;
    bool ended = false;
    while (in >> tag) {
        if (tag == "end") {
            ended = true;
            break;
        }
        if (tag == "config" || tag == "meta") {
            std::string key, value;
            in >> key;
            std::getline(in, value);
            const auto b = value.find_first_not_of(' ');
            value = b == std::string::npos ? std::string() : value.substr(b);
            (tag == "config" ? config_values : metadata)[key] = value;
        } else if (tag == "param") {
            std::string name;
            Index rows = 0, cols = 0;
            if (!(in >> name >> rows >> cols) || rows < 0 || cols < 0)
                throw DataError("checkpoint: malformed param header");
            Matrix m(rows, cols);
            for (Index i = 0; i < m.size(); ++i) {
                std::string text;
                if (!(in >> text)) throw DataError("checkpoint: truncated values for " + name);
                m.data()[i] = parse_double(name, text);
            }
            if (!tensors.emplace(name, std::move(m)).second) throw DataError("checkpoint: duplicate param " + name);
        } else {
            throw DataError("checkpoint: unexpected record '" + tag + "'");
        }
    }
    if (!ended) throw DataError("checkpoint: missing 'end' record");

    Checkpoint ck;
    ck.metadata = std::move(metadata);
    apply_key_values(ck.config, config_values);
    ck.config.validate();
    Rng rng(0);
    ck.params = init_params(ck.config, rng);
    std::size_t matched = 0;
    ck.params.for_each([&](const std::string& name, const Tensor& t) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw ConfigError("checkpoint lacks parameter " + name);
        if (it->second.rows() != t.rows() || it->second.cols() != t.cols())
            throw ConfigError("checkpoint parameter " + name + " has shape " + std::to_string(it->second.rows()) +
                              "x" + std::to_string(it->second.cols()) + ", expected " + t.shape_str());
        Tensor(t).mutable_value() = it->second;
        ++matched;
    });
    if (matched != tensors.size()) {
        const auto names = ck.params.names();
        for (const auto& [name, m] : tensors)
            if (std::find(names.begin(), names.end(), name) == names.end())
                throw ConfigError("checkpoint parameter " + name + " does not belong to the stored configuration");
    }
    return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    return read_checkpoint(in);
}

std::vector<std::string> architecture_mismatches(const StarConfig& a, const StarConfig& b) {
    std::vector<std::string> out;
    auto check = [&](const char* name, bool same) {
        if (!same) out.emplace_back(name);
    };
    check("d_model", a.d_model == b.d_model);
    check("heads", a.heads == b.heads);
    check("spatial_heads", a.spatial_heads == b.spatial_heads);
    check("ff_hidden", a.ff_hidden == b.ff_hidden);
    check("noise_dim", a.effective_noise_dim() == b.effective_noise_dim());
    check("temporal_kind", a.temporal_kind == b.temporal_kind);
    check("use_encoder2", a.use_encoder2 == b.use_encoder2);
    check("use_memory", a.use_memory == b.use_memory);
    check("obs_len", a.obs_len == b.obs_len);
    check("pred_len", a.pred_len == b.pred_len);
    return out;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const StarConfig& expected) {
    Checkpoint ck = load_checkpoint(path);
    const auto diff = architecture_mismatches(ck.config, expected);
    if (!diff.empty()) {
        std::string list;
        for (const auto& d : diff) list += (list.empty() ? "" : ", ") + d;
        throw ConfigError("checkpoint " + path.string() + " does not match the configuration: " + list);
    }
    return ck;
}

} // namespace star
