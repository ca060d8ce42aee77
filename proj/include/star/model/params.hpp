#pragma once

#include <string>
#include <utility>
#include <vector>

#include "star/attention/attention.hpp"
#include "star/graph/graph.hpp"
#include "star/model/config.hpp"
#include "star/model/recurrent.hpp"

namespace star {

/// Either a temporal transformer block or the LSTM that replaces it.
struct TemporalEncoderParams {
    TemporalKind kind = TemporalKind::transformer;
    TemporalBlockParams transformer;
    RecurrentParams recurrent;

    template <typename F>
    void for_each(const std::string& prefix, F&& f) const {
        if (kind == TemporalKind::transformer)
            transformer.for_each(prefix + ".transformer", f);
        else
            recurrent.for_each(prefix + ".lstm", f);
    }
};

struct StarParams {
    LinearParams embed_spatial;
    LinearParams embed_temporal;
    TGConvParams spatial1;
    TemporalEncoderParams temporal1;
    LinearParams fusion;      // 2·d_model -> d_model
    bool has_encoder2 = true;
    TGConvParams spatial2;
    TemporalEncoderParams temporal2;
    LinearParams decoder;     // d_model + noise_dim -> 2

    template <typename F>
    void for_each(F&& f) const {
        embed_spatial.for_each("embed_spatial", f);
        embed_temporal.for_each("embed_temporal", f);
        spatial1.for_each("encoder1.spatial", f);
        temporal1.for_each("encoder1.temporal", f);
        fusion.for_each("encoder1.fusion", f);
        if (has_encoder2) {
            spatial2.for_each("encoder2.spatial", f);
            temporal2.for_each("encoder2.temporal", f);
        }
        decoder.for_each("decoder", f);
    }

    std::vector<std::pair<std::string, Tensor>> named() const;
    std::vector<Tensor> tensors() const;
    std::vector<std::string> names() const;
    std::size_t parameter_count() const;
    void zero_grad();
    /// Deep copy with fresh leaf tensors.
    StarParams clone() const;
};

StarParams init_params(const StarConfig& config, Rng& rng);

} // namespace star
