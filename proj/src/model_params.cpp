#include "star/model/params.hpp"

namespace star {

namespace {

TemporalEncoderParams make_temporal_encoder(const StarConfig& c, Rng& rng) {
    TemporalEncoderParams p;
    p.kind = c.temporal_kind;
    if (c.temporal_kind == TemporalKind::transformer)
        p.transformer = make_temporal_block(c.d_model, c.heads, c.ff_hidden, rng);
    else
        p.recurrent = make_recurrent(c.d_model, c.d_model, rng);
    return p;
}

} // namespace

StarParams init_params(const StarConfig& c, Rng& rng) {
    c.validate();
    StarParams p;
    p.embed_spatial = make_linear(2, c.d_model, rng);
    p.embed_temporal = make_linear(2, c.d_model, rng);
    p.spatial1 = make_tgconv(c.d_model, c.spatial_heads, rng);
    p.temporal1 = make_temporal_encoder(c, rng);
    p.fusion = make_linear(2 * c.d_model, c.d_model, rng);
    p.has_encoder2 = c.use_encoder2;
    if (c.use_encoder2) {
        p.spatial2 = make_tgconv(c.d_model, c.spatial_heads, rng);
        p.temporal2 = make_temporal_encoder(c, rng);
    }
    p.decoder = make_linear(c.d_model + c.effective_noise_dim(), 2, rng);
    return p;
}

std::vector<std::pair<std::string, Tensor>> StarParams::named() const {
    std::vector<std::pair<std::string, Tensor>> out;
    for_each([&](const std::string& name, const Tensor& t) { out.emplace_back(name, t); });
    return out;
}

std::vector<Tensor> StarParams::tensors() const {
    std::vector<Tensor> out;
    for_each([&](const std::string&, const Tensor& t) { out.push_back(t); });
    return out;
}

std::vector<std::string> StarParams::names() const {
    std::vector<std::string> out;
    for_each([&](const std::string& name, const Tensor&) { out.push_back(name); });
    return out;
}

std::size_t StarParams::parameter_count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const Tensor& t) { n += static_cast<std::size_t>(t.size()); });
    return n;
}

void StarParams::zero_grad() {
    for_each([](const std::string&, const Tensor& t) { Tensor(t).zero_grad(); });
}

StarParams StarParams::clone() const {
    StarParams copy = *this;
    // Rebind every handle of the copy to a fresh leaf with the same values.
    auto rebind = [](Tensor& t) { t = Tensor(t.value(), t.requires_grad()); };
    auto linear = [&](LinearParams& l) { rebind(l.weight); rebind(l.bias); };
    auto norm = [&](LayerNormParams& n) { rebind(n.gain); rebind(n.bias); };
    auto tg = [&](TGConvParams& g) {
        linear(g.query); linear(g.key); linear(g.value); linear(g.out);
        norm(g.norm1); norm(g.norm2);
    };
    auto temporal = [&](TemporalEncoderParams& t) {
        if (t.kind == TemporalKind::transformer) {
            auto& b = t.transformer;
            linear(b.attention.query); linear(b.attention.key);
            linear(b.attention.value); linear(b.attention.output);
            linear(b.ff_hidden); linear(b.ff_output);
            norm(b.norm1); norm(b.norm2);
        } else {
            linear(t.recurrent.input);
            rebind(t.recurrent.recurrent);
        }
    };
    linear(copy.embed_spatial);
    linear(copy.embed_temporal);
    tg(copy.spatial1);
    temporal(copy.temporal1);
    linear(copy.fusion);
    if (copy.has_encoder2) {
        tg(copy.spatial2);
        temporal(copy.temporal2);
    }
    linear(copy.decoder);
    return copy;
}

} // namespace star
