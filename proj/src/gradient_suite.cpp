#include "star/model/gradient_suite.hpp"

#include <functional>

#include "star/data/synthetic.hpp"
#include "star/model/star.hpp"
#include "star/trainer/trainer.hpp"

namespace star {

namespace {

using LossFn = std::function<Tensor()>;

struct Suite {
    Rng rng;
    GradCheckOptions options;
    std::vector<GradientSuiteEntry> entries;

    Tensor input(Index rows, Index cols) { return Tensor(normal_matrix(rows, cols, rng), true); }

    void check(const std::string& component, const std::function<Tensor()>& output, std::vector<Tensor> inputs,
               std::vector<std::string> names = {}) {
        const Tensor probe = [&] {
            NoGradGuard guard;
            return output();
        }();
        // Random weights give every output entry a distinct gradient.
        const Matrix weights = normal_matrix(probe.rows(), probe.cols(), rng);
        LossFn loss = [&] { return sum(hadamard(output(), Tensor(weights))); };
        check_loss(component, loss, std::move(inputs), std::move(names));
    }

    void check_loss(const std::string& component, const LossFn& loss, std::vector<Tensor> inputs,
                    std::vector<std::string> names) {
        if (names.empty())
            for (std::size_t k = 0; k < inputs.size(); ++k) names.push_back("input" + std::to_string(k));
        entries.push_back({component, gradient_check<double>(loss, std::move(inputs), names, options)});
    }
};

template <typename P>
void collect(const P& params, const std::string& prefix, std::vector<Tensor>& inputs, std::vector<std::string>& names) {
    params.for_each(prefix, [&](const std::string& n, const Tensor& t) {
        inputs.push_back(t);
        names.push_back(n);
    });
}

StarConfig suite_config() {
    StarConfig c;
    c.d_model = 8;
    c.heads = 2;
    c.spatial_heads = 2;
    c.ff_hidden = 6;
    c.noise_dim = 3;
    c.dropout = 0.0;
    c.pred_len = 2;
    return c;
}

TrajectoryScene toy_scene(const StarConfig& c, Rng& rng) {
    SyntheticSpec spec;
    spec.obs_len = c.obs_len;
    spec.pred_len = c.pred_len;
    spec.arena = 2.0;
    const int frames = c.obs_len + c.pred_len;
    const SyntheticCrowd crowd = simulate_crowd(3, frames, spec, rng);
    TrajectoryScene s;
    s.dataset = "GRADCHECK";
    s.obs_len = c.obs_len;
    s.pred_len = c.pred_len;
    s.x.resize(3, frames);
    s.y.resize(3, frames);
    s.present = Mask::Constant(3, frames, true);
    s.target.assign(3, true);
    for (int i = 0; i < 3; ++i) {
        s.ids.push_back(i + 1);
        s.x.row(i) = crowd.tracks[static_cast<std::size_t>(i)].col(0).transpose();
        s.y.row(i) = crowd.tracks[static_cast<std::size_t>(i)].col(1).transpose();
    }
    return preprocess(s);
}

void primitives(Suite& s) {
    const Tensor a = s.input(3, 4), b = s.input(4, 2), c = s.input(3, 4), row = s.input(1, 4);
    const Tensor positive = Tensor(Matrix(normal_matrix(3, 4, s.rng).cwiseAbs().array() + 0.5), true);
    Mask allowed = Mask::Constant(3, 4, true);
    allowed(0, 1) = allowed(2, 3) = allowed(1, 0) = false;
    const Tensor gain = s.input(1, 4), bias = s.input(1, 4), w = s.input(4, 3), wb = s.input(1, 3);

    s.check("matmul", [=] { return matmul(a, b); }, {a, b});
    s.check("transpose", [=] { return transpose(a); }, {a});
    s.check("add_broadcast", [=] { return add(a, row); }, {a, row});
    s.check("subtract", [=] { return subtract(a, c); }, {a, c});
    s.check("hadamard", [=] { return hadamard(a, c); }, {a, c});
    s.check("scale", [=] { return scale(a, 1.7); }, {a});
    s.check("relu", [=] { return relu(positive - Tensor(Matrix::Constant(3, 4, 1.0))); }, {positive});
    s.check("sigmoid", [=] { return sigmoid(a); }, {a});
    s.check("tanh", [=] { return tanh(a); }, {a});
    s.check("softmax", [=] { return softmax(a); }, {a});
    s.check("masked_softmax", [=] { return masked_softmax(a, allowed); }, {a});
    s.check("layer_norm", [=] { return layer_norm(a, gain, bias); }, {a, gain, bias});
    s.check("linear", [=] { return linear(a, w, wb); }, {a, w, wb});
    s.check("concat_cols", [=] { return concat_cols({a, c}); }, {a, c});
    s.check("concat_rows", [=] { return concat_rows({a, c}); }, {a, c});
    s.check("slice_cols", [=] { return slice_cols(a, 1, 2); }, {a});
    s.check("gather_rows", [=] { return gather_rows(a, {2, 0, 2}); }, {a});
    s.check_loss("sum_squares", [=] { return sum_squares(a); }, {a}, {"a"});
    s.check_loss("mean", [=] { return mean(hadamard(a, c)); }, {a, c}, {"a", "c"});
}

void layers(Suite& s) {
    const Tensor q = s.input(6, 4), k = s.input(6, 4), v = s.input(6, 4);
    AttentionPlan plan{6, {}};
    Mask partial = Mask::Constant(3, 3, true);
    partial(0, 2) = partial(1, 0) = false;
    plan.groups.push_back({{0, 2, 4}, partial});
    plan.groups.push_back({{1, 5}, Mask::Constant(2, 2, true)});
    s.check("grouped_attention", [=] { return grouped_attention(q, k, v, plan, 2); }, {q, k, v}, {"q", "k", "v"});

    const AttentionParams mh = make_attention(4, 2, s.rng);
    const Tensor h = s.input(6, 4);
    std::vector<Tensor> inputs{h};
    std::vector<std::string> names{"h"};
    collect(mh, "attention", inputs, names);
    s.check("multi_head", [=] { return multi_head(h, mh, plan); }, inputs, names);

    std::vector<PositionRecord> pts;
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 5; ++i) pts.push_back({i, u(s.rng), u(s.rng)});
    const InteractionGraph graph = build_graph(pts, 2.0);
    const TGConvParams tg = make_tgconv(4, 2, s.rng);
    const Tensor g = s.input(5, 4);
    inputs = {g};
    names = {"h"};
    collect(tg, "tgconv", inputs, names);
    s.check("tgconv", [=] { return tgconv(g, graph, tg); }, inputs, names);

    const TemporalBlockParams tb = make_temporal_block(4, 2, 6, s.rng);
    Mask presence = Mask::Constant(2, 3, true);
    presence(1, 0) = false;
    const Tensor t = s.input(5, 4);
    inputs = {t};
    names = {"h"};
    collect(tb, "temporal_block", inputs, names);
    s.check("temporal_block", [=] { return temporal_block(t, presence, tb); }, inputs, names);

    const RecurrentParams lstm = make_recurrent(4, 3, s.rng);
    const NodeLayout layout(presence);
    inputs = {t};
    names = {"x"};
    collect(lstm, "lstm", inputs, names);
    s.check("recurrent", [=] { return recurrent_encode(t, layout, lstm); }, inputs, names);
}

void encoders(Suite& s) {
    const StarConfig c = suite_config();
    const StarParams p = init_params(c, s.rng);
    Mask presence = Mask::Constant(3, 4, true);
    presence(2, 0) = false;
    const auto layout = std::make_shared<NodeLayout>(presence);
    auto graphs = std::make_shared<std::vector<InteractionGraph>>();
    const std::vector<int> scene_of{0, 0, 0};
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int step = 0; step < 4; ++step) {
        std::vector<int> peds;
        std::vector<Vec2> positions;
        for (int ped = 0; ped < 3; ++ped)
            if (presence(ped, step)) {
                peds.push_back(ped);
                positions.emplace_back(u(s.rng), u(s.rng));
            }
        graphs->push_back(build_step_graph(peds, positions, scene_of, 2.0));
    }
    const Index n = layout->size();
    const Tensor hs = s.input(n, c.d_model), ht = s.input(n, c.d_model);

    std::vector<Tensor> inputs{hs, ht};
    std::vector<std::string> names{"h_spatial", "h_temporal"};
    collect(p.spatial1, "encoder1.spatial", inputs, names);
    collect(p.temporal1, "encoder1.temporal", inputs, names);
    collect(p.fusion, "encoder1.fusion", inputs, names);
    s.check(
        "encoder1",
        [=] {
            const EncoderContext ctx{*layout, *graphs, scene_of};
            return encoder1(hs, ht, ctx, GraphMemory(), p, c);
        },
        inputs, names);

    inputs = {hs};
    names = {"h"};
    collect(p.spatial2, "encoder2.spatial", inputs, names);
    collect(p.temporal2, "encoder2.temporal", inputs, names);
    s.check(
        "encoder2",
        [=] {
            const EncoderContext ctx{*layout, *graphs, scene_of};
            return encoder2(hs, ctx, p, c, nullptr);
        },
        inputs, names);
}

void full_model(Suite& s) {
    StarConfig c = suite_config();
    const StarParams p = init_params(c, s.rng);
    const Batch batch = make_batch(toy_scene(c, s.rng));
    const std::uint64_t noise_seed = s.rng();
    GradCheckOptions sampled = s.options;
    sampled.max_entries_per_input = 6;
    LossFn loss = [&] {
        Rng noise(noise_seed);
        return rollout_loss(batch, p, c, noise, false);
    };
    s.entries.push_back({"rollout_loss", gradient_check<double>(loss, p.tensors(), p.names(), sampled)});
}

} // namespace

std::vector<GradientSuiteEntry> run_gradient_suite(std::uint64_t seed, double corrupt_analytic) {
    Suite s{Rng(seed), {}, {}};
    s.options.seed = seed;
    s.options.corrupt_analytic = corrupt_analytic;
    primitives(s);
    layers(s);
    encoders(s);
    full_model(s);
    return s.entries;
}

} // namespace star
