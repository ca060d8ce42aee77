#include "star/trainer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "star/errors.hpp"
#include "star/numerics/adam.hpp"

namespace star {

void TrainSpec::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
    if (!(final_lr_fraction > 0.0) || final_lr_fraction > 1.0)
        throw ConfigError("final_lr_fraction must be in (0, 1]");
    if (batch_pedestrians < 1) throw ConfigError("batch_pedestrians must be positive");
    if (batch_scenes < 1) throw ConfigError("batch_scenes must be positive");
    if (epochs < 1) throw ConfigError("epochs must be positive");
    if (max_steps < 0) throw ConfigError("max_steps must be non-negative");
    if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be non-negative");
    if (train_stride < 1 || test_stride < 1) throw ConfigError("strides must be positive");
}

KeyValues to_key_values(const TrainSpec& s) {
    return {
        {"learning_rate", format_double(s.learning_rate)},
        {"final_lr_fraction", format_double(s.final_lr_fraction)},
        {"batch_pedestrians", std::to_string(s.batch_pedestrians)},
        {"batch_scenes", std::to_string(s.batch_scenes)},
        {"epochs", std::to_string(s.epochs)},
        {"max_steps", std::to_string(s.max_steps)},
        {"seed", std::to_string(s.seed)},
        {"checkpoint_every", std::to_string(s.checkpoint_every)},
        {"augment", s.augment ? "true" : "false"},
        {"train_stride", std::to_string(s.train_stride)},
        {"test_stride", std::to_string(s.test_stride)},
    };
}

void apply_key_values(TrainSpec& s, const KeyValues& values) {
    for (const auto& [k, v] : values) {
        if (k == "learning_rate") s.learning_rate = parse_double(k, v);
        else if (k == "final_lr_fraction") s.final_lr_fraction = parse_double(k, v);
        else if (k == "batch_pedestrians") s.batch_pedestrians = parse_int(k, v);
        else if (k == "batch_scenes") s.batch_scenes = parse_int(k, v);
        else if (k == "epochs") s.epochs = parse_int(k, v);
        else if (k == "max_steps") s.max_steps = parse_int(k, v);
        else if (k == "seed") {
            const int seed = parse_int(k, v);
            if (seed < 0) throw ConfigError("seed must be non-negative");
            s.seed = static_cast<std::uint64_t>(seed);
        } else if (k == "checkpoint_every") s.checkpoint_every = parse_int(k, v);
        else if (k == "augment") s.augment = parse_bool(k, v);
        else if (k == "train_stride") s.train_stride = parse_int(k, v);
        else if (k == "test_stride") s.test_stride = parse_int(k, v);
    }
}

std::vector<Matrix> truth_offsets(const Batch& batch, std::span<const int> targets) {
    std::vector<Matrix> out;
    for (int k = 0; k < batch.pred_len; ++k) {
        Matrix m(static_cast<Index>(targets.size()), 2);
        for (std::size_t i = 0; i < targets.size(); ++i) {
            const int p = targets[i];
            if (!batch.present(p, batch.obs_len + k))
                throw DataError("truth_offsets: target " + std::to_string(batch.ids[static_cast<std::size_t>(p)]) +
                                " has no ground truth at predicted step " + std::to_string(k + 1));
            m.row(static_cast<Index>(i)) = (batch.position(p, batch.obs_len + k) - batch.reference(p)).transpose();
        }
        out.push_back(std::move(m));
    }
    return out;
}

LossTerms rollout_loss_terms(const Batch& batch, const StarParams& params, const StarConfig& config, Rng& rng,
                             bool training) {
    RolloutOptions options;
    options.training = training;
    const RolloutResult result = rollout(batch, params, config, rng, options);
    const std::vector<Matrix> truth = truth_offsets(batch, result.targets);
    std::vector<Tensor> terms;
    for (std::size_t k = 0; k < truth.size(); ++k) terms.push_back(sum_squares(result.offsets[k] - Tensor(truth[k])));
    LossTerms out;
    out.sum = terms.front();
    for (std::size_t k = 1; k < terms.size(); ++k) out.sum = out.sum + terms[k];
    out.count = static_cast<Index>(result.targets.size()) * static_cast<Index>(truth.size());
    return out;
}

Tensor rollout_loss(const Batch& batch, const StarParams& params, const StarConfig& config, Rng& rng,
                    bool training) {
    LossTerms t = rollout_loss_terms(batch, params, config, rng, training);
    return t.sum * (1.0 / static_cast<double>(t.count));
}

TrainResult train(const TrainSpec& spec, const StarConfig& config, std::span<const TrajectoryScene> scenes,
                  const TrainHooks& hooks) {
    Rng init_rng(spec.seed);
    return train(spec, config, scenes, init_params(config, init_rng), hooks);
}

TrainResult train(const TrainSpec& spec, const StarConfig& config, std::span<const TrajectoryScene> scenes,
                  StarParams initial, const TrainHooks& hooks) {
    spec.validate();
    config.validate();
    if (scenes.empty()) throw DataError("train: the training set is empty");
    for (const TrajectoryScene& s : scenes)
        if (s.obs_len != config.obs_len || s.pred_len != config.pred_len)
            throw ConfigError("train: scene window does not match the configuration");
    if (!hooks.checkpoint_dir.empty()) std::filesystem::create_directories(hooks.checkpoint_dir);

    TrainResult result;
    result.params = std::move(initial);
    std::vector<Tensor> tensors = result.params.tensors();
    AdamState adam;
    adam.learning_rate = spec.learning_rate;
    Rng rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);

    auto save = [&](const std::string& label, int epoch, long step) {
        if (hooks.checkpoint_dir.empty()) return;
        const auto path = hooks.checkpoint_dir / ("checkpoint_" + label + ".txt");
        KeyValues meta = hooks.metadata;
        meta["seed"] = std::to_string(spec.seed);
        meta["epoch"] = std::to_string(epoch);
        meta["step"] = std::to_string(step);
        save_checkpoint(path, config, result.params, meta);
        result.checkpoints.push_back(path);
    };

    const std::size_t chunk_size = static_cast<std::size_t>(spec.batch_scenes);
    const long per_epoch = static_cast<long>((scenes.size() + chunk_size - 1) / chunk_size);
    long planned = per_epoch * spec.epochs;
    if (spec.max_steps > 0) planned = std::min(planned, spec.max_steps);

    std::vector<std::size_t> order(scenes.size());
    long step = 0;
    bool done = false;
    for (int epoch = 1; epoch <= spec.epochs && !done; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_total = 0.0;
        int epoch_steps = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(spec.batch_scenes)) {
            const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(spec.batch_scenes));
            std::vector<TrajectoryScene> chunk;
            for (std::size_t i = begin; i < end; ++i)
                chunk.push_back(spec.augment ? augment_rotation(scenes[order[i]], rng) : scenes[order[i]]);
            const std::vector<Batch> batches = pack_batches(chunk, spec.batch_pedestrians);

            Index total = 0;
            for (const Batch& b : batches) total += static_cast<Index>(b.target_indices().size()) * b.pred_len;
            double loss_value = 0.0;
            for (const Batch& b : batches) {
                LossTerms terms = rollout_loss_terms(b, result.params, config, rng, true);
                Tensor loss = terms.sum * (1.0 / static_cast<double>(total));
                if (!std::isfinite(loss.item()))
                    throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                       std::to_string(step + 1));
                loss_value += loss.item();
                backward(loss);
            }
            const double progress = planned > 1 ? static_cast<double>(step) / static_cast<double>(planned - 1) : 0.0;
            adam.learning_rate = spec.learning_rate * (1.0 - (1.0 - spec.final_lr_fraction) * progress);
            adam_step(tensors, adam);
            result.params.zero_grad();
            ++step;
            const StepRecord record{step, epoch, loss_value};
            result.steps.push_back(record);
            if (hooks.on_step) hooks.on_step(record);
            epoch_total += loss_value;
            ++epoch_steps;
            if (spec.max_steps > 0 && step >= spec.max_steps) {
                done = true;
                break;
            }
        }
        result.epoch_loss.push_back(epoch_total / epoch_steps);
        if (hooks.log)
            *hooks.log << "epoch " << epoch << " steps " << step << " loss " << format_double(result.epoch_loss.back())
                       << '\n';
        if (spec.checkpoint_every > 0 && epoch % spec.checkpoint_every == 0 && !done)
            save("epoch" + std::to_string(epoch), epoch, step);
    }
    save("final", static_cast<int>(result.epoch_loss.size()), step);
    return result;
}

Trajectories predicted_positions(const Batch& batch, const RolloutResult& result) {
    auto [x, y] = result.local_positions(batch);
    return {std::move(x), std::move(y)};
}

Trajectories true_positions(const Batch& batch, std::span<const int> targets) {
    const Index n = static_cast<Index>(targets.size());
    Trajectories t{Eigen::MatrixXd(n, batch.pred_len), Eigen::MatrixXd(n, batch.pred_len)};
    for (Index i = 0; i < n; ++i) {
        const int p = targets[static_cast<std::size_t>(i)];
        t.x.row(i) = batch.x.row(p).segment(batch.obs_len, batch.pred_len);
        t.y.row(i) = batch.y.row(p).segment(batch.obs_len, batch.pred_len);
    }
    return t;
}

EvalResult evaluate(const StarParams& params, const StarConfig& config, std::span<const TrajectoryScene> scenes,
                    const EvalOptions& options) {
    if (options.samples < 1) throw ConfigError("evaluate: samples must be at least 1");
    if (scenes.empty()) throw DataError("evaluate: no scenes");
    NoGradGuard no_grad;
    EvalResult out;
    out.samples = config.deterministic ? 1 : options.samples;
    Rng rng(options.seed);
    double ade_total = 0.0, fde_total = 0.0;
    for (std::size_t s = 0; s < scenes.size(); ++s) {
        const Batch batch = make_batch(scenes[s]);
        const std::vector<int> targets = batch.target_indices();
        const Trajectories truth = true_positions(batch, targets);
        Mask valid(static_cast<Index>(targets.size()), batch.pred_len);
        for (std::size_t i = 0; i < targets.size(); ++i)
            valid.row(static_cast<Index>(i)) = batch.present.row(targets[i]).segment(batch.obs_len, batch.pred_len);
        std::vector<SampleMetrics> samples;
        for (int k = 0; k < out.samples; ++k) {
            const RolloutResult r = rollout(batch, params, config, rng);
            const Trajectories pred = predicted_positions(batch, r);
            samples.push_back({ade(pred, truth, valid, options.ade_squared), fde(pred, truth, valid)});
        }
        const BestOfK best = best_of_k(samples, options.pairing);
        const int n = static_cast<int>(targets.size());
        out.scenes.push_back({s, n, best});
        out.targets += n;
        ade_total += best.ade * n;
        fde_total += best.fde * n;
    }
    out.ade = ade_total / out.targets;
    out.fde = fde_total / out.targets;
    return out;
}

StarConfig variant_config(std::string_view variant, StarConfig base) {
    base.temporal_kind = TemporalKind::transformer;
    base.use_memory = true;
    base.use_encoder2 = true;
    if (variant == "full") return base;
    if (variant == "no_memory") {
        base.use_memory = false;
        return base;
    }
    if (variant == "lstm_temporal") {
        base.temporal_kind = TemporalKind::recurrent;
        base.use_memory = false;
        return base;
    }
    if (variant == "single_encoder") {
        base.use_encoder2 = false;
        return base;
    }
    throw ConfigError("unknown variant '" + std::string(variant) +
                      "' (expected full, no_memory, lstm_temporal or single_encoder)");
}

AblationRun run_ablation(std::string_view variant, const TrainSpec& spec, const StarConfig& base,
                         std::span<const TrajectoryScene> train_scenes, std::span<const TrajectoryScene> test_scenes,
                         const std::string& dataset, const EvalOptions& eval) {
    const StarConfig config = variant_config(variant, base);
    AblationRun run;
    run.training = train(spec, config, train_scenes);
    EvalOptions options = eval;
    options.seed = spec.seed;
    run.report = make_report(std::string(variant), dataset, spec.seed,
                             evaluate(run.training.params, config, test_scenes, options));
    return run;
}

} // namespace star
