#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "star/data/batch.hpp"
#include "star/model/checkpoint.hpp"
#include "star/model/star.hpp"
#include "star/trainer/metrics.hpp"

namespace star {

struct TrainSpec {
    double learning_rate = 0.0015;
    double final_lr_fraction = 1.0;  // linear decay to learning_rate * fraction over the run; 1: constant
    int batch_pedestrians = 256;   // packing budget per forward pass
    int batch_scenes = 16;         // scenes per optimizer step
    int epochs = 300;
    long max_steps = 0;            // 0: no cap
    std::uint64_t seed = 1;
    int checkpoint_every = 0;      // epochs between checkpoints; 0: final only
    bool augment = true;           // random rotation of training scenes
    int train_stride = 1;
    int test_stride = 20;

    void validate() const;
    bool operator==(const TrainSpec&) const = default;
};

KeyValues to_key_values(const TrainSpec& spec);
void apply_key_values(TrainSpec& spec, const KeyValues& values);

/// Ground-truth offsets from each target's reference, one targets × 2 matrix per predicted step.
std::vector<Matrix> truth_offsets(const Batch& batch, std::span<const int> targets);

/// Sum over targets and predicted steps of the squared Euclidean error, and
/// the number of summed entries.
struct LossTerms {
    Tensor sum;
    Index count = 0;
};
LossTerms rollout_loss_terms(const Batch& batch, const StarParams& params, const StarConfig& config, Rng& rng,
                             bool training);

/// Mean squared displacement over every (target, step) of the batch.
Tensor rollout_loss(const Batch& batch, const StarParams& params, const StarConfig& config, Rng& rng,
                    bool training);

struct StepRecord {
    long step = 0;
    int epoch = 0;
    double loss = 0.0;
};

struct TrainResult {
    StarParams params;
    std::vector<double> epoch_loss;    // mean step loss per epoch
    std::vector<StepRecord> steps;
    std::vector<std::filesystem::path> checkpoints;
};

struct TrainHooks {
    std::filesystem::path checkpoint_dir;   // empty: no files written
    std::ostream* log = nullptr;            // one line per epoch
    std::function<void(const StepRecord&)> on_step;
    KeyValues metadata;                     // added to every checkpoint
};

/// Adam over the rollout loss. Every optimizer step packs `batch_scenes`
/// scenes into pedestrian-budgeted batches and accumulates their gradients.
/// Scenes are expected preprocessed. Throws NumericError on a non-finite loss.
TrainResult train(const TrainSpec& spec, const StarConfig& config, std::span<const TrajectoryScene> scenes,
                  const TrainHooks& hooks = {});
TrainResult train(const TrainSpec& spec, const StarConfig& config, std::span<const TrajectoryScene> scenes,
                  StarParams initial, const TrainHooks& hooks = {});

struct EvalOptions {
    int samples = 20;                       // K; forced to 1 for deterministic configs
    BestOfKPairing pairing = BestOfKPairing::min_ade_sample;
    bool ade_squared = false;
    std::uint64_t seed = 1;
};

struct SceneEval {
    std::size_t scene = 0;
    int targets = 0;
    BestOfK best;
};

struct EvalResult {
    double ade = 0.0;   // target-weighted mean of per-scene best-of-K values
    double fde = 0.0;
    int samples = 1;
    int targets = 0;
    std::vector<SceneEval> scenes;
};

/// Per-scene predictions compared with the ground truth over every target.
Trajectories predicted_positions(const Batch& batch, const RolloutResult& result);
Trajectories true_positions(const Batch& batch, std::span<const int> targets);

EvalResult evaluate(const StarParams& params, const StarConfig& config, std::span<const TrajectoryScene> scenes,
                    const EvalOptions& options = {});

struct EvalReport {
    std::string variant;
    std::string dataset;
    std::uint64_t seed = 0;
    double ade = 0.0;
    double fde = 0.0;
    int samples = 1;
    int scenes = 0;
    int targets = 0;
};

EvalReport make_report(const std::string& variant, const std::string& dataset, std::uint64_t seed,
                       const EvalResult& result);
void write_report_text(std::ostream& out, std::span<const EvalReport> reports);
/// Comma-separated with header `variant,dataset,seed,ADE,FDE,K`.
void write_report_table(std::ostream& out, std::span<const EvalReport> reports);
std::vector<EvalReport> read_report_table(std::istream& in);
void write_loss_curve(std::ostream& out, const TrainResult& result);

inline constexpr std::array<std::string_view, 4> kAblationVariants = {"full", "no_memory", "lstm_temporal",
                                                                       "single_encoder"};

/// Flags for one ablation variant applied on top of `base`.
StarConfig variant_config(std::string_view variant, StarConfig base);

struct AblationRun {
    TrainResult training;
    EvalReport report;
};

/// Trains and evaluates one variant with identical spec and seed.
AblationRun run_ablation(std::string_view variant, const TrainSpec& spec, const StarConfig& base,
                         std::span<const TrajectoryScene> train_scenes, std::span<const TrajectoryScene> test_scenes,
                         const std::string& dataset, const EvalOptions& eval = {});

} // namespace star
