#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "star/data/dataset.hpp"
#include "star/errors.hpp"
#include "star/model/checkpoint.hpp"
#include "star/model/gradient_suite.hpp"
#include "star/trainer/trainer.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace star::cli {
namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

class UsageError : public Error {
public:
    using Error::Error;
};

struct Options {
    std::string config_path;
    std::string data_dir;
    std::vector<std::string> held_out;
    std::string variant;   // train only; empty keeps the file configuration
    std::optional<std::uint64_t> seed;
    int samples = 20;
    std::string out;
    std::string checkpoint;
    std::string scene;
    int step = -1;
    std::optional<int> pedestrian;
    double corrupt = 1.0;
};

struct Manifest {
    json doc;

    Manifest(const std::string& command, const std::vector<std::string>& argv) {
        doc["command"] = command;
        doc["version"] = STAR_VERSION;
        doc["argv"] = argv;
        doc["inputs"] = json::object();
        doc["outputs"] = json::array();
    }
    void config(const KeyValues& values) { doc["config"] = values; }
    void seed(std::uint64_t s) { doc["seed"] = s; }
    void input(const std::string& key, const std::string& path) { doc["inputs"][key] = path; }
    void output(const fs::path& path) { doc["outputs"].push_back(path.string()); }
    void write(const fs::path& dir) {
        const fs::path path = dir / "manifest.json";
        std::ofstream out(path);
        out << std::setw(2) << doc << '\n';
        if (!out) throw DataError("cannot write " + path.string());
    }
};

std::ofstream open_output(const fs::path& path, Manifest& manifest) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    manifest.output(path);
    return out;
}

fs::path prepare_out(const std::string& out) {
    if (out.empty()) throw UsageError("--out is required");
    fs::create_directories(out);
    return out;
}

std::set<std::string> known_keys() {
    std::set<std::string> keys;
    for (const auto& [k, v] : to_key_values(StarConfig{})) keys.insert(k);
    for (const auto& [k, v] : to_key_values(TrainSpec{})) keys.insert(k);
    return keys;
}

struct Settings {
    StarConfig config;
    TrainSpec spec;
};

// Config file values first, then command-line overrides.
Settings load_settings(const Options& opt) {
    Settings s;
    if (!opt.config_path.empty()) {
        const KeyValues values = read_key_values(opt.config_path);
        const std::set<std::string> known = known_keys();
        for (const auto& [k, v] : values)
            if (!known.contains(k)) throw ConfigError(opt.config_path + ": unknown key '" + k + "'");
        apply_key_values(s.config, values);
        apply_key_values(s.spec, values);
    }
    if (opt.seed) s.spec.seed = *opt.seed;
    if (!opt.variant.empty()) s.config = variant_config(opt.variant, s.config);
    s.config.validate();
    s.spec.validate();
    return s;
}

KeyValues snapshot(const Settings& s) {
    KeyValues all = to_key_values(s.config);
    for (const auto& [k, v] : to_key_values(s.spec)) all[k] = v;
    return all;
}

std::vector<std::string> checked_datasets(const std::vector<std::string>& names) {
    std::vector<std::string> out;
    for (const std::string& n : names) {
        try {
            out.push_back(canonical_dataset_name(n));
        } catch (const DataError& e) {
            throw UsageError(e.what());
        }
    }
    return out;
}

std::vector<TrajectoryScene> load_preprocessed(const fs::path& dir, const std::vector<std::string>& names,
                                               const StarConfig& config, int stride) {
    std::vector<TrajectoryScene> scenes;
    for (const std::string& name : names)
        for (const TrajectoryScene& s : load_scenes(dir, name, config.obs_len, config.pred_len, stride))
            scenes.push_back(preprocess(s));
    return scenes;
}

int cmd_train(Options opt, Manifest& manifest) {
    if (opt.variant.empty()) opt.variant = "full";
    if (opt.data_dir.empty()) throw UsageError("--data-dir is required");
    if (opt.held_out.size() != 1) throw UsageError("train needs exactly one --held-out dataset");
    const std::string held_out = checked_datasets(opt.held_out).front();
    const Settings s = load_settings(opt);
    const fs::path out = prepare_out(opt.out);

    const Split split = leave_one_out_split(held_out);
    const auto scenes = load_preprocessed(opt.data_dir, split.train, s.config, s.spec.train_stride);
    manifest.config(snapshot(s));
    manifest.seed(s.spec.seed);
    manifest.input("data_dir", opt.data_dir);
    manifest.doc["inputs"]["train_datasets"] = split.train;
    manifest.doc["inputs"]["held_out"] = held_out;
    manifest.doc["variant"] = opt.variant;
    if (!opt.config_path.empty()) manifest.input("config", opt.config_path);

    std::ofstream log = open_output(out / "train.log", manifest);
    log << "training " << opt.variant << " on " << scenes.size() << " scenes, held out " << held_out << '\n';
    TrainHooks hooks;
    hooks.checkpoint_dir = out;
    hooks.log = &log;
    hooks.metadata = {{"variant", opt.variant}, {"held_out", held_out}};
    hooks.on_step = [](const StepRecord& r) {
        if (r.step % 100 == 0) std::cout << "step " << r.step << " loss " << format_double(r.loss) << '\n';
    };
    const TrainResult result = train(s.spec, s.config, scenes, hooks);
    for (const fs::path& p : result.checkpoints) manifest.output(p);
    std::ofstream curve = open_output(out / "loss_curve.csv", manifest);
    write_loss_curve(curve, result);
    std::cout << "trained " << result.steps.size() << " steps; final epoch loss "
              << format_double(result.epoch_loss.back()) << '\n';
    manifest.write(out);
    return kOk;
}

Checkpoint load_model(const Options& opt, Manifest& manifest) {
    if (opt.checkpoint.empty()) throw UsageError("--checkpoint is required");
    manifest.input("checkpoint", opt.checkpoint);
    if (opt.config_path.empty()) return load_checkpoint(opt.checkpoint);
    manifest.input("config", opt.config_path);
    return load_checkpoint(opt.checkpoint, load_settings(opt).config);
}

std::uint64_t model_seed(const Options& opt, const Checkpoint& ck) {
    if (opt.seed) return *opt.seed;
    const auto it = ck.metadata.find("seed");
    return it == ck.metadata.end() ? 1 : std::stoull(it->second);
}

int cmd_eval(const Options& opt, Manifest& manifest) {
    if (opt.data_dir.empty()) throw UsageError("--data-dir is required");
    if (opt.held_out.empty()) throw UsageError("--held-out is required");
    if (opt.samples < 1) throw UsageError("--samples must be positive");
    const std::vector<std::string> datasets = checked_datasets(opt.held_out);
    const fs::path out = prepare_out(opt.out);
    const Checkpoint ck = load_model(opt, manifest);
    TrainSpec spec;
    if (!opt.config_path.empty()) spec = load_settings(opt).spec;

    EvalOptions eval;
    eval.samples = opt.samples;
    eval.seed = model_seed(opt, ck);
    const auto variant = ck.metadata.find("variant");
    KeyValues config = to_key_values(ck.config);
    config["test_stride"] = std::to_string(spec.test_stride);
    manifest.config(config);
    manifest.seed(eval.seed);
    manifest.input("data_dir", opt.data_dir);
    manifest.doc["inputs"]["datasets"] = datasets;
    manifest.doc["samples"] = opt.samples;

    std::vector<EvalReport> reports;
    for (const std::string& name : datasets) {
        const auto scenes = load_preprocessed(opt.data_dir, {name}, ck.config, spec.test_stride);
        const EvalResult r = evaluate(ck.params, ck.config, scenes, eval);
        reports.push_back(make_report(variant == ck.metadata.end() ? "full" : variant->second, name, eval.seed, r));
    }
    std::ofstream table = open_output(out / "report.csv", manifest);
    write_report_table(table, reports);
    std::ofstream text = open_output(out / "report.txt", manifest);
    write_report_text(text, reports);
    write_report_text(std::cout, reports);
    manifest.write(out);
    return kOk;
}

struct LoadedScene {
    RawTrajectories raw;
    TrajectoryScene scene;   // preprocessed
    Batch batch;

    int source_id(int ped) const { return scene.ids[static_cast<std::size_t>(ped)]; }
    long frame(int index) const { return scene.first_frame + index * raw.frame_step; }
};

// First observation window of a scene file in the dataset text format.
LoadedScene load_scene_file(const std::string& path, const StarConfig& config) {
    if (path.empty()) throw UsageError("--scene is required");
    LoadedScene s;
    s.raw = load_dataset(path, "SCENE");
    const auto windows = make_scenes(s.raw, config.obs_len, config.pred_len, 1, false);
    if (windows.empty())
        throw DataError(path + ": no pedestrian is observed for " + std::to_string(config.obs_len) +
                        " consecutive frames");
    s.scene = preprocess(windows.front());
    s.batch = make_batch(s.scene);
    return s;
}

std::vector<Eigen::Vector2d> world_track(const LoadedScene& s, int ped, int from, int to) {
    std::vector<Eigen::Vector2d> points;
    for (int f = from; f < to; ++f)
        if (s.scene.present(ped, f)) points.push_back(s.scene.to_world(s.scene.position(ped, f)));
    return points;
}

int cmd_predict(const Options& opt, Manifest& manifest) {
    const fs::path out = prepare_out(opt.out);
    const Checkpoint ck = load_model(opt, manifest);
    manifest.input("scene", opt.scene);
    const LoadedScene s = load_scene_file(opt.scene, ck.config);
    const std::uint64_t seed = model_seed(opt, ck);
    manifest.config(to_key_values(ck.config));
    manifest.seed(seed);

    Rng rng(seed);
    NoGradGuard no_grad;
    const RolloutResult roll = rollout(s.batch, ck.params, ck.config, rng);
    const auto [px, py] = roll.local_positions(s.batch);
    const int obs = ck.config.obs_len, pred = ck.config.pred_len;

    std::ofstream csv = open_output(out / "predictions.csv", manifest);
    csv << "pedestrian,step,frame,x,y\n";
    SvgCanvas svg(800, 800);
    std::vector<bool> is_target(static_cast<std::size_t>(s.scene.pedestrians()), false);
    for (std::size_t i = 0; i < roll.targets.size(); ++i) {
        const int ped = roll.targets[i];
        is_target[static_cast<std::size_t>(ped)] = true;
        const int id = s.source_id(ped);
        std::vector<Eigen::Vector2d> prediction{s.scene.to_world(s.scene.reference(ped))};
        for (int k = 0; k < pred; ++k) {
            const Eigen::Vector2d w = s.scene.to_world({px(Index(i), k), py(Index(i), k)});
            prediction.push_back(w);
            csv << id << ',' << k + 1 << ',' << s.frame(obs + k) << ',' << format_double(w.x()) << ','
                << format_double(w.y()) << '\n';
        }
        svg.polyline(world_track(s, ped, 0, obs), "history", id, "#e6b800");
        std::vector<Eigen::Vector2d> truth = world_track(s, ped, obs, obs + pred);
        if (!truth.empty()) {
            truth.insert(truth.begin(), prediction.front());
            svg.polyline(truth, "truth", id, "#d62728");
        }
        svg.polyline(prediction, "prediction", id, "#1f77b4");
    }
    for (int ped = 0; ped < s.scene.pedestrians(); ++ped)
        if (!is_target[static_cast<std::size_t>(ped)])
            svg.polyline(world_track(s, ped, 0, obs), "history", s.source_id(ped), "#e6b800");
    std::ofstream plot = open_output(out / "predictions.svg", manifest);
    svg.write(plot);
    std::cout << "predicted " << roll.targets.size() << " pedestrians x " << pred << " steps\n";
    manifest.write(out);
    return kOk;
}

int cmd_attention(const Options& opt, Manifest& manifest) {
    const fs::path out = prepare_out(opt.out);
    const Checkpoint ck = load_model(opt, manifest);
    if (!ck.config.use_encoder2) throw ConfigError("attention: the model has no encoder 2");
    manifest.input("scene", opt.scene);
    const LoadedScene s = load_scene_file(opt.scene, ck.config);
    const int steps = ck.config.obs_len + ck.config.pred_len - 1;
    if (opt.step < 0 || opt.step >= steps)
        throw UsageError("--step must be in [0, " + std::to_string(steps - 1) + "]");
    const std::uint64_t seed = model_seed(opt, ck);
    manifest.config(to_key_values(ck.config));
    manifest.seed(seed);
    manifest.doc["step"] = opt.step;

    Rng rng(seed);
    NoGradGuard no_grad;
    AttentionWeights weights;
    NodeLayout layout;
    RolloutOptions ro;
    ro.final_spatial_attention = &weights;
    ro.final_layout = &layout;
    const RolloutResult roll = rollout(s.batch, ck.params, ck.config, rng, ro);
    const auto [px, py] = roll.local_positions(s.batch);

    // Locate the spatial group of the requested step.
    std::size_t group = weights.by_group.size();
    std::vector<Index> members;
    {
        std::size_t g = 0;
        for (int step = 0; step < layout.steps(); ++step) {
            if (layout.step_size(step) == 0) continue;
            if (step == opt.step) {
                group = g;
                for (Index a = 0; a < layout.step_size(step); ++a) members.push_back(layout.step_begin(step) + a);
                break;
            }
            ++g;
        }
    }
    if (group >= weights.by_group.size()) throw DataError("attention: no pedestrian is present at that step");

    const auto& heads = weights.by_group[group];
    Matrix mean = Matrix::Zero(heads.front().rows(), heads.front().cols());
    for (const Matrix& h : heads) mean += h;
    mean /= static_cast<double>(heads.size());

    std::vector<int> peds;
    for (Index node : members) peds.push_back(layout.pedestrian_of(node));
    int focus = -1;
    if (opt.pedestrian) {
        for (std::size_t a = 0; a < peds.size(); ++a)
            if (s.source_id(peds[a]) == *opt.pedestrian) focus = static_cast<int>(a);
        if (focus < 0)
            throw DataError("attention: pedestrian " + std::to_string(*opt.pedestrian) + " is absent at step " +
                            std::to_string(opt.step));
    } else {
        focus = 0;
    }

    auto position = [&](int ped) -> Eigen::Vector2d {
        if (opt.step < ck.config.obs_len) return s.scene.to_world(s.scene.position(ped, opt.step));
        const auto it = std::find(roll.targets.begin(), roll.targets.end(), ped);
        const Index row = static_cast<Index>(it - roll.targets.begin());
        const int k = opt.step - ck.config.obs_len;
        return s.scene.to_world({px(row, k), py(row, k)});
    };

    std::ofstream csv = open_output(out / "attention.csv", manifest);
    csv << "step,pedestrian,neighbor,weight\n";
    for (std::size_t a = 0; a < peds.size(); ++a)
        for (std::size_t b = 0; b < peds.size(); ++b)
            csv << opt.step << ',' << s.source_id(peds[a]) << ',' << s.source_id(peds[b]) << ','
                << format_double(mean(Index(a), Index(b))) << '\n';

    SvgCanvas svg(800, 800);
    for (std::size_t b = 0; b < peds.size(); ++b) {
        const double w = mean(focus, Index(b));
        const bool self = static_cast<int>(b) == focus;
        svg.circle(position(peds[b]), 0.1 + 0.6 * w, self ? "focus" : "neighbor", s.source_id(peds[b]),
                   self ? "#d62728" : "#1f77b4", "w=" + format_double(w));
    }
    std::ofstream plot = open_output(out / "attention.svg", manifest);
    svg.write(plot);
    manifest.doc["pedestrian"] = s.source_id(peds[static_cast<std::size_t>(focus)]);
    manifest.write(out);
    return kOk;
}

int cmd_gradcheck(const Options& opt, Manifest& manifest) {
    const std::uint64_t seed = opt.seed.value_or(1);
    const auto entries = run_gradient_suite(seed, opt.corrupt);
    bool ok = true;
    for (const GradientSuiteEntry& e : entries) {
        const bool pass = e.result.max_relative_error < kGradientTolerance;
        ok = ok && pass;
        std::cout << std::left << std::setw(20) << e.component << ' ' << std::scientific << std::setprecision(3)
                  << e.result.max_relative_error << ' ' << (pass ? "PASS" : "FAIL") << "  probes " << e.result.probes
                  << " kinks " << e.result.kinks_skipped << "  worst: " << e.result.worst_input << '\n';
    }
    std::cout << "gradcheck " << (ok ? "PASS" : "FAIL") << ": " << entries.size()
              << " components, tolerance 1e-4\n";
    if (!opt.out.empty()) {
        const fs::path out = prepare_out(opt.out);
        manifest.seed(seed);
        json report = json::array();
        for (const GradientSuiteEntry& e : entries)
            report.push_back({{"component", e.component},
                              {"max_relative_error", e.result.max_relative_error},
                              {"worst_input", e.result.worst_input},
                              {"probes", e.result.probes},
                              {"kinks_skipped", e.result.kinks_skipped}});
        manifest.doc["report"] = report;
        manifest.write(out);
    }
    return ok ? kOk : kNumeric;
}

} // namespace

int run(int argc, char** argv) {
    CLI::App app{"Spatio-temporal graph transformer for pedestrian trajectory prediction"};
    app.require_subcommand(1);
    app.set_version_flag("--version", STAR_VERSION);
    Options opt;

    auto add_config = [&](CLI::App* cmd) {
        cmd->add_option("--config", opt.config_path, "Key-value configuration file")->check(CLI::ExistingFile);
    };
    auto add_seed = [&](CLI::App* cmd) { cmd->add_option("--seed", opt.seed, "Random seed"); };

    CLI::App* train_cmd = app.add_subcommand("train", "Train on the leave-one-out split of a dataset");
    add_config(train_cmd);
    train_cmd->add_option("--data-dir", opt.data_dir, "Directory with the dataset files")->required();
    train_cmd->add_option("--held-out", opt.held_out, "Dataset left out of training")->required();
    train_cmd->add_option("--variant", opt.variant, "Model variant")
        ->check(CLI::IsMember({"full", "no_memory", "lstm_temporal", "single_encoder"}));
    add_seed(train_cmd);
    train_cmd->add_option("--out", opt.out, "Output directory")->required();

    CLI::App* eval_cmd = app.add_subcommand("eval", "Best-of-K ADE/FDE of a checkpoint");
    eval_cmd->add_option("--checkpoint", opt.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
    add_config(eval_cmd);
    eval_cmd->add_option("--data-dir", opt.data_dir, "Directory with the dataset files")->required();
    eval_cmd->add_option("--held-out", opt.held_out, "Datasets to evaluate")->required();
    eval_cmd->add_option("--samples", opt.samples, "Samples per scene (K)");
    add_seed(eval_cmd);
    eval_cmd->add_option("--out", opt.out, "Output directory")->required();

    CLI::App* predict_cmd = app.add_subcommand("predict", "Predict the future of one scene file");
    predict_cmd->add_option("--checkpoint", opt.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
    add_config(predict_cmd);
    predict_cmd->add_option("--scene", opt.scene, "Scene file")->required()->check(CLI::ExistingFile);
    add_seed(predict_cmd);
    predict_cmd->add_option("--out", opt.out, "Output directory")->required();

    CLI::App* attention_cmd = app.add_subcommand("attention", "Export encoder-2 spatial attention at one step");
    attention_cmd->add_option("--checkpoint", opt.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
    add_config(attention_cmd);
    attention_cmd->add_option("--scene", opt.scene, "Scene file")->required()->check(CLI::ExistingFile);
    attention_cmd->add_option("--step", opt.step, "Frame index inside the window")->required();
    attention_cmd->add_option("--pedestrian", opt.pedestrian, "Pedestrian id to draw attention for");
    add_seed(attention_cmd);
    attention_cmd->add_option("--out", opt.out, "Output directory")->required();

    CLI::App* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
    add_seed(grad_cmd);
    grad_cmd->add_option("--out", opt.out, "Directory for the manifest and report");
    grad_cmd->add_option("--corrupt", opt.corrupt, "Scale analytic gradients (detector self-test)")
        ->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    CLI::App* cmd = app.get_subcommands().front();
    Manifest manifest(cmd->get_name(), std::vector<std::string>(argv, argv + argc));
    try {
        if (cmd == train_cmd) return cmd_train(opt, manifest);
        if (cmd == eval_cmd) return cmd_eval(opt, manifest);
        if (cmd == predict_cmd) return cmd_predict(opt, manifest);
        if (cmd == attention_cmd) return cmd_attention(opt, manifest);
        return cmd_gradcheck(opt, manifest);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kUsage;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    }
}

} // namespace star::cli

int main(int argc, char** argv) { return star::cli::run(argc, argv); }
