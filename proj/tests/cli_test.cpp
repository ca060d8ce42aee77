#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include "star/data/dataset.hpp"
#include "star/data/synthetic.hpp"
#include "star/model/checkpoint.hpp"
#include "star/trainer/trainer.hpp"

namespace fs = std::filesystem;
using namespace star;

namespace {

struct CliRun {
    int code = -1;
    std::string output;
};

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    static fs::path root;

    static void SetUpTestSuite() {
        root = fs::temp_directory_path() / ("star_cli_test_" + std::to_string(::getpid()));
        fs::remove_all(root);
        fs::create_directories(root / "data");
        const char* names[] = {"eth", "hotel", "zara1", "zara2", "univ"};
        for (int k = 0; k < 5; ++k) {
            SyntheticSpec spec;
            spec.scenes = 3;
            spec.seed = 100 + static_cast<std::uint64_t>(k);
            std::ofstream out(root / "data" / (std::string(names[k]) + ".txt"));
            write_recording(out, synthetic_recording(spec));
        }
        write(root / "tiny.cfg",
              "d_model = 8\nheads = 2\nspatial_heads = 2\nff_hidden = 6\nnoise_dim = 3\nepochs = 2\n"
              "batch_scenes = 4\ndropout = 0\n");
        write(root / "tiny_det.cfg",
              "d_model = 8\nheads = 2\nspatial_heads = 2\nff_hidden = 6\nnoise_dim = 3\nepochs = 2\n"
              "batch_scenes = 4\ndropout = 0\ndeterministic = true\n");
        ASSERT_EQ(run({"train", "--config", cfg("tiny.cfg"), "--data-dir", data(), "--held-out", "hotel", "--out",
                       path("stochastic")})
                      .code,
                  0);
        ASSERT_EQ(run({"train", "--config", cfg("tiny_det.cfg"), "--data-dir", data(), "--held-out", "hotel",
                       "--out", path("deterministic")})
                      .code,
                  0);
    }

    static void TearDownTestSuite() { fs::remove_all(root); }

    static void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }
    static std::string path(const std::string& rel) { return (root / rel).string(); }
    static std::string cfg(const std::string& name) { return path(name); }
    static std::string data() { return path("data"); }
    static std::string stochastic() { return path("stochastic/checkpoint_final.txt"); }
    static std::string deterministic() { return path("deterministic/checkpoint_final.txt"); }

    static CliRun run(const std::vector<std::string>& args) {
        std::string cmd = "'" STAR_CLI_PATH "'";
        for (const std::string& a : args) cmd += " '" + a + "'";
        const fs::path log = root / "last_output.txt";
        cmd += " > '" + log.string() + "' 2>&1";
        const int status = std::system(cmd.c_str());
        return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_file(log)};
    }

    static std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
        std::vector<std::vector<std::string>> rows;
        std::ifstream in(p);
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            std::vector<std::string> fields;
            std::stringstream ss(line);
            std::string f;
            while (std::getline(ss, f, ',')) fields.push_back(f);
            rows.push_back(fields);
        }
        return rows;
    }

    static std::vector<TrajectoryScene> held_out_scenes(const StarConfig& c, const std::string& name = "HOTEL") {
        std::vector<TrajectoryScene> out;
        for (const TrajectoryScene& s : load_scenes(data(), name, c.obs_len, c.pred_len, TrainSpec{}.test_stride))
            out.push_back(preprocess(s));
        return out;
    }
};

fs::path Cli::root;

int count(const std::string& text, const std::string& needle) {
    int n = 0;
    for (std::size_t pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
    return n;
}

} // namespace

TEST_F(Cli, TrainWritesCheckpointCurveAndOneManifest) {
    const fs::path out = root / "stochastic";
    EXPECT_TRUE(fs::exists(out / "checkpoint_final.txt"));
    EXPECT_TRUE(fs::exists(out / "loss_curve.csv"));
    EXPECT_EQ(read_file(out / "loss_curve.csv").rfind("step,epoch,loss\n", 0), 0u);
    int manifests = 0;
    for (const auto& e : fs::directory_iterator(out)) manifests += e.path().filename() == "manifest.json";
    EXPECT_EQ(manifests, 1);
    const std::string m = read_file(out / "manifest.json");
    EXPECT_NE(m.find("\"command\": \"train\""), std::string::npos);
    EXPECT_NE(m.find("\"seed\": 1"), std::string::npos);
    EXPECT_NE(m.find("\"version\""), std::string::npos);
    EXPECT_NE(m.find("\"d_model\": \"8\""), std::string::npos);
    // Leave-one-out: the held-out dataset is not among the training sets.
    const std::regex train_sets("\"train_datasets\": \\[\\s*\"ETH\",\\s*\"ZARA1\",\\s*\"ZARA2\",\\s*\"UNIV\"\\s*\\]");
    EXPECT_TRUE(std::regex_search(m, train_sets)) << m;
}

TEST_F(Cli, TrainingIsReproducibleFromTheSameInputs) {
    ASSERT_EQ(run({"train", "--config", cfg("tiny.cfg"), "--data-dir", data(), "--held-out", "hotel", "--out",
                   path("again")})
                  .code,
              0);
    EXPECT_EQ(read_file(root / "again/checkpoint_final.txt"), read_file(stochastic()));
    EXPECT_EQ(read_file(root / "again/loss_curve.csv"), read_file(root / "stochastic/loss_curve.csv"));
    ASSERT_EQ(run({"train", "--config", cfg("tiny.cfg"), "--data-dir", data(), "--held-out", "hotel", "--seed", "2",
                   "--out", path("seed2")})
                  .code,
              0);
    EXPECT_NE(read_file(root / "seed2/checkpoint_final.txt"), read_file(stochastic()));
}

TEST_F(Cli, VariantFlagSelectsAblationConfiguration) {
    ASSERT_EQ(run({"train", "--config", cfg("tiny.cfg"), "--data-dir", data(), "--held-out", "eth", "--variant",
                   "no_memory", "--out", path("nomem")})
                  .code,
              0);
    const Checkpoint ck = load_checkpoint(root / "nomem/checkpoint_final.txt");
    EXPECT_FALSE(ck.config.use_memory);
    EXPECT_TRUE(ck.config.use_encoder2);
    EXPECT_EQ(ck.metadata.at("variant"), "no_memory");
}

TEST_F(Cli, UsageAndDataErrorsMapToExitCodes) {
    EXPECT_EQ(run({}).code, 1);
    EXPECT_EQ(run({"train", "--data-dir", data(), "--held-out", "MARS", "--out", path("x")}).code, 1);
    EXPECT_EQ(run({"train", "--data-dir", data(), "--held-out", "eth", "--variant", "gcn", "--out", path("x")}).code,
              1);
    write(root / "bad.cfg", "d_model = 8\nlearning_rat = 0.1\n");
    const CliRun bad = run({"train", "--config", cfg("bad.cfg"), "--data-dir", data(), "--held-out", "eth", "--out",
                         path("x")});
    EXPECT_EQ(bad.code, 1);
    EXPECT_NE(bad.output.find("learning_rat"), std::string::npos);
    EXPECT_EQ(run({"train", "--data-dir", path("missing"), "--held-out", "eth", "--out", path("x")}).code, 2);
    EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(Cli, EvalMatchesLibraryMetricsExactly) {
    ASSERT_EQ(run({"eval", "--checkpoint", stochastic(), "--data-dir", data(), "--held-out", "HOTEL", "--samples",
                   "5", "--seed", "4", "--out", path("eval")})
                  .code,
              0);
    std::ifstream in(root / "eval/report.csv");
    const auto reports = read_report_table(in);
    ASSERT_EQ(reports.size(), 1u);

    const Checkpoint ck = load_checkpoint(stochastic());
    EvalOptions opt;
    opt.samples = 5;
    opt.seed = 4;
    const EvalResult lib = evaluate(ck.params, ck.config, held_out_scenes(ck.config), opt);
    EXPECT_EQ(reports[0].ade, lib.ade);
    EXPECT_EQ(reports[0].fde, lib.fde);
    EXPECT_EQ(reports[0].samples, 5);
    EXPECT_EQ(reports[0].dataset, "HOTEL");
}

TEST_F(Cli, EvalWritesOneRowPerDataset) {
    ASSERT_EQ(run({"eval", "--checkpoint", stochastic(), "--data-dir", data(), "--held-out", "HOTEL", "--held-out",
                   "eth", "--out", path("eval2")})
                  .code,
              0);
    const auto rows = csv_rows(root / "eval2/report.csv");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0][1], "HOTEL");
    EXPECT_EQ(rows[1][1], "ETH");
}

TEST_F(Cli, DeterministicCheckpointIgnoresK) {
    ASSERT_EQ(run({"eval", "--checkpoint", deterministic(), "--data-dir", data(), "--held-out", "HOTEL", "--samples",
                   "1", "--out", path("det1")})
                  .code,
              0);
    ASSERT_EQ(run({"eval", "--checkpoint", deterministic(), "--data-dir", data(), "--held-out", "HOTEL", "--samples",
                   "20", "--out", path("det20")})
                  .code,
              0);
    const auto a = csv_rows(root / "det1/report.csv"), b = csv_rows(root / "det20/report.csv");
    EXPECT_EQ(a, b);
    EXPECT_EQ(b[0][5], "1");
}

TEST_F(Cli, EvalRejectsMismatchedConfig) {
    write(root / "wide.cfg", "d_model = 16\n");
    const CliRun r = run({"eval", "--checkpoint", stochastic(), "--config", cfg("wide.cfg"), "--data-dir", data(),
                       "--held-out", "HOTEL", "--out", path("x")});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("d_model"), std::string::npos);
}

TEST_F(Cli, PredictWritesWorldTrajectoriesAndSvg) {
    const std::string scene = path("data/hotel.txt");
    ASSERT_EQ(run({"predict", "--checkpoint", stochastic(), "--scene", scene, "--seed", "3", "--out", path("pred")})
                  .code,
              0);
    const auto rows = csv_rows(root / "pred/predictions.csv");

    // Library path: the first window of the file, preprocessed, same seed.
    const Checkpoint ck = load_checkpoint(stochastic());
    const auto windows = make_scenes(load_dataset(scene), ck.config.obs_len, ck.config.pred_len, 1, false);
    const TrajectoryScene s = preprocess(windows.front());
    const Batch b = make_batch(s);
    Rng rng(3);
    NoGradGuard guard;
    const RolloutResult roll = rollout(b, ck.params, ck.config, rng);
    const auto [px, py] = roll.local_positions(b);
    ASSERT_EQ(rows.size(), roll.targets.size() * 12);
    for (std::size_t i = 0; i < roll.targets.size(); ++i)
        for (int k = 0; k < 12; ++k) {
            const auto& row = rows[i * 12 + static_cast<std::size_t>(k)];
            EXPECT_EQ(std::stoi(row[0]), s.ids[static_cast<std::size_t>(roll.targets[i])]);
            EXPECT_NEAR(std::stod(row[3]), px(Index(i), k) + s.origin.x(), 1e-9);
            EXPECT_NEAR(std::stod(row[4]), py(Index(i), k) + s.origin.y(), 1e-9);
        }
    const std::string svg = read_file(root / "pred/predictions.svg");
    const int n = static_cast<int>(roll.targets.size());
    EXPECT_EQ(count(svg, "class=\"prediction\""), n);
    EXPECT_EQ(count(svg, "class=\"truth\""), n);
    EXPECT_GE(count(svg, "class=\"history\""), n);
}

TEST_F(Cli, PredictRejectsShortObservation) {
    write(root / "short.txt", "0 1 0 0\n10 1 1 0\n20 1 2 0\n");
    EXPECT_EQ(run({"predict", "--checkpoint", stochastic(), "--scene", path("short.txt"), "--out", path("x")}).code,
              2);
}

TEST_F(Cli, AttentionRowsAreNormalizedAndMasked) {
    // Pedestrians 1 and 2 walk side by side; 3 is far beyond the 10 m threshold.
    std::ostringstream scene;
    for (int f = 0; f < 20; ++f) {
        scene << f * 10 << " 1 " << 0.4 * f << " 0\n";
        scene << f * 10 << " 2 " << 0.4 * f << " 1\n";
        scene << f * 10 << " 3 " << 0.4 * f << " 50\n";
    }
    write(root / "three.txt", scene.str());
    ASSERT_EQ(run({"attention", "--checkpoint", stochastic(), "--scene", path("three.txt"), "--step", "4",
                   "--pedestrian", "2", "--out", path("att")})
                  .code,
              0);
    std::map<int, double> row_sum;
    std::map<std::pair<int, int>, double> w;
    for (const auto& r : csv_rows(root / "att/attention.csv")) {
        w[{std::stoi(r[1]), std::stoi(r[2])}] = std::stod(r[3]);
        row_sum[std::stoi(r[1])] += std::stod(r[3]);
    }
    ASSERT_EQ(w.size(), 9u);
    for (const auto& [ped, total] : row_sum) EXPECT_NEAR(total, 1.0, 1e-12) << ped;
    EXPECT_EQ(w.at(std::pair(3, 3)), 1.0);
    EXPECT_EQ(w.at(std::pair(1, 3)), 0.0);
    EXPECT_EQ(w.at(std::pair(3, 2)), 0.0);
    EXPECT_GT(w.at(std::pair(1, 2)), 0.0);
    const std::string svg = read_file(root / "att/attention.svg");
    EXPECT_EQ(count(svg, "<circle"), 3);
    EXPECT_EQ(count(svg, "class=\"focus\" data-pedestrian=\"2\""), 1);
}

TEST_F(Cli, AttentionErrors) {
    std::ostringstream scene;
    for (int f = 0; f < 20; ++f) scene << f * 10 << " 1 " << 0.4 * f << " 0\n";
    scene << "40 7 3 3\n";
    write(root / "late.txt", scene.str());
    EXPECT_EQ(run({"attention", "--checkpoint", stochastic(), "--scene", path("late.txt"), "--step", "2",
                   "--pedestrian", "7", "--out", path("x")})
                  .code,
              2);
    EXPECT_EQ(run({"attention", "--checkpoint", stochastic(), "--scene", path("late.txt"), "--step", "40", "--out",
                   path("x")})
                  .code,
              1);
}

TEST_F(Cli, GradcheckPassesDeterministicallyAndDetectsCorruption) {
    const CliRun a = run({"gradcheck", "--seed", "7", "--out", path("gc")});
    EXPECT_EQ(a.code, 0) << a.output;
    EXPECT_NE(a.output.find("gradcheck PASS"), std::string::npos);
    EXPECT_NE(a.output.find("rollout_loss"), std::string::npos);
    EXPECT_TRUE(fs::exists(root / "gc/manifest.json"));
    const CliRun b = run({"gradcheck", "--seed", "7"});
    EXPECT_EQ(a.output, b.output);
    const CliRun bad = run({"gradcheck", "--seed", "7", "--corrupt", "1.01"});
    EXPECT_EQ(bad.code, 3);
    EXPECT_NE(bad.output.find("gradcheck FAIL"), std::string::npos);
}
