#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rangan/pipeline.hpp"
#include "rangan/svg.hpp"

namespace fs = std::filesystem;
using namespace rangan;

namespace {

struct Flags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> window_size;
    std::optional<int> stride;
    std::optional<std::string> method;
    std::optional<int> epochs;
    std::optional<std::string> data_path;
};

RunConfig build_config(const Flags& f) {
    RunConfig cfg;
    if (!f.config_path.empty()) cfg = load_config(f.config_path);
    if (f.seed) {
        cfg.seed = *f.seed;
        cfg.scenario_seed = *f.seed;  // one seed governs all randomness
    }
    if (f.out_dir) cfg.out_dir = *f.out_dir;
    if (f.window_size) cfg.window_size = *f.window_size;
    if (f.stride) cfg.stride = *f.stride;
    if (f.method) cfg.method = *f.method;
    if (f.epochs) cfg.train.epochs = *f.epochs;
    if (f.data_path) cfg.data_path = *f.data_path;
    cfg.validate();
    fs::create_directories(cfg.out_dir);
    return cfg;
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
    return (fs::path(cfg.out_dir) / name).string();
}

int cmd_gen(const Flags& flags, std::size_t duration) {
    RunConfig cfg = build_config(flags);
    ScenarioSpec spec = default_benchmark_spec(cfg.scenario_seed);
    if (duration != spec.duration_steps) {
        spec = benchmark_spec(cfg.scenario_seed, duration);
    }
    GeneratedScenario scenario = generate(spec);
    const std::string path = out_path(cfg, "scenario.csv");
    save_csv(scenario.frame, path + ".tmp");
    fs::rename(path + ".tmp", path);

    std::size_t label_mass = 0;
    for (auto l : scenario.frame.labels) label_mass += l;
    std::printf("wrote %s: %zu rows, %zu KPIs, %zu contention events, %zu anomalous steps\n",
                path.c_str(), scenario.frame.size(), scenario.frame.feature_count(),
                spec.contention_events.size(), label_mass);
    return 0;
}

int cmd_train(const Flags& flags) {
    RunConfig cfg = build_config(flags);
    if (cfg.method != "rangan")
        throw ConfigError("method: train only fits the rangan model; use eval for baselines");
    PreparedData data = prepare_data(cfg);
    if (data.train_windows.count() == 0)
        throw ContractError("train: the training split yields no windows");

    ModelConfig mc = cfg.model;
    mc.window_size = cfg.window_size;
    mc.feature_count = static_cast<int>(data.train_windows.feature_count);
    GanModel model(mc, derive_seed(cfg.seed, SeedStream::ModelInit));
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, SeedStream::Train);
    TrainLog log = train(model, data.train_windows, tc);

    const std::string ckpt = out_path(cfg, "model.ckpt");
    save_model(model, ckpt + ".tmp");
    fs::rename(ckpt + ".tmp", ckpt);

    std::string text;
    char buf[96];
    for (const auto& e : log.entries) {
        std::snprintf(buf, sizeof buf, "%d %.17g %.17g\n", e.epoch, e.d_loss, e.g_loss);
        text += buf;
    }
    write_file_atomic(out_path(cfg, "train_log.txt"), text);
    std::printf("wrote %s (%zu epochs over %zu windows)\n", ckpt.c_str(), log.entries.size(),
                data.train_windows.count());
    return 0;
}

int cmd_score(const Flags& flags, const std::string& model_path) {
    RunConfig cfg = build_config(flags);
    PreparedData data = prepare_data(cfg);
    GanModel model = load_model(model_path);
    if (model.config().window_size != cfg.window_size)
        throw ConfigError("window_size: checkpoint was trained with window_size " +
                          std::to_string(model.config().window_size));
    ScoreConfig sc = cfg.score;
    sc.seed = derive_seed(cfg.seed, SeedStream::Score);
    ScoreTrace trace = score_windows(model, data.test_windows, sc);
    const std::string path = out_path(cfg, "scores.csv");
    save_scores_csv(trace, data.test_windows.window_labels, path);
    std::printf("wrote %s (%zu windows)\n", path.c_str(), trace.scores.size());
    return 0;
}

int cmd_eval(const Flags& flags) {
    RunConfig cfg = build_config(flags);
    PipelineResult result = run_pipeline(cfg);
    const std::string report_path = out_path(cfg, "report_" + cfg.method + ".json");
    write_file_atomic(report_path, result.report.to_json());
    save_scores_csv(result.trace, result.test_labels,
                    out_path(cfg, "scores_" + cfg.method + ".csv"));
    std::printf("%s w=%d f1=%.4f precision=%.4f recall=%.4f fp=%ld -> %s\n", cfg.method.c_str(),
                cfg.window_size, result.report.f1, result.report.precision, result.report.recall,
                result.report.fp, report_path.c_str());
    return 0;
}

int cmd_sweep(const Flags& flags, std::vector<int> sizes) {
    RunConfig base = build_config(flags);
    if (sizes.empty()) sizes = {20, 30, 40, 50, 60};
    std::string table = "method,f1,precision,recall,roc_auc,fp\n";
    char buf[160];
    for (int w : sizes) {
        RunConfig cfg = base;
        cfg.window_size = w;
        cfg.seed = base.seed + static_cast<std::uint64_t>(w);  // independent per-size streams
        cfg.scenario_seed = base.scenario_seed;                // same data for every size
        PipelineResult result = run_pipeline(cfg);
        write_file_atomic(out_path(base, "report_" + cfg.method + "_w" + std::to_string(w) +
                                             ".json"),
                          result.report.to_json());
        const std::string auc = result.report.roc_auc
                                    ? [&] {
                                          char a[32];
                                          std::snprintf(a, sizeof a, "%.4f",
                                                        *result.report.roc_auc);
                                          return std::string(a);
                                      }()
                                    : std::string("NaN");
        std::snprintf(buf, sizeof buf, "%s/%d,%.4f,%.4f,%.4f,%s,%ld\n", cfg.method.c_str(), w,
                      result.report.f1, result.report.precision, result.report.recall,
                      auc.c_str(), result.report.fp);
        table += buf;
        std::printf("%s", buf);
    }
    write_file_atomic(out_path(base, "sweep.csv"), table);
    return 0;
}

int cmd_plot(const Flags& flags, const std::string& scores_path,
             std::optional<double> threshold) {
    RunConfig cfg = build_config(flags);
    LoadedScores loaded = load_scores_csv(scores_path);
    if (loaded.trace.scores.empty())
        throw ParseError("scores file '" + scores_path + "' holds no rows");
    const double t = threshold ? *threshold
                               : select_threshold(loaded.trace.scores, loaded.labels,
                                                  ThresholdStrategy::max_f1());
    write_file_atomic(out_path(cfg, "plot.svg"),
                      render_score_svg(loaded.trace.scores, loaded.labels, t));
    std::printf("wrote %s (%zu windows, threshold %.6g)\n", out_path(cfg, "plot.svg").c_str(),
                loaded.trace.scores.size(), t);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RANGAN: transformer-GAN anomaly detection for RAN KPI time series"};
    app.require_subcommand(1);
    app.fallthrough();

    Flags flags;
    app.add_option("--config", flags.config_path, "JSON run configuration");
    app.add_option("--seed", flags.seed, "master seed for every random stream");
    app.add_option("--out", flags.out_dir, "output directory");
    app.add_option("--window-size", flags.window_size, "sliding window length");
    app.add_option("--stride", flags.stride, "sliding window stride");
    app.add_option("--method", flags.method, "rangan|autoencoder|zscore|iforest|lof");
    app.add_option("--epochs", flags.epochs, "training epochs");
    app.add_option("--data", flags.data_path, "KPI CSV input (default: generated scenario)");

    auto* gen = app.add_subcommand("gen", "generate a synthetic RAN KPI scenario CSV");
    std::size_t duration = 10000;
    gen->add_option("--duration", duration, "scenario length in steps");

    auto* train_cmd = app.add_subcommand("train", "train the detector, write a checkpoint");

    auto* score = app.add_subcommand("score", "score the test split with a checkpoint");
    std::string model_path;
    score->add_option("--model", model_path, "model checkpoint")->required();

    auto* eval = app.add_subcommand("eval", "train/fit, score and evaluate one method");

    auto* sweep = app.add_subcommand("sweep", "evaluate across window sizes");
    std::vector<int> sizes;
    sweep->add_option("--windows", sizes, "window sizes (default 20 30 40 50 60)");

    auto* plot = app.add_subcommand("plot", "render a score trace as SVG");
    std::string scores_path;
    std::optional<double> threshold;
    plot->add_option("--scores", scores_path, "scores CSV from score/eval")->required();
    plot->add_option("--threshold", threshold, "threshold line (default: max-F1)");

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return cmd_gen(flags, duration);
        if (train_cmd->parsed()) return cmd_train(flags);
        if (score->parsed()) return cmd_score(flags, model_path);
        if (eval->parsed()) return cmd_eval(flags);
        if (sweep->parsed()) return cmd_sweep(flags, sizes);
        if (plot->parsed()) return cmd_plot(flags, scores_path, threshold);
        std::fprintf(stderr, "no command given\n");
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
