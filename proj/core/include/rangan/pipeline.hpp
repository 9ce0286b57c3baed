#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rangan/baselines.hpp"
#include "rangan/gan.hpp"
#include "rangan/metrics.hpp"
#include "rangan/synthgen.hpp"

namespace rangan {

/// One run's worth of configuration: data source, windowing, model, training,
/// scoring, evaluation. Loadable from a JSON file (unknown fields rejected by
/// name); command-line flags override file values.
struct RunConfig {
    std::string data_path;              // empty: generate a scenario instead
    std::uint64_t scenario_seed = 7;    // defaults to `seed` unless set explicitly
    std::vector<std::string> kpi;       // include-list; empty keeps every KPI column
    int window_size = 60;
    int stride = 1;
    double split_fraction = 0.6;
    ModelConfig model;
    TrainConfig train;
    ScoreConfig score;
    IsolationForestConfig iforest;
    LofConfig lof;
    AutoencoderConfig autoencoder;
    std::string method = "rangan";      // rangan | autoencoder | zscore | iforest | lof
    ThresholdStrategy threshold;
    std::string out_dir = ".";
    std::uint64_t seed = 7;

    void validate() const;
};

/// Parse a config file; every unknown field fails with its dotted name.
RunConfig load_config(const std::string& path);
/// Same, from a JSON string (used by tests).
RunConfig parse_config(const std::string& json_text, const RunConfig& base = {});

/// Normalized, windowed train/test data for a config.
struct PreparedData {
    KpiFrame train_frame;
    KpiFrame test_frame;
    NormalizationParams norm;
    WindowSet train_windows;
    WindowSet test_windows;
};

PreparedData prepare_data(const RunConfig& cfg);

struct PipelineResult {
    EvalReport report;
    ScoreTrace trace;                      // test-split scores
    std::vector<std::uint8_t> test_labels; // aligned with trace
    TrainLog train_log;                    // filled for the rangan method
    std::shared_ptr<GanModel> model;       // null for baseline methods
};

/// Full deterministic run: data -> split -> min-max (fit on train) ->
/// windows -> fit the configured method -> score the test windows ->
/// evaluate. All randomness derives from cfg.seed (scenario generation
/// from cfg.scenario_seed).
PipelineResult run_pipeline(const RunConfig& cfg);

/// Seed stream tags used to derive the per-stage seeds from cfg.seed.
enum class SeedStream : std::uint64_t { ModelInit = 1, Train = 2, Score = 3, Baseline = 4 };
std::uint64_t derive_seed(std::uint64_t master, SeedStream stream);

/// Scores CSV: header "window_index,origin_index,score,label".
void save_scores_csv(const ScoreTrace& trace, const std::vector<std::uint8_t>& labels,
                     const std::string& path);
struct LoadedScores {
    ScoreTrace trace;
    std::vector<std::uint8_t> labels;
};
LoadedScores load_scores_csv(const std::string& path);

/// Write via a temp file + rename so failures leave no partial outputs.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace rangan
