#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "rangan/pipeline.hpp"
#include "rangan/svg.hpp"

using namespace rangan;
namespace fs = std::filesystem;

namespace {

// small, fast settings shared by the determinism-oriented tests
RunConfig small_config() {
    RunConfig cfg;
    cfg.window_size = 16;
    cfg.stride = 2;
    cfg.seed = 3;
    cfg.scenario_seed = 3;
    cfg.model.latent_dim = 8;
    cfg.model.model_dim = 16;
    cfg.model.attention_heads = 2;
    cfg.model.blocks_per_net = 1;
    cfg.model.feedforward_dim = 16;
    cfg.train.epochs = 1;
    cfg.train.batch_size = 64;
    cfg.score.inversion_steps = 3;
    return cfg;
}

std::size_t count_occurrences(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (std::size_t at = hay.find(needle); at != std::string::npos;
         at = hay.find(needle, at + needle.size()))
        ++n;
    return n;
}

}  // namespace

TEST_CASE("config parsing rejects unknown fields by name") {
    CHECK_THROWS_WITH_AS(parse_config(R"({"windw_size": 60})"),
                         doctest::Contains("windw_size"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config(R"({"train": {"epoch": 5}})"),
                         doctest::Contains("train.epoch"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config(R"({"method": "svm"})"), doctest::Contains("method"),
                         ConfigError);
    CHECK_THROWS_AS(parse_config("not json at all"), ConfigError);

    RunConfig cfg = parse_config(
        R"({"window_size": 24, "train": {"epochs": 2}, "threshold": {"strategy": "percentile", "p": 90}})");
    CHECK(cfg.window_size == 24);
    CHECK(cfg.train.epochs == 2);
    CHECK(cfg.threshold.kind == ThresholdStrategy::Kind::Percentile);
    CHECK(cfg.threshold.percentile == 90.0);
}

TEST_CASE("seed also sets the scenario seed unless pinned explicitly") {
    RunConfig a = parse_config(R"({"seed": 11})");
    CHECK(a.seed == 11);
    CHECK(a.scenario_seed == 11);
    RunConfig b = parse_config(R"({"seed": 11, "data": {"scenario_seed": 4}})");
    CHECK(b.seed == 11);
    CHECK(b.scenario_seed == 4);
}

TEST_CASE("prepare_data wires split, normalization and windows together") {
    RunConfig cfg = small_config();
    PreparedData data = prepare_data(cfg);
    CHECK(data.train_frame.size() == 6000);
    CHECK(data.test_frame.size() == 4000);
    for (double v : data.train_frame.features) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK(data.train_windows.count() == (6000 - 16) / 2 + 1);
    CHECK(data.test_windows.count() == (4000 - 16) / 2 + 1);
}

TEST_CASE("run_pipeline is deterministic for every method") {
    for (const char* method : {"zscore", "iforest", "lof", "autoencoder"}) {
        RunConfig cfg = small_config();
        cfg.method = method;
        cfg.window_size = 8;
        cfg.stride = 4;
        if (std::string(method) == "autoencoder") cfg.autoencoder.epochs = 2;
        PipelineResult a = run_pipeline(cfg);
        PipelineResult b = run_pipeline(cfg);
        CHECK(a.report.to_json() == b.report.to_json());
        CHECK(a.trace.scores == b.trace.scores);
        CHECK(a.report.method == method);
        CHECK(a.report.tp + a.report.fp + a.report.fn + a.report.tn ==
              static_cast<long>(a.trace.scores.size()));
    }
}

TEST_CASE("run_pipeline rangan end-to-end on a small scenario") {
    RunConfig cfg = small_config();
    PipelineResult a = run_pipeline(cfg);
    PipelineResult b = run_pipeline(cfg);
    CHECK(a.report.to_json() == b.report.to_json());
    CHECK(a.trace.scores == b.trace.scores);
    REQUIRE(a.model != nullptr);
    CHECK(a.train_log.entries.size() == 1);
    CHECK(a.report.roc_auc.has_value());
}

TEST_CASE("scores csv round-trip") {
    ScoreTrace trace;
    trace.window_size = 4;
    trace.scores = {0.25, 1.0 / 3.0, 7.125};
    trace.origin_index = {0, 2, 4};
    std::vector<std::uint8_t> labels{0, 1, 0};
    const std::string path = (fs::temp_directory_path() / "rangan_scores.csv").string();
    save_scores_csv(trace, labels, path);
    LoadedScores loaded = load_scores_csv(path);
    CHECK(loaded.trace.scores == trace.scores);  // %.17g survives the round trip
    CHECK(loaded.trace.origin_index == trace.origin_index);
    CHECK(loaded.labels == labels);
}

TEST_CASE("svg structure: one polyline, one rect per anomalous run") {
    std::vector<double> scores(100, 0.2);
    std::vector<std::uint8_t> labels(100, 0);
    for (int i = 20; i < 30; ++i) labels[static_cast<std::size_t>(i)] = 1;
    for (int i = 55; i < 58; ++i) labels[static_cast<std::size_t>(i)] = 1;
    labels[99] = 1;
    const std::string svg = render_score_svg(scores, labels, 0.5);

    CHECK(svg.find("<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\"") !=
          std::string::npos);
    CHECK(count_occurrences(svg, "<polyline") == 1);
    // 3 shaded runs + 1 background rect
    CHECK(count_occurrences(svg, "<rect") == 4);
    // polyline carries one x,y pair per window
    const std::size_t start = svg.find("points=\"");
    const std::size_t end = svg.find('"', start + 8);
    const std::string points = svg.substr(start + 8, end - start - 8);
    CHECK(count_occurrences(points, ",") == 100);

    CHECK_THROWS_AS(render_score_svg({}, {}, 0.5), ContractError);
}

TEST_CASE("atomic writes leave no partial file behind") {
    const std::string path = (fs::temp_directory_path() / "rangan_atomic.txt").string();
    write_file_atomic(path, "hello\n");
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "hello");
    CHECK_FALSE(fs::exists(path + ".tmp"));
}
