#include "rangan/pipeline.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "json.hpp"

namespace rangan {

using nlohmann::json;

void RunConfig::validate() const {
    if (window_size < 2) throw ConfigError("window_size must be >= 2");
    if (stride < 1) throw ConfigError("stride must be >= 1");
    if (!(split_fraction > 0.0 && split_fraction < 1.0))
        throw ConfigError("split_fraction must lie in (0, 1)");
    static const std::set<std::string> methods{"rangan", "autoencoder", "zscore", "iforest",
                                               "lof"};
    if (!methods.count(method))
        throw ConfigError("method must be one of rangan|autoencoder|zscore|iforest|lof, got '" +
                          method + "'");
    if (!data_path.empty() && !std::filesystem::exists(data_path))
        throw ConfigError("data.path '" + data_path + "' does not exist");
    model.validate();
    train.validate();
    score.validate();
}

namespace {

void reject_unknown(const json& obj, const std::string& scope,
                    const std::set<std::string>& known) {
    for (const auto& [key, value] : obj.items())
        if (!known.count(key))
            throw ConfigError("unknown config field '" +
                              (scope.empty() ? key : scope + "." + key) + "'");
}

void parse_into(const json& j, RunConfig& cfg) {
    reject_unknown(j, "",
                   {"data", "window_size", "stride", "split_fraction", "model", "train", "score",
                    "iforest", "lof", "autoencoder", "method", "threshold", "seed", "out"});
    if (j.contains("data")) {
        const json& d = j["data"];
        reject_unknown(d, "data", {"path", "scenario_seed", "kpi"});
        if (d.contains("path")) cfg.data_path = d["path"].get<std::string>();
        if (d.contains("scenario_seed")) cfg.scenario_seed = d["scenario_seed"].get<std::uint64_t>();
        if (d.contains("kpi")) cfg.kpi = d["kpi"].get<std::vector<std::string>>();
    }
    if (j.contains("window_size")) cfg.window_size = j["window_size"].get<int>();
    if (j.contains("stride")) cfg.stride = j["stride"].get<int>();
    if (j.contains("split_fraction")) cfg.split_fraction = j["split_fraction"].get<double>();
    if (j.contains("model")) {
        const json& m = j["model"];
        reject_unknown(m, "model",
                       {"latent_dim", "model_dim", "attention_heads", "blocks_per_net",
                        "feedforward_dim", "dropout_rate"});
        if (m.contains("latent_dim")) cfg.model.latent_dim = m["latent_dim"].get<int>();
        if (m.contains("model_dim")) cfg.model.model_dim = m["model_dim"].get<int>();
        if (m.contains("attention_heads"))
            cfg.model.attention_heads = m["attention_heads"].get<int>();
        if (m.contains("blocks_per_net")) cfg.model.blocks_per_net = m["blocks_per_net"].get<int>();
        if (m.contains("feedforward_dim"))
            cfg.model.feedforward_dim = m["feedforward_dim"].get<int>();
        if (m.contains("dropout_rate")) cfg.model.dropout_rate = m["dropout_rate"].get<double>();
    }
    if (j.contains("train")) {
        const json& t = j["train"];
        reject_unknown(t, "train", {"epochs", "batch_size", "d_steps_per_g_step", "lr_g", "lr_d"});
        if (t.contains("epochs")) cfg.train.epochs = t["epochs"].get<int>();
        if (t.contains("batch_size")) cfg.train.batch_size = t["batch_size"].get<int>();
        if (t.contains("d_steps_per_g_step"))
            cfg.train.d_steps_per_g_step = t["d_steps_per_g_step"].get<int>();
        if (t.contains("lr_g")) cfg.train.lr_g = t["lr_g"].get<double>();
        if (t.contains("lr_d")) cfg.train.lr_d = t["lr_d"].get<double>();
    }
    if (j.contains("score")) {
        const json& s = j["score"];
        reject_unknown(s, "score", {"inversion_steps", "inversion_lr", "lambda", "mode"});
        if (s.contains("inversion_steps"))
            cfg.score.inversion_steps = s["inversion_steps"].get<int>();
        if (s.contains("inversion_lr")) cfg.score.inversion_lr = s["inversion_lr"].get<double>();
        if (s.contains("lambda")) cfg.score.lambda = s["lambda"].get<double>();
        if (s.contains("mode")) {
            const std::string mode = s["mode"].get<std::string>();
            if (mode == "inversion")
                cfg.score.mode = ScoreConfig::Mode::Inversion;
            else if (mode == "discriminator")
                cfg.score.mode = ScoreConfig::Mode::Discriminator;
            else
                throw ConfigError("score.mode must be 'inversion' or 'discriminator'");
        }
    }
    if (j.contains("iforest")) {
        const json& f = j["iforest"];
        reject_unknown(f, "iforest", {"n_trees", "subsample"});
        if (f.contains("n_trees")) cfg.iforest.n_trees = f["n_trees"].get<int>();
        if (f.contains("subsample")) cfg.iforest.subsample = f["subsample"].get<int>();
    }
    if (j.contains("lof")) {
        const json& l = j["lof"];
        reject_unknown(l, "lof", {"k"});
        if (l.contains("k")) cfg.lof.k = l["k"].get<int>();
    }
    if (j.contains("autoencoder")) {
        const json& a = j["autoencoder"];
        reject_unknown(a, "autoencoder",
                       {"hidden_dim", "bottleneck_dim", "epochs", "batch_size", "learning_rate"});
        if (a.contains("hidden_dim")) cfg.autoencoder.hidden_dim = a["hidden_dim"].get<int>();
        if (a.contains("bottleneck_dim"))
            cfg.autoencoder.bottleneck_dim = a["bottleneck_dim"].get<int>();
        if (a.contains("epochs")) cfg.autoencoder.epochs = a["epochs"].get<int>();
        if (a.contains("batch_size")) cfg.autoencoder.batch_size = a["batch_size"].get<int>();
        if (a.contains("learning_rate"))
            cfg.autoencoder.learning_rate = a["learning_rate"].get<double>();
    }
    if (j.contains("method")) {
        cfg.method = j["method"].get<std::string>();
        static const std::set<std::string> methods{"rangan", "autoencoder", "zscore", "iforest",
                                                   "lof"};
        if (!methods.count(cfg.method))
            throw ConfigError("method must be one of rangan|autoencoder|zscore|iforest|lof, "
                              "got '" + cfg.method + "'");
    }
    if (j.contains("threshold")) {
        const json& t = j["threshold"];
        reject_unknown(t, "threshold", {"strategy", "p"});
        const std::string strategy =
            t.contains("strategy") ? t["strategy"].get<std::string>() : "max_f1";
        if (strategy == "max_f1") {
            cfg.threshold = ThresholdStrategy::max_f1();
        } else if (strategy == "percentile") {
            cfg.threshold =
                ThresholdStrategy::percentile_of(t.contains("p") ? t["p"].get<double>() : 95.0);
        } else {
            throw ConfigError("threshold.strategy must be 'max_f1' or 'percentile'");
        }
    }
    if (j.contains("seed")) {
        cfg.seed = j["seed"].get<std::uint64_t>();
        if (!j.contains("data") || !j["data"].contains("scenario_seed"))
            cfg.scenario_seed = cfg.seed;
    }
    if (j.contains("out")) cfg.out_dir = j["out"].get<std::string>();
}

}  // namespace

RunConfig parse_config(const std::string& json_text, const RunConfig& base) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig cfg = base;
    try {
        parse_into(j, cfg);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field has the wrong type: ") + e.what());
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config(text);
}

std::uint64_t derive_seed(std::uint64_t master, SeedStream stream) {
    return Rng(master).child(static_cast<std::uint64_t>(stream)).seed();
}

PreparedData prepare_data(const RunConfig& cfg) {
    cfg.validate();
    KpiFrame frame;
    if (cfg.data_path.empty()) {
        ScenarioSpec spec = default_benchmark_spec(cfg.scenario_seed);
        frame = generate(spec).frame;
    } else {
        frame = load_csv(cfg.data_path);
    }
    if (!cfg.kpi.empty()) frame = frame.select(cfg.kpi);

    PreparedData out;
    auto [train_frame, test_frame] = split(frame, cfg.split_fraction);
    out.norm = fit_minmax(train_frame);
    out.train_frame = apply_minmax(train_frame, out.norm);
    out.test_frame = apply_minmax(test_frame, out.norm);
    out.train_windows = slide(out.train_frame, cfg.window_size, cfg.stride);
    out.test_windows = slide(out.test_frame, cfg.window_size, cfg.stride);
    return out;
}

PipelineResult run_pipeline(const RunConfig& cfg) {
    PreparedData data = prepare_data(cfg);
    if (data.train_windows.count() == 0)
        throw ContractError("pipeline: the training split yields no windows");
    if (data.test_windows.count() == 0)
        throw ContractError("pipeline: the test split yields no windows");

    PipelineResult result;
    result.test_labels = data.test_windows.window_labels;
    result.trace.window_size = cfg.window_size;
    result.trace.origin_index = data.test_windows.origin_index;

    if (cfg.method == "rangan") {
        ModelConfig mc = cfg.model;
        mc.window_size = cfg.window_size;
        mc.feature_count = static_cast<int>(data.train_windows.feature_count);
        auto model = std::make_shared<GanModel>(mc, derive_seed(cfg.seed, SeedStream::ModelInit));
        TrainConfig tc = cfg.train;
        tc.seed = derive_seed(cfg.seed, SeedStream::Train);
        result.train_log = train(*model, data.train_windows, tc);
        ScoreConfig sc = cfg.score;
        sc.seed = derive_seed(cfg.seed, SeedStream::Score);
        result.trace = score_windows(*model, data.test_windows, sc);
        result.model = model;
    } else if (cfg.method == "zscore") {
        ZscoreDetector det;
        det.fit(data.train_windows);
        result.trace.scores = det.score(data.test_windows);
    } else if (cfg.method == "iforest") {
        IsolationForestConfig fc = cfg.iforest;
        fc.seed = derive_seed(cfg.seed, SeedStream::Baseline);
        IsolationForest det(fc);
        det.fit(data.train_windows);
        result.trace.scores = det.score(data.test_windows);
    } else if (cfg.method == "lof") {
        LocalOutlierFactor det(cfg.lof);
        det.fit(data.train_windows);
        result.trace.scores = det.score(data.test_windows);
    } else {  // autoencoder
        AutoencoderConfig ac = cfg.autoencoder;
        ac.seed = derive_seed(cfg.seed, SeedStream::Baseline);
        WindowAutoencoder det(ac);
        det.fit(data.train_windows);
        result.trace.scores = det.score(data.test_windows);
    }

    result.report = evaluate(result.trace.scores, result.test_labels, cfg.threshold);
    result.report.method = cfg.method;
    result.report.window_size = cfg.window_size;
    return result;
}

void save_scores_csv(const ScoreTrace& trace, const std::vector<std::uint8_t>& labels,
                     const std::string& path) {
    if (labels.size() != trace.scores.size())
        throw ContractError("save_scores_csv: labels length differs from scores");
    std::string out = "window_index,origin_index,score,label\n";
    char buf[64];
    for (std::size_t i = 0; i < trace.scores.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%d\n", i, trace.origin_index[i],
                      trace.scores[i], static_cast<int>(labels[i]));
        out += buf;
    }
    write_file_atomic(path, out);
}

LoadedScores load_scores_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scores file '" + path + "'");
    std::string line;
    long lineno = 0;
    if (!std::getline(in, line)) throw ParseError("empty scores file", 1);
    ++lineno;
    LoadedScores out;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::size_t wi, oi;
        double score;
        int label;
        if (std::sscanf(line.c_str(), "%zu,%zu,%lf,%d", &wi, &oi, &score, &label) != 4 ||
            (label != 0 && label != 1))
            throw ParseError("malformed scores row", lineno);
        out.trace.scores.push_back(score);
        out.trace.origin_index.push_back(oi);
        out.labels.push_back(static_cast<std::uint8_t>(label));
    }
    return out;
}

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw ParseError("cannot write '" + tmp + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw ParseError("short write to '" + tmp + "'");
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace rangan
