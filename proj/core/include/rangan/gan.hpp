#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rangan/transformer.hpp"
#include "rangan/windowing.hpp"

namespace rangan {

struct TrainConfig {
    int epochs = 10;
    int batch_size = 64;
    int d_steps_per_g_step = 1;
    double lr_g = 2e-4;
    double lr_d = 2e-4;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainLogEntry {
    int epoch;
    double d_loss;
    double g_loss;
};

struct TrainLog {
    std::vector<TrainLogEntry> entries;
};

struct ScoreConfig {
    enum class Mode { Inversion, Discriminator };

    int inversion_steps = 32;
    double inversion_lr = 0.1;
    double lambda = 0.1;  // residual vs discriminator-feature weighting
    Mode mode = Mode::Inversion;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Latent noise -> window-shaped sample, all values in (0, 1).
struct GeneratorNet {
    Linear embed;  // latent_dim -> w * d
    Tensor posenc; // [w x d], fixed
    std::vector<TransformerBlock> blocks;
    Tensor lnf_gamma, lnf_beta;
    Linear head;   // d -> F

    /// z [B x latent_dim] -> flat [(B*w) x F].
    Tensor forward(Tape& tape, const Tensor& z, const ModelConfig& cfg, Rng* drop_rng) const;
};

/// Window -> realness score in (0, 1) plus pooled penultimate features.
struct DiscriminatorNet {
    Linear embed;  // F -> d
    Tensor posenc;
    std::vector<TransformerBlock> blocks;
    Tensor lnf_gamma, lnf_beta;
    Linear head;   // d -> 1

    /// x flat [(B*w) x F] -> scores [B x 1]; features_out, when given,
    /// receives the pooled [B x d] representation feeding the head.
    Tensor forward(Tape& tape, const Tensor& x, const ModelConfig& cfg, Rng* drop_rng,
                   Tensor* features_out = nullptr) const;
};

class GanModel {
public:
    GanModel(ModelConfig config, std::uint64_t init_seed);

    const ModelConfig& config() const { return config_; }
    const GeneratorNet& generator() const { return gen_; }
    const DiscriminatorNet& discriminator() const { return dis_; }
    GeneratorNet& generator() { return gen_; }
    DiscriminatorNet& discriminator() { return dis_; }

    NamedParams generator_params() const;
    NamedParams discriminator_params() const;
    NamedParams all_params() const;

    /// Evaluation-mode sample: z [batch x latent_dim] -> [batch, w, F],
    /// every element in (0, 1). Deterministic (dropout disabled).
    Tensor generator_forward(const Tensor& z) const;

    /// Evaluation-mode critique: x [batch, w, F] (or flat [(batch*w) x F])
    /// -> (scores [batch], features [batch x d]).
    std::pair<Tensor, Tensor> discriminator_forward(const Tensor& x) const;

private:
    ModelConfig config_;
    GeneratorNet gen_;
    DiscriminatorNet dis_;
};

/// Adversarial training on the window contents (labels ignored). Alternates
/// d_steps_per_g_step discriminator updates with one generator update over
/// shuffled mini-batches; a fixed seed makes the run bit-reproducible.
TrainLog train(GanModel& model, const WindowSet& windows, const TrainConfig& cfg);

struct InversionResult {
    std::vector<double> z;      // latent_dim
    double residual = 0.0;      // final mean-absolute reconstruction error
    std::vector<double> trace;  // residual per recorded iteration, non-increasing
};

/// Gradient search for the latent vector reconstructing `window` (flat w*F),
/// cfg.inversion_steps steps of descent on the mean absolute error with
/// per-window step-halving whenever the objective would increase.
InversionResult invert_latent(const GanModel& model, std::span<const double> window,
                              const ScoreConfig& cfg,
                              std::span<const double> warm_start = {});

/// (1 - lambda) * residual + lambda * ||feat(x) - feat(G(z*))||_1 / d.
double anomaly_score(const GanModel& model, std::span<const double> window,
                     const ScoreConfig& cfg);

struct ScoreTrace {
    std::vector<double> scores;            // higher = more anomalous
    std::vector<std::size_t> origin_index; // aligned with the source WindowSet
    int window_size = 0;
};

/// anomaly_score over every window, order-preserving. Window i's latent
/// start is seeded from (cfg.seed, i), so results do not depend on the
/// internal evaluation batching.
ScoreTrace score_windows(const GanModel& model, const WindowSet& windows,
                         const ScoreConfig& cfg);

/// Binary checkpoint: "RANGANCK" magic, version, config, named parameter
/// blobs (little-endian f64), CRC-32 trailer. docs/checkpoint_format.md
/// has the byte layout; round-trips are bit-exact.
void save_model(const GanModel& model, const std::string& path);
GanModel load_model(const std::string& path);

}  // namespace rangan
