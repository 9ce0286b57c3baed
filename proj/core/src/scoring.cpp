#include <algorithm>
#include <cmath>
#include <cstring>

#include "rangan/gan.hpp"

namespace rangan {
namespace {

constexpr std::size_t kScoreChunk = 128;  // windows inverted per batched pass

struct BatchInversion {
    std::vector<double> z;          // C x latent_dim, final latents
    std::vector<double> residual;   // C
    std::vector<std::vector<double>> traces;  // per window, when requested
};

// Batched gradient descent on the per-window mean absolute reconstruction
// error, with deferred per-window backtracking: each iteration evaluates the
// step taken by the previous one, and a window whose objective went up falls
// back to its last accepted point with its step size halved. One
// forward/backward pass per iteration; the recorded residual trace is the
// best objective so far and is non-increasing. Latent starts are seeded per
// window tag so results do not depend on how windows are chunked.
BatchInversion invert_batch(const GanModel& model, const double* windows, std::size_t count,
                            const std::vector<std::uint64_t>& tags, const ScoreConfig& cfg,
                            const double* warm_start, bool keep_traces) {
    const ModelConfig& mc = model.config();
    const int zdim = mc.latent_dim;
    const int c = static_cast<int>(count);
    const std::size_t zlen = static_cast<std::size_t>(zdim);
    const std::size_t wlen =
        static_cast<std::size_t>(mc.window_size) * static_cast<std::size_t>(mc.feature_count);

    Tensor target({c * mc.window_size, mc.feature_count},
                  std::vector<double>(windows, windows + count * wlen), false);

    std::vector<double> iterate(count * zlen);
    if (warm_start) {
        std::memcpy(iterate.data(), warm_start, iterate.size() * sizeof(double));
    } else {
        Rng base(cfg.seed);
        for (std::size_t i = 0; i < count; ++i) {
            Rng r = base.child(tags[i]);
            for (std::size_t j = 0; j < zlen; ++j) iterate[i * zlen + j] = r.normal();
        }
    }

    BatchInversion out;
    if (keep_traces) out.traces.resize(count);

    std::vector<double> lr(count, cfg.inversion_lr);
    std::vector<double> best_z = iterate;
    std::vector<double> best_f, best_g(count * zlen, 0.0);

    for (int step = 0; step <= cfg.inversion_steps; ++step) {
        const bool need_grad = step < cfg.inversion_steps;
        Tape tape(need_grad ? Tape::Mode::Grad : Tape::Mode::NoGrad);
        Tensor z({c, zdim}, iterate, need_grad);
        Tensor gen = model.generator().forward(tape, z, mc, nullptr);
        Tensor per_window = tape.l1_rowblocks(gen, target, c);
        if (need_grad) tape.backward(tape.sum(per_window));
        const double* f = per_window.data().data();
        const double* g = need_grad ? z.grad().data() : nullptr;

        if (step == 0) {
            best_f.assign(f, f + count);
            if (g) std::memcpy(best_g.data(), g, best_g.size() * sizeof(double));
        } else {
            for (std::size_t i = 0; i < count; ++i) {
                if (f[i] <= best_f[i]) {
                    best_f[i] = f[i];
                    std::memcpy(best_z.data() + i * zlen, iterate.data() + i * zlen,
                                zlen * sizeof(double));
                    if (g)
                        std::memcpy(best_g.data() + i * zlen, g + i * zlen,
                                    zlen * sizeof(double));
                } else {
                    lr[i] *= 0.5;  // step rejected: halve and retry from the best point
                }
            }
        }
        if (keep_traces)
            for (std::size_t i = 0; i < count; ++i) out.traces[i].push_back(best_f[i]);
        if (!need_grad) break;

        for (std::size_t i = 0; i < count; ++i)
            for (std::size_t j = 0; j < zlen; ++j)
                iterate[i * zlen + j] = best_z[i * zlen + j] - lr[i] * best_g[i * zlen + j];
    }

    out.z = std::move(best_z);
    out.residual = std::move(best_f);
    return out;
}

// Pooled discriminator features for a batch of flat windows.
std::vector<double> features_of(const GanModel& model, const Tensor& flat, int count) {
    Tape tape(Tape::Mode::NoGrad);
    Tensor features;
    model.discriminator().forward(tape, flat, model.config(), nullptr, &features);
    (void)count;
    return {features.data().begin(), features.data().end()};
}

}  // namespace

InversionResult invert_latent(const GanModel& model, std::span<const double> window,
                              const ScoreConfig& cfg, std::span<const double> warm_start) {
    cfg.validate();
    const ModelConfig& mc = model.config();
    const std::size_t wlen =
        static_cast<std::size_t>(mc.window_size) * static_cast<std::size_t>(mc.feature_count);
    if (window.size() != wlen)
        throw DimensionError("invert_latent: window length " + std::to_string(window.size()) +
                             " != w*F = " + std::to_string(wlen));
    if (!warm_start.empty() && warm_start.size() != static_cast<std::size_t>(mc.latent_dim))
        throw DimensionError("invert_latent: warm start length must equal latent_dim");

    BatchInversion batch =
        invert_batch(model, window.data(), 1, {0}, cfg,
                     warm_start.empty() ? nullptr : warm_start.data(), true);
    InversionResult res;
    res.z = std::move(batch.z);
    res.residual = batch.residual[0];
    res.trace = std::move(batch.traces[0]);
    return res;
}

double anomaly_score(const GanModel& model, std::span<const double> window,
                     const ScoreConfig& cfg) {
    WindowSet one;
    one.window_size = model.config().window_size;
    one.stride = 1;
    one.feature_count = static_cast<std::size_t>(model.config().feature_count);
    one.windows.assign(window.begin(), window.end());
    one.window_labels = {0};
    one.origin_index = {0};
    return score_windows(model, one, cfg).scores[0];
}

ScoreTrace score_windows(const GanModel& model, const WindowSet& windows,
                         const ScoreConfig& cfg) {
    cfg.validate();
    const ModelConfig& mc = model.config();
    if (windows.window_size != mc.window_size ||
        windows.feature_count != static_cast<std::size_t>(mc.feature_count))
        throw DimensionError("score_windows: window set shape does not match the model config");

    ScoreTrace trace;
    trace.window_size = windows.window_size;
    trace.origin_index = windows.origin_index;
    trace.scores.resize(windows.count());

    const int d = mc.model_dim;
    const std::size_t wlen = windows.window_len();

    for (std::size_t begin = 0; begin < windows.count(); begin += kScoreChunk) {
        const std::size_t count = std::min(kScoreChunk, windows.count() - begin);
        const int c = static_cast<int>(count);
        Tensor flat({c * mc.window_size, mc.feature_count},
                    std::vector<double>(windows.window(begin), windows.window(begin) + count * wlen),
                    false);

        if (cfg.mode == ScoreConfig::Mode::Discriminator) {
            Tape tape(Tape::Mode::NoGrad);
            Tensor s = model.discriminator().forward(tape, flat, mc, nullptr);
            for (std::size_t i = 0; i < count; ++i)
                trace.scores[begin + i] = 1.0 - s.data()[i];
            continue;
        }

        std::vector<std::uint64_t> tags(count);
        for (std::size_t i = 0; i < count; ++i)
            tags[i] = static_cast<std::uint64_t>(begin + i);
        BatchInversion inv =
            invert_batch(model, windows.window(begin), count, tags, cfg, nullptr, false);

        std::vector<double> feat_x = features_of(model, flat, c);
        std::vector<double> feat_g;
        {
            Tape tape(Tape::Mode::NoGrad);
            Tensor z({c, mc.latent_dim}, inv.z, false);
            Tensor gen = model.generator().forward(tape, z, mc, nullptr);
            feat_g = features_of(model, gen, c);
        }
        for (std::size_t i = 0; i < count; ++i) {
            double l1 = 0.0;
            for (int j = 0; j < d; ++j)
                l1 += std::abs(feat_x[i * d + j] - feat_g[i * d + j]);
            trace.scores[begin + i] =
                (1.0 - cfg.lambda) * inv.residual[i] + cfg.lambda * l1 / d;
        }
    }
    return trace;
}

}  // namespace rangan
