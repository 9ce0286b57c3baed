#include "rangan/gan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rangan/optimizer.hpp"

namespace rangan {

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (d_steps_per_g_step < 1) throw ConfigError("train.d_steps_per_g_step must be >= 1");
    if (lr_g <= 0.0) throw ConfigError("train.lr_g must be positive");
    if (lr_d <= 0.0) throw ConfigError("train.lr_d must be positive");
}

void ScoreConfig::validate() const {
    if (inversion_steps < 0) throw ConfigError("score.inversion_steps must be >= 0");
    if (inversion_lr <= 0.0) throw ConfigError("score.inversion_lr must be positive");
    if (lambda < 0.0 || lambda > 1.0) throw ConfigError("score.lambda must lie in [0, 1]");
}

// ---- networks ---------------------------------------------------------------

Tensor GeneratorNet::forward(Tape& tape, const Tensor& z, const ModelConfig& cfg,
                             Rng* drop_rng) const {
    if (z.rank() != 2 || z.cols() != cfg.latent_dim)
        throw DimensionError("generator: latent input must be [batch x " +
                             std::to_string(cfg.latent_dim) + "]");
    const int batch = z.rows();
    Tensor h = embed.forward(tape, z);                                 // [B x w*d]
    h = tape.reshape(h, {batch * cfg.window_size, cfg.model_dim});     // [(B*w) x d]
    h = tape.add_tiled(h, posenc);
    for (const auto& blk : blocks)
        h = blk.forward(tape, h, batch, cfg.attention_heads, cfg.dropout_rate, drop_rng);
    h = tape.layer_norm(h, lnf_gamma, lnf_beta);
    return tape.sigmoid(head.forward(tape, h));                        // [(B*w) x F]
}

Tensor DiscriminatorNet::forward(Tape& tape, const Tensor& x, const ModelConfig& cfg,
                                 Rng* drop_rng, Tensor* features_out) const {
    if (x.rank() != 2 || x.cols() != cfg.feature_count || x.rows() % cfg.window_size != 0)
        throw DimensionError("discriminator: input must be [(batch*" +
                             std::to_string(cfg.window_size) + ") x " +
                             std::to_string(cfg.feature_count) + "]");
    const int batch = x.rows() / cfg.window_size;
    Tensor h = embed.forward(tape, x);
    h = tape.add_tiled(h, posenc);
    for (const auto& blk : blocks)
        h = blk.forward(tape, h, batch, cfg.attention_heads, cfg.dropout_rate, drop_rng);
    h = tape.layer_norm(h, lnf_gamma, lnf_beta);
    Tensor pooled = tape.mean_rowblocks(h, batch);                     // [B x d]
    if (features_out) *features_out = pooled;
    return tape.sigmoid(head.forward(tape, pooled));                   // [B x 1]
}

// ---- model ------------------------------------------------------------------

GanModel::GanModel(ModelConfig config, std::uint64_t init_seed) : config_(config) {
    config_.validate();
    Rng rng(init_seed);
    const int w = config_.window_size, d = config_.model_dim;

    gen_.embed.init(config_.latent_dim, w * d, rng);
    gen_.posenc = sinusoidal_positions(w, d);
    gen_.blocks.resize(static_cast<std::size_t>(config_.blocks_per_net));
    for (auto& blk : gen_.blocks) blk.init(d, config_.feedforward_dim, rng);
    gen_.lnf_gamma = Tensor::full({d}, 1.0, true);
    gen_.lnf_beta = Tensor::zeros({d}, true);
    gen_.head.init(d, config_.feature_count, rng);

    dis_.embed.init(config_.feature_count, d, rng);
    dis_.posenc = sinusoidal_positions(w, d);
    dis_.blocks.resize(static_cast<std::size_t>(config_.blocks_per_net));
    for (auto& blk : dis_.blocks) blk.init(d, config_.feedforward_dim, rng);
    dis_.lnf_gamma = Tensor::full({d}, 1.0, true);
    dis_.lnf_beta = Tensor::zeros({d}, true);
    dis_.head.init(d, 1, rng);
}

NamedParams GanModel::generator_params() const {
    NamedParams out;
    gen_.embed.collect("g.embed", out);
    for (std::size_t i = 0; i < gen_.blocks.size(); ++i)
        gen_.blocks[i].collect("g.block" + std::to_string(i), out);
    out.emplace_back("g.lnf.gamma", gen_.lnf_gamma);
    out.emplace_back("g.lnf.beta", gen_.lnf_beta);
    gen_.head.collect("g.head", out);
    return out;
}

NamedParams GanModel::discriminator_params() const {
    NamedParams out;
    dis_.embed.collect("d.embed", out);
    for (std::size_t i = 0; i < dis_.blocks.size(); ++i)
        dis_.blocks[i].collect("d.block" + std::to_string(i), out);
    out.emplace_back("d.lnf.gamma", dis_.lnf_gamma);
    out.emplace_back("d.lnf.beta", dis_.lnf_beta);
    dis_.head.collect("d.head", out);
    return out;
}

NamedParams GanModel::all_params() const {
    NamedParams out = generator_params();
    NamedParams d = discriminator_params();
    out.insert(out.end(), d.begin(), d.end());
    return out;
}

Tensor GanModel::generator_forward(const Tensor& z) const {
    Tape tape(Tape::Mode::NoGrad);
    Tensor flat = gen_.forward(tape, z, config_, nullptr);
    return tape.reshape(flat, {z.rows(), config_.window_size, config_.feature_count});
}

std::pair<Tensor, Tensor> GanModel::discriminator_forward(const Tensor& x) const {
    Tape tape(Tape::Mode::NoGrad);
    Tensor flat = x;
    if (x.rank() == 3)
        flat = tape.reshape(x, {x.dim(0) * x.dim(1), x.dim(2)});
    Tensor features;
    Tensor scores = dis_.forward(tape, flat, config_, nullptr, &features);
    const int batch = flat.rows() / config_.window_size;
    return {tape.reshape(scores, {batch}), features};
}

// ---- training ---------------------------------------------------------------

namespace {

std::vector<Tensor> values_of(const NamedParams& named) {
    std::vector<Tensor> out;
    out.reserve(named.size());
    for (const auto& [name, t] : named) out.push_back(t);
    return out;
}

Tensor gather_batch(const WindowSet& windows, const std::vector<std::size_t>& order,
                    std::size_t begin, std::size_t count, int window_size, int features) {
    std::vector<double> data;
    data.reserve(count * windows.window_len());
    for (std::size_t i = begin; i < begin + count; ++i) {
        const double* w = windows.window(order[i]);
        data.insert(data.end(), w, w + windows.window_len());
    }
    return Tensor({static_cast<int>(count) * window_size, features}, std::move(data), false);
}

Tensor sample_latent(int batch, int latent_dim, Rng& rng) {
    std::vector<double> z(static_cast<std::size_t>(batch) * latent_dim);
    for (auto& v : z) v = rng.normal();
    return Tensor({batch, latent_dim}, std::move(z), false);
}

}  // namespace

TrainLog train(GanModel& model, const WindowSet& windows, const TrainConfig& cfg) {
    cfg.validate();
    if (windows.count() == 0) throw ContractError("train: empty training window set");
    const ModelConfig& mc = model.config();
    if (windows.window_size != mc.window_size ||
        windows.feature_count != static_cast<std::size_t>(mc.feature_count))
        throw DimensionError("train: window set shape does not match the model config");

    Rng rng(cfg.seed);
    AdamConfig ad_g, ad_d;
    ad_g.learning_rate = cfg.lr_g;
    ad_d.learning_rate = cfg.lr_d;
    AdamOptimizer opt_g(values_of(model.generator_params()), ad_g);
    AdamOptimizer opt_d(values_of(model.discriminator_params()), ad_d);

    const std::size_t n = windows.count();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainLog log;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double d_sum = 0.0, g_sum = 0.0;
        std::size_t d_steps = 0, g_steps = 0;
        int since_g = 0;
        for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t bsz = std::min(static_cast<std::size_t>(cfg.batch_size), n - begin);
            const int b = static_cast<int>(bsz);

            // discriminator step: push D(real) toward 1 and D(G(z)) toward 0
            Tensor real = gather_batch(windows, order, begin, bsz, mc.window_size,
                                       mc.feature_count);
            Tensor z = sample_latent(b, mc.latent_dim, rng);
            Tensor fake;
            {
                Tape gtape(Tape::Mode::NoGrad);
                fake = model.generator().forward(gtape, z, mc, &rng).detach();
            }
            {
                Tape tape;
                Tensor s_real = model.discriminator().forward(tape, real, mc, &rng);
                Tensor s_fake = model.discriminator().forward(tape, fake, mc, &rng);
                Tensor loss = tape.add(tape.bce_loss(s_real, Tensor::full({b, 1}, 1.0)),
                                       tape.bce_loss(s_fake, Tensor::full({b, 1}, 0.0)));
                tape.backward(loss);
                d_sum += loss.value();
                ++d_steps;
                opt_d.step();
            }

            // generator step: non-saturating -log D(G(z))
            if (++since_g >= cfg.d_steps_per_g_step) {
                since_g = 0;
                Tensor zg = sample_latent(b, mc.latent_dim, rng);
                Tape tape;
                Tensor gen = model.generator().forward(tape, zg, mc, &rng);
                Tensor s = model.discriminator().forward(tape, gen, mc, &rng);
                Tensor loss = tape.bce_loss(s, Tensor::full({b, 1}, 1.0));
                tape.backward(loss);
                g_sum += loss.value();
                ++g_steps;
                opt_g.step();
                // the backward pass also filled critic grads; discard them
                for (auto& [name, p] : model.discriminator_params()) p.zero_grad();
            }
        }
        log.entries.push_back({epoch, d_steps ? d_sum / static_cast<double>(d_steps) : 0.0,
                               g_steps ? g_sum / static_cast<double>(g_steps) : 0.0});
    }
    return log;
}

}  // namespace rangan
