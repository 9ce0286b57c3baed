#include "rangan/transformer.hpp"

#include <cmath>

namespace rangan {

void ModelConfig::validate() const {
    if (window_size < 2) throw ConfigError("model.window_size must be >= 2");
    if (feature_count < 1) throw ConfigError("model.feature_count must be >= 1");
    if (latent_dim < 1) throw ConfigError("model.latent_dim must be >= 1");
    if (model_dim < 1) throw ConfigError("model.model_dim must be >= 1");
    if (attention_heads < 1) throw ConfigError("model.attention_heads must be >= 1");
    if (model_dim % attention_heads != 0)
        throw ConfigError("model.model_dim must be divisible by model.attention_heads");
    if (blocks_per_net < 1) throw ConfigError("model.blocks_per_net must be >= 1");
    if (feedforward_dim < 1) throw ConfigError("model.feedforward_dim must be >= 1");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw ConfigError("model.dropout_rate must lie in [0, 1)");
}

void Linear::init(int in, int out, Rng& rng) {
    w = Tensor::glorot_uniform(in, out, rng);
    b = Tensor::zeros({out}, true);
}

Tensor Linear::forward(Tape& tape, const Tensor& x) const {
    return tape.add_rowvec(tape.matmul(x, w), b);
}

void Linear::collect(const std::string& prefix, NamedParams& out) const {
    out.emplace_back(prefix + ".w", w);
    out.emplace_back(prefix + ".b", b);
}

Tensor sinusoidal_positions(int n, int d) {
    std::vector<double> data(static_cast<std::size_t>(n) * d);
    for (int p = 0; p < n; ++p) {
        for (int i = 0; i < d; i += 2) {
            const double freq = std::pow(10000.0, -static_cast<double>(i) / d);
            data[static_cast<std::size_t>(p) * d + i] = std::sin(p * freq);
            if (i + 1 < d) data[static_cast<std::size_t>(p) * d + i + 1] = std::cos(p * freq);
        }
    }
    return Tensor({n, d}, std::move(data), false);
}

Tensor attention(Tape& tape, const Tensor& q, const Tensor& k, const Tensor& v,
                 const Tensor& w_mix, int heads, std::vector<double>* weights_out) {
    Tensor heads_out = tape.attention_heads(q, k, v, /*blocks=*/1, heads, weights_out);
    return tape.matmul(heads_out, w_mix);
}

void TransformerBlock::init(int d, int ff, Rng& rng) {
    ln1_gamma = Tensor::full({d}, 1.0, true);
    ln1_beta = Tensor::zeros({d}, true);
    wq.init(d, d, rng);
    wk.init(d, d, rng);
    wv.init(d, d, rng);
    wo.init(d, d, rng);
    ln2_gamma = Tensor::full({d}, 1.0, true);
    ln2_beta = Tensor::zeros({d}, true);
    ff1.init(d, ff, rng);
    ff2.init(ff, d, rng);
}

Tensor TransformerBlock::forward(Tape& tape, const Tensor& x, int blocks, int heads,
                                 double dropout_rate, Rng* drop_rng) const {
    Tensor a = tape.layer_norm(x, ln1_gamma, ln1_beta);
    Tensor att = tape.attention_heads(wq.forward(tape, a), wk.forward(tape, a),
                                      wv.forward(tape, a), blocks, heads);
    att = wo.forward(tape, att);
    if (drop_rng && dropout_rate > 0.0) att = tape.dropout(att, dropout_rate, *drop_rng);
    Tensor h = tape.add(x, att);

    Tensor b = tape.layer_norm(h, ln2_gamma, ln2_beta);
    Tensor f = ff2.forward(tape, tape.relu(ff1.forward(tape, b)));
    if (drop_rng && dropout_rate > 0.0) f = tape.dropout(f, dropout_rate, *drop_rng);
    return tape.add(h, f);
}

void TransformerBlock::collect(const std::string& prefix, NamedParams& out) const {
    out.emplace_back(prefix + ".ln1.gamma", ln1_gamma);
    out.emplace_back(prefix + ".ln1.beta", ln1_beta);
    wq.collect(prefix + ".attn.wq", out);
    wk.collect(prefix + ".attn.wk", out);
    wv.collect(prefix + ".attn.wv", out);
    wo.collect(prefix + ".attn.wo", out);
    out.emplace_back(prefix + ".ln2.gamma", ln2_gamma);
    out.emplace_back(prefix + ".ln2.beta", ln2_beta);
    ff1.collect(prefix + ".ff1", out);
    ff2.collect(prefix + ".ff2", out);
}

}  // namespace rangan
