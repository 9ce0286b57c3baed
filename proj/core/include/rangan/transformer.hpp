#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rangan/tensor.hpp"

namespace rangan {

/// Topology of one network (generator or discriminator).
struct ModelConfig {
    int window_size = 60;
    int feature_count = 5;
    int latent_dim = 32;
    int model_dim = 32;
    int attention_heads = 4;
    int blocks_per_net = 2;
    int feedforward_dim = 64;
    double dropout_rate = 0.1;

    void validate() const;
};

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

struct Linear {
    Tensor w;  // [in x out]
    Tensor b;  // [out]

    void init(int in, int out, Rng& rng);
    Tensor forward(Tape& tape, const Tensor& x) const;
    void collect(const std::string& prefix, NamedParams& out) const;
};

/// Fixed sinusoidal position offsets, [n x d]; not learned.
Tensor sinusoidal_positions(int n, int d);

/// Full multi-head attention: softmax(q.k^T / sqrt(d_head)).v per head,
/// heads concatenated, then mixed by w_mix [d x d]. Rows of the weight
/// matrices are stochastic for any finite input.
Tensor attention(Tape& tape, const Tensor& q, const Tensor& k, const Tensor& v,
                 const Tensor& w_mix, int heads, std::vector<double>* weights_out = nullptr);

/// Pre-norm transformer block over `blocks` independent row groups of a
/// [(B*n) x d] activation matrix. `drop_rng` enables dropout (training);
/// pass nullptr for deterministic evaluation.
struct TransformerBlock {
    Tensor ln1_gamma, ln1_beta;
    Linear wq, wk, wv, wo;
    Tensor ln2_gamma, ln2_beta;
    Linear ff1, ff2;

    void init(int d, int ff, Rng& rng);
    Tensor forward(Tape& tape, const Tensor& x, int blocks, int heads, double dropout_rate,
                   Rng* drop_rng) const;
    void collect(const std::string& prefix, NamedParams& out) const;
};

}  // namespace rangan
