#include "rangan/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "rangan/optimizer.hpp"
#include "rangan/rng.hpp"
#include "rangan/tensor.hpp"
#include "rangan/transformer.hpp"

namespace rangan {

// ---- z-score ----------------------------------------------------------------

void ZscoreDetector::fit(const WindowSet& train) {
    if (train.count() == 0) throw ContractError("zscore: empty training window set");
    feature_count_ = train.feature_count;
    mean_.assign(feature_count_, 0.0);
    std_.assign(feature_count_, 0.0);
    const std::size_t rows = train.count() * static_cast<std::size_t>(train.window_size);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t f = 0; f < feature_count_; ++f)
            mean_[f] += train.windows[r * feature_count_ + f];
    for (auto& m : mean_) m /= static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t f = 0; f < feature_count_; ++f) {
            const double d = train.windows[r * feature_count_ + f] - mean_[f];
            std_[f] += d * d;
        }
    for (auto& s : std_) s = std::sqrt(s / static_cast<double>(rows));
}

double ZscoreDetector::score_one(std::span<const double> window) const {
    double best = 0.0;
    const std::size_t rows = window.size() / feature_count_;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t f = 0; f < feature_count_; ++f) {
            if (std_[f] == 0.0) continue;
            best = std::max(best, std::abs(window[r * feature_count_ + f] - mean_[f]) / std_[f]);
        }
    return best;
}

std::vector<double> ZscoreDetector::score(const WindowSet& windows) const {
    if (windows.feature_count != feature_count_)
        throw DimensionError("zscore: feature count differs from the fitted set");
    std::vector<double> out(windows.count());
    for (std::size_t i = 0; i < windows.count(); ++i)
        out[i] = score_one({windows.window(i), windows.window_len()});
    return out;
}

// ---- isolation forest ---------------------------------------------------------

double iforest_average_path_length(std::size_t n) {
    if (n <= 1) return 0.0;
    const double m = static_cast<double>(n - 1);
    double harmonic;
    if (n - 1 <= 1024) {
        harmonic = 0.0;
        for (std::size_t i = 1; i <= n - 1; ++i) harmonic += 1.0 / static_cast<double>(i);
    } else {
        harmonic = std::log(m) + 0.5772156649015329;  // Euler-Mascheroni
    }
    return 2.0 * harmonic - 2.0 * m / static_cast<double>(n);
}

void IsolationForest::fit(const WindowSet& train) {
    if (train.count() == 0) throw ContractError("iforest: empty training window set");
    if (cfg_.subsample < 2) throw ContractError("iforest: subsample must be >= 2");
    dim_ = train.window_len();
    const std::size_t n = train.count();
    subsample_used_ = static_cast<std::size_t>(cfg_.subsample);
    if (subsample_used_ > n) {
        std::fprintf(stderr, "iforest: subsample %zu reduced to %zu training windows\n",
                     subsample_used_, n);
        subsample_used_ = n;
    }
    const int height_limit =
        static_cast<int>(std::ceil(std::log2(static_cast<double>(subsample_used_))));

    Rng rng(cfg_.seed);
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});

    trees_.clear();
    trees_.resize(static_cast<std::size_t>(cfg_.n_trees));
    for (auto& tree : trees_) {
        // partial Fisher-Yates: the first subsample_used_ entries are the sample
        for (std::size_t i = 0; i < subsample_used_; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
            std::swap(pool[i], pool[j]);
        }
        std::vector<std::size_t> sample(pool.begin(),
                                        pool.begin() + static_cast<long>(subsample_used_));

        // iterative build; each frame owns a [begin, end) slice of `sample`
        struct Frame {
            std::size_t begin, end;
            int depth;
            int node;
        };
        auto& nodes = tree;
        nodes.push_back({});
        std::vector<Frame> stack{{0, subsample_used_, 0, 0}};
        while (!stack.empty()) {
            Frame fr = stack.back();
            stack.pop_back();
            const std::size_t count = fr.end - fr.begin;
            nodes[static_cast<std::size_t>(fr.node)].size = count;
            if (count <= 1 || fr.depth >= height_limit) continue;

            // choose among features that actually spread within this node
            std::vector<int> spread;
            for (std::size_t f = 0; f < dim_; ++f) {
                double lo = train.windows[sample[fr.begin] * dim_ + f], hi = lo;
                for (std::size_t i = fr.begin + 1; i < fr.end; ++i) {
                    const double v = train.windows[sample[i] * dim_ + f];
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
                if (hi > lo) spread.push_back(static_cast<int>(f));
            }
            if (spread.empty()) continue;  // all duplicates: leaf

            const int feature = spread[rng.below(spread.size())];
            double lo = train.windows[sample[fr.begin] * dim_ + feature], hi = lo;
            for (std::size_t i = fr.begin + 1; i < fr.end; ++i) {
                const double v = train.windows[sample[i] * dim_ + feature];
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            const double split = rng.uniform(lo, hi);

            auto mid_it = std::partition(
                sample.begin() + static_cast<long>(fr.begin),
                sample.begin() + static_cast<long>(fr.end),
                [&](std::size_t s) { return train.windows[s * dim_ + feature] < split; });
            const std::size_t mid =
                static_cast<std::size_t>(mid_it - sample.begin());
            if (mid == fr.begin || mid == fr.end) continue;  // degenerate split: leaf

            const int left = static_cast<int>(nodes.size());
            const int right = left + 1;
            nodes.push_back({});
            nodes.push_back({});  // may reallocate: re-index the parent below
            Node& parent = nodes[static_cast<std::size_t>(fr.node)];
            parent.feature = feature;
            parent.split = split;
            parent.left = left;
            parent.right = right;
            stack.push_back({mid, fr.end, fr.depth + 1, right});
            stack.push_back({fr.begin, mid, fr.depth + 1, left});
        }
    }
}

double IsolationForest::path_length(const std::vector<Node>& tree, const double* x) const {
    int idx = 0;
    double depth = 0.0;
    while (tree[static_cast<std::size_t>(idx)].feature >= 0) {
        const Node& node = tree[static_cast<std::size_t>(idx)];
        idx = x[node.feature] < node.split ? node.left : node.right;
        depth += 1.0;
    }
    return depth + iforest_average_path_length(tree[static_cast<std::size_t>(idx)].size);
}

double IsolationForest::score_one(std::span<const double> window) const {
    if (trees_.empty()) throw ContractError("iforest: score before fit");
    double mean_path = 0.0;
    for (const auto& tree : trees_) mean_path += path_length(tree, window.data());
    mean_path /= static_cast<double>(trees_.size());
    return std::pow(2.0, -mean_path / iforest_average_path_length(subsample_used_));
}

std::vector<double> IsolationForest::score(const WindowSet& windows) const {
    std::vector<double> out(windows.count());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long i = 0; i < static_cast<long>(windows.count()); ++i)
        out[static_cast<std::size_t>(i)] =
            score_one({windows.window(static_cast<std::size_t>(i)), windows.window_len()});
    return out;
}

// ---- local outlier factor -----------------------------------------------------

namespace {

constexpr double kLrdEps = 1e-10;

double sqdist(const double* a, const double* b, std::size_t d) {
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double diff = a[i] - b[i];
        acc += diff * diff;
    }
    return acc;
}

// k smallest (distance, index) pairs, ties broken by index
void k_nearest(const std::vector<std::pair<double, std::size_t>>& all, std::size_t k,
               std::vector<std::pair<double, std::size_t>>& out) {
    out = all;
    std::partial_sort(out.begin(), out.begin() + static_cast<long>(k), out.end());
    out.resize(k);
}

}  // namespace

void LocalOutlierFactor::fit(const WindowSet& train) {
    const std::size_t k = static_cast<std::size_t>(cfg_.k);
    n_ = train.count();
    dim_ = train.window_len();
    if (cfg_.k < 1) throw ContractError("lof: k must be >= 1");
    if (k >= n_) throw ContractError("lof: k must be smaller than the training window count");
    train_ = train.windows;

    std::vector<std::vector<std::pair<double, std::size_t>>> neighbors(n_);
    kdist_.assign(n_, 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long ii = 0; ii < static_cast<long>(n_); ++ii) {
        const std::size_t i = static_cast<std::size_t>(ii);
        std::vector<std::pair<double, std::size_t>> dists;
        dists.reserve(n_ - 1);
        for (std::size_t j = 0; j < n_; ++j) {
            if (j == i) continue;
            dists.emplace_back(sqdist(&train_[i * dim_], &train_[j * dim_], dim_), j);
        }
        k_nearest(dists, k, neighbors[i]);
        kdist_[i] = std::sqrt(neighbors[i].back().first);
    }

    lrd_.assign(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
        double reach_sum = 0.0;
        for (const auto& [sq, j] : neighbors[i])
            reach_sum += std::max(kdist_[j], std::sqrt(sq));
        lrd_[i] = 1.0 / (reach_sum / static_cast<double>(k) + kLrdEps);
    }
}

std::vector<double> LocalOutlierFactor::score(const WindowSet& windows) const {
    if (lrd_.empty()) throw ContractError("lof: score before fit");
    if (windows.window_len() != dim_)
        throw DimensionError("lof: window length differs from the fitted set");
    const std::size_t k = static_cast<std::size_t>(cfg_.k);
    std::vector<double> out(windows.count());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long pi = 0; pi < static_cast<long>(windows.count()); ++pi) {
        const double* x = windows.window(static_cast<std::size_t>(pi));
        std::vector<std::pair<double, std::size_t>> dists;
        dists.reserve(n_);
        for (std::size_t j = 0; j < n_; ++j)
            dists.emplace_back(sqdist(x, &train_[j * dim_], dim_), j);
        std::vector<std::pair<double, std::size_t>> nn;
        k_nearest(dists, k, nn);
        double reach_sum = 0.0, lrd_sum = 0.0;
        for (const auto& [sq, j] : nn) {
            reach_sum += std::max(kdist_[j], std::sqrt(sq));
            lrd_sum += lrd_[j];
        }
        const double lrd_p = 1.0 / (reach_sum / static_cast<double>(k) + kLrdEps);
        out[static_cast<std::size_t>(pi)] = lrd_sum / static_cast<double>(k) / lrd_p;
    }
    return out;
}

// ---- window autoencoder --------------------------------------------------------

struct WindowAutoencoder::Impl {
    Linear enc1, enc2, dec1, dec2;
    int input_dim = 0;

    Tensor forward(Tape& tape, const Tensor& x) const {
        Tensor h = tape.relu(enc1.forward(tape, x));
        h = tape.relu(enc2.forward(tape, h));
        h = tape.relu(dec1.forward(tape, h));
        return tape.sigmoid(dec2.forward(tape, h));
    }

    std::vector<Tensor> params() const {
        return {enc1.w, enc1.b, enc2.w, enc2.b, dec1.w, dec1.b, dec2.w, dec2.b};
    }
};

void WindowAutoencoder::fit(const WindowSet& train) {
    if (train.count() == 0) throw ContractError("autoencoder: empty training window set");
    const int dim = static_cast<int>(train.window_len());
    Rng rng(cfg_.seed);
    impl_ = std::make_shared<Impl>();
    impl_->input_dim = dim;
    impl_->enc1.init(dim, cfg_.hidden_dim, rng);
    impl_->enc2.init(cfg_.hidden_dim, cfg_.bottleneck_dim, rng);
    impl_->dec1.init(cfg_.bottleneck_dim, cfg_.hidden_dim, rng);
    impl_->dec2.init(cfg_.hidden_dim, dim, rng);

    AdamConfig ac;
    ac.learning_rate = cfg_.learning_rate;
    ac.beta1 = 0.9;
    AdamOptimizer opt(impl_->params(), ac);

    const std::size_t n = train.count();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(cfg_.batch_size)) {
            const std::size_t bsz =
                std::min(static_cast<std::size_t>(cfg_.batch_size), n - begin);
            std::vector<double> data;
            data.reserve(bsz * train.window_len());
            for (std::size_t i = begin; i < begin + bsz; ++i) {
                const double* w = train.window(order[i]);
                data.insert(data.end(), w, w + train.window_len());
            }
            Tensor batch({static_cast<int>(bsz), dim}, std::move(data), false);
            Tape tape;
            Tensor recon = impl_->forward(tape, batch);
            Tensor loss = tape.mse_loss(recon, batch);
            tape.backward(loss);
            opt.step();
        }
    }
}

double WindowAutoencoder::score_one(std::span<const double> window) const {
    if (!impl_) throw ContractError("autoencoder: score before fit");
    Tape tape(Tape::Mode::NoGrad);
    Tensor x({1, impl_->input_dim}, std::vector<double>(window.begin(), window.end()), false);
    Tensor recon = impl_->forward(tape, x);
    double acc = 0.0;
    for (std::size_t i = 0; i < window.size(); ++i) {
        const double d = recon.data()[i] - window[i];
        acc += d * d;
    }
    return acc / static_cast<double>(window.size());
}

std::vector<double> WindowAutoencoder::score(const WindowSet& windows) const {
    if (!impl_) throw ContractError("autoencoder: score before fit");
    std::vector<double> out(windows.count());
    const int dim = impl_->input_dim;
    constexpr std::size_t chunk = 512;
    for (std::size_t begin = 0; begin < windows.count(); begin += chunk) {
        const std::size_t count = std::min(chunk, windows.count() - begin);
        Tensor batch({static_cast<int>(count), dim},
                     std::vector<double>(windows.window(begin),
                                         windows.window(begin) + count * windows.window_len()),
                     false);
        Tape tape(Tape::Mode::NoGrad);
        Tensor recon = impl_->forward(tape, batch);
        for (std::size_t i = 0; i < count; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < windows.window_len(); ++j) {
                const double d = recon.data()[i * windows.window_len() + j] -
                                 windows.windows[(begin + i) * windows.window_len() + j];
                acc += d * d;
            }
            out[begin + i] = acc / static_cast<double>(windows.window_len());
        }
    }
    return out;
}

}  // namespace rangan
