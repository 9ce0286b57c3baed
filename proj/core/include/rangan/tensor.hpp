#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <vector>

#include "rangan/errors.hpp"
#include "rangan/rng.hpp"

namespace rangan {

class Tape;

/// Dense row-major tensor of 64-bit floats. Cheap to copy (shared handle);
/// the payload is owned by a single Impl so gradients written during a
/// backward pass are visible through every handle to the same tensor.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::vector<int> shape, std::vector<double> data, bool requires_grad = false);

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    /// Linear-map init: uniform in ±sqrt(6/(fan_in+fan_out)), shape [fan_in x fan_out].
    static Tensor glorot_uniform(int fan_in, int fan_out, Rng& rng);

    bool defined() const { return impl_ != nullptr; }
    const std::vector<int>& shape() const;
    int rank() const;
    int dim(int i) const;
    int rows() const { return dim(0); }
    int cols() const { return dim(1); }
    std::size_t numel() const;

    std::span<const double> data() const;
    std::span<double> data_mut();
    /// Scalar read; ContractError unless numel() == 1.
    double value() const;
    double at(std::initializer_list<int> idx) const;

    bool requires_grad() const;
    void set_requires_grad(bool v);

    bool has_grad() const;
    std::span<const double> grad() const;
    /// Gradient buffer, zero-allocated on first use.
    std::span<double> grad_mut();
    void zero_grad();

    /// Deep value copy with no grad, no tape attachment.
    Tensor detach() const;

    bool same_impl(const Tensor& other) const { return impl_ == other.impl_; }

private:
    struct Impl {
        std::vector<int> shape;
        std::vector<double> data;
        std::vector<double> grad;  // empty until first accumulation
        bool requires_grad = false;
        const Tape* producer = nullptr;
    };
    explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}
    Impl& impl();
    const Impl& impl() const;

    std::shared_ptr<Impl> impl_;
    friend class Tape;
};

/// Reverse-mode tape. Ops append nodes in execution order; backward() seeds
/// the loss gradient and replays the nodes once, in reverse, accumulating
/// into input gradients in a single fixed order (bit-reproducible runs).
/// One tape per forward/backward cycle; tapes are not thread-safe, but
/// separate tapes may run concurrently.
class Tape {
public:
    enum class Mode { Grad, NoGrad };
    explicit Tape(Mode mode = Mode::Grad) : mode_(mode) {}

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// out[m x n] = a[m x k] . b[k x n]
    Tensor matmul(const Tensor& a, const Tensor& b);
    Tensor transpose(const Tensor& x);

    // Elementwise ops: shapes must match exactly or one side is a scalar.
    Tensor add(const Tensor& a, const Tensor& b);
    Tensor sub(const Tensor& a, const Tensor& b);
    Tensor mul(const Tensor& a, const Tensor& b);
    Tensor scale(const Tensor& x, double c);
    Tensor relu(const Tensor& x);
    Tensor sigmoid(const Tensor& x);
    Tensor tanh(const Tensor& x);

    /// Max-subtracted softmax along `axis`; each slice sums to 1.
    Tensor softmax(const Tensor& x, int axis);
    /// Row-wise normalization over the last axis, then gamma/beta affine.
    Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                      double eps = 1e-5);

    /// x[m x n] + b[n] broadcast down the rows (bias add).
    Tensor add_rowvec(const Tensor& x, const Tensor& b);
    /// x[(B*n) x d] + tile[n x d] repeated for each of the B row blocks.
    Tensor add_tiled(const Tensor& x, const Tensor& tile);

    /// Metadata-only reshape; row-major layout is shared.
    Tensor reshape(const Tensor& x, std::vector<int> shape);
    Tensor slice_rows(const Tensor& x, int start, int len);
    Tensor concat_rows(const std::vector<Tensor>& parts);

    Tensor sum(const Tensor& x);
    Tensor mean(const Tensor& x);

    /// Mean binary cross-entropy; pred clamped to [1e-7, 1 - 1e-7].
    Tensor bce_loss(const Tensor& pred, const Tensor& target);
    /// Mean absolute error.
    Tensor l1_loss(const Tensor& pred, const Tensor& target);
    /// Mean squared error.
    Tensor mse_loss(const Tensor& pred, const Tensor& target);

    /// Per-row-block mean absolute error: pred[(B*n) x d] vs target -> [B].
    Tensor l1_rowblocks(const Tensor& pred, const Tensor& target, int blocks);
    /// Per-row-block mean over rows: x[(B*n) x d] -> [B x d].
    Tensor mean_rowblocks(const Tensor& x, int blocks);

    /// Scaled dot-product attention over each of `blocks` row blocks,
    /// split into `heads` column groups: softmax(q.k^T / sqrt(d_head)).v
    /// per (block, head), written back in place. Head mixing is left to a
    /// following matmul. `weights_out`, when given, receives the softmax
    /// weights laid out [block][head][n x n].
    Tensor attention_heads(const Tensor& q, const Tensor& k, const Tensor& v,
                           int blocks, int heads,
                           std::vector<double>* weights_out = nullptr);

    /// Inverted dropout; scales kept entries by 1/(1-rate). Draws one
    /// uniform per element from `rng` in element order.
    Tensor dropout(const Tensor& x, double rate, Rng& rng);

    /// Seeds d(loss)/d(loss) = 1 and replays all nodes once in reverse.
    /// The loss must be a scalar produced on this tape; a tape can be
    /// walked backward only once.
    void backward(const Tensor& loss);

    std::size_t node_count() const { return nodes_.size(); }
    bool grad_enabled() const { return mode_ == Mode::Grad; }

private:
    struct Node {
        std::function<void()> backprop;
    };

    Tensor make(std::vector<int> shape, std::vector<double> data, bool requires_grad);
    Tensor ewise(const Tensor& a, const Tensor& b, int op);
    bool track(std::initializer_list<const Tensor*> inputs) const;
    void record(std::function<void()> fn) { nodes_.push_back({std::move(fn)}); }

    std::vector<Node> nodes_;
    Mode mode_;
    bool backward_done_ = false;
};

}  // namespace rangan
