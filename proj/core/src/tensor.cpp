#include "rangan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rangan {
namespace {

constexpr double kBceEps = 1e-7;

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

void check_rank2(const Tensor& t, const char* who) {
    if (t.rank() != 2)
        throw DimensionError(std::string(who) + ": expected a rank-2 tensor, got " +
                             shape_str(t.shape()));
}

// ---- matmul kernels -------------------------------------------------------
// Each output element is produced by exactly one thread with a fixed
// accumulation order, so results are bit-identical for any thread count.
// RANGAN_KERNEL_CLONES adds an AVX2/FMA variant behind a runtime dispatch
// while the default build stays portable.

#if defined(__x86_64__) && defined(__GNUC__) && !defined(__clang__)
#define RANGAN_KERNEL_CLONES __attribute__((target_clones("default", "arch=x86-64-v3")))
#else
#define RANGAN_KERNEL_CLONES
#endif

constexpr long kParallelMacs = 1 << 16;

RANGAN_KERNEL_CLONES
void mm_nn_rows(const double* a, const double* b, double* out, int i0, int i1, int k, int n,
                bool accumulate) {
    for (int i = i0; i < i1; ++i) {
        double* o = out + static_cast<std::size_t>(i) * n;
        if (!accumulate)
            for (int j = 0; j < n; ++j) o[j] = 0.0;
        const double* ar = a + static_cast<std::size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double av = ar[p];
            const double* br = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) o[j] += av * br[j];
        }
    }
}

void mm_nn(const double* a, const double* b, double* out, int m, int k, int n,
           bool accumulate) {
    const long macs = static_cast<long>(m) * k * n;
#ifdef _OPENMP
    if (macs > kParallelMacs) {
#pragma omp parallel
        {
            const int threads = omp_get_num_threads();
            const int tid = omp_get_thread_num();
            const int lo = static_cast<int>(static_cast<long>(m) * tid / threads);
            const int hi = static_cast<int>(static_cast<long>(m) * (tid + 1) / threads);
            mm_nn_rows(a, b, out, lo, hi, k, n, accumulate);
        }
        return;
    }
#endif
    (void)macs;
    mm_nn_rows(a, b, out, 0, m, k, n, accumulate);
}

// out[m x n] (+)= x[m x k] . y[n x k]^T
RANGAN_KERNEL_CLONES
void mm_nt_rows(const double* x, const double* y, double* out, int i0, int i1, int k, int n,
                bool accumulate) {
    for (int i = i0; i < i1; ++i) {
        double* o = out + static_cast<std::size_t>(i) * n;
        const double* xr = x + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < n; ++j) {
            const double* yr = y + static_cast<std::size_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += xr[p] * yr[p];
            if (accumulate)
                o[j] += acc;
            else
                o[j] = acc;
        }
    }
}

void mm_nt(const double* x, const double* y, double* out, int m, int k, int n,
           bool accumulate) {
    const long macs = static_cast<long>(m) * k * n;
#ifdef _OPENMP
    if (macs > kParallelMacs) {
#pragma omp parallel
        {
            const int threads = omp_get_num_threads();
            const int tid = omp_get_thread_num();
            const int lo = static_cast<int>(static_cast<long>(m) * tid / threads);
            const int hi = static_cast<int>(static_cast<long>(m) * (tid + 1) / threads);
            mm_nt_rows(x, y, out, lo, hi, k, n, accumulate);
        }
        return;
    }
#endif
    (void)macs;
    mm_nt_rows(x, y, out, 0, m, k, n, accumulate);
}

// out[m x n] (+)= x[k x m]^T . y[k x n], single streaming pass over x and y
// (weight-gradient shape: m and n small, k large, out stays cache-hot).
// Threads own disjoint column ranges of out.
RANGAN_KERNEL_CLONES
void mm_tn_cols(const double* x, const double* y, double* out, int m, int k, int n, int j0,
                int j1, bool accumulate) {
    if (!accumulate)
        for (int i = 0; i < m; ++i)
            for (int j = j0; j < j1; ++j) out[static_cast<std::size_t>(i) * n + j] = 0.0;
    for (int p = 0; p < k; ++p) {
        const double* xr = x + static_cast<std::size_t>(p) * m;
        const double* yr = y + static_cast<std::size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            const double xv = xr[i];
            double* o = out + static_cast<std::size_t>(i) * n;
            for (int j = j0; j < j1; ++j) o[j] += xv * yr[j];
        }
    }
}

void mm_tn(const double* x, const double* y, double* out, int m, int k, int n,
           bool accumulate) {
    const long macs = static_cast<long>(m) * k * n;
#ifdef _OPENMP
    if (macs > kParallelMacs && n >= 8) {
#pragma omp parallel
        {
            const int threads = omp_get_num_threads();
            const int tid = omp_get_thread_num();
            const int lo = static_cast<int>(static_cast<long>(n) * tid / threads);
            const int hi = static_cast<int>(static_cast<long>(n) * (tid + 1) / threads);
            mm_tn_cols(x, y, out, m, k, n, lo, hi, accumulate);
        }
        return;
    }
#endif
    (void)macs;
    mm_tn_cols(x, y, out, m, k, n, 0, n, accumulate);
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// one (block, head) slice of scaled dot-product attention
RANGAN_KERNEL_CLONES
void attn_fwd_pair(const double* qp, const double* kp, const double* vp, double* w, double* out,
                   std::size_t rbase, int cbase, int n, int d, int dh, double sc) {
    for (int i = 0; i < n; ++i) {
        const double* qi = qp + (rbase + i) * d + cbase;
        double* wrow = w + static_cast<std::size_t>(i) * n;
        double mx = -1e300;
        for (int j = 0; j < n; ++j) {
            const double* kj = kp + (rbase + j) * d + cbase;
            double acc = 0.0;
            for (int t = 0; t < dh; ++t) acc += qi[t] * kj[t];
            wrow[j] = acc * sc;
            mx = std::max(mx, wrow[j]);
        }
        double z = 0.0;
        for (int j = 0; j < n; ++j) {
            wrow[j] = std::exp(wrow[j] - mx);
            z += wrow[j];
        }
        const double invz = 1.0 / z;
        for (int j = 0; j < n; ++j) wrow[j] *= invz;
        double* orow = out + (rbase + i) * d + cbase;
        for (int j = 0; j < n; ++j) {
            const double wij = wrow[j];
            const double* vj = vp + (rbase + j) * d + cbase;
            for (int t = 0; t < dh; ++t) orow[t] += wij * vj[t];
        }
    }
}

RANGAN_KERNEL_CLONES
void attn_bwd_pair(const double* g, const double* qp, const double* kp, const double* vp,
                   const double* w, double* dw, double* qg, double* kg, double* vg,
                   std::size_t rbase, int cbase, int n, int d, int dh, double sc) {
    // dV += W^T . dOut ; dW = dOut . V^T
    for (int i = 0; i < n; ++i) {
        const double* grow = g + (rbase + i) * d + cbase;
        const double* wrow = w + static_cast<std::size_t>(i) * n;
        double* dwrow = dw + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* vj = vp + (rbase + j) * d + cbase;
            double acc = 0.0;
            for (int t = 0; t < dh; ++t) acc += grow[t] * vj[t];
            dwrow[j] = acc;
        }
        if (vg) {
            for (int j = 0; j < n; ++j) {
                const double wij = wrow[j];
                double* vgj = vg + (rbase + j) * d + cbase;
                for (int t = 0; t < dh; ++t) vgj[t] += wij * grow[t];
            }
        }
    }
    // softmax backward rows, then dQ += dS.K, dK += dS^T.Q
    for (int i = 0; i < n; ++i) {
        const double* wrow = w + static_cast<std::size_t>(i) * n;
        double* dwrow = dw + static_cast<std::size_t>(i) * n;
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += dwrow[j] * wrow[j];
        for (int j = 0; j < n; ++j) dwrow[j] = wrow[j] * (dwrow[j] - dot) * sc;
    }
    if (qg) {
        for (int i = 0; i < n; ++i) {
            double* qgi = qg + (rbase + i) * d + cbase;
            const double* dwrow = dw + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) {
                const double ds = dwrow[j];
                const double* kj = kp + (rbase + j) * d + cbase;
                for (int t = 0; t < dh; ++t) qgi[t] += ds * kj[t];
            }
        }
    }
    if (kg) {
        for (int j = 0; j < n; ++j) {
            double* kgj = kg + (rbase + j) * d + cbase;
            for (int i = 0; i < n; ++i) {
                const double ds = dw[static_cast<std::size_t>(i) * n + j];
                const double* qi = qp + (rbase + i) * d + cbase;
                for (int t = 0; t < dh; ++t) kgj[t] += ds * qi[t];
            }
        }
    }
}

}  // namespace

// ---- Tensor ---------------------------------------------------------------

Tensor::Tensor(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
    for (int d : shape)
        if (d <= 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
    if (shape_numel(shape) != data.size())
        throw DimensionError("shape " + shape_str(shape) + " does not match data length " +
                             std::to_string(data.size()));
    impl_ = std::make_shared<Impl>();
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
    impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
    std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::glorot_uniform(int fan_in, int fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<double> data(static_cast<std::size_t>(fan_in) * fan_out);
    for (auto& v : data) v = rng.uniform(-bound, bound);
    return Tensor({fan_in, fan_out}, std::move(data), true);
}

Tensor::Impl& Tensor::impl() {
    if (!impl_) throw ContractError("use of an undefined tensor");
    return *impl_;
}

const Tensor::Impl& Tensor::impl() const {
    if (!impl_) throw ContractError("use of an undefined tensor");
    return *impl_;
}

const std::vector<int>& Tensor::shape() const { return impl().shape; }
int Tensor::rank() const { return static_cast<int>(impl().shape.size()); }

int Tensor::dim(int i) const {
    const auto& s = impl().shape;
    if (i < 0 || i >= static_cast<int>(s.size()))
        throw DimensionError("dim " + std::to_string(i) + " out of range for " + shape_str(s));
    return s[static_cast<std::size_t>(i)];
}

std::size_t Tensor::numel() const { return impl().data.size(); }

std::span<const double> Tensor::data() const { return impl().data; }
std::span<double> Tensor::data_mut() { return impl().data; }

double Tensor::value() const {
    if (numel() != 1) throw ContractError("value() requires a scalar tensor, got " + shape_str(shape()));
    return impl().data[0];
}

double Tensor::at(std::initializer_list<int> idx) const {
    const auto& s = impl().shape;
    if (idx.size() != s.size())
        throw DimensionError("at(): index rank mismatch for " + shape_str(s));
    std::size_t flat = 0;
    std::size_t i = 0;
    for (int v : idx) {
        if (v < 0 || v >= s[i]) throw DimensionError("at(): index out of range");
        flat = flat * static_cast<std::size_t>(s[i]) + static_cast<std::size_t>(v);
        ++i;
    }
    return impl().data[flat];
}

bool Tensor::requires_grad() const { return impl().requires_grad; }
void Tensor::set_requires_grad(bool v) { impl().requires_grad = v; }

bool Tensor::has_grad() const { return !impl().grad.empty(); }

std::span<const double> Tensor::grad() const {
    if (!has_grad()) throw ContractError("grad(): no gradient accumulated yet");
    return impl().grad;
}

std::span<double> Tensor::grad_mut() {
    auto& im = impl();
    if (im.grad.empty()) im.grad.assign(im.data.size(), 0.0);
    return im.grad;
}

void Tensor::zero_grad() {
    auto& im = impl();
    if (!im.grad.empty()) std::fill(im.grad.begin(), im.grad.end(), 0.0);
}

Tensor Tensor::detach() const {
    const auto& im = impl();
    return Tensor(im.shape, im.data, false);
}

// ---- Tape -----------------------------------------------------------------

Tensor Tape::make(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
    Tensor t(std::move(shape), std::move(data), requires_grad && grad_enabled());
    t.impl_->producer = this;
    return t;
}

bool Tape::track(std::initializer_list<const Tensor*> inputs) const {
    if (mode_ == Mode::NoGrad) return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

void Tape::backward(const Tensor& loss) {
    if (loss.numel() != 1)
        throw ContractError("backward(): loss must be scalar, got " + shape_str(loss.shape()));
    if (loss.impl_->producer != this)
        throw ContractError("backward(): loss was not produced on this tape");
    if (backward_done_)
        throw ContractError("backward(): tape already walked; build a new tape per cycle");
    backward_done_ = true;

    loss.impl_->grad.assign(1, 1.0);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backprop();
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
    check_rank2(a, "matmul lhs");
    check_rank2(b, "matmul rhs");
    const int m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k)
        throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                             " . " + shape_str(b.shape()));
    std::vector<double> out(static_cast<std::size_t>(m) * n);
    mm_nn(a.data().data(), b.data().data(), out.data(), m, k, n, false);
    Tensor res = make({m, n}, std::move(out), a.requires_grad() || b.requires_grad());
    if (track({&a, &b})) {
        record([a = a, b = b, res, m, k, n]() mutable {
            if (!res.has_grad()) return;
            const double* g = res.grad().data();
            if (a.requires_grad())
                mm_nt(g, b.data().data(), a.grad_mut().data(), m, n, k, true);
            if (b.requires_grad())
                mm_tn(a.data().data(), g, b.grad_mut().data(), k, m, n, true);
        });
    }
    return res;
}

Tensor Tape::transpose(const Tensor& x) {
    check_rank2(x, "transpose");
    const int m = x.rows(), n = x.cols();
    std::vector<double> out(x.numel());
    const double* in = x.data().data();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out[static_cast<std::size_t>(j) * m + i] = in[static_cast<std::size_t>(i) * n + j];
    Tensor res = make({n, m}, std::move(out), x.requires_grad());
    if (track({&x})) {
        record([x = x, res, m, n]() mutable {
            if (!res.has_grad() || !x.requires_grad()) return;
            const double* g = res.grad().data();
            double* xg = x.grad_mut().data();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    xg[static_cast<std::size_t>(i) * n + j] += g[static_cast<std::size_t>(j) * m + i];
        });
    }
    return res;
}

namespace {
enum Ew : int { kAdd, kSub, kMul };
}

Tensor Tape::add(const Tensor& a, const Tensor& b) { return ewise(a, b, kAdd); }
Tensor Tape::sub(const Tensor& a, const Tensor& b) { return ewise(a, b, kSub); }
Tensor Tape::mul(const Tensor& a, const Tensor& b) { return ewise(a, b, kMul); }

// shared add/sub/mul with scalar broadcast on either side
Tensor Tape::ewise(const Tensor& a, const Tensor& b, int op) {
    const bool a_scalar = a.numel() == 1, b_scalar = b.numel() == 1;
    if (!a_scalar && !b_scalar && a.shape() != b.shape())
        throw DimensionError("elementwise op: shapes " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()) + " must match exactly (or be scalar)");
    const Tensor& big = a_scalar && !b_scalar ? b : a;
    const std::size_t n = big.numel();
    std::vector<double> out(n);
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    const std::size_t sa = a_scalar ? 0 : 1, sb = b_scalar ? 0 : 1;
    switch (op) {
        case kAdd:
            for (std::size_t i = 0; i < n; ++i) out[i] = pa[i * sa] + pb[i * sb];
            break;
        case kSub:
            for (std::size_t i = 0; i < n; ++i) out[i] = pa[i * sa] - pb[i * sb];
            break;
        default:
            for (std::size_t i = 0; i < n; ++i) out[i] = pa[i * sa] * pb[i * sb];
            break;
    }
    Tensor res = make(big.shape(), std::move(out), a.requires_grad() || b.requires_grad());
    if (track({&a, &b})) {
        record([a = a, b = b, res, n, sa, sb, op]() mutable {
            if (!res.has_grad()) return;
            const double* g = res.grad().data();
            if (a.requires_grad()) {
                double* ga = a.grad_mut().data();
                const double* pb = b.data().data();
                for (std::size_t i = 0; i < n; ++i)
                    ga[i * sa] += op == kMul ? g[i] * pb[i * sb] : g[i];
            }
            if (b.requires_grad()) {
                double* gb = b.grad_mut().data();
                const double* pa = a.data().data();
                for (std::size_t i = 0; i < n; ++i) {
                    switch (op) {
                        case kAdd: gb[i * sb] += g[i]; break;
                        case kSub: gb[i * sb] -= g[i]; break;
                        default: gb[i * sb] += g[i] * pa[i * sa]; break;
                    }
                }
            }
        });
    }
    return res;
}

Tensor Tape::scale(const Tensor& x, double c) {
    std::vector<double> out(x.numel());
    const double* in = x.data().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] * c;
    Tensor res = make(x.shape(), std::move(out), x.requires_grad());
    if (track({&x})) {
        record([x = x, res, c]() mutable {
            if (!res.has_grad() || !x.requires_grad()) return;
            const double* g = res.grad().data();
            double* xg = x.grad_mut().data();
            for (std::size_t i = 0; i < res.numel(); ++i) xg[i] += c * g[i];
        });
    }
    return res;
}

Tensor Tape::relu(const Tensor& x) {
    std::vector<double> out(x.numel());
    const double* in = x.data().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
    Tensor res = make(x.shape(), std::move(out), x.requires_grad());
    if (track({&x})) {
        record([x = x, res]() mutable {
            if (!res.has_grad() || !x.requires_grad()) return;
            const double* g = res.grad().data();
            const double* in = x.data().data();
            double* xg = x.grad_mut().data();
            for (std::size_t i = 0; i < res.numel(); ++i)
                if (in[i] > 0.0) xg[i] += g[i];
        });
    }
    return res;
}

Tensor Tape::sigmoid(const Tensor& x) {
    std::vector<double> out(x.numel());
    const double* in = x.data().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(in[i]);
    Tensor res = make(x.shape(), std::move(out), x.requires_grad());
    if (track({&x})) {
        record([x = x, res]() mutable {
            if (!res.has_grad() || !x.requires_grad()) return;
            const double* g = res.grad().data();
            const double* y = res.data().data();
            double* xg = x.grad_mut().data();
            for (std::size_t i = 0; i < res.numel(); ++i) xg[i] += g[i] * y[i] * (1.0 - y[i]);
        });
    }
    return res;
}

Tensor Tape::tanh(const Tensor& x) {
    std::vector<double> out(x.numel());
    const double* in = x.data().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(in[i]);
    Tensor res = make(x.shape(), std::move(out), x.requires_grad());
    if (track({&x})) {
        record([x = x, res]() mutable {
            if (!res.has_grad() || !x.requires_grad()) return;
            const double* g = res.grad().data();
            const double* y = res.data().data();
            double* xg = x.grad_mut().data();
            for (std::size_t i = 0; i < res.numel(); ++i) xg[i] += g[i] * (1.0 - y[i] * y[i]);
        });
    }
    return res;
}

Tensor Tape::softmax(const Tensor& x, int axis) {
    const auto& shape = x.shape();
    if (axis < 0 || axis >= x.rank())
        throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for " +
                             shape_str(shape));
    std::size_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(shape[i]);
    for (int i = axis + 1; i < x.rank(); ++i) inner *= static_cast<std::size_t>(shape[i]);
    const std::size_t len = static_cast<std::size_t>(shape[axis]);

    std::vector<double> out(x.numel());
    const double* in = x.data().data();
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
            const std::size_t base = o * len * inner + i;
            double mx = in[base];
            for (std::size_t j = 1; j < len; ++j) mx = std::max(mx, in[base + j * inner]);
            double z = 0.0;
            for (std::size_t j = 0; j < len; ++j) {
                const double e = std::exp(in[base + j * inner] - mx);
                out[base + j * inner] = e;
                z += e;
            }
            const double invz = 1.0 / z;
            for (std::size_t j = 0; j < len; ++j) out[base + j * inner] *= invz;
        }
    }
    Tensor res = make(shape, std::move(out), x.requires_grad());
    if (track({&x})) {
        record([x = x, res, outer, inner, len]() mutable {
            if (!res.has_grad() || !x.requires_grad()) return;
            const double* g = res.grad().data();
            const double* y = res.data().data();
            double* xg = x.grad_mut().data();
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t i = 0; i < inner; ++i) {
                    const std::size_t base = o * len * inner + i;
                    double dot = 0.0;
                    for (std::size_t j = 0; j < len; ++j)
                        dot += g[base + j * inner] * y[base + j * inner];
                    for (std::size_t j = 0; j < len; ++j) {
                        const std::size_t p = base + j * inner;
                        xg[p] += y[p] * (g[p] - dot);
                    }
                }
            }
        });
    }
    return res;
}

Tensor Tape::layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    if (x.rank() < 1) throw DimensionError("layer_norm: input must have rank >= 1");
    const int d = x.shape().back();
    if (gamma.numel() != static_cast<std::size_t>(d) || beta.numel() != static_cast<std::size_t>(d))
        throw DimensionError("layer_norm: gamma/beta length must equal the last axis (" +
                             std::to_string(d) + ")");
    const std::size_t rows = x.numel() / static_cast<std::size_t>(d);
    std::vector<double> out(x.numel());
    const double* in = x.data().data();
    const double* gm = gamma.data().data();
    const double* bt = beta.data().data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = in + r * d;
        double* orow = out.data() + r * d;
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += xr[j];
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            const double c = xr[j] - mean;
            var += c * c;
        }
        var /= d;
        const double rstd = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < d; ++j) orow[j] = gm[j] * ((xr[j] - mean) * rstd) + bt[j];
    }
    Tensor res = make(x.shape(), std::move(out),
                      x.requires_grad() || gamma.requires_grad() || beta.requires_grad());
    if (track({&x, &gamma, &beta})) {
        record([x = x, gamma = gamma, beta = beta, res, eps, rows, d]() mutable {
            if (!res.has_grad()) return;
            const double* g = res.grad().data();
            const double* in = x.data().data();
            const double* gm = gamma.data().data();
            double* xg = x.requires_grad() ? x.grad_mut().data() : nullptr;
            double* gg = gamma.requires_grad() ? gamma.grad_mut().data() : nullptr;
            double* bg = beta.requires_grad() ? beta.grad_mut().data() : nullptr;
            for (std::size_t r = 0; r < rows; ++r) {
                const double* xr = in + r * d;
                const double* gr = g + r * d;
                double mean = 0.0;
                for (int j = 0; j < d; ++j) mean += xr[j];
                mean /= d;
                double var = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double c = xr[j] - mean;
                    var += c * c;
                }
                var /= d;
                const double rstd = 1.0 / std::sqrt(var + eps);
                double dy_mean = 0.0, dyy_mean = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double yj = (xr[j] - mean) * rstd;
                    const double dyj = gr[j] * gm[j];
                    dy_mean += dyj;
                    dyy_mean += dyj * yj;
                    if (gg) gg[j] += gr[j] * yj;
                    if (bg) bg[j] += gr[j];
                }
                dy_mean /= d;
                dyy_mean /= d;
                if (xg) {
                    double* xgr = xg + r * d;
                    for (int j = 0; j < d; ++j) {
                        const double yj = (xr[j] - mean) * rstd;
                        const double dyj = gr[j] * gm[j];
                        xgr[j] += rstd * (dyj - dy_mean - yj * dyy_mean);
                    }
                }
            }
        });
    }
    return res;
}

Tensor Tape::add_rowvec(const Tensor& x, const Tensor& b) {
    check_rank2(x, "add_rowvec");
    const int m = x.rows(), n = x.cols();
    if (b.numel() != static_cast<std::size_t>(n))
        throw DimensionError("add_rowvec: bias length " + std::to_string(b.numel()) +
                             " must equal column count " + std::to_string(n));
    std::vector<double> out(x.numel());
    const double* in = x.data().data();
    const double* bv = b.data().data();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out[static_cast<std::size_t>(i) * n + j] = in[static_cast<std::size_t>(i) * n + j] + bv[j];
    Tensor res = make(x.shape(), std::move(out), x.requires_grad() || b.requires_grad());
    if (track({&x, &b})) {
        record([x = x, b = b, res, m, n]() mutable {
            if (!res.has_grad()) return;
            const double* g = res.grad().data();
            if (x.requires_grad()) {
                double* xg = x.grad_mut().data();
                for (std::size_t i = 0; i < res.numel(); ++i) xg[i] += g[i];
            }
            if (b.requires_grad()) {
                double* bgr = b.grad_mut().data();
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) bgr[j] += g[static_cast<std::size_t>(i) * n + j];
            }
        });
    }
    return res;
}

Tensor Tape::add_tiled(const Tensor& x, const Tensor& tile) {
    check_rank2(x, "add_tiled");
    check_rank2(tile, "add_tiled tile");
    const int n = tile.rows(), d = tile.cols();
    if (x.cols() != d || x.rows() % n != 0)
        throw DimensionError("add_tiled: " + shape_str(x.shape()) + " is not a row tiling of " +
                             shape_str(tile.shape()));
    const int blocks = x.rows() / n;
    std::vector<double> out(x.numel());
    const double* in = x.data().data();
    const double* tv = tile.data().data();
    const std::size_t tlen = tile.numel();
    for (int b = 0; b < blocks; ++b) {
        const std::size_t off = static_cast<std::size_t>(b) * tlen;
        for (std::size_t i = 0; i < tlen; ++i) out[off + i] = in[off + i] + tv[i];
    }
    Tensor res = make(x.shape(), std::move(out), x.requires_grad() || tile.requires_grad());
    if (track({&x, &tile})) {
        record([x = x, tile = tile, res, blocks, tlen]() mutable {
            if (!res.has_grad()) return;
            const double* g = res.grad().data();
            if (x.requires_grad()) {
                double* xg = x.grad_mut().data();
                for (std::size_t i = 0; i < res.numel(); ++i) xg[i] += g[i];
            }
            if (tile.requires_grad()) {
                double* tg = tile.grad_mut().data();
                for (int b = 0; b < blocks; ++b) {
                    const std::size_t off = static_cast<std::size_t>(b) * tlen;
                    for (std::size_t i = 0; i < tlen; ++i) tg[i] += g[off + i];
                }
            }
        });
    }
    return res;
}

Tensor Tape::reshape(const Tensor& x, std::vector<int> shape) {
    if (shape_numel(shape) != x.numel())
        throw DimensionError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape) +
                             " changes the element count");
    Tensor res = make(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()),
                      x.requires_grad());
    if (track({&x})) {
        record([x = x, res]() mutable {
            if (!res.has_grad() || !x.requires_grad()) return;
            const double* g = res.grad().data();
            double* xg = x.grad_mut().data();
            for (std::size_t i = 0; i < res.numel(); ++i) xg[i] += g[i];
        });
    }
    return res;
}

Tensor Tape::slice_rows(const Tensor& x, int start, int len) {
    check_rank2(x, "slice_rows");
    if (start < 0 || len <= 0 || start + len > x.rows())
        throw DimensionError("slice_rows: range [" + std::to_string(start) + ", " +
                             std::to_string(start + len) + ") out of bounds for " +
                             shape_str(x.shape()));
    const int n = x.cols();
    const std::size_t off = static_cast<std::size_t>(start) * n;
    std::vector<double> out(x.data().begin() + off,
                            x.data().begin() + off + static_cast<std::size_t>(len) * n);
    Tensor res = make({len, n}, std::move(out), x.requires_grad());
    if (track({&x})) {
        record([x = x, res, off]() mutable {
            if (!res.has_grad() || !x.requires_grad()) return;
            const double* g = res.grad().data();
            double* xg = x.grad_mut().data();
            for (std::size_t i = 0; i < res.numel(); ++i) xg[off + i] += g[i];
        });
    }
    return res;
}

Tensor Tape::concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_rows: no parts");
    const int n = parts.front().cols();
    int m = 0;
    bool rg = false;
    for (const auto& p : parts) {
        check_rank2(p, "concat_rows part");
        if (p.cols() != n) throw DimensionError("concat_rows: column counts differ");
        m += p.rows();
        rg = rg || p.requires_grad();
    }
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(m) * n);
    for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    Tensor res = make({m, n}, std::move(out), rg);
    bool any = false;
    for (const auto& p : parts) any = any || track({&p});
    if (any) {
        record([parts, res]() mutable {
            if (!res.has_grad()) return;
            const double* g = res.grad().data();
            std::size_t off = 0;
            for (auto& p : parts) {
                const std::size_t len = p.numel();
                if (p.requires_grad()) {
                    Tensor pc = p;
                    double* pg = pc.grad_mut().data();
                    for (std::size_t i = 0; i < len; ++i) pg[i] += g[off + i];
                }
                off += len;
            }
        });
    }
    return res;
}

Tensor Tape::sum(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    Tensor res = make({1}, {acc}, x.requires_grad());
    if (track({&x})) {
        record([x = x, res]() mutable {
            if (!res.has_grad() || !x.requires_grad()) return;
            const double g = res.grad()[0];
            double* xg = x.grad_mut().data();
            for (std::size_t i = 0; i < x.numel(); ++i) xg[i] += g;
        });
    }
    return res;
}

Tensor Tape::mean(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    const double inv = 1.0 / static_cast<double>(x.numel());
    Tensor res = make({1}, {acc * inv}, x.requires_grad());
    if (track({&x})) {
        record([x = x, res, inv]() mutable {
            if (!res.has_grad() || !x.requires_grad()) return;
            const double g = res.grad()[0] * inv;
            double* xg = x.grad_mut().data();
            for (std::size_t i = 0; i < x.numel(); ++i) xg[i] += g;
        });
    }
    return res;
}

Tensor Tape::bce_loss(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape())
        throw DimensionError("bce_loss: shapes " + shape_str(pred.shape()) + " vs " +
                             shape_str(target.shape()));
    const std::size_t n = pred.numel();
    const double* p = pred.data().data();
    const double* t = target.data().data();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double pc = std::clamp(p[i], kBceEps, 1.0 - kBceEps);
        acc -= t[i] * std::log(pc) + (1.0 - t[i]) * std::log(1.0 - pc);
    }
    const double inv = 1.0 / static_cast<double>(n);
    Tensor res = make({1}, {acc * inv}, pred.requires_grad() || target.requires_grad());
    if (track({&pred, &target})) {
        record([pred = pred, target = target, res, n, inv]() mutable {
            if (!res.has_grad() || !pred.requires_grad()) return;
            const double g = res.grad()[0] * inv;
            const double* p = pred.data().data();
            const double* t = target.data().data();
            double* pg = pred.grad_mut().data();
            for (std::size_t i = 0; i < n; ++i) {
                // clamped entries sit on a flat of the loss: zero slope
                if (p[i] < kBceEps || p[i] > 1.0 - kBceEps) continue;
                pg[i] += g * (p[i] - t[i]) / (p[i] * (1.0 - p[i]));
            }
        });
    }
    return res;
}

Tensor Tape::l1_loss(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape())
        throw DimensionError("l1_loss: shapes " + shape_str(pred.shape()) + " vs " +
                             shape_str(target.shape()));
    const std::size_t n = pred.numel();
    const double* p = pred.data().data();
    const double* t = target.data().data();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::abs(p[i] - t[i]);
    const double inv = 1.0 / static_cast<double>(n);
    Tensor res = make({1}, {acc * inv}, pred.requires_grad() || target.requires_grad());
    if (track({&pred, &target})) {
        record([pred = pred, target = target, res, n, inv]() mutable {
            if (!res.has_grad()) return;
            const double g = res.grad()[0] * inv;
            const double* p = pred.data().data();
            const double* t = target.data().data();
            double* pg = pred.requires_grad() ? pred.grad_mut().data() : nullptr;
            double* tg = target.requires_grad() ? target.grad_mut().data() : nullptr;
            for (std::size_t i = 0; i < n; ++i) {
                const double s = p[i] > t[i] ? 1.0 : (p[i] < t[i] ? -1.0 : 0.0);
                if (pg) pg[i] += g * s;
                if (tg) tg[i] -= g * s;
            }
        });
    }
    return res;
}

Tensor Tape::mse_loss(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape())
        throw DimensionError("mse_loss: shapes " + shape_str(pred.shape()) + " vs " +
                             shape_str(target.shape()));
    const std::size_t n = pred.numel();
    const double* p = pred.data().data();
    const double* t = target.data().data();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = p[i] - t[i];
        acc += d * d;
    }
    const double inv = 1.0 / static_cast<double>(n);
    Tensor res = make({1}, {acc * inv}, pred.requires_grad() || target.requires_grad());
    if (track({&pred, &target})) {
        record([pred = pred, target = target, res, n, inv]() mutable {
            if (!res.has_grad()) return;
            const double g = res.grad()[0] * inv;
            const double* p = pred.data().data();
            const double* t = target.data().data();
            double* pg = pred.requires_grad() ? pred.grad_mut().data() : nullptr;
            double* tg = target.requires_grad() ? target.grad_mut().data() : nullptr;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = 2.0 * (p[i] - t[i]);
                if (pg) pg[i] += g * d;
                if (tg) tg[i] -= g * d;
            }
        });
    }
    return res;
}

Tensor Tape::l1_rowblocks(const Tensor& pred, const Tensor& target, int blocks) {
    check_rank2(pred, "l1_rowblocks");
    if (pred.shape() != target.shape())
        throw DimensionError("l1_rowblocks: shapes " + shape_str(pred.shape()) + " vs " +
                             shape_str(target.shape()));
    if (blocks <= 0 || pred.rows() % blocks != 0)
        throw DimensionError("l1_rowblocks: row count " + std::to_string(pred.rows()) +
                             " not divisible into " + std::to_string(blocks) + " blocks");
    const std::size_t blen = pred.numel() / static_cast<std::size_t>(blocks);
    const double inv = 1.0 / static_cast<double>(blen);
    std::vector<double> out(static_cast<std::size_t>(blocks));
    const double* p = pred.data().data();
    const double* t = target.data().data();
    for (int b = 0; b < blocks; ++b) {
        const std::size_t off = static_cast<std::size_t>(b) * blen;
        double acc = 0.0;
        for (std::size_t i = 0; i < blen; ++i) acc += std::abs(p[off + i] - t[off + i]);
        out[static_cast<std::size_t>(b)] = acc * inv;
    }
    Tensor res = make({blocks}, std::move(out), pred.requires_grad() || target.requires_grad());
    if (track({&pred, &target})) {
        record([pred = pred, target = target, res, blocks, blen, inv]() mutable {
            if (!res.has_grad()) return;
            const double* g = res.grad().data();
            const double* p = pred.data().data();
            const double* t = target.data().data();
            double* pg = pred.requires_grad() ? pred.grad_mut().data() : nullptr;
            double* tg = target.requires_grad() ? target.grad_mut().data() : nullptr;
            for (int b = 0; b < blocks; ++b) {
                const std::size_t off = static_cast<std::size_t>(b) * blen;
                const double gb = g[static_cast<std::size_t>(b)] * inv;
                for (std::size_t i = 0; i < blen; ++i) {
                    const double s =
                        p[off + i] > t[off + i] ? 1.0 : (p[off + i] < t[off + i] ? -1.0 : 0.0);
                    if (pg) pg[off + i] += gb * s;
                    if (tg) tg[off + i] -= gb * s;
                }
            }
        });
    }
    return res;
}

Tensor Tape::mean_rowblocks(const Tensor& x, int blocks) {
    check_rank2(x, "mean_rowblocks");
    if (blocks <= 0 || x.rows() % blocks != 0)
        throw DimensionError("mean_rowblocks: row count " + std::to_string(x.rows()) +
                             " not divisible into " + std::to_string(blocks) + " blocks");
    const int n = x.rows() / blocks, d = x.cols();
    const double inv = 1.0 / static_cast<double>(n);
    std::vector<double> out(static_cast<std::size_t>(blocks) * d, 0.0);
    const double* in = x.data().data();
    for (int b = 0; b < blocks; ++b) {
        double* orow = out.data() + static_cast<std::size_t>(b) * d;
        for (int r = 0; r < n; ++r) {
            const double* xr = in + (static_cast<std::size_t>(b) * n + r) * d;
            for (int j = 0; j < d; ++j) orow[j] += xr[j];
        }
        for (int j = 0; j < d; ++j) orow[j] *= inv;
    }
    Tensor res = make({blocks, d}, std::move(out), x.requires_grad());
    if (track({&x})) {
        record([x = x, res, blocks, n, d, inv]() mutable {
            if (!res.has_grad() || !x.requires_grad()) return;
            const double* g = res.grad().data();
            double* xg = x.grad_mut().data();
            for (int b = 0; b < blocks; ++b) {
                const double* grow = g + static_cast<std::size_t>(b) * d;
                for (int r = 0; r < n; ++r) {
                    double* xr = xg + (static_cast<std::size_t>(b) * n + r) * d;
                    for (int j = 0; j < d; ++j) xr[j] += grow[j] * inv;
                }
            }
        });
    }
    return res;
}

Tensor Tape::attention_heads(const Tensor& q, const Tensor& k, const Tensor& v, int blocks,
                             int heads, std::vector<double>* weights_out) {
    check_rank2(q, "attention q");
    check_rank2(k, "attention k");
    check_rank2(v, "attention v");
    if (q.shape() != k.shape() || q.shape() != v.shape())
        throw DimensionError("attention: q/k/v shapes must match, got " + shape_str(q.shape()) +
                             ", " + shape_str(k.shape()) + ", " + shape_str(v.shape()));
    const int rows = q.rows(), d = q.cols();
    if (blocks <= 0 || rows % blocks != 0)
        throw DimensionError("attention: rows " + std::to_string(rows) +
                             " not divisible into " + std::to_string(blocks) + " blocks");
    if (heads <= 0 || d % heads != 0)
        throw DimensionError("attention: model dim " + std::to_string(d) +
                             " not divisible by " + std::to_string(heads) + " heads");
    const int n = rows / blocks, dh = d / heads;
    const double sc = 1.0 / std::sqrt(static_cast<double>(dh));

    auto weights = std::make_shared<std::vector<double>>(
        static_cast<std::size_t>(blocks) * heads * n * n);
    std::vector<double> out(q.numel(), 0.0);
    const double* qp = q.data().data();
    const double* kp = k.data().data();
    const double* vp = v.data().data();

    const int bh_total = blocks * heads;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (static_cast<long>(bh_total) * n * n * dh > kParallelMacs)
#endif
    for (int bh = 0; bh < bh_total; ++bh) {
        const int b = bh / heads, h = bh % heads;
        attn_fwd_pair(qp, kp, vp, weights->data() + static_cast<std::size_t>(bh) * n * n,
                      out.data(), static_cast<std::size_t>(b) * n, h * dh, n, d, dh, sc);
    }
    if (weights_out) *weights_out = *weights;

    Tensor res = make(q.shape(), std::move(out),
                      q.requires_grad() || k.requires_grad() || v.requires_grad());
    if (track({&q, &k, &v})) {
        record([q = q, k = k, v = v, res, weights, blocks, heads, n, d, dh, sc]() mutable {
            if (!res.has_grad()) return;
            const double* g = res.grad().data();
            const double* qp = q.data().data();
            const double* kp = k.data().data();
            const double* vp = v.data().data();
            double* qg = q.requires_grad() ? q.grad_mut().data() : nullptr;
            double* kg = k.requires_grad() ? k.grad_mut().data() : nullptr;
            double* vg = v.requires_grad() ? v.grad_mut().data() : nullptr;
            const int bh_total = blocks * heads;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (static_cast<long>(bh_total) * n * n * dh > kParallelMacs)
#endif
            for (int bh = 0; bh < bh_total; ++bh) {
                const int b = bh / heads, h = bh % heads;
                std::vector<double> dw(static_cast<std::size_t>(n) * n);
                attn_bwd_pair(g, qp, kp, vp,
                              weights->data() + static_cast<std::size_t>(bh) * n * n, dw.data(),
                              qg, kg, vg, static_cast<std::size_t>(b) * n, h * dh, n, d, dh, sc);
            }
        });
    }
    return res;
}

Tensor Tape::dropout(const Tensor& x, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0)
        throw ContractError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
    const std::size_t n = x.numel();
    auto mask = std::make_shared<std::vector<double>>(n);
    const double keep = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < n; ++i) (*mask)[i] = rng.uniform() >= rate ? keep : 0.0;
    std::vector<double> out(n);
    const double* in = x.data().data();
    for (std::size_t i = 0; i < n; ++i) out[i] = in[i] * (*mask)[i];
    Tensor res = make(x.shape(), std::move(out), x.requires_grad());
    if (track({&x})) {
        record([x = x, res, mask]() mutable {
            if (!res.has_grad() || !x.requires_grad()) return;
            const double* g = res.grad().data();
            double* xg = x.grad_mut().data();
            for (std::size_t i = 0; i < res.numel(); ++i) xg[i] += g[i] * (*mask)[i];
        });
    }
    return res;
}

}  // namespace rangan
