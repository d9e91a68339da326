#pragma once

// Layer kernels and the sequential-network runner, templated on the scalar
// type. Production code instantiates float; gradient-check tests reuse the
// same code at double precision.

#include <cmath>
#include <cstddef>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "scalpnet/error.hpp"

namespace scalpnet::detail {

enum class LayerKind { conv2d, relu, maxpool2d, flatten, dense, softmax };

inline const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::relu: return "relu";
        case LayerKind::maxpool2d: return "maxpool2d";
        case LayerKind::flatten: return "flatten";
        case LayerKind::dense: return "dense";
        case LayerKind::softmax: return "softmax";
    }
    return "?";
}

struct ConvGeom {
    int in_h = 0, in_w = 0, in_c = 0;
    int out_h = 0, out_w = 0;
    int filters = 0, kernel = 0, stride = 1;
    int pad_top = 0, pad_left = 0;
};

struct PoolGeom {
    int in_h = 0, in_w = 0, channels = 0;
    int out_h = 0, out_w = 0;
    int pool = 0, stride = 1;
};

struct DenseGeom {
    int in_dim = 0, units = 0;
};

// One resolved layer of the sequential program.
struct LayerPlan {
    LayerKind kind;
    ConvGeom conv;
    PoolGeom pool;
    DenseGeom dense;
    size_t in_elems = 0;   // per sample
    size_t out_elems = 0;  // per sample
    size_t w_count = 0;    // 0 when the layer has no parameters
    size_t b_count = 0;
};

template <typename T>
struct ParamView {
    const T* w = nullptr;
    const T* b = nullptr;
};

template <typename T>
struct GradView {
    T* w = nullptr;  // zero-initialized by the caller
    T* b = nullptr;
};

// Training-mode activation record. acts[i] holds the input of layer i, but
// only for layers whose backward pass reads values (conv/relu/dense/softmax);
// maxpool needs just its argmax routes and flatten needs nothing.
template <typename T>
struct NetCache {
    int n = 0;
    bool training = false;
    std::vector<std::vector<T>> acts;
    std::vector<std::vector<size_t>> argmax;  // flat indices into the layer input
};

inline bool backward_reads_input(LayerKind kind) {
    return kind == LayerKind::conv2d || kind == LayerKind::relu || kind == LayerKind::dense ||
           kind == LayerKind::softmax;
}

// ---- kernels -------------------------------------------------------------

template <typename T>
void conv2d_forward(const T* in, const T* w, const T* bias, T* out, int n, const ConvGeom& g) {
    const int OH = g.out_h, OW = g.out_w, F = g.filters, K = g.kernel, C = g.in_c, S = g.stride;
    const size_t in_plane = static_cast<size_t>(g.in_h) * g.in_w * C;
    const size_t out_plane = static_cast<size_t>(OH) * OW * F;
    for (int img = 0; img < n; ++img) {
        const T* ip = in + img * in_plane;
        T* op = out + img * out_plane;
        for (int oy = 0; oy < OH; ++oy) {
            for (int ox = 0; ox < OW; ++ox) {
                T* orow = op + (static_cast<size_t>(oy) * OW + ox) * F;
                for (int f = 0; f < F; ++f) orow[f] = bias[f];
                for (int ky = 0; ky < K; ++ky) {
                    const int iy = oy * S + ky - g.pad_top;
                    if (iy < 0 || iy >= g.in_h) continue;
                    for (int kx = 0; kx < K; ++kx) {
                        const int ix = ox * S + kx - g.pad_left;
                        if (ix < 0 || ix >= g.in_w) continue;
                        const T* irow = ip + (static_cast<size_t>(iy) * g.in_w + ix) * C;
                        const T* wrow = w + (static_cast<size_t>(ky) * K + kx) * C * F;
                        for (int c = 0; c < C; ++c) {
                            const T v = irow[c];
                            const T* wf = wrow + static_cast<size_t>(c) * F;
                            for (int f = 0; f < F; ++f) orow[f] += v * wf[f];
                        }
                    }
                }
            }
        }
    }
}

// gw/gb/gin must be zero-initialized by the caller; gin may be null.
template <typename T>
void conv2d_backward(const T* in, const T* w, const T* gout, T* gin, T* gw, T* gb, int n,
                     const ConvGeom& g) {
    const int OH = g.out_h, OW = g.out_w, F = g.filters, K = g.kernel, C = g.in_c, S = g.stride;
    const size_t in_plane = static_cast<size_t>(g.in_h) * g.in_w * C;
    const size_t out_plane = static_cast<size_t>(OH) * OW * F;
    for (int img = 0; img < n; ++img) {
        const T* ip = in + img * in_plane;
        T* gip = gin ? gin + img * in_plane : nullptr;
        const T* gop = gout + img * out_plane;
        for (int oy = 0; oy < OH; ++oy) {
            for (int ox = 0; ox < OW; ++ox) {
                const T* grow = gop + (static_cast<size_t>(oy) * OW + ox) * F;
                for (int f = 0; f < F; ++f) gb[f] += grow[f];
                for (int ky = 0; ky < K; ++ky) {
                    const int iy = oy * S + ky - g.pad_top;
                    if (iy < 0 || iy >= g.in_h) continue;
                    for (int kx = 0; kx < K; ++kx) {
                        const int ix = ox * S + kx - g.pad_left;
                        if (ix < 0 || ix >= g.in_w) continue;
                        const size_t ioff = (static_cast<size_t>(iy) * g.in_w + ix) * C;
                        const size_t woff = (static_cast<size_t>(ky) * K + kx) * C * F;
                        for (int c = 0; c < C; ++c) {
                            const T v = ip[ioff + c];
                            const T* wf = w + woff + static_cast<size_t>(c) * F;
                            T* gwf = gw + woff + static_cast<size_t>(c) * F;
                            T acc = 0;
                            for (int f = 0; f < F; ++f) {
                                const T go = grow[f];
                                gwf[f] += v * go;
                                acc += wf[f] * go;
                            }
                            if (gip) gip[ioff + c] += acc;
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void relu_forward(const T* in, T* out, size_t len) {
    for (size_t i = 0; i < len; ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
}

template <typename T>
void relu_backward(const T* in, const T* gout, T* gin, size_t len) {
    for (size_t i = 0; i < len; ++i) gin[i] = in[i] > T(0) ? gout[i] : T(0);
}

// argmax (if non-null) receives, per output element, the flat index of the
// winning input element; ties keep the lowest flat index.
template <typename T>
void maxpool_forward(const T* in, T* out, size_t* argmax, int n, const PoolGeom& g) {
    const int OH = g.out_h, OW = g.out_w, C = g.channels, P = g.pool, S = g.stride;
    const size_t in_plane = static_cast<size_t>(g.in_h) * g.in_w * C;
    const size_t out_plane = static_cast<size_t>(OH) * OW * C;
    for (int img = 0; img < n; ++img) {
        const T* ip = in + img * in_plane;
        const size_t ibase = img * in_plane;
        T* op = out + img * out_plane;
        size_t* ap = argmax ? argmax + img * out_plane : nullptr;
        for (int oy = 0; oy < OH; ++oy) {
            for (int ox = 0; ox < OW; ++ox) {
                for (int c = 0; c < C; ++c) {
                    T best{};
                    size_t best_idx = 0;
                    bool first = true;
                    for (int py = 0; py < P; ++py) {
                        const int iy = oy * S + py;
                        for (int px = 0; px < P; ++px) {
                            const int ix = ox * S + px;
                            const size_t idx = (static_cast<size_t>(iy) * g.in_w + ix) * C + c;
                            const T v = ip[idx];
                            if (first || v > best) {
                                best = v;
                                best_idx = idx;
                                first = false;
                            }
                        }
                    }
                    const size_t o = (static_cast<size_t>(oy) * OW + ox) * C + c;
                    op[o] = best;
                    if (ap) ap[o] = ibase + best_idx;
                }
            }
        }
    }
}

// gin must be zero-initialized (covers the whole batch input buffer).
template <typename T>
void maxpool_backward(const size_t* argmax, const T* gout, T* gin, size_t out_len) {
    for (size_t i = 0; i < out_len; ++i) gin[argmax[i]] += gout[i];
}

template <typename T>
void dense_forward(const T* in, const T* w, const T* bias, T* out, int n, const DenseGeom& g) {
    const int D = g.in_dim, U = g.units;
    for (int i = 0; i < n; ++i) {
        const T* irow = in + static_cast<size_t>(i) * D;
        T* orow = out + static_cast<size_t>(i) * U;
        for (int u = 0; u < U; ++u) orow[u] = bias[u];
        for (int d = 0; d < D; ++d) {
            const T v = irow[d];
            const T* wrow = w + static_cast<size_t>(d) * U;
            for (int u = 0; u < U; ++u) orow[u] += v * wrow[u];
        }
    }
}

template <typename T>
void dense_backward(const T* in, const T* w, const T* gout, T* gin, T* gw, T* gb, int n,
                    const DenseGeom& g) {
    const int D = g.in_dim, U = g.units;
    for (int i = 0; i < n; ++i) {
        const T* irow = in + static_cast<size_t>(i) * D;
        const T* grow = gout + static_cast<size_t>(i) * U;
        for (int u = 0; u < U; ++u) gb[u] += grow[u];
        for (int d = 0; d < D; ++d) {
            const T v = irow[d];
            const T* wrow = w + static_cast<size_t>(d) * U;
            T* gwrow = gw + static_cast<size_t>(d) * U;
            T acc = 0;
            for (int u = 0; u < U; ++u) {
                const T go = grow[u];
                gwrow[u] += v * go;
                acc += wrow[u] * go;
            }
            if (gin) gin[static_cast<size_t>(i) * D + d] = acc;
        }
    }
}

template <typename T>
void softmax_forward(const T* in, T* out, int n, int k) {
    for (int i = 0; i < n; ++i) {
        const T* z = in + static_cast<size_t>(i) * k;
        T* p = out + static_cast<size_t>(i) * k;
        T mx = z[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, z[j]);
        T sum = 0;
        for (int j = 0; j < k; ++j) {
            p[j] = std::exp(z[j] - mx);
            sum += p[j];
        }
        for (int j = 0; j < k; ++j) p[j] /= sum;
    }
}

// Fused softmax + sparse categorical cross-entropy in log space:
// loss_i = logsumexp(z_i) - z_i[y_i], averaged over the batch.
// probs/grad may be null; grad rows are (p - onehot(y)) / n.
// Probabilities are normalized by the shifted-exponential sum (not via
// exp(z - lse)) so rows sum to 1 tightly even for large logits.
template <typename T>
T sparse_cce_logits_kernel(const T* logits, const int* labels, int n, int k, T* probs, T* grad) {
    double total = 0.0;
    std::vector<T> shifted(static_cast<size_t>(k));
    for (int i = 0; i < n; ++i) {
        const T* z = logits + static_cast<size_t>(i) * k;
        T mx = z[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, z[j]);
        T sum = 0;
        for (int j = 0; j < k; ++j) {
            shifted[j] = std::exp(z[j] - mx);
            sum += shifted[j];
        }
        total += static_cast<double>(mx) + std::log(static_cast<double>(sum)) -
                 static_cast<double>(z[labels[i]]);
        if (probs || grad) {
            for (int j = 0; j < k; ++j) {
                const T p = shifted[j] / sum;
                if (probs) probs[static_cast<size_t>(i) * k + j] = p;
                if (grad) {
                    T gv = p;
                    if (j == labels[i]) gv -= T(1);
                    grad[static_cast<size_t>(i) * k + j] = gv / static_cast<T>(n);
                }
            }
        }
    }
    return static_cast<T>(total / n);
}

// ---- sequential runner ----------------------------------------------------

template <typename T>
void run_layer(const LayerPlan& lp, const ParamView<T>& pv, const T* in, T* out, int n,
               std::vector<size_t>* argmax) {
    switch (lp.kind) {
        case LayerKind::conv2d:
            conv2d_forward(in, pv.w, pv.b, out, n, lp.conv);
            break;
        case LayerKind::relu:
            relu_forward(in, out, static_cast<size_t>(n) * lp.in_elems);
            break;
        case LayerKind::maxpool2d:
            if (argmax) argmax->resize(static_cast<size_t>(n) * lp.out_elems);
            maxpool_forward(in, out, argmax ? argmax->data() : nullptr, n, lp.pool);
            break;
        case LayerKind::flatten:
            if (out != in) std::memcpy(out, in, sizeof(T) * n * lp.in_elems);
            break;
        case LayerKind::dense:
            dense_forward(in, pv.w, pv.b, out, n, lp.dense);
            break;
        case LayerKind::softmax:
            softmax_forward(in, out, n, static_cast<int>(lp.in_elems));
            break;
    }
}

template <typename T>
void check_layer_finite(const T* out, size_t len, size_t layer_idx, LayerKind kind) {
    for (size_t i = 0; i < len; ++i) {
        if (!std::isfinite(out[i]))
            throw Error("non-finite activation after layer " + std::to_string(layer_idx) + " (" +
                        layer_kind_name(kind) + ")");
    }
}

// Runs the whole stack. When cache is non-null the activations backward
// needs are kept and maxpool argmax routes are recorded (training mode).
// logits_out, when non-null, receives the input of the final layer.
template <typename T>
void net_forward(const std::vector<LayerPlan>& plan, std::span<const ParamView<T>> params,
                 const T* input, int n, T* output, T* logits_out, NetCache<T>* cache,
                 bool check_finite) {
    if (cache) {
        cache->n = n;
        cache->training = true;
        cache->acts.assign(plan.size(), {});
        cache->argmax.assign(plan.size(), {});
    }

    std::vector<T> bufs[2];
    const T* cur = input;
    for (size_t li = 0; li < plan.size(); ++li) {
        const LayerPlan& lp = plan[li];
        const size_t in_len = static_cast<size_t>(n) * lp.in_elems;
        if (cache && backward_reads_input(lp.kind)) cache->acts[li].assign(cur, cur + in_len);
        if (logits_out && li + 1 == plan.size())
            std::memcpy(logits_out, cur, sizeof(T) * in_len);

        std::vector<T>& outbuf = bufs[li % 2];
        outbuf.resize(static_cast<size_t>(n) * lp.out_elems);
        run_layer(lp, params[li], cur, outbuf.data(), n, cache ? &cache->argmax[li] : nullptr);
        if (check_finite)
            check_layer_finite(outbuf.data(), outbuf.size(), li, lp.kind);
        cur = outbuf.data();
    }
    std::memcpy(output, cur, sizeof(T) * n * plan.back().out_elems);
}

// Evaluates layers [start, end) on a given activation; used by the
// finite-difference checks to avoid recomputing unperturbed prefixes.
template <typename T>
void net_forward_from(const std::vector<LayerPlan>& plan, std::span<const ParamView<T>> params,
                      size_t start, const T* act_in, int n, T* output) {
    std::vector<T> bufs[2];
    const T* cur = act_in;
    for (size_t li = start; li < plan.size(); ++li) {
        std::vector<T>& outbuf = bufs[li % 2];
        outbuf.resize(static_cast<size_t>(n) * plan[li].out_elems);
        run_layer(plan[li], params[li], cur, outbuf.data(), n, nullptr);
        cur = outbuf.data();
    }
    std::memcpy(output, cur, sizeof(T) * n * plan.back().out_elems);
}

// Backpropagates grad_logits (the loss gradient w.r.t. the softmax input)
// through the stack. Parameter gradient buffers must be zero-initialized.
// The trailing softmax is transparent here: the fused loss already
// differentiates through it.
template <typename T>
void net_backward(const std::vector<LayerPlan>& plan, std::span<const ParamView<T>> params,
                  const NetCache<T>& cache, const T* grad_logits, int n,
                  std::span<GradView<T>> grads, T* grad_input) {
    std::vector<T> bufs[2];
    const T* gcur = grad_logits;
    for (size_t li = plan.size(); li-- > 0;) {
        const LayerPlan& lp = plan[li];
        const T* lin = cache.acts[li].data();
        T* gin = nullptr;
        const bool want_gin = li > 0 || grad_input != nullptr;
        std::vector<T>& ginbuf = bufs[li % 2];
        if (want_gin) {
            ginbuf.assign(static_cast<size_t>(n) * lp.in_elems, T(0));
            gin = ginbuf.data();
        }
        switch (lp.kind) {
            case LayerKind::conv2d:
                conv2d_backward(lin, params[li].w, gcur, gin, grads[li].w, grads[li].b, n, lp.conv);
                break;
            case LayerKind::relu:
                if (gin) relu_backward(lin, gcur, gin, static_cast<size_t>(n) * lp.in_elems);
                break;
            case LayerKind::maxpool2d:
                if (gin)
                    maxpool_backward(cache.argmax[li].data(), gcur, gin,
                                     static_cast<size_t>(n) * lp.out_elems);
                break;
            case LayerKind::flatten:
                if (gin) std::memcpy(gin, gcur, sizeof(T) * n * lp.in_elems);
                break;
            case LayerKind::dense:
                dense_backward(lin, params[li].w, gcur, gin, grads[li].w, grads[li].b, n, lp.dense);
                break;
            case LayerKind::softmax:
                // Incoming gradient is already w.r.t. the logits.
                if (gin) std::memcpy(gin, gcur, sizeof(T) * n * lp.in_elems);
                break;
        }
        if (li == 0 && grad_input)
            std::memcpy(grad_input, gin, sizeof(T) * n * lp.in_elems);
        gcur = gin;
    }
}

}  // namespace scalpnet::detail
