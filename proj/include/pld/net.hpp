#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pld/common.hpp"
#include "pld/dual.hpp"

namespace pld {

enum class LayerKind : int {
    Convolution = 0,
    Nonlinearity,  // ReLU
    Pooling,       // non-overlapping average pool
    Dense,
    SoftmaxReadout,  // dense map to the 10 logits; softmax lives in the loss
    OutlierGate,     // impulse-noise front end: gated local-detail extraction
};

struct LayerSpec {
    LayerKind kind = LayerKind::Nonlinearity;
    int in_channels = 0, out_channels = 0, kernel = 0;  // convolution (stride 1, zero pad k/2)
    int in_features = 0, out_features = 0;              // dense / softmax-readout
    int window = 0;  // pooling (stride = window); outlier gate (suppression radius)
    // outlier gate: a pixel whose deviation from the local per-channel median
    // exceeds tau (softened by slope) counts as an impulse hit; evidence within
    // `window` pixels of a hit is suppressed with strength beta. Channel
    // serialization noise appears as exactly such impulses, while smooth
    // content and small-amplitude perturbations pass through.
    double gate_tau = 0.0, gate_slope = 0.0, gate_beta = 0.0;
};

inline LayerSpec conv_spec(int in_channels, int out_channels, int kernel) {
    LayerSpec s;
    s.kind = LayerKind::Convolution;
    s.in_channels = in_channels;
    s.out_channels = out_channels;
    s.kernel = kernel;
    return s;
}
inline LayerSpec relu_spec() {
    return LayerSpec{LayerKind::Nonlinearity, 0, 0, 0, 0, 0, 0};
}
inline LayerSpec pool_spec(int window) {
    LayerSpec s;
    s.kind = LayerKind::Pooling;
    s.window = window;
    return s;
}
inline LayerSpec dense_spec(int in_features, int out_features) {
    LayerSpec s;
    s.kind = LayerKind::Dense;
    s.in_features = in_features;
    s.out_features = out_features;
    return s;
}
inline LayerSpec readout_spec(int in_features, int out_features) {
    LayerSpec s;
    s.kind = LayerKind::SoftmaxReadout;
    s.in_features = in_features;
    s.out_features = out_features;
    return s;
}
inline LayerSpec gate_spec(double tau, double slope, double beta, int window) {
    LayerSpec s;
    s.kind = LayerKind::OutlierGate;
    s.window = window;
    s.gate_tau = tau;
    s.gate_slope = slope;
    s.gate_beta = beta;
    return s;
}

inline bool has_params(LayerKind k) {
    return k == LayerKind::Convolution || k == LayerKind::Dense ||
           k == LayerKind::SoftmaxReadout;
}

// Shape of the tensor flowing between layers: spatial (channels x side x side)
// until the first dense layer flattens it.
struct TensorShape {
    bool flat = false;
    int channels = 0, side = 0;  // spatial form
    int features = 0;            // flat form
    int count() const { return flat ? features : channels * side * side; }
};

struct Layer {
    LayerSpec spec;
    std::vector<double> weights;
    std::vector<double> biases;
};

// Layered model: parameter tensors in fixed layer order plus the shape at
// every layer boundary (boundary[i] enters layer i; boundary[n] is the
// output, always the 10 logits).
struct ModelParams {
    std::vector<Layer> layers;
    std::vector<TensorShape> boundaries;

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.weights.size() + l.biases.size();
        return n;
    }
};

// Per-layer gradients, index-aligned with ModelParams::layers (empty slots
// for parameter-free layers).
struct GradientSet {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    static GradientSet zeros_like(const ModelParams& m) {
        GradientSet g;
        g.weights.reserve(m.layers.size());
        g.biases.reserve(m.layers.size());
        for (const auto& l : m.layers) {
            g.weights.emplace_back(l.weights.size(), 0.0);
            g.biases.emplace_back(l.biases.size(), 0.0);
        }
        return g;
    }
};

// Validates that a layer stack composes from a 3x32x32 input down to 10
// logits and returns every boundary shape. Throws ShapeMismatch otherwise.
std::vector<TensorShape> infer_boundaries(const std::vector<LayerSpec>& specs);

// ---------------------------------------------------------------------------
// Templated engine. The same code runs with T=double (values, first-order
// gradients) and T=Dual (directional second-order information). Parameters
// are passed as per-layer views so double passes read model storage directly.
// ---------------------------------------------------------------------------

template <typename T>
struct ParamView {
    const T* w = nullptr;
    const T* b = nullptr;
};

inline std::vector<ParamView<double>> views_of(const ModelParams& m) {
    std::vector<ParamView<double>> v(m.layers.size());
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        if (!m.layers[i].weights.empty()) {
            v[i].w = m.layers[i].weights.data();
            v[i].b = m.layers[i].biases.data();
        }
    }
    return v;
}

template <typename T>
struct EngineBuffers {
    // acts[i] holds the activations entering layer i; acts[n] the logits
    std::vector<std::vector<T>> acts;

    void prepare(const ModelParams& m) {
        acts.resize(m.boundaries.size());
        for (std::size_t i = 0; i < m.boundaries.size(); ++i)
            acts[i].assign(std::size_t(m.boundaries[i].count()), T{});
    }
};

namespace detail {

template <typename T>
void conv_forward(const LayerSpec& s, int side, const ParamView<T>& p, const T* in, T* out) {
    const int k = s.kernel;
    const int pad = k / 2;
    const int plane = side * side;
    for (int oc = 0; oc < s.out_channels; ++oc) {
        T* outp = out + oc * plane;
        const T bias = p.b[oc];
        for (int i = 0; i < plane; ++i) outp[i] = bias;
        for (int ic = 0; ic < s.in_channels; ++ic) {
            const T* inp = in + ic * plane;
            const T* wbase = p.w + ((oc * s.in_channels + ic) * k) * k;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const T wv = wbase[ky * k + kx];
                    const int dy = ky - pad, dx = kx - pad;
                    const int y0 = std::max(0, -dy), y1 = std::min(side, side - dy);
                    const int x0 = std::max(0, -dx), x1 = std::min(side, side - dx);
                    for (int y = y0; y < y1; ++y) {
                        T* orow = outp + y * side;
                        const T* irow = inp + (y + dy) * side + dx;
                        for (int x = x0; x < x1; ++x) orow[x] += wv * irow[x];
                    }
                }
            }
        }
    }
}

// accumulates into dw/db (if given) and din (if given)
template <typename T>
void conv_backward(const LayerSpec& s, int side, const ParamView<T>& p, const T* in,
                   const T* dout, T* dw, T* db, T* din) {
    const int k = s.kernel;
    const int pad = k / 2;
    const int plane = side * side;
    if (din)
        for (int i = 0; i < s.in_channels * plane; ++i) din[i] = T{};
    for (int oc = 0; oc < s.out_channels; ++oc) {
        const T* doutp = dout + oc * plane;
        if (db) {
            T acc{};
            for (int i = 0; i < plane; ++i) acc += doutp[i];
            db[oc] = acc;
        }
        for (int ic = 0; ic < s.in_channels; ++ic) {
            const T* inp = in + ic * plane;
            T* dinp = din ? din + ic * plane : nullptr;
            const int wbase = ((oc * s.in_channels + ic) * k) * k;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const int dy = ky - pad, dx = kx - pad;
                    const int y0 = std::max(0, -dy), y1 = std::min(side, side - dy);
                    const int x0 = std::max(0, -dx), x1 = std::min(side, side - dx);
                    if (dw) {
                        T acc{};
                        for (int y = y0; y < y1; ++y) {
                            const T* drow = doutp + y * side;
                            const T* irow = inp + (y + dy) * side + dx;
                            for (int x = x0; x < x1; ++x) acc += drow[x] * irow[x];
                        }
                        dw[wbase + ky * k + kx] = acc;
                    }
                    if (dinp) {
                        const T wv = p.w[wbase + ky * k + kx];
                        for (int y = y0; y < y1; ++y) {
                            const T* drow = doutp + y * side;
                            T* irow = dinp + (y + dy) * side + dx;
                            for (int x = x0; x < x1; ++x) irow[x] += wv * drow[x];
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void dense_forward(int n_in, int n_out, const ParamView<T>& p, const T* in, T* out) {
    for (int j = 0; j < n_out; ++j) {
        T acc = p.b[j];
        const T* wrow = p.w + std::size_t(j) * n_in;
        for (int i = 0; i < n_in; ++i) acc += wrow[i] * in[i];
        out[j] = acc;
    }
}

template <typename T>
void dense_backward(int n_in, int n_out, const ParamView<T>& p, const T* in, const T* dout,
                    T* dw, T* db, T* din) {
    if (din)
        for (int i = 0; i < n_in; ++i) din[i] = T{};
    for (int j = 0; j < n_out; ++j) {
        const T d = dout[j];
        if (db) db[j] = d;
        const std::size_t row = std::size_t(j) * n_in;
        if (dw) {
            T* dwrow = dw + row;
            for (int i = 0; i < n_in; ++i) dwrow[i] = d * in[i];
        }
        if (din) {
            const T* wrow = p.w + row;
            for (int i = 0; i < n_in; ++i) din[i] += wrow[i] * d;
        }
    }
}

constexpr double kGateDetailScale = 4.0;  // restores dynamic range after mean removal

// Intermediate quantities of the outlier gate, recomputed by the backward
// pass (cheaper than threading extra state through the engine buffers).
template <typename T>
struct GateWork {
    std::vector<int> med_idx;   // per channel-pixel: index of the 3x3 median
    std::vector<T> hit;         // per channel-pixel: soft impulse indicator
    std::vector<T> gate;        // per pixel: evidence multiplier G
    std::vector<T> local_mean;  // per channel-pixel: 5x5 mean
    std::vector<int> mean_n;    // per pixel: 5x5 in-bounds count
};

template <typename T>
void gate_compute(const LayerSpec& s, int side, int channels, const T* in, GateWork<T>& wk) {
    using std::exp;
    const int plane = side * side;
    wk.med_idx.resize(std::size_t(channels) * plane);
    wk.hit.resize(std::size_t(channels) * plane);
    wk.gate.resize(std::size_t(plane));
    wk.local_mean.resize(std::size_t(channels) * plane);
    wk.mean_n.resize(std::size_t(plane));

    std::vector<T> H(std::size_t(plane), T{});
    for (int c = 0; c < channels; ++c) {
        const T* inp = in + std::size_t(c) * plane;
        for (int y = 0; y < side; ++y) {
            for (int x = 0; x < side; ++x) {
                const int p = y * side + x;
                // lower median of the in-bounds 3x3 neighborhood; selection by
                // (value, index) keeps ties deterministic
                int idx[9];
                int n = 0;
                for (int dy = -1; dy <= 1; ++dy) {
                    const int yy = y + dy;
                    if (yy < 0 || yy >= side) continue;
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int xx = x + dx;
                        if (xx < 0 || xx >= side) continue;
                        idx[n++] = yy * side + xx;
                    }
                }
                const int want = (n - 1) / 2;
                // selection sort up to the median rank (n <= 9)
                for (int a = 0; a <= want; ++a) {
                    int best = a;
                    for (int b = a + 1; b < n; ++b) {
                        const double va = scalar_value(inp[idx[b]]);
                        const double vb = scalar_value(inp[idx[best]]);
                        if (va < vb || (va == vb && idx[b] < idx[best])) best = b;
                    }
                    std::swap(idx[a], idx[best]);
                }
                const int mi = idx[want];
                wk.med_idx[std::size_t(c) * plane + p] = mi;
                const T dev = scalar_value(inp[p]) >= scalar_value(inp[mi]) ? inp[p] - inp[mi]
                                                                            : inp[mi] - inp[p];
                const T z = (dev - T{s.gate_tau}) * T{1.0 / s.gate_slope};
                const T hit = T{1.0} / (T{1.0} + exp(-z));
                wk.hit[std::size_t(c) * plane + p] = hit;
                H[std::size_t(p)] += hit;
            }
        }
    }
    const int r = s.window;
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            const int p = y * side + x;
            T acc{};
            for (int dy = -r; dy <= r; ++dy) {
                const int yy = y + dy;
                if (yy < 0 || yy >= side) continue;
                for (int dx = -r; dx <= r; ++dx) {
                    const int xx = x + dx;
                    if (xx < 0 || xx >= side) continue;
                    acc += H[std::size_t(yy * side + xx)];
                }
            }
            wk.gate[std::size_t(p)] = exp(acc * T{-s.gate_beta});
        }
    }
    for (int c = 0; c < channels; ++c) {
        const T* inp = in + std::size_t(c) * plane;
        for (int y = 0; y < side; ++y) {
            for (int x = 0; x < side; ++x) {
                const int p = y * side + x;
                T acc{};
                int n = 0;
                for (int dy = -2; dy <= 2; ++dy) {
                    const int yy = y + dy;
                    if (yy < 0 || yy >= side) continue;
                    for (int dx = -2; dx <= 2; ++dx) {
                        const int xx = x + dx;
                        if (xx < 0 || xx >= side) continue;
                        acc += inp[yy * side + xx];
                        ++n;
                    }
                }
                wk.local_mean[std::size_t(c) * plane + p] = acc * T{1.0 / n};
                if (c == 0) wk.mean_n[std::size_t(p)] = n;
            }
        }
    }
}

template <typename T>
void gate_forward(const LayerSpec& s, int side, int channels, const T* in, T* out,
                  GateWork<T>& wk) {
    gate_compute(s, side, channels, in, wk);
    const int plane = side * side;
    for (int c = 0; c < channels; ++c) {
        const T* inp = in + std::size_t(c) * plane;
        T* outp = out + std::size_t(c) * plane;
        for (int p = 0; p < plane; ++p)
            outp[p] = wk.gate[std::size_t(p)] *
                      (inp[p] - wk.local_mean[std::size_t(c) * plane + p]) *
                      T{kGateDetailScale};
    }
}

template <typename T>
void gate_backward(const LayerSpec& s, int side, int channels, const T* in, const T* dout,
                   T* din) {
    GateWork<T> wk;
    gate_compute(s, side, channels, in, wk);
    const int plane = side * side;
    for (int i = 0; i < channels * plane; ++i) din[i] = T{};

    // (a) through the gated detail: out = G * (x - mean5) * scale
    std::vector<T> dgate(std::size_t(plane), T{});
    for (int c = 0; c < channels; ++c) {
        const T* inp = in + std::size_t(c) * plane;
        const T* doutp = dout + std::size_t(c) * plane;
        T* dinp = din + std::size_t(c) * plane;
        for (int y = 0; y < side; ++y) {
            for (int x = 0; x < side; ++x) {
                const int p = y * side + x;
                const T detail = inp[p] - wk.local_mean[std::size_t(c) * plane + p];
                const T g = wk.gate[std::size_t(p)];
                dgate[std::size_t(p)] += doutp[p] * detail * T{kGateDetailScale};
                const T dd = doutp[p] * g * T{kGateDetailScale};
                dinp[p] += dd;
                const T spread = dd * T{-1.0 / wk.mean_n[std::size_t(p)]};
                for (int dy = -2; dy <= 2; ++dy) {
                    const int yy = y + dy;
                    if (yy < 0 || yy >= side) continue;
                    for (int dx = -2; dx <= 2; ++dx) {
                        const int xx = x + dx;
                        if (xx < 0 || xx >= side) continue;
                        dinp[yy * side + xx] += spread;
                    }
                }
            }
        }
    }

    // (b) through the gate: G = exp(-beta * box(H)), H = sum_c hit_c
    std::vector<T> dH(std::size_t(plane), T{});
    const int r = s.window;
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            const int p = y * side + x;
            const T ds = dgate[std::size_t(p)] * wk.gate[std::size_t(p)] * T{-s.gate_beta};
            for (int dy = -r; dy <= r; ++dy) {
                const int yy = y + dy;
                if (yy < 0 || yy >= side) continue;
                for (int dx = -r; dx <= r; ++dx) {
                    const int xx = x + dx;
                    if (xx < 0 || xx >= side) continue;
                    dH[std::size_t(yy * side + xx)] += ds;
                }
            }
        }
    }
    for (int c = 0; c < channels; ++c) {
        const T* inp = in + std::size_t(c) * plane;
        T* dinp = din + std::size_t(c) * plane;
        for (int p = 0; p < plane; ++p) {
            const T hit = wk.hit[std::size_t(c) * plane + p];
            const int mi = wk.med_idx[std::size_t(c) * plane + p];
            const double sgn = scalar_value(inp[p]) > scalar_value(inp[mi])   ? 1.0
                               : scalar_value(inp[p]) < scalar_value(inp[mi]) ? -1.0
                                                                              : 0.0;
            const T ddev =
                dH[std::size_t(p)] * hit * (T{1.0} - hit) * T{sgn / s.gate_slope};
            dinp[p] += ddev;
            dinp[mi] -= ddev;
        }
    }
}

}  // namespace detail

template <typename T>
void engine_forward(const ModelParams& m, const std::vector<ParamView<T>>& params,
                    const double* input, EngineBuffers<T>& buf) {
    buf.prepare(m);
    {
        auto& a0 = buf.acts[0];
        for (std::size_t i = 0; i < a0.size(); ++i) a0[i] = T{input[i]};
    }
    for (std::size_t li = 0; li < m.layers.size(); ++li) {
        const LayerSpec& s = m.layers[li].spec;
        const TensorShape& in_shape = m.boundaries[li];
        const T* in = buf.acts[li].data();
        T* out = buf.acts[li + 1].data();
        switch (s.kind) {
            case LayerKind::Convolution:
                detail::conv_forward(s, in_shape.side, params[li], in, out);
                break;
            case LayerKind::Nonlinearity: {
                const int n = in_shape.count();
                for (int i = 0; i < n; ++i) out[i] = scalar_value(in[i]) > 0.0 ? in[i] : T{};
                break;
            }
            case LayerKind::Pooling: {
                const int w = s.window;
                const int side = in_shape.side;
                const int oside = side / w;
                const double inv = 1.0 / (w * w);
                for (int c = 0; c < in_shape.channels; ++c) {
                    const T* inp = in + c * side * side;
                    T* outp = out + c * oside * oside;
                    for (int oy = 0; oy < oside; ++oy) {
                        for (int ox = 0; ox < oside; ++ox) {
                            T acc{};
                            for (int yy = 0; yy < w; ++yy)
                                for (int xx = 0; xx < w; ++xx)
                                    acc += inp[(oy * w + yy) * side + ox * w + xx];
                            outp[oy * oside + ox] = acc * T{inv};
                        }
                    }
                }
                break;
            }
            case LayerKind::Dense:
            case LayerKind::SoftmaxReadout:
                detail::dense_forward(in_shape.count(), s.out_features, params[li], in, out);
                break;
            case LayerKind::OutlierGate: {
                detail::GateWork<T> wk;
                detail::gate_forward(s, in_shape.side, in_shape.channels, in, out, wk);
                break;
            }
        }
    }
}

// Backward from dL/dlogits. Fills per-layer parameter gradients into
// grad_w/grad_b (when non-null; vectors must be layer-aligned and presized)
// and the input gradient into dinput (when non-null, size 3072).
template <typename T>
void engine_backward(const ModelParams& m, const std::vector<ParamView<T>>& params,
                     const EngineBuffers<T>& buf, const std::vector<T>& dlogits,
                     std::vector<std::vector<T>>* grad_w, std::vector<std::vector<T>>* grad_b,
                     std::vector<T>* dinput) {
    std::vector<T> dcur = dlogits;
    std::vector<T> dprev;
    for (std::size_t r = m.layers.size(); r-- > 0;) {
        const LayerSpec& s = m.layers[r].spec;
        const TensorShape& in_shape = m.boundaries[r];
        const T* in = buf.acts[r].data();
        const bool need_din = (r > 0) || (dinput != nullptr);
        dprev.assign(std::size_t(in_shape.count()), T{});
        T* din = need_din ? dprev.data() : nullptr;
        T* dw = grad_w ? (*grad_w)[r].data() : nullptr;
        T* db = grad_b ? (*grad_b)[r].data() : nullptr;
        switch (s.kind) {
            case LayerKind::Convolution:
                detail::conv_backward(s, in_shape.side, params[r], in, dcur.data(), dw, db,
                                      din);
                break;
            case LayerKind::Nonlinearity: {
                const int n = in_shape.count();
                if (din)
                    for (int i = 0; i < n; ++i)
                        din[i] = scalar_value(in[i]) > 0.0 ? dcur[std::size_t(i)] : T{};
                break;
            }
            case LayerKind::Pooling: {
                const int w = s.window;
                const int side = in_shape.side;
                const int oside = side / w;
                const double inv = 1.0 / (w * w);
                if (din) {
                    for (int c = 0; c < in_shape.channels; ++c) {
                        const T* dout = dcur.data() + c * oside * oside;
                        T* dinp = din + c * side * side;
                        for (int oy = 0; oy < oside; ++oy) {
                            for (int ox = 0; ox < oside; ++ox) {
                                const T d = dout[oy * oside + ox] * T{inv};
                                for (int yy = 0; yy < w; ++yy)
                                    for (int xx = 0; xx < w; ++xx)
                                        dinp[(oy * w + yy) * side + ox * w + xx] = d;
                            }
                        }
                    }
                }
                break;
            }
            case LayerKind::Dense:
            case LayerKind::SoftmaxReadout:
                detail::dense_backward(in_shape.count(), s.out_features, params[r], in,
                                       dcur.data(), dw, db, din);
                break;
            case LayerKind::OutlierGate:
                if (din)
                    detail::gate_backward(s, in_shape.side, in_shape.channels, in,
                                          dcur.data(), din);
                break;
        }
        if (need_din)
            dcur.swap(dprev);
        else
            break;  // r == 0 and no input gradient requested
    }
    if (dinput) *dinput = std::move(dcur);
}

// Softmax cross-entropy on logits; optionally emits dL/dlogits.
template <typename T>
T softmax_cross_entropy(const std::vector<T>& logits, int label, std::vector<T>* dlogits) {
    using std::exp;
    using std::log;
    T maxv = logits[0];
    for (std::size_t i = 1; i < logits.size(); ++i)
        if (scalar_value(logits[i]) > scalar_value(maxv)) maxv = logits[i];
    T sum{};
    std::vector<T> e(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        e[i] = exp(logits[i] - maxv);
        sum += e[i];
    }
    const T loss = log(sum) - (logits[std::size_t(label)] - maxv);
    if (dlogits) {
        dlogits->resize(logits.size());
        for (std::size_t i = 0; i < logits.size(); ++i) {
            (*dlogits)[i] = e[i] / sum;
            if (i == std::size_t(label)) (*dlogits)[i] -= T{1.0};
        }
    }
    return loss;
}

}  // namespace pld
