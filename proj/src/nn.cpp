#include "hvacft/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "hvacft/rng.hpp"

namespace hvacft::nn {

namespace {

std::string shape_str(const LayerSpec& ls) {
    return (ls.kind == Kind::Conv1d ? "conv1d " : "dense ") + std::to_string(ls.in) +
           "->" + std::to_string(ls.out);
}

}  // namespace

// ---- NetSpec -------------------------------------------------------------

int NetSpec::dense_start() const {
    int l = 0;
    while (l < static_cast<int>(layers.size()) && layers[l].kind == Kind::Conv1d) ++l;
    return l;
}

int NetSpec::length_after(int conv_layers) const {
    int len = conv_length;
    for (int l = 0; l < conv_layers; ++l) len -= (layers[l].kernel - 1);
    return len;
}

int NetSpec::width(int layer) const {
    const LayerSpec& ls = layers[layer];
    if (ls.kind == Kind::Conv1d) return ls.out * length_after(layer + 1);
    return ls.out;
}

int NetSpec::input_size() const {
    if (layers.empty()) return 0;
    if (layers.front().kind == Kind::Conv1d) return layers.front().in * conv_length;
    return layers.front().in - (dense_start() == 0 ? aux : 0);
}

int NetSpec::output_size() const { return width(static_cast<int>(layers.size()) - 1); }

void NetSpec::validate() const {
    if (layers.empty()) throw StructuralError("net has no layers");
    const int nlayers = static_cast<int>(layers.size());
    const int ds = dense_start();
    if (ds > 0 && conv_length <= 0)
        throw StructuralError("conv net requires a positive conv_length");
    if (ds == 0 && conv_length != 0)
        throw StructuralError("conv_length set on a net with no conv layers");
    if (aux < 0) throw StructuralError("negative aux width");

    for (int l = 0; l < nlayers; ++l) {
        const LayerSpec& ls = layers[l];
        if (ls.in <= 0 || ls.out <= 0)
            throw StructuralError("layer " + std::to_string(l) + " has empty shape: " +
                                  shape_str(ls));
        if (ls.kind == Kind::Conv1d) {
            if (l >= ds)
                throw StructuralError("conv layer " + std::to_string(l) +
                                      " appears after a dense layer");
            if (ls.kernel < 1) throw StructuralError("conv kernel must be >= 1");
            if (length_after(l + 1) < 1)
                throw StructuralError("conv layer " + std::to_string(l) +
                                      " shrinks the signal below length 1");
            if (l > 0 && ls.in != layers[l - 1].out)
                throw StructuralError("conv channel mismatch at layer " + std::to_string(l));
        } else {
            int expect;
            if (l == 0) {
                expect = ls.in;  // pure dense: input width is declared here (incl. aux)
            } else if (l == ds) {
                expect = layers[l - 1].out * length_after(ds) + aux;
            } else {
                expect = layers[l - 1].out;
            }
            if (ls.in != expect)
                throw StructuralError("dense layer " + std::to_string(l) + " expects input " +
                                      std::to_string(expect) + ", declared " +
                                      std::to_string(ls.in));
        }
        if (ls.act == Act::Softmax) {
            if (l != nlayers - 1)
                throw StructuralError("softmax is only allowed on the final layer");
            if (ls.softmax_groups < 1 || width(l) % ls.softmax_groups != 0)
                throw StructuralError("softmax groups must evenly divide the output width");
        }
    }
}

NetSpec dense_net(const std::vector<int>& widths, Act final_act, int softmax_groups) {
    if (widths.size() < 2) throw StructuralError("dense net needs at least two widths");
    NetSpec spec;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const bool last = (i + 2 == widths.size());
        LayerSpec ls;
        ls.kind = Kind::Dense;
        ls.in = widths[i];
        ls.out = widths[i + 1];
        ls.act = last ? final_act : Act::Relu;
        ls.softmax_groups = last ? softmax_groups : 1;
        spec.layers.push_back(ls);
    }
    spec.validate();
    return spec;
}

// ---- ParamSet ------------------------------------------------------------

std::size_t ParamSet::weight_count(int layer) const {
    const LayerSpec& ls = spec.layers[layer];
    if (ls.kind == Kind::Conv1d)
        return static_cast<std::size_t>(ls.out) * ls.in * ls.kernel;
    return static_cast<std::size_t>(ls.out) * ls.in;
}

std::size_t ParamSet::bias_count(int layer) const {
    return static_cast<std::size_t>(spec.layers[layer].out);
}

std::size_t ParamSet::layer_offset(int layer) const {
    std::size_t off = 0;
    for (int l = 0; l < layer; ++l) off += weight_count(l) + bias_count(l);
    return off;
}

double* ParamSet::weights(int layer) { return values.data() + layer_offset(layer); }
const double* ParamSet::weights(int layer) const { return values.data() + layer_offset(layer); }
double* ParamSet::bias(int layer) { return values.data() + layer_offset(layer) + weight_count(layer); }
const double* ParamSet::bias(int layer) const {
    return values.data() + layer_offset(layer) + weight_count(layer);
}

ParamSet ParamSet::zeros(const NetSpec& spec) {
    spec.validate();
    ParamSet p;
    p.spec = spec;
    std::size_t total = 0;
    for (int l = 0; l < static_cast<int>(spec.layers.size()); ++l) {
        const LayerSpec& ls = spec.layers[l];
        const std::size_t w = ls.kind == Kind::Conv1d
                                  ? static_cast<std::size_t>(ls.out) * ls.in * ls.kernel
                                  : static_cast<std::size_t>(ls.out) * ls.in;
        total += w + ls.out;
    }
    p.values.assign(total, 0.0);
    return p;
}

ParamSet ParamSet::he_init(const NetSpec& spec, std::uint64_t seed) {
    ParamSet p = zeros(spec);
    Rng rng = make_rng(seed, 0x6e65742du /* "net-" */);
    for (int l = 0; l < static_cast<int>(spec.layers.size()); ++l) {
        const LayerSpec& ls = spec.layers[l];
        const int fan_in = ls.kind == Kind::Conv1d ? ls.in * ls.kernel : ls.in;
        const double limit = std::sqrt(6.0 / fan_in);
        double* w = p.weights(l);
        const std::size_t nw = p.weight_count(l);
        for (std::size_t i = 0; i < nw; ++i) w[i] = uniform(rng, -limit, limit);
        // biases stay zero
    }
    return p;
}

ParamSet& ParamSet::operator+=(const ParamSet& o) {
    if (!(spec == o.spec)) throw StructuralError("parameter shape mismatch in +=");
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += o.values[i];
    return *this;
}

ParamSet& ParamSet::operator-=(const ParamSet& o) {
    if (!(spec == o.spec)) throw StructuralError("parameter shape mismatch in -=");
    for (std::size_t i = 0; i < values.size(); ++i) values[i] -= o.values[i];
    return *this;
}

ParamSet& ParamSet::operator*=(double s) {
    for (double& v : values) v *= s;
    return *this;
}

// ---- forward -------------------------------------------------------------

namespace {

void apply_activation(const LayerSpec& ls, int flat_width, const double* pre, double* post,
                      int batch) {
    switch (ls.act) {
        case Act::None:
            std::memcpy(post, pre, sizeof(double) * static_cast<std::size_t>(batch) * flat_width);
            break;
        case Act::Relu:
            for (std::size_t i = 0; i < static_cast<std::size_t>(batch) * flat_width; ++i)
                post[i] = pre[i] > 0.0 ? pre[i] : 0.0;
            break;
        case Act::Softmax: {
            const int group = flat_width / ls.softmax_groups;
            for (int b = 0; b < batch; ++b) {
                const double* prow = pre + static_cast<std::size_t>(b) * flat_width;
                double* qrow = post + static_cast<std::size_t>(b) * flat_width;
                for (int g = 0; g < ls.softmax_groups; ++g) {
                    const double* pg = prow + g * group;
                    double* qg = qrow + g * group;
                    double mx = pg[0];
                    for (int c = 1; c < group; ++c) mx = std::max(mx, pg[c]);
                    double z = 0.0;
                    for (int c = 0; c < group; ++c) {
                        qg[c] = std::exp(pg[c] - mx);
                        z += qg[c];
                    }
                    for (int c = 0; c < group; ++c) qg[c] /= z;
                }
            }
            break;
        }
    }
}

// Y[b,:] = bias + sum_i X[b,i] * Wt[i,:] with Wt the transposed weight
// matrix.  The hot path is a register-blocked micro-kernel over 4 samples x
// 16 outputs whose partial sums live in vector registers across the whole i
// loop, so each step is pure FMA work instead of load/FMA/store round trips.
// Every output element still accumulates its terms in ascending-i order,
// keeping results independent of the blocking.
constexpr int kMr = 4;   // samples per micro-kernel
constexpr int kNr = 16;  // outputs per micro-kernel

#if defined(__GNUC__)
#define HVACFT_VEC_KERNELS 1
typedef double vd8 __attribute__((vector_size(64)));  // 8 doubles

inline vd8 loadu8(const double* p) {
    vd8 v;
    __builtin_memcpy(&v, p, sizeof v);
    return v;
}
inline void storeu8(double* p, vd8 v) { __builtin_memcpy(p, &v, sizeof v); }
inline vd8 splat8(double x) { return vd8{x, x, x, x, x, x, x, x}; }
#endif

void dense_forward(const double* X, int batch, int in, int out, const double* W,
                   const double* bias, double* Y, std::vector<double>& wt_scratch) {
    wt_scratch.resize(static_cast<std::size_t>(in) * out);
    for (int o = 0; o < out; ++o)
        for (int i = 0; i < in; ++i)
            wt_scratch[static_cast<std::size_t>(i) * out + o] = W[static_cast<std::size_t>(o) * in + i];
    const double* wt = wt_scratch.data();
    int out_r = 0;
#ifdef HVACFT_VEC_KERNELS
    out_r = out - out % kNr;
    const int batch_r = batch - batch % kMr;
    for (int o0 = 0; o0 < out_r; o0 += kNr) {
        for (int b0 = 0; b0 < batch_r; b0 += kMr) {
            const vd8 binit0 = loadu8(bias + o0);
            const vd8 binit1 = loadu8(bias + o0 + 8);
            vd8 a00 = binit0, a01 = binit1;
            vd8 a10 = binit0, a11 = binit1;
            vd8 a20 = binit0, a21 = binit1;
            vd8 a30 = binit0, a31 = binit1;
            const double* x0 = X + static_cast<std::size_t>(b0) * in;
            const double* x1 = x0 + in;
            const double* x2 = x1 + in;
            const double* x3 = x2 + in;
            const double* wr = wt + o0;
            for (int i = 0; i < in; ++i, wr += out) {
                const vd8 w0 = loadu8(wr), w1 = loadu8(wr + 8);
                const vd8 v0 = splat8(x0[i]), v1 = splat8(x1[i]);
                const vd8 v2 = splat8(x2[i]), v3 = splat8(x3[i]);
                a00 += v0 * w0; a01 += v0 * w1;
                a10 += v1 * w0; a11 += v1 * w1;
                a20 += v2 * w0; a21 += v2 * w1;
                a30 += v3 * w0; a31 += v3 * w1;
            }
            double* y = Y + static_cast<std::size_t>(b0) * out + o0;
            storeu8(y, a00); storeu8(y + 8, a01); y += out;
            storeu8(y, a10); storeu8(y + 8, a11); y += out;
            storeu8(y, a20); storeu8(y + 8, a21); y += out;
            storeu8(y, a30); storeu8(y + 8, a31);
        }
        for (int b = batch_r; b < batch; ++b) {
            vd8 a0 = loadu8(bias + o0), a1 = loadu8(bias + o0 + 8);
            const double* x = X + static_cast<std::size_t>(b) * in;
            const double* wr = wt + o0;
            for (int i = 0; i < in; ++i, wr += out) {
                const vd8 v = splat8(x[i]);
                a0 += v * loadu8(wr);
                a1 += v * loadu8(wr + 8);
            }
            double* y = Y + static_cast<std::size_t>(b) * out + o0;
            storeu8(y, a0);
            storeu8(y + 8, a1);
        }
    }
#endif
    if (out_r < out) {
        for (int b = 0; b < batch; ++b) {
            double* y = Y + static_cast<std::size_t>(b) * out;
            for (int o = out_r; o < out; ++o) y[o] = bias[o];
            const double* x = X + static_cast<std::size_t>(b) * in;
            for (int i = 0; i < in; ++i) {
                const double xv = x[i];
                if (xv == 0.0) continue;  // ReLU inputs are often sparse
                const double* wr = wt + static_cast<std::size_t>(i) * out;
                for (int o = out_r; o < out; ++o) y[o] += xv * wr[o];
            }
        }
    }
}

// The spatial axis is short (a dozen steps), so a convolution here is best
// treated as one matrix product: stage every (sample, position) pair as a row
// of kernel-window features, run the dense micro-kernel over all rows at
// once, and scatter the result back to the channel-major layout.
thread_local std::vector<double> g_conv_wt;    // dense_forward transpose scratch
thread_local std::vector<double> g_conv_cols;  // input as [b*out_len+t][ic*K+j]
thread_local std::vector<double> g_conv_yt;    // output as [b*out_len+t][oc]

void conv_stage_cols(const double* X, int batch, const LayerSpec& ls, int in_len, int out_len,
                     double* cols) {
    const int R = ls.in * ls.kernel;
    for (int b = 0; b < batch; ++b) {
        const double* x = X + static_cast<std::size_t>(b) * ls.in * in_len;
        for (int t = 0; t < out_len; ++t) {
            double* row = cols + (static_cast<std::size_t>(b) * out_len + t) * R;
            for (int ic = 0; ic < ls.in; ++ic) {
                const double* xrow = x + static_cast<std::size_t>(ic) * in_len + t;
                for (int j = 0; j < ls.kernel; ++j) row[ic * ls.kernel + j] = xrow[j];
            }
        }
    }
}

void conv_forward(const double* X, int batch, const LayerSpec& ls, int in_len, const double* W,
                  const double* bias, double* Y) {
    const int out_len = in_len - ls.kernel + 1;
    const int R = ls.in * ls.kernel;
    const int rows = batch * out_len;
    g_conv_cols.resize(static_cast<std::size_t>(rows) * R);
    g_conv_yt.resize(static_cast<std::size_t>(rows) * ls.out);
    conv_stage_cols(X, batch, ls, in_len, out_len, g_conv_cols.data());
    // The conv weight layout [oc][ic*K+j] is exactly a dense [out][in] matrix
    // over the staged rows.
    dense_forward(g_conv_cols.data(), rows, R, ls.out, W, bias, g_conv_yt.data(), g_conv_wt);
    for (int b = 0; b < batch; ++b) {
        double* y = Y + static_cast<std::size_t>(b) * ls.out * out_len;
        const double* yt = g_conv_yt.data() + static_cast<std::size_t>(b) * out_len * ls.out;
        for (int oc = 0; oc < ls.out; ++oc)
            for (int t = 0; t < out_len; ++t)
                y[static_cast<std::size_t>(oc) * out_len + t] =
                    yt[static_cast<std::size_t>(t) * ls.out + oc];
    }
}

thread_local std::vector<double> g_wt_scratch;

}  // namespace

void forward_batch(const ParamSet& p, const double* X, const double* AUX, int batch, Trace& tr) {
    const NetSpec& spec = p.spec;
    const int nlayers = static_cast<int>(spec.layers.size());
    const int ds = spec.dense_start();
    const int in_size = spec.input_size();
    if (spec.aux > 0 && AUX == nullptr)
        throw StructuralError("net declares aux inputs but none were provided");

    tr.batch = batch;
    tr.act.resize(nlayers + 1);
    tr.pre.resize(nlayers);

    // act[0]: the main input; when the net is pure dense with aux, append aux now.
    if (ds == 0 && spec.aux > 0) {
        tr.act[0].resize(static_cast<std::size_t>(batch) * (in_size + spec.aux));
        for (int b = 0; b < batch; ++b) {
            double* row = tr.act[0].data() + static_cast<std::size_t>(b) * (in_size + spec.aux);
            std::memcpy(row, X + static_cast<std::size_t>(b) * in_size, sizeof(double) * in_size);
            std::memcpy(row + in_size, AUX + static_cast<std::size_t>(b) * spec.aux,
                        sizeof(double) * spec.aux);
        }
    } else {
        tr.act[0].assign(X, X + static_cast<std::size_t>(batch) * in_size);
    }

    for (int l = 0; l < nlayers; ++l) {
        const LayerSpec& ls = spec.layers[l];
        const int w = spec.width(l);
        tr.pre[l].resize(static_cast<std::size_t>(batch) * w);

        if (ls.kind == Kind::Conv1d) {
            conv_forward(tr.act[l].data(), batch, ls, spec.length_after(l), p.weights(l),
                         p.bias(l), tr.pre[l].data());
        } else {
            const int in = ls.in;
            dense_forward(tr.act[l].data(), batch, in, ls.out, p.weights(l), p.bias(l),
                          tr.pre[l].data(), g_wt_scratch);
        }

        // post-activation output; for the layer feeding the first dense layer,
        // append the aux inputs so act[ds] is the concatenated dense input.
        const bool feed_aux = (l + 1 == ds) && spec.aux > 0;
        const int out_w = w + (feed_aux ? spec.aux : 0);
        tr.act[l + 1].resize(static_cast<std::size_t>(batch) * out_w);
        if (feed_aux) {
            std::vector<double> tmp(static_cast<std::size_t>(batch) * w);
            apply_activation(ls, w, tr.pre[l].data(), tmp.data(), batch);
            for (int b = 0; b < batch; ++b) {
                double* row = tr.act[l + 1].data() + static_cast<std::size_t>(b) * out_w;
                std::memcpy(row, tmp.data() + static_cast<std::size_t>(b) * w,
                            sizeof(double) * w);
                std::memcpy(row + w, AUX + static_cast<std::size_t>(b) * spec.aux,
                            sizeof(double) * spec.aux);
            }
        } else {
            apply_activation(ls, w, tr.pre[l].data(), tr.act[l + 1].data(), batch);
        }
    }
}

std::vector<double> forward(const ParamSet& p, std::span<const double> x,
                            std::span<const double> aux) {
    const NetSpec& spec = p.spec;
    if (static_cast<int>(x.size()) != spec.input_size())
        throw StructuralError("forward input size " + std::to_string(x.size()) +
                              " != expected " + std::to_string(spec.input_size()));
    if (static_cast<int>(aux.size()) != spec.aux)
        throw StructuralError("forward aux size " + std::to_string(aux.size()) +
                              " != expected " + std::to_string(spec.aux));
    Trace tr;
    forward_batch(p, x.data(), spec.aux > 0 ? aux.data() : nullptr, 1, tr);
    return tr.act.back();
}

// ---- backward ------------------------------------------------------------

namespace {

// Register-blocked like dense_forward.  dW/dB elements accumulate their batch
// terms in ascending-b order and dX elements in ascending-o order, matching a
// straight per-sample loop, so the blocking never changes results.
void dense_backward(const double* X, const double* dY, int batch, int in, int out,
                    const double* W, double* dW, double* dB, double* dX) {
    for (int b = 0; b < batch; ++b) {
        const double* dyr = dY + static_cast<std::size_t>(b) * out;
        for (int o = 0; o < out; ++o) dB[o] += dyr[o];
    }

    int in_r = 0;
#ifdef HVACFT_VEC_KERNELS
    in_r = in - in % kNr;
    // dW[o,i] += sum_b dY[b,o] * X[b,i], blocked 4 outputs x 16 inputs.
    const int out_r4 = out - out % kMr;
    for (int i0 = 0; i0 < in_r; i0 += kNr) {
        for (int o0 = 0; o0 < out_r4; o0 += kMr) {
            vd8 a00{}, a01{}, a10{}, a11{}, a20{}, a21{}, a30{}, a31{};
            const double* dyp = dY + o0;
            const double* xr = X + i0;
            for (int b = 0; b < batch; ++b, dyp += out, xr += in) {
                const vd8 c0 = loadu8(xr), c1 = loadu8(xr + 8);
                const vd8 d0 = splat8(dyp[0]), d1 = splat8(dyp[1]);
                const vd8 d2 = splat8(dyp[2]), d3 = splat8(dyp[3]);
                a00 += d0 * c0; a01 += d0 * c1;
                a10 += d1 * c0; a11 += d1 * c1;
                a20 += d2 * c0; a21 += d2 * c1;
                a30 += d3 * c0; a31 += d3 * c1;
            }
            double* dwr = dW + static_cast<std::size_t>(o0) * in + i0;
            storeu8(dwr, loadu8(dwr) + a00); storeu8(dwr + 8, loadu8(dwr + 8) + a01); dwr += in;
            storeu8(dwr, loadu8(dwr) + a10); storeu8(dwr + 8, loadu8(dwr + 8) + a11); dwr += in;
            storeu8(dwr, loadu8(dwr) + a20); storeu8(dwr + 8, loadu8(dwr + 8) + a21); dwr += in;
            storeu8(dwr, loadu8(dwr) + a30); storeu8(dwr + 8, loadu8(dwr + 8) + a31);
        }
        for (int b = 0; b < batch; ++b) {  // output remainder
            const double* dyr = dY + static_cast<std::size_t>(b) * out;
            const vd8 c0 = loadu8(X + static_cast<std::size_t>(b) * in + i0);
            const vd8 c1 = loadu8(X + static_cast<std::size_t>(b) * in + i0 + 8);
            for (int o = out_r4; o < out; ++o) {
                const double d = dyr[o];
                if (d == 0.0) continue;
                double* dwr = dW + static_cast<std::size_t>(o) * in + i0;
                const vd8 dv = splat8(d);
                storeu8(dwr, loadu8(dwr) + dv * c0);
                storeu8(dwr + 8, loadu8(dwr + 8) + dv * c1);
            }
        }
    }
#endif
    if (in_r < in) {  // input remainder, all outputs
        for (int b = 0; b < batch; ++b) {
            const double* dyr = dY + static_cast<std::size_t>(b) * out;
            const double* xr = X + static_cast<std::size_t>(b) * in;
            for (int o = 0; o < out; ++o) {
                const double d = dyr[o];
                if (d == 0.0) continue;
                double* dwr = dW + static_cast<std::size_t>(o) * in;
                for (int i = in_r; i < in; ++i) dwr[i] += d * xr[i];
            }
        }
    }

    // dX[b,i] += sum_o dY[b,o] * W[o,i], blocked 4 samples x 16 inputs.
    if (!dX) return;
#ifdef HVACFT_VEC_KERNELS
    const int batch_r = batch - batch % kMr;
    for (int i0 = 0; i0 < in_r; i0 += kNr) {
        for (int b0 = 0; b0 < batch_r; b0 += kMr) {
            vd8 a00{}, a01{}, a10{}, a11{}, a20{}, a21{}, a30{}, a31{};
            const double* y0 = dY + static_cast<std::size_t>(b0) * out;
            const double* y1 = y0 + out;
            const double* y2 = y1 + out;
            const double* y3 = y2 + out;
            const double* wr = W + i0;
            for (int o = 0; o < out; ++o, wr += in) {
                const vd8 w0 = loadu8(wr), w1 = loadu8(wr + 8);
                const vd8 d0 = splat8(y0[o]), d1 = splat8(y1[o]);
                const vd8 d2 = splat8(y2[o]), d3 = splat8(y3[o]);
                a00 += d0 * w0; a01 += d0 * w1;
                a10 += d1 * w0; a11 += d1 * w1;
                a20 += d2 * w0; a21 += d2 * w1;
                a30 += d3 * w0; a31 += d3 * w1;
            }
            double* dxr = dX + static_cast<std::size_t>(b0) * in + i0;
            storeu8(dxr, loadu8(dxr) + a00); storeu8(dxr + 8, loadu8(dxr + 8) + a01); dxr += in;
            storeu8(dxr, loadu8(dxr) + a10); storeu8(dxr + 8, loadu8(dxr + 8) + a11); dxr += in;
            storeu8(dxr, loadu8(dxr) + a20); storeu8(dxr + 8, loadu8(dxr + 8) + a21); dxr += in;
            storeu8(dxr, loadu8(dxr) + a30); storeu8(dxr + 8, loadu8(dxr + 8) + a31);
        }
        for (int b = batch_r; b < batch; ++b) {  // sample remainder
            const double* dyr = dY + static_cast<std::size_t>(b) * out;
            double* dxr = dX + static_cast<std::size_t>(b) * in + i0;
            vd8 a0{}, a1{};
            const double* wr = W + i0;
            for (int o = 0; o < out; ++o, wr += in) {
                const vd8 dv = splat8(dyr[o]);
                a0 += dv * loadu8(wr);
                a1 += dv * loadu8(wr + 8);
            }
            storeu8(dxr, loadu8(dxr) + a0);
            storeu8(dxr + 8, loadu8(dxr + 8) + a1);
        }
    }
#endif
    if (in_r < in) {  // input remainder
        for (int b = 0; b < batch; ++b) {
            const double* dyr = dY + static_cast<std::size_t>(b) * out;
            double* dxr = dX + static_cast<std::size_t>(b) * in;
            for (int o = 0; o < out; ++o) {
                const double d = dyr[o];
                if (d == 0.0) continue;
                const double* wr = W + static_cast<std::size_t>(o) * in;
                for (int i = in_r; i < in; ++i) dxr[i] += d * wr[i];
            }
        }
    }
}

thread_local std::vector<double> g_conv_dyt;    // upstream gradient as [b*out_len+t][oc]
thread_local std::vector<double> g_conv_dcols;  // window-feature gradient rows

// Mirrors conv_forward: stage both operands as flat rows, reuse the dense
// backward kernel for the weight/input gradients, then scatter-add the
// window-feature gradients back onto the overlapping input positions.
void conv_backward(const double* X, const double* dY, int batch, const LayerSpec& ls,
                   int in_len, const double* W, double* dW, double* dB, double* dX) {
    const int out_len = in_len - ls.kernel + 1;
    const int R = ls.in * ls.kernel;
    const int rows = batch * out_len;
    g_conv_cols.resize(static_cast<std::size_t>(rows) * R);
    conv_stage_cols(X, batch, ls, in_len, out_len, g_conv_cols.data());
    g_conv_dyt.resize(static_cast<std::size_t>(rows) * ls.out);
    for (int b = 0; b < batch; ++b) {
        const double* dy = dY + static_cast<std::size_t>(b) * ls.out * out_len;
        double* dyt = g_conv_dyt.data() + static_cast<std::size_t>(b) * out_len * ls.out;
        for (int oc = 0; oc < ls.out; ++oc)
            for (int t = 0; t < out_len; ++t)
                dyt[static_cast<std::size_t>(t) * ls.out + oc] =
                    dy[static_cast<std::size_t>(oc) * out_len + t];
    }
    if (dX) g_conv_dcols.assign(static_cast<std::size_t>(rows) * R, 0.0);
    dense_backward(g_conv_cols.data(), g_conv_dyt.data(), rows, R, ls.out, W, dW, dB,
                   dX ? g_conv_dcols.data() : nullptr);
    if (dX) {
        for (int b = 0; b < batch; ++b) {
            double* dx = dX + static_cast<std::size_t>(b) * ls.in * in_len;
            for (int t = 0; t < out_len; ++t) {
                const double* row =
                    g_conv_dcols.data() + (static_cast<std::size_t>(b) * out_len + t) * R;
                for (int ic = 0; ic < ls.in; ++ic) {
                    double* dxrow = dx + static_cast<std::size_t>(ic) * in_len + t;
                    for (int j = 0; j < ls.kernel; ++j) dxrow[j] += row[ic * ls.kernel + j];
                }
            }
        }
    }
}

}  // namespace

double backward_batch(const ParamSet& p, const Trace& tr, Loss loss, const double* targets,
                      ParamSet& grad) {
    const NetSpec& spec = p.spec;
    const int nlayers = static_cast<int>(spec.layers.size());
    const int batch = tr.batch;
    const int out_w = spec.output_size();
    const LayerSpec& last = spec.layers.back();

    if (loss == Loss::CrossEntropy && last.act != Act::Softmax)
        throw StructuralError("cross-entropy requires a final softmax layer");
    if (last.act == Act::Softmax && loss != Loss::CrossEntropy)
        throw StructuralError("softmax output must be trained with cross-entropy");

    if (!(grad.spec == spec) || grad.values.size() != p.values.size())
        grad = ParamSet::zeros(spec);
    else
        std::fill(grad.values.begin(), grad.values.end(), 0.0);

    const double inv_b = 1.0 / batch;
    const double* out = tr.act[nlayers].data();
    double total = 0.0;

    // dcur: gradient w.r.t. the final layer's PRE-activation for CE (fused) or
    // post-activation otherwise; scaled by 1/batch so accumulations are means.
    std::vector<double> dcur(static_cast<std::size_t>(batch) * out_w, 0.0);
    for (int b = 0; b < batch; ++b) {
        const double* orow = out + static_cast<std::size_t>(b) * out_w;
        const double* trow = targets + static_cast<std::size_t>(b) * out_w;
        double* drow = dcur.data() + static_cast<std::size_t>(b) * out_w;
        switch (loss) {
            case Loss::Mse:
                for (int j = 0; j < out_w; ++j) {
                    const double d = orow[j] - trow[j];
                    total += d * d;
                    drow[j] = 2.0 * d * inv_b;
                }
                break;
            case Loss::MaskedMse:
                for (int j = 0; j < out_w; ++j) {
                    if (std::isnan(trow[j])) continue;
                    const double d = orow[j] - trow[j];
                    total += d * d;
                    drow[j] = 2.0 * d * inv_b;
                }
                break;
            case Loss::CrossEntropy:
                for (int j = 0; j < out_w; ++j) {
                    if (trow[j] != 0.0)
                        total -= trow[j] * std::log(std::max(orow[j], 1e-300));
                    drow[j] = (orow[j] - trow[j]) * inv_b;  // fused softmax+CE
                }
                break;
        }
    }
    total *= inv_b;

    const bool fused_final = (loss == Loss::CrossEntropy);
    const int ds = spec.dense_start();

    for (int l = nlayers - 1; l >= 0; --l) {
        const LayerSpec& ls = spec.layers[l];
        const int w = spec.width(l);

        // convert d(post) to d(pre) unless the loss already fused it
        if (!(l == nlayers - 1 && fused_final)) {
            if (ls.act == Act::Relu) {
                const double* pre = tr.pre[l].data();
                for (std::size_t i = 0; i < static_cast<std::size_t>(batch) * w; ++i)
                    if (pre[i] <= 0.0) dcur[i] = 0.0;
            }
            // Act::None: identity
        }

        const bool need_dx = l > 0;
        std::vector<double> dprev;
        const int in_flat = static_cast<int>(tr.act[l].size()) / batch;
        if (need_dx) dprev.assign(static_cast<std::size_t>(batch) * in_flat, 0.0);

        if (ls.kind == Kind::Conv1d) {
            conv_backward(tr.act[l].data(), dcur.data(), batch, ls, spec.length_after(l),
                          p.weights(l), grad.weights(l), grad.bias(l),
                          need_dx ? dprev.data() : nullptr);
        } else {
            dense_backward(tr.act[l].data(), dcur.data(), batch, ls.in, ls.out, p.weights(l),
                           grad.weights(l), grad.bias(l), need_dx ? dprev.data() : nullptr);
        }

        if (!need_dx) break;

        // entering the conv stack from the first dense layer: drop aux columns
        if (l == ds && spec.aux > 0) {
            const int flat = in_flat - spec.aux;
            std::vector<double> trimmed(static_cast<std::size_t>(batch) * flat);
            for (int b = 0; b < batch; ++b)
                std::memcpy(trimmed.data() + static_cast<std::size_t>(b) * flat,
                            dprev.data() + static_cast<std::size_t>(b) * in_flat,
                            sizeof(double) * flat);
            dcur = std::move(trimmed);
        } else {
            dcur = std::move(dprev);
        }
    }

    return total;
}

BackwardOut backward(const ParamSet& p, std::span<const double> x, std::span<const double> aux,
                     Loss loss, std::span<const double> target) {
    const NetSpec& spec = p.spec;
    if (static_cast<int>(target.size()) != spec.output_size())
        throw StructuralError("target size " + std::to_string(target.size()) +
                              " != net output " + std::to_string(spec.output_size()));
    Trace tr;
    if (static_cast<int>(x.size()) != spec.input_size())
        throw StructuralError("backward input size mismatch");
    if (static_cast<int>(aux.size()) != spec.aux)
        throw StructuralError("backward aux size mismatch");
    forward_batch(p, x.data(), spec.aux > 0 ? aux.data() : nullptr, 1, tr);
    BackwardOut out;
    out.grad = ParamSet::zeros(spec);
    out.loss = backward_batch(p, tr, loss, target.data(), out.grad);
    return out;
}

// ---- Adam ----------------------------------------------------------------

AdamState AdamState::for_params(const ParamSet& p) {
    AdamState st;
    st.m.assign(p.values.size(), 0.0);
    st.v.assign(p.values.size(), 0.0);
    return st;
}

void adam_step(ParamSet& p, const ParamSet& grad, AdamState& st, double lr) {
    if (!(p.spec == grad.spec)) throw StructuralError("adam gradient shape mismatch");
    if (st.m.size() != p.values.size()) throw StructuralError("adam state size mismatch");
    // Branch-free finiteness scan: g * 0 is NaN exactly when g is Inf or NaN,
    // and NaN propagates through the sums.
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    const std::size_t nv = grad.values.size();
    const double* gv = grad.values.data();
    std::size_t i4 = 0;
    for (; i4 + 4 <= nv; i4 += 4) {
        s0 += gv[i4] * 0.0;
        s1 += gv[i4 + 1] * 0.0;
        s2 += gv[i4 + 2] * 0.0;
        s3 += gv[i4 + 3] * 0.0;
    }
    for (; i4 < nv; ++i4) s0 += gv[i4] * 0.0;
    if (!(s0 + s1 + s2 + s3 == 0.0))
        throw NumericError("non-finite gradient entry in adam step");

    st.t += 1;
    const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
    const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
    const double b1 = st.beta1, b2 = st.beta2, eps = st.eps;
    const double k1 = lr / c1;        // folds the first bias correction into lr
    const double inv_c2 = 1.0 / c2;   // one division per step instead of per entry
    const std::size_t n = p.values.size();
    const double* __restrict gp = grad.values.data();
    double* __restrict mp = st.m.data();
    double* __restrict vp = st.v.data();
    double* __restrict pp = p.values.data();
    for (std::size_t i = 0; i < n; ++i) {
        const double g = gp[i];
        const double m = b1 * mp[i] + (1.0 - b1) * g;
        const double v = b2 * vp[i] + (1.0 - b2) * g * g;
        mp[i] = m;
        vp[i] = v;
        pp[i] -= k1 * m / (std::sqrt(v * inv_c2) + eps);
    }
}

double train_batch(ParamSet& p, AdamState& st, const double* X, const double* AUX,
                   const double* T, int batch, Loss loss, double lr, Trace& scratch,
                   ParamSet& gscratch) {
    forward_batch(p, X, AUX, batch, scratch);
    const double l = backward_batch(p, scratch, loss, T, gscratch);
    adam_step(p, gscratch, st, lr);
    return l;
}

}  // namespace hvacft::nn
