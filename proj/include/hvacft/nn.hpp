#pragma once
// Small dense/conv1d network kernel: reverse-mode gradients, Adam, seeded
// init.  All math is in 64-bit doubles.  Supported topology: zero or more
// conv1d layers (stride 1, no padding) followed by dense layers; an optional
// auxiliary input vector is concatenated at the flatten boundary.
//
// Parameter layout inside the flat vector, per layer, weights then bias:
//   dense  weights row-major [out][in], bias [out]
//   conv1d kernels [out_ch][in_ch][kernel], bias [out_ch]
// Conv activations are channel-major [channel][position].

#include <cstdint>
#include <span>
#include <vector>

#include "hvacft/errors.hpp"

namespace hvacft::nn {

enum class Act { None, Relu, Softmax };
enum class Kind { Dense, Conv1d };
enum class Loss { Mse, CrossEntropy, MaskedMse };

struct LayerSpec {
    Kind kind = Kind::Dense;
    int in = 0;    // dense: input width; conv: input channels
    int out = 0;   // dense: output width; conv: output channels
    int kernel = 0;  // conv only
    Act act = Act::None;
    int softmax_groups = 1;  // Softmax only: independent groups over the output
    bool operator==(const LayerSpec&) const = default;
};

struct NetSpec {
    std::vector<LayerSpec> layers;
    int conv_length = 0;  // spatial length of the conv input; 0 for pure dense nets
    int aux = 0;          // extra inputs appended at the flatten boundary

    int input_size() const;   // main input size (conv nets: channels * conv_length)
    int output_size() const;
    int dense_start() const;  // index of the first dense layer (== layer count if none)
    int length_after(int conv_layers) const;  // spatial length after that many conv layers
    int width(int layer) const;  // flat output width of layer (conv: channels * length)
    void validate() const;       // throws StructuralError on inconsistent wiring

    bool operator==(const NetSpec&) const = default;
};

// Convenience builders.
NetSpec dense_net(const std::vector<int>& widths, Act final_act = Act::None,
                  int softmax_groups = 1);

struct ParamSet {
    NetSpec spec;
    std::vector<double> values;

    static ParamSet zeros(const NetSpec& spec);
    // He-style uniform init: W ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)), biases 0.
    static ParamSet he_init(const NetSpec& spec, std::uint64_t seed);

    std::size_t layer_offset(int layer) const;  // offset of layer's weights
    std::size_t weight_count(int layer) const;
    std::size_t bias_count(int layer) const;
    double* weights(int layer);
    const double* weights(int layer) const;
    double* bias(int layer);
    const double* bias(int layer) const;

    // Elementwise arithmetic for parameter-space interpolation.  Shapes must
    // match exactly (StructuralError otherwise).
    ParamSet& operator+=(const ParamSet& o);
    ParamSet& operator-=(const ParamSet& o);
    ParamSet& operator*=(double s);
    friend ParamSet operator+(ParamSet a, const ParamSet& b) { a += b; return a; }
    friend ParamSet operator-(ParamSet a, const ParamSet& b) { a -= b; return a; }
    friend ParamSet operator*(ParamSet a, double s) { a *= s; return a; }
};

// Cached batch activations, retained for the backward pass.  act[0] is the
// (flat) main input, act[l] the post-activation output of layer l; for the
// first dense layer the input row is [flattened conv output | aux].
struct Trace {
    int batch = 0;
    std::vector<std::vector<double>> act;
    std::vector<std::vector<double>> pre;
};

// Pure single-sample forward.  `aux` must have spec.aux entries.
std::vector<double> forward(const ParamSet& p, std::span<const double> x,
                            std::span<const double> aux = {});

// Batch forward; X is batch rows of input_size(), AUX batch rows of spec.aux
// (nullptr when spec.aux == 0).
void forward_batch(const ParamSet& p, const double* X, const double* AUX, int batch,
                   Trace& tr);

// Gradient of the mean per-sample loss over the batch w.r.t. every parameter.
// `targets` is batch rows of output_size().  Loss semantics per sample:
//   Mse         sum_j (out_j - t_j)^2
//   MaskedMse   as Mse but entries with NaN target are skipped
//   CrossEntropy -sum log(softmax) dotted with one-hot rows; requires a final
//                Softmax layer
// Returns the mean loss; writes the gradient into `grad` (resized to match).
double backward_batch(const ParamSet& p, const Trace& tr, Loss loss,
                      const double* targets, ParamSet& grad);

struct BackwardOut {
    ParamSet grad;
    double loss = 0.0;
};
// Single-sample convenience wrapper.
BackwardOut backward(const ParamSet& p, std::span<const double> x,
                     std::span<const double> aux, Loss loss,
                     std::span<const double> target);

struct AdamState {
    std::vector<double> m, v;
    std::int64_t t = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    static AdamState for_params(const ParamSet& p);
};

// One Adam update.  Non-finite gradient entries raise NumericError.
void adam_step(ParamSet& p, const ParamSet& grad, AdamState& st, double lr);

// Fused forward/backward/Adam over one batch; returns the mean batch loss.
double train_batch(ParamSet& p, AdamState& st, const double* X, const double* AUX,
                   const double* T, int batch, Loss loss, double lr, Trace& scratch,
                   ParamSet& gscratch);

}  // namespace hvacft::nn
