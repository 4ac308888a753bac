#pragma once
// Temperature estimator: a dense network mapping a k-step sensor history
// window (which may be fault-corrupted) to the current true indoor
// temperature of every zone.  It never sees the current reading — only the
// k preceding control periods — so a fault at the present step cannot touch
// its output.  Training optionally corrupts window temperatures at a small
// probability so the net learns to ignore implausible readings.

#include <cstdint>
#include <string>
#include <vector>

#include "hvacft/errors.hpp"
#include "hvacft/history.hpp"
#include "hvacft/nn.hpp"
#include "hvacft/rng.hpp"

namespace hvacft::predictor {

struct PredictorConfig {
    int k = 20;              // window length, control periods
    int v = 2;               // stride between window labels in the log
    double offset_c = 22.0;  // added to the raw net output, degC
    double p_pre = 0.1;      // training-window corruption probability
    double lr = 1e-3;
    int batch = 32;
    int epochs = 40;
    std::vector<int> hidden = {512, 256, 256, 256, 256};

    nn::NetSpec net_spec(int zones) const;  // dense [(2+2n)k, hidden..., n]
    void validate() const;                  // throws ConfigError
};

// Flattened supervised set: x rows are window features, y rows are the true
// per-zone temperatures (raw degC) at the window's end step.
struct Dataset {
    int zones = 0;
    int k = 0;
    int width = 0;
    std::vector<double> x;  // size() * width
    std::vector<double> y;  // size() * zones

    int size() const { return width == 0 ? 0 : static_cast<int>(x.size()) / width; }
};

// Windows end at log steps k, k+v, k+2v, ...; the label is the true
// temperature at the end step.  Window temperatures are corrupted with
// probability p_pre per zone-step.  Throws InputError when the log is
// shorter than k+1 entries.
Dataset build_training_set(const hist::Log& log, const PredictorConfig& cfg, Rng& rng);

// Adam on the squared error of (net(x) + offset) against y.  epoch_loss,
// when given, receives each epoch's mean per-sample loss.  A non-finite
// epoch loss raises TrainingError naming the epoch.
nn::ParamSet train(const Dataset& ds, const PredictorConfig& cfg, std::uint64_t seed,
                   std::vector<double>* epoch_loss = nullptr);

// Same optimisation continued from an existing parameter set instead of a
// fresh initialisation; train() is fine_tune() from He-initialised weights.
// init must map ds.width inputs to ds.zones outputs (StructuralError).
nn::ParamSet fine_tune(const nn::ParamSet& init, const Dataset& ds, const PredictorConfig& cfg,
                       std::uint64_t seed, std::vector<double>* epoch_loss = nullptr);

// Root-mean-square error of (net(x) + offset) against y over the whole set,
// pooled across zones, raw degC.
double rmse(const nn::ParamSet& p, const Dataset& ds, const PredictorConfig& cfg);

// net(flatten(window)) + offset, per zone, raw degC.
std::vector<double> predict(const nn::ParamSet& p, const hist::Window& w, double f_max_kgps,
                            const PredictorConfig& cfg);

// Wide CSV for inspection: header x0..x{width-1},y0..y{zones-1}.
void save_dataset_csv(const Dataset& ds, const std::string& path);

}  // namespace hvacft::predictor
