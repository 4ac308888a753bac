#pragma once
// Proposal selector: a temporal-convolution classifier that, per zone, picks
// the more trustworthy of two current-temperature proposals — the raw sensor
// reading or the history-based estimate.  The net consumes the k-step
// history as (2+2n) channels over time plus the 2n normalized proposals at
// the flatten boundary, and emits 2 logits per zone (softmax per zone).
//
// Training data is mined from a healthy log: per window and zone it pairs
// the true temperature with synthetic fault draws —
//   type 1: (true, fault)  -> pick slot 1, three fault draws
//   type 2: (fault, true)  -> pick slot 2, three fault draws
//   type 3: (fault, fault) -> pick whichever lies closer to truth, four
//           draws, ties to slot 1
// with the window's indoor temperatures additionally corrupted at p_sel.

#include <cstdint>
#include <utility>
#include <vector>

#include "hvacft/errors.hpp"
#include "hvacft/history.hpp"
#include "hvacft/nn.hpp"
#include "hvacft/rng.hpp"

namespace hvacft::selector {

struct SelectorConfig {
    int k = 20;
    double p_sel = 0.3;  // window corruption probability during mining
    int n_type1 = 3;
    int n_type2 = 3;
    int n_type3 = 4;
    double lr = 1e-4;
    int batch = 32;
    int epochs = 50;
    int stride = 4;  // log steps between mined windows; denser mining
                     // prevents the net from memorizing a small window set
    std::vector<int> conv_channels = {32, 64, 64, 64};
    int kernel = 3;
    std::vector<int> dense_hidden = {512, 256, 256, 128, 256, 256, 256};
    double fault_low_c = 10.0;
    double fault_high_c = 40.0;

    nn::NetSpec net_spec(int zones) const;
    void validate() const;  // throws ConfigError
};

// Labeling rule for two imperfect proposals: 1 on the slot closer to truth,
// ties to the first slot.
std::pair<int, int> closer_label(double pl1, double pl2, double truth_c);

struct Dataset {
    int zones = 0;
    int k = 0;
    int width = 0;  // conv row width: (2+2n)*k, channel-major
    int aux = 0;    // 2n proposal entries, temperature/40
    std::vector<double> x;      // size()*width
    std::vector<double> aux_x;  // size()*aux, per zone (slot1, slot2)
    std::vector<double> y;      // size()*aux, one-hot per zone pair
    std::vector<int> type;      // 1, 2, or 3 per sample
    std::vector<double> truth_c;  // size()*zones, audit copy of the labels' truth

    int size() const { return width == 0 ? 0 : static_cast<int>(x.size()) / width; }
};

// Mines windows at t = k, k+stride, ... and emits n_type1+n_type2+n_type3
// samples per window; every sample carries proposal pairs and labels for all
// zones.  Throws InputError when the log is shorter than k+1 entries.
Dataset build_selector_dataset(const hist::Log& log, const SelectorConfig& cfg, Rng& rng);

// Adam on summed per-zone cross-entropy.  epoch_loss as in the estimator.
nn::ParamSet train(const Dataset& ds, const SelectorConfig& cfg, std::uint64_t seed,
                   std::vector<double>* epoch_loss = nullptr);

struct Choice {
    std::vector<double> chosen_c;  // per-zone temperature handed to control
    std::vector<int> picked;       // 0 = first slot (raw), 1 = second (estimate)
};

// Pure inference; per zone the larger logit wins, ties to the raw slot.
Choice select(const nn::ParamSet& p, const hist::Window& w, const std::vector<double>& raw_c,
              const std::vector<double>& predicted_c, double f_max_kgps,
              const SelectorConfig& cfg);

// Per-sample top-1 agreement with the labels, over every zone decision;
// restricted to samples of `type` (0 = all types).
double accuracy(const nn::ParamSet& p, const Dataset& ds, int type = 0);

}  // namespace hvacft::selector
