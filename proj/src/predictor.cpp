#include "hvacft/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hvacft/csvio.hpp"
#include "hvacft/faults.hpp"

namespace hvacft::predictor {

nn::NetSpec PredictorConfig::net_spec(int zones) const {
    std::vector<int> widths;
    widths.push_back(hist::window_width(k, zones));
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(zones);
    return nn::dense_net(widths);
}

void PredictorConfig::validate() const {
    if (k < 1) throw ConfigError("window length k must be positive");
    if (v < 1) throw ConfigError("sampling stride v must be positive");
    if (p_pre < 0.0 || p_pre > 1.0) throw ConfigError("p_pre must lie in [0, 1]");
    if (lr <= 0.0) throw ConfigError("learning rate must be positive");
    if (batch < 1) throw ConfigError("batch size must be positive");
    if (epochs < 0) throw ConfigError("epoch count cannot be negative");
    if (hidden.empty()) throw ConfigError("at least one hidden layer is required");
}

Dataset build_training_set(const hist::Log& log, const PredictorConfig& cfg, Rng& rng) {
    cfg.validate();
    if (log.size() < cfg.k + 1)
        throw InputError("history has " + std::to_string(log.size()) +
                         " entries; a window needs at least " + std::to_string(cfg.k + 1));
    Dataset ds;
    ds.zones = log.zones;
    ds.k = cfg.k;
    ds.width = hist::window_width(cfg.k, log.zones);
    for (int t = cfg.k; t < log.size(); t += cfg.v) {
        hist::Window w = hist::window_before(log, t, cfg.k);
        if (cfg.p_pre > 0.0) w = faults::corrupt_history(w, cfg.p_pre, rng);
        const auto x = hist::flatten_window(w, log.f_max_kgps);
        ds.x.insert(ds.x.end(), x.begin(), x.end());
        const auto& truth = log.entries[static_cast<std::size_t>(t)].t_true_c;
        if (static_cast<int>(truth.size()) != log.zones)
            throw StructuralError("log entry " + std::to_string(t) + " lacks true temperatures");
        ds.y.insert(ds.y.end(), truth.begin(), truth.end());
    }
    return ds;
}

nn::ParamSet train(const Dataset& ds, const PredictorConfig& cfg, std::uint64_t seed,
                   std::vector<double>* epoch_loss) {
    cfg.validate();
    if (ds.size() == 0) throw InputError("training set is empty");

    nn::NetSpec spec = cfg.net_spec(ds.zones);
    if (spec.input_size() != ds.width)
        throw StructuralError("dataset width " + std::to_string(ds.width) +
                              " does not match the network input " +
                              std::to_string(spec.input_size()));

    return fine_tune(nn::ParamSet::he_init(spec, derive_seed(seed, 0)), ds, cfg, seed,
                     epoch_loss);
}

nn::ParamSet fine_tune(const nn::ParamSet& init, const Dataset& ds, const PredictorConfig& cfg,
                       std::uint64_t seed, std::vector<double>* epoch_loss) {
    cfg.validate();
    const int n = ds.size();
    if (n == 0) throw InputError("training set is empty");
    if (init.spec.input_size() != ds.width)
        throw StructuralError("dataset width " + std::to_string(ds.width) +
                              " does not match the network input " +
                              std::to_string(init.spec.input_size()));
    if (init.spec.output_size() != ds.zones)
        throw StructuralError("network emits " + std::to_string(init.spec.output_size()) +
                              " outputs for " + std::to_string(ds.zones) + " zones");

    nn::ParamSet p = init;
    nn::AdamState adam = nn::AdamState::for_params(p);
    Rng order_rng = make_rng(seed, 1);

    std::vector<double> targets(ds.y);
    for (auto& t : targets) t -= cfg.offset_c;

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    nn::Trace scratch;
    nn::ParamSet gscratch = nn::ParamSet::zeros(p.spec);
    std::vector<double> bx(static_cast<std::size_t>(cfg.batch) * ds.width);
    std::vector<double> bt(static_cast<std::size_t>(cfg.batch) * ds.zones);

    for (int e = 0; e < cfg.epochs; ++e) {
        std::shuffle(order.begin(), order.end(), order_rng);
        double loss_sum = 0.0;
        for (int s0 = 0; s0 < n; s0 += cfg.batch) {
            const int bs = std::min(cfg.batch, n - s0);
            for (int b = 0; b < bs; ++b) {
                const int src = order[static_cast<std::size_t>(s0 + b)];
                std::copy_n(ds.x.begin() + static_cast<long>(src) * ds.width, ds.width,
                            bx.begin() + static_cast<long>(b) * ds.width);
                std::copy_n(targets.begin() + static_cast<long>(src) * ds.zones, ds.zones,
                            bt.begin() + static_cast<long>(b) * ds.zones);
            }
            const double loss = nn::train_batch(p, adam, bx.data(), nullptr, bt.data(), bs,
                                                nn::Loss::Mse, cfg.lr, scratch, gscratch);
            loss_sum += loss * bs;
        }
        const double avg = loss_sum / n;
        if (!std::isfinite(avg))
            throw TrainingError("non-finite training loss at epoch " + std::to_string(e));
        if (epoch_loss) epoch_loss->push_back(avg);
    }
    return p;
}

double rmse(const nn::ParamSet& p, const Dataset& ds, const PredictorConfig& cfg) {
    const int n = ds.size();
    if (n == 0) throw InputError("evaluation set is empty");
    if (p.spec.input_size() != ds.width || p.spec.output_size() != ds.zones)
        throw StructuralError("network shape does not match the dataset");
    nn::Trace tr;
    double se = 0.0;
    constexpr int kChunk = 256;
    for (int s0 = 0; s0 < n; s0 += kChunk) {
        const int bs = std::min(kChunk, n - s0);
        nn::forward_batch(p, ds.x.data() + static_cast<long>(s0) * ds.width, nullptr, bs, tr);
        const auto& out = tr.act.back();
        for (int b = 0; b < bs; ++b)
            for (int z = 0; z < ds.zones; ++z) {
                const double d = out[static_cast<std::size_t>(b) * ds.zones + z] + cfg.offset_c -
                                 ds.y[static_cast<std::size_t>(s0 + b) * ds.zones + z];
                se += d * d;
            }
    }
    return std::sqrt(se / (static_cast<double>(n) * ds.zones));
}

std::vector<double> predict(const nn::ParamSet& p, const hist::Window& w, double f_max_kgps,
                            const PredictorConfig& cfg) {
    const auto x = hist::flatten_window(w, f_max_kgps);
    if (static_cast<int>(x.size()) != p.spec.input_size())
        throw StructuralError("window width " + std::to_string(x.size()) +
                              " does not match the network input " +
                              std::to_string(p.spec.input_size()));
    auto out = nn::forward(p, x);
    for (auto& v : out) v += cfg.offset_c;
    return out;
}

void save_dataset_csv(const Dataset& ds, const std::string& path) {
    csv::Writer w(path);
    std::vector<std::string> row;
    for (int i = 0; i < ds.width; ++i) row.push_back("x" + std::to_string(i));
    for (int z = 0; z < ds.zones; ++z) row.push_back("y" + std::to_string(z));
    w.row(row);
    for (int s = 0; s < ds.size(); ++s) {
        row.clear();
        for (int i = 0; i < ds.width; ++i)
            row.push_back(csv::num(ds.x[static_cast<std::size_t>(s) * ds.width + i]));
        for (int z = 0; z < ds.zones; ++z)
            row.push_back(csv::num(ds.y[static_cast<std::size_t>(s) * ds.zones + z]));
        w.row(row);
    }
}

}  // namespace hvacft::predictor
