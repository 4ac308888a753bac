#include "hvacft/selector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hvacft/faults.hpp"

namespace hvacft::selector {

nn::NetSpec SelectorConfig::net_spec(int zones) const {
    validate();
    nn::NetSpec spec;
    spec.conv_length = k;
    spec.aux = 2 * zones;
    int ch = 2 + 2 * zones;
    for (int out : conv_channels) {
        spec.layers.push_back({nn::Kind::Conv1d, ch, out, kernel, nn::Act::Relu, 1});
        ch = out;
    }
    int width = ch * spec.length_after(static_cast<int>(conv_channels.size())) + spec.aux;
    for (int out : dense_hidden) {
        spec.layers.push_back({nn::Kind::Dense, width, out, 0, nn::Act::Relu, 1});
        width = out;
    }
    spec.layers.push_back({nn::Kind::Dense, width, 2 * zones, 0, nn::Act::Softmax, zones});
    spec.validate();
    return spec;
}

void SelectorConfig::validate() const {
    if (k < 1) throw ConfigError("window length k must be positive");
    if (p_sel < 0.0 || p_sel > 1.0) throw ConfigError("p_sel must lie in [0, 1]");
    if (n_type1 < 0 || n_type2 < 0 || n_type3 < 0 || n_type1 + n_type2 + n_type3 == 0)
        throw ConfigError("sample multiplicities must be non-negative and not all zero");
    if (lr <= 0.0) throw ConfigError("learning rate must be positive");
    if (batch < 1) throw ConfigError("batch size must be positive");
    if (epochs < 0) throw ConfigError("epoch count cannot be negative");
    if (stride < 1) throw ConfigError("window stride must be positive");
    if (conv_channels.empty()) throw ConfigError("at least one conv layer is required");
    if (kernel < 1) throw ConfigError("kernel must be positive");
    if (fault_low_c >= fault_high_c) throw ConfigError("fault value range is empty");
}

std::pair<int, int> closer_label(double pl1, double pl2, double truth_c) {
    return std::abs(pl1 - truth_c) <= std::abs(pl2 - truth_c) ? std::pair<int, int>{1, 0}
                                                              : std::pair<int, int>{0, 1};
}

Dataset build_selector_dataset(const hist::Log& log, const SelectorConfig& cfg, Rng& rng) {
    cfg.validate();
    if (log.size() < cfg.k + 1)
        throw InputError("history has " + std::to_string(log.size()) +
                         " entries; a window needs at least " + std::to_string(cfg.k + 1));
    Dataset ds;
    ds.zones = log.zones;
    ds.k = cfg.k;
    ds.width = hist::window_width(cfg.k, log.zones);
    ds.aux = 2 * log.zones;

    auto fault_draw = [&] { return uniform(rng, cfg.fault_low_c, cfg.fault_high_c); };

    for (int t = cfg.k; t < log.size(); t += cfg.stride) {
        const hist::Window w = hist::window_before(log, t, cfg.k);
        const auto& truth = log.entries[static_cast<std::size_t>(t)].t_true_c;
        if (static_cast<int>(truth.size()) != log.zones)
            throw StructuralError("log entry " + std::to_string(t) + " lacks true temperatures");

        const int per_type[3] = {cfg.n_type1, cfg.n_type2, cfg.n_type3};
        for (int type = 1; type <= 3; ++type) {
            for (int rep = 0; rep < per_type[type - 1]; ++rep) {
                hist::Window wc =
                    cfg.p_sel > 0.0 ? faults::corrupt_history(w, cfg.p_sel, rng) : w;
                const auto row = hist::window_to_channels(wc, log.f_max_kgps);
                ds.x.insert(ds.x.end(), row.begin(), row.end());
                for (int z = 0; z < log.zones; ++z) {
                    double p1, p2;
                    if (type == 1) {
                        p1 = truth[static_cast<std::size_t>(z)];
                        p2 = fault_draw();
                    } else if (type == 2) {
                        p1 = fault_draw();
                        p2 = truth[static_cast<std::size_t>(z)];
                    } else {
                        p1 = fault_draw();
                        p2 = fault_draw();
                    }
                    const auto lab = closer_label(p1, p2, truth[static_cast<std::size_t>(z)]);
                    ds.aux_x.push_back(p1 / hist::kTempScale_c);
                    ds.aux_x.push_back(p2 / hist::kTempScale_c);
                    ds.y.push_back(static_cast<double>(lab.first));
                    ds.y.push_back(static_cast<double>(lab.second));
                }
                ds.type.push_back(type);
                ds.truth_c.insert(ds.truth_c.end(), truth.begin(), truth.end());
            }
        }
    }
    return ds;
}

nn::ParamSet train(const Dataset& ds, const SelectorConfig& cfg, std::uint64_t seed,
                   std::vector<double>* epoch_loss) {
    cfg.validate();
    const int n = ds.size();
    if (n == 0) throw InputError("training set is empty");

    nn::NetSpec spec = cfg.net_spec(ds.zones);
    if (spec.input_size() != ds.width || spec.aux != ds.aux)
        throw StructuralError("dataset shape does not match the network input");

    nn::ParamSet p = nn::ParamSet::he_init(spec, derive_seed(seed, 0));
    nn::AdamState adam = nn::AdamState::for_params(p);
    Rng order_rng = make_rng(seed, 1);

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    nn::Trace scratch;
    nn::ParamSet gscratch = nn::ParamSet::zeros(spec);
    std::vector<double> bx(static_cast<std::size_t>(cfg.batch) * ds.width);
    std::vector<double> ba(static_cast<std::size_t>(cfg.batch) * ds.aux);
    std::vector<double> bt(static_cast<std::size_t>(cfg.batch) * ds.aux);

    for (int e = 0; e < cfg.epochs; ++e) {
        std::shuffle(order.begin(), order.end(), order_rng);
        double loss_sum = 0.0;
        for (int s0 = 0; s0 < n; s0 += cfg.batch) {
            const int bs = std::min(cfg.batch, n - s0);
            for (int b = 0; b < bs; ++b) {
                const int src = order[static_cast<std::size_t>(s0 + b)];
                std::copy_n(ds.x.begin() + static_cast<long>(src) * ds.width, ds.width,
                            bx.begin() + static_cast<long>(b) * ds.width);
                std::copy_n(ds.aux_x.begin() + static_cast<long>(src) * ds.aux, ds.aux,
                            ba.begin() + static_cast<long>(b) * ds.aux);
                std::copy_n(ds.y.begin() + static_cast<long>(src) * ds.aux, ds.aux,
                            bt.begin() + static_cast<long>(b) * ds.aux);
            }
            const double loss =
                nn::train_batch(p, adam, bx.data(), ba.data(), bt.data(), bs,
                                nn::Loss::CrossEntropy, cfg.lr, scratch, gscratch);
            loss_sum += loss * bs;
        }
        const double avg = loss_sum / n;
        if (!std::isfinite(avg))
            throw TrainingError("non-finite training loss at epoch " + std::to_string(e));
        if (epoch_loss) epoch_loss->push_back(avg);
    }
    return p;
}

Choice select(const nn::ParamSet& p, const hist::Window& w, const std::vector<double>& raw_c,
              const std::vector<double>& predicted_c, double f_max_kgps,
              const SelectorConfig& cfg) {
    const int zones = w.zones();
    if (static_cast<int>(raw_c.size()) != zones ||
        static_cast<int>(predicted_c.size()) != zones)
        throw StructuralError("proposal arity does not match the window's zone count");

    const auto x = hist::window_to_channels(w, f_max_kgps);
    std::vector<double> aux(static_cast<std::size_t>(2 * zones));
    for (int z = 0; z < zones; ++z) {
        aux[static_cast<std::size_t>(2 * z)] = raw_c[static_cast<std::size_t>(z)] / hist::kTempScale_c;
        aux[static_cast<std::size_t>(2 * z + 1)] =
            predicted_c[static_cast<std::size_t>(z)] / hist::kTempScale_c;
    }
    if (static_cast<int>(x.size()) != p.spec.input_size() ||
        static_cast<int>(aux.size()) != p.spec.aux)
        throw StructuralError("window shape does not match the network input");
    (void)cfg;

    const auto out = nn::forward(p, x, aux);
    Choice c;
    c.chosen_c.resize(static_cast<std::size_t>(zones));
    c.picked.resize(static_cast<std::size_t>(zones));
    for (int z = 0; z < zones; ++z) {
        const bool second = out[static_cast<std::size_t>(2 * z + 1)] >
                            out[static_cast<std::size_t>(2 * z)];
        c.picked[static_cast<std::size_t>(z)] = second ? 1 : 0;
        c.chosen_c[static_cast<std::size_t>(z)] =
            second ? predicted_c[static_cast<std::size_t>(z)] : raw_c[static_cast<std::size_t>(z)];
    }
    return c;
}

double accuracy(const nn::ParamSet& p, const Dataset& ds, int type) {
    long hits = 0, total = 0;
    std::vector<double> x(static_cast<std::size_t>(ds.width));
    std::vector<double> aux(static_cast<std::size_t>(ds.aux));
    for (int s = 0; s < ds.size(); ++s) {
        if (type != 0 && ds.type[static_cast<std::size_t>(s)] != type) continue;
        std::copy_n(ds.x.begin() + static_cast<long>(s) * ds.width, ds.width, x.begin());
        std::copy_n(ds.aux_x.begin() + static_cast<long>(s) * ds.aux, ds.aux, aux.begin());
        const auto out = nn::forward(p, x, aux);
        for (int z = 0; z < ds.zones; ++z) {
            const bool pick2 = out[static_cast<std::size_t>(2 * z + 1)] >
                               out[static_cast<std::size_t>(2 * z)];
            const bool lab2 = ds.y[static_cast<std::size_t>(s) * ds.aux + 2 * z + 1] == 1.0;
            hits += pick2 == lab2 ? 1 : 0;
            ++total;
        }
    }
    if (total == 0) throw InputError("no samples of the requested type");
    return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace hvacft::selector
