#include "hvacft/mal.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hvacft::mal {

namespace {

double clamp_temp(double t_c) { return std::clamp(t_c, kClampLow_c, kClampHigh_c); }

// Copies one layer's weights and biases between parameter sets whose specs
// agree on that layer.
void copy_layer(nn::ParamSet& dst, const nn::ParamSet& src, int layer) {
    if (dst.weight_count(layer) != src.weight_count(layer) ||
        dst.bias_count(layer) != src.bias_count(layer))
        throw StructuralError("layer " + std::to_string(layer) +
                              " shapes differ between parameter sets");
    std::copy_n(src.weights(layer), src.weight_count(layer), dst.weights(layer));
    std::copy_n(src.bias(layer), src.bias_count(layer), dst.bias(layer));
}

bool all_finite(const nn::ParamSet& p) {
    for (double v : p.values)
        if (!std::isfinite(v)) return false;
    return true;
}

// One plain gradient-descent step on the batch's squared error at rate eta.
void sgd_step(nn::ParamSet& p, const RandomBatch& batch, double offset_c, double eta,
              nn::Trace& tr, nn::ParamSet& grad) {
    const int bs = batch.size();
    nn::forward_batch(p, batch.x.data(), nullptr, bs, tr);
    std::vector<double> targets(batch.y);
    for (auto& t : targets) t -= offset_c;
    nn::backward_batch(p, tr, nn::Loss::Mse, targets.data(), grad);
    grad *= eta;
    p -= grad;
}

}  // namespace

void MalConfig::validate() const {
    if (eta1 < 0.0) throw ConfigError("outer step eta1 cannot be negative");
    if (eta2 <= 0.0) throw ConfigError("synthetic step eta2 must be positive");
    if (eta3 <= 0.0) throw ConfigError("fine-tune rate eta3 must be positive");
    if (batch_ms < 1) throw ConfigError("synthetic batch size must be positive");
    if (ssl_epochs < 1) throw ConfigError("pretraining needs at least one outer epoch");
    if (ssl_task_epochs < 1) throw ConfigError("each task visit needs at least one epoch");
    if (ft_epochs < 1) throw ConfigError("fine-tuning needs at least one epoch");
    if (n_iter < 0) throw ConfigError("iteration count cannot be negative");
    if (direction != 1.0 && direction != -1.0)
        throw ConfigError("direction must be +1 or -1");
    if (ssl_pool < 1) throw ConfigError("pretraining pool must hold at least one sequence");
    if (ssl_head < 1) throw ConfigError("task head width must be positive");
    if (period_min <= 0.0) throw ConfigError("window period must be positive");
    if (flow_levels_kgps.empty()) throw ConfigError("flow level set is empty");
    const double fmax = *std::max_element(flow_levels_kgps.begin(), flow_levels_kgps.end());
    if (fmax <= 0.0) throw ConfigError("largest flow level must be positive");
    for (double f : flow_levels_kgps)
        if (f < 0.0) throw ConfigError("flow levels cannot be negative");
}

RandomBatch sample_rows(const absmodel::AbstractModel& m,
                        const predictor::PredictorConfig& pcfg, const MalConfig& cfg, int rows,
                        Rng& rng) {
    pcfg.validate();
    cfg.validate();
    const int zones = m.zones();
    if (zones == 0) throw InputError("the zone model is empty");
    if (rows < 0) throw InputError("row count cannot be negative");
    const double f_max =
        *std::max_element(cfg.flow_levels_kgps.begin(), cfg.flow_levels_kgps.end());
    const int levels = static_cast<int>(cfg.flow_levels_kgps.size());

    RandomBatch out;
    out.zones = zones;
    out.k = pcfg.k;
    out.width = hist::window_width(pcfg.k, zones);
    out.x.reserve(static_cast<std::size_t>(rows) * out.width);
    out.y.reserve(static_cast<std::size_t>(rows) * zones);

    hist::Window w;
    w.steps.resize(static_cast<std::size_t>(pcfg.k));
    std::vector<double> next(static_cast<std::size_t>(zones));
    for (int r = 0; r < rows; ++r) {
        for (int j = 0; j < pcfg.k; ++j) {
            hist::WindowStep& st = w.steps[static_cast<std::size_t>(j)];
            st.t_in_c.resize(static_cast<std::size_t>(zones));
            st.flow_kgps.resize(static_cast<std::size_t>(zones));
            if (j == 0) {
                st.clock_min = uniform(rng, 0.0, hist::kClockScale_min);
                for (int z = 0; z < zones; ++z)
                    st.t_in_c[static_cast<std::size_t>(z)] =
                        uniform(rng, kDrawLow_c, kDrawHigh_c);
            } else {
                const hist::WindowStep& prev = w.steps[static_cast<std::size_t>(j - 1)];
                st.clock_min =
                    std::fmod(prev.clock_min + cfg.period_min, hist::kClockScale_min);
                next = absmodel::predict_next(m, prev.t_in_c, prev.flow_kgps, prev.t_out_c);
                for (int z = 0; z < zones; ++z)
                    st.t_in_c[static_cast<std::size_t>(z)] =
                        clamp_temp(next[static_cast<std::size_t>(z)]);
            }
            for (int z = 0; z < zones; ++z)
                st.flow_kgps[static_cast<std::size_t>(z)] =
                    cfg.flow_levels_kgps[static_cast<std::size_t>(uniform_index(rng, levels))];
            // ambient is part of the sampled state, not of the action: drawn
            // once per window and held, like slow real weather
            st.t_out_c = j == 0 ? uniform(rng, kDrawLow_c, kDrawHigh_c)
                                : w.steps[static_cast<std::size_t>(j - 1)].t_out_c;
        }
        const auto flat = hist::flatten_window(w, f_max);
        out.x.insert(out.x.end(), flat.begin(), flat.end());

        const hist::WindowStep& last = w.steps.back();
        next = absmodel::predict_next(m, last.t_in_c, last.flow_kgps, last.t_out_c);
        for (int z = 0; z < zones; ++z)
            out.y.push_back(clamp_temp(next[static_cast<std::size_t>(z)]));
    }
    return out;
}

RandomBatch sample_batch(const absmodel::AbstractModel& m,
                         const predictor::PredictorConfig& pcfg, const MalConfig& cfg,
                         Rng& rng) {
    return sample_rows(m, pcfg, cfg, cfg.batch_ms, rng);
}

predictor::Dataset masked_task(const predictor::Dataset& pool, int task_step,
                               double mask_value) {
    if (pool.k < 1 || pool.zones < 1 ||
        pool.width != hist::window_width(pool.k, pool.zones))
        throw StructuralError("pool does not describe flattened windows");
    if (task_step < 0 || task_step >= pool.k)
        throw ConfigError("task step " + std::to_string(task_step) +
                          " outside the window of " + std::to_string(pool.k) + " steps");

    predictor::Dataset out;
    out.zones = pool.zones;
    out.k = pool.k;
    out.width = pool.width;
    out.x = pool.x;
    out.y.resize(static_cast<std::size_t>(pool.size()) * pool.zones);
    const int chans = 2 + 2 * pool.zones;
    for (int s = 0; s < pool.size(); ++s) {
        const std::size_t row = static_cast<std::size_t>(s) * pool.width;
        for (int z = 0; z < pool.zones; ++z) {
            const std::size_t at = row + static_cast<std::size_t>(chans * task_step + 1 + z);
            out.y[static_cast<std::size_t>(s) * pool.zones + z] =
                pool.x[at] * hist::kTempScale_c;
            out.x[at] = mask_value;
        }
    }
    return out;
}

nn::ParamSet ssl_pretrain(const absmodel::AbstractModel& m,
                          const predictor::PredictorConfig& pcfg, const MalConfig& cfg,
                          std::uint64_t seed) {
    pcfg.validate();
    cfg.validate();
    if (pcfg.hidden.size() < 3)
        throw ConfigError("pretraining shares a three-layer trunk; the estimator has only " +
                          std::to_string(pcfg.hidden.size()) + " hidden layers");
    const int zones = m.zones();
    if (zones == 0) throw InputError("the zone model is empty");

    Rng pool_rng = make_rng(seed, 4);
    const RandomBatch pool = sample_rows(m, pcfg, cfg, cfg.ssl_pool, pool_rng);

    nn::ParamSet phi = nn::ParamSet::he_init(pcfg.net_spec(zones), derive_seed(seed, 1));

    const nn::NetSpec task_spec = nn::dense_net(
        {pool.width, pcfg.hidden[0], pcfg.hidden[1], pcfg.hidden[2], cfg.ssl_head, zones});
    std::vector<nn::ParamSet> task_p;
    task_p.reserve(static_cast<std::size_t>(pcfg.k));
    for (int i = 0; i < pcfg.k; ++i)
        task_p.push_back(nn::ParamSet::he_init(task_spec, derive_seed(seed, 20 + i)));

    predictor::PredictorConfig tcfg = pcfg;
    tcfg.epochs = cfg.ssl_task_epochs;
    tcfg.batch = cfg.batch_ms;

    for (int e = 0; e < cfg.ssl_epochs; ++e) {
        for (int i = 0; i < pcfg.k; ++i) {
            nn::ParamSet& tp = task_p[static_cast<std::size_t>(i)];
            for (int l = 0; l < 3; ++l) copy_layer(tp, phi, l);  // load shared trunk
            const predictor::Dataset ds = masked_task(pool, i, cfg.mask_value);
            tp = predictor::fine_tune(tp, ds, tcfg,
                                      derive_seed(seed, 10000 + e * pcfg.k + i));
            for (int l = 0; l < 3; ++l) copy_layer(phi, tp, l);  // store shared trunk
        }
    }
    return phi;  // later layers keep their fresh initialisation
}

nn::ParamSet ru_loop(const nn::ParamSet& phi0, const absmodel::AbstractModel& m,
                     const predictor::Dataset& labeled,
                     const predictor::PredictorConfig& pcfg, const MalConfig& cfg,
                     std::uint64_t seed) {
    pcfg.validate();
    cfg.validate();
    const int zones = m.zones();
    if (zones == 0) throw InputError("the zone model is empty");
    if (phi0.spec.input_size() != hist::window_width(pcfg.k, zones) ||
        phi0.spec.output_size() != zones)
        throw StructuralError("initial parameters do not fit the window shape");

    predictor::PredictorConfig ftcfg = pcfg;
    ftcfg.lr = cfg.eta3;
    ftcfg.epochs = cfg.ft_epochs;

    Rng batch_rng = make_rng(seed, 3);
    nn::ParamSet phi = phi0;
    nn::Trace tr;
    nn::ParamSet grad = nn::ParamSet::zeros(phi.spec);

    for (int i = 0; i < cfg.n_iter; ++i) {
        const RandomBatch batch = sample_rows(m, pcfg, cfg, cfg.batch_ms, batch_rng);
        nn::ParamSet theta = phi;
        sgd_step(theta, batch, pcfg.offset_c, cfg.eta2, tr, grad);

        nn::ParamSet theta_ft;
        try {
            theta_ft = predictor::fine_tune(theta, labeled, ftcfg, derive_seed(seed, 100 + i));
        } catch (const TrainingError& e) {
            throw TrainingError("outer iteration " + std::to_string(i) + ": " + e.what());
        } catch (const NumericError& e) {
            throw TrainingError("outer iteration " + std::to_string(i) + ": " + e.what());
        }

        theta_ft -= phi;
        theta_ft *= cfg.direction * cfg.eta1;
        phi += theta_ft;
        if (!all_finite(phi))
            throw TrainingError("non-finite parameters at iteration " + std::to_string(i));
    }
    return predictor::fine_tune(phi, labeled, ftcfg, derive_seed(seed, 2));
}

nn::ParamSet baseline_labeled_only(const predictor::Dataset& labeled,
                                   const predictor::PredictorConfig& pcfg,
                                   const MalConfig& cfg, std::uint64_t seed) {
    pcfg.validate();
    cfg.validate();
    predictor::PredictorConfig ftcfg = pcfg;
    ftcfg.lr = cfg.eta3;
    ftcfg.epochs = cfg.ft_epochs;
    nn::ParamSet init =
        nn::ParamSet::he_init(pcfg.net_spec(labeled.zones), derive_seed(seed, 1));
    return predictor::fine_tune(init, labeled, ftcfg, derive_seed(seed, 2));
}

nn::ParamSet baseline_distill_finetune(const absmodel::AbstractModel& m,
                                       const predictor::Dataset& labeled,
                                       const predictor::PredictorConfig& pcfg,
                                       const MalConfig& cfg, std::uint64_t seed) {
    pcfg.validate();
    cfg.validate();
    const int zones = m.zones();
    if (zones != labeled.zones)
        throw StructuralError("zone model covers " + std::to_string(zones) +
                              " zones but the labeled set has " +
                              std::to_string(labeled.zones));

    predictor::PredictorConfig ftcfg = pcfg;
    ftcfg.lr = cfg.eta3;
    ftcfg.epochs = cfg.ft_epochs;

    nn::ParamSet p = nn::ParamSet::he_init(pcfg.net_spec(zones), derive_seed(seed, 1));
    Rng batch_rng = make_rng(seed, 3);
    nn::Trace tr;
    nn::ParamSet grad = nn::ParamSet::zeros(p.spec);
    for (int i = 0; i < cfg.n_iter; ++i) {
        const RandomBatch batch = sample_rows(m, pcfg, cfg, cfg.batch_ms, batch_rng);
        sgd_step(p, batch, pcfg.offset_c, cfg.eta2, tr, grad);
        if (!all_finite(p))
            throw TrainingError("non-finite parameters at iteration " + std::to_string(i));
    }
    return predictor::fine_tune(p, labeled, ftcfg, derive_seed(seed, 2));
}

}  // namespace hvacft::mal
