#include "hvacft/faults.hpp"

#include "hvacft/csvio.hpp"

namespace hvacft::faults {

void FaultConfig::validate() const {
    if (prob < 0.0 || prob > 1.0) throw ConfigError("fault probability must be in [0,1]");
    if (kind == Kind::Continuous && duration < 1)
        throw ConfigError("continuous faults need duration >= 1");
    if (low_c >= high_c) throw ConfigError("fault replacement range is empty");
}

FaultInjector::FaultInjector(const FaultConfig& cfg, int zones, std::uint64_t seed)
    : cfg_(cfg), zones_(zones), rng_(make_rng(seed, 0x666c74u /* "flt" */)) {
    cfg_.validate();
    if (zones < 1) throw ConfigError("fault injector needs at least one zone");
    remaining_.assign(zones, 0);
}

std::vector<double> FaultInjector::inject(const std::vector<double>& readings, int step) {
    if (static_cast<int>(readings.size()) != zones_)
        throw StructuralError("reading arity does not match injector zone count");
    std::vector<double> out = readings;
    if (cfg_.kind == Kind::None) return out;

    // one shared occurrence draw in correlated mode, else one per zone
    double shared = 0.0;
    if (cfg_.correlated_zones) shared = uniform(rng_, 0.0, 1.0);

    for (int z = 0; z < zones_; ++z) {
        bool corrupt = false;
        bool onset = false;
        const double occur =
            cfg_.correlated_zones ? shared : uniform(rng_, 0.0, 1.0);
        if (cfg_.kind == Kind::Iid) {
            corrupt = occur < cfg_.prob;
            onset = corrupt;
        } else if (cfg_.kind == Kind::Continuous) {
            if (occur < cfg_.prob) {
                remaining_[z] = cfg_.duration;  // fresh onset; overlap resets
                onset = true;
            }
            corrupt = remaining_[z] > 0;
            if (remaining_[z] > 0) --remaining_[z];
        }
        if (!corrupt) continue;
        const double injected = uniform(rng_, cfg_.low_c, cfg_.high_c);
        trace_.push_back({step, z, readings[z], injected, onset});
        out[z] = injected;
    }
    return out;
}

hist::Window corrupt_history(const hist::Window& w, double p, Rng& rng, double low_c,
                             double high_c) {
    if (p < 0.0 || p > 1.0) throw ConfigError("corruption probability must be in [0,1]");
    hist::Window out = w;
    if (p == 0.0) return out;
    for (auto& step : out.steps)
        for (double& t : step.t_in_c)
            if (uniform(rng, 0.0, 1.0) < p) t = uniform(rng, low_c, high_c);
    return out;
}

void save_fault_trace_csv(const std::vector<TraceEntry>& trace, const std::string& path) {
    csv::Writer out(path);
    out.row({"step", "zone", "original", "injected"});
    for (const auto& e : trace)
        out.row({std::to_string(e.step), std::to_string(e.zone), csv::num(e.original_c),
                 csv::num(e.injected_c)});
}

}  // namespace hvacft::faults
