#include "hvacft/plant.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hvacft/errors.hpp"

namespace hvacft::sim {

double PlantParams::max_flow_kgps() const {
    double m = 0.0;
    for (double f : flow_levels_kgps) m = std::max(m, f);
    return m;
}

void PlantParams::validate() const {
    if (zones < 1) throw ConfigError("plant needs at least one zone");
    if (dt_s <= 0.0) throw ConfigError("simulation step must be positive");
    auto need = [&](std::size_t got, const char* what) {
        if (got != static_cast<std::size_t>(zones))
            throw ConfigError(std::string(what) + " must have one entry per zone");
    };
    need(mcp_kj_per_k.size(), "mcp_kj_per_k");
    need(u_env_kw_per_k.size(), "u_env_kw_per_k");
    need(solar_m2.size(), "solar_m2");
    for (double m : mcp_kj_per_k)
        if (m <= 0.0) throw ConfigError("zone thermal mass must be positive");
    if (flow_levels_kgps.size() < 2) throw ConfigError("need at least two flow levels");
    if (flow_levels_kgps.front() != 0.0)
        throw ConfigError("flow level 0 must be the off level (0 kg/s)");
    if (!std::is_sorted(flow_levels_kgps.begin(), flow_levels_kgps.end()))
        throw ConfigError("flow levels must be sorted ascending");
    for (const auto& pair : adj)
        if (pair[0] < 0 || pair[0] >= zones || pair[1] < 0 || pair[1] >= zones ||
            pair[0] == pair[1])
            throw ConfigError("bad inter-zone adjacency pair");
    if (cp_air_kj_per_kg_k <= 0.0) throw ConfigError("cp_air must be positive");
    if (noise_std_c < 0.0) throw ConfigError("noise std cannot be negative");
    if (comfort_low_c >= comfort_high_c) throw ConfigError("comfort band is empty");
}

namespace {

// Occupancy-shaped internal gains: morning arrival, lunch dip, afternoon
// peak, evening tail.  The hour structure is deliberately not a function of
// outdoor temperature, so a model with only an ambient regressor cannot
// absorb it.
std::array<double, 24> occupancy_gains_kw() {
    std::array<double, 24> g{};
    for (int h = 0; h < 24; ++h) {
        if (h >= 8 && h < 12) g[h] = 0.8;
        else if (h >= 12 && h < 14) g[h] = 0.5;
        else if (h >= 14 && h < 18) g[h] = 0.8;
        else if (h >= 6 && h < 8) g[h] = 0.3;
        else if (h >= 18 && h < 20) g[h] = 0.4;
        else if (h >= 20) g[h] = 0.2;
        else g[h] = 0.1;
    }
    return g;
}

}  // namespace

PlantParams PlantParams::single_zone() {
    PlantParams pp;
    pp.zones = 1;
    // effective mass includes furniture/partitions, so per-control-period
    // swings stay in the few-tenths-of-a-degree range a zone really shows
    pp.mcp_kj_per_k = {3000.0};
    pp.u_env_kw_per_k = {0.08};
    pp.solar_m2 = {1.2};
    pp.internal_kw = occupancy_gains_kw();
    pp.validate();
    return pp;
}

PlantParams PlantParams::four_zone() {
    PlantParams pp;
    pp.zones = 4;
    // zones laid out as a square: 0-1 top, 2-3 bottom; ring adjacency
    pp.mcp_kj_per_k = {3200.0, 2800.0, 3600.0, 3000.0};
    pp.u_env_kw_per_k = {0.08, 0.08, 0.08, 0.08};
    pp.adj = {{0, 1}, {1, 3}, {3, 2}, {2, 0}};
    pp.solar_m2 = {1.0, 1.6, 2.0, 1.3};  // differing exposures
    pp.internal_kw = occupancy_gains_kw();
    pp.validate();
    return pp;
}

SystemState initial_state(const PlantParams& pp, const WeatherSeries& w, double t0_c) {
    pp.validate();
    SystemState s;
    s.step = 0;
    s.t_in_c.assign(pp.zones, t0_c);
    s.t_out_c = w.tout(0);
    s.sun_wm2 = w.sun(0);
    return s;
}

void step_plant(SystemState& s, const Action& a, const PlantParams& pp,
                const WeatherSeries& w, Rng& rng) {
    if (static_cast<int>(a.level.size()) != pp.zones)
        throw StructuralError("action arity does not match zone count");
    const int hour = static_cast<int>(s.clock_min(pp.dt_s) / 60.0) % 24;
    const double tout = w.tout(s.step);
    const double sun = w.sun(s.step);

    std::vector<double> next(pp.zones);
    for (int z = 0; z < pp.zones; ++z) {
        const int lvl = a.level[z];
        if (lvl < 0 || lvl >= pp.flow_count())
            throw StructuralError("flow level out of range for zone " + std::to_string(z));
        const double mdot = pp.flow_levels_kgps[lvl];
        const double tin = s.t_in_c[z];

        double q_kw = mdot * pp.cp_air_kj_per_kg_k * (pp.t_air_c - tin);
        q_kw += pp.u_env_kw_per_k[z] * (tout - tin);
        for (const auto& pair : pp.adj) {
            if (pair[0] == z) q_kw += pp.u_zone_kw_per_k * (s.t_in_c[pair[1]] - tin);
            if (pair[1] == z) q_kw += pp.u_zone_kw_per_k * (s.t_in_c[pair[0]] - tin);
        }
        q_kw += pp.internal_kw[hour];
        q_kw += pp.solar_m2[z] * sun / 1000.0;

        const double dT = pp.dt_s * q_kw / pp.mcp_kj_per_k[z];
        if (!std::isfinite(dT) || std::abs(dT) >= 2.0)
            throw NumericError("zone " + std::to_string(z) +
                               " temperature step |dT| >= 2 degC at step " +
                               std::to_string(s.step) + " (Euler instability)");
        double t = tin + dT;
        if (pp.noise_std_c > 0.0) t += gaussian(rng, 0.0, pp.noise_std_c);
        next[z] = t;
    }

    s.t_in_c = std::move(next);
    s.step += 1;
    s.t_out_c = w.tout(s.step);
    s.sun_wm2 = w.sun(s.step);
}

CostSchedule CostSchedule::default_tou() {
    CostSchedule cs;
    for (int h = 0; h < 24; ++h) {
        if (h >= 12 && h < 20)
            cs.price_per_kwh[h] = 0.30;  // afternoon peak
        else if ((h >= 8 && h < 12) || (h >= 20 && h < 22))
            cs.price_per_kwh[h] = 0.20;
        else
            cs.price_per_kwh[h] = 0.12;
    }
    return cs;
}

double energy_cost(const SystemState& s, const Action& a, const PlantParams& pp,
                   const CostSchedule& cs) {
    if (static_cast<int>(a.level.size()) != pp.zones)
        throw StructuralError("action arity does not match zone count");
    const int hour = static_cast<int>(s.clock_min(pp.dt_s) / 60.0) % 24;
    const double fmax = pp.max_flow_kgps();
    double power_kw = 0.0;
    for (int z = 0; z < pp.zones; ++z) {
        const double mdot = pp.flow_levels_kgps[a.level[z]];
        const double frac = fmax > 0.0 ? mdot / fmax : 0.0;
        power_kw += cs.fan_rated_kw * frac * frac * frac;
        power_kw += mdot * pp.cp_air_kj_per_kg_k *
                    std::max(s.t_in_c[z] - pp.t_air_c, 0.0) / cs.cop;
    }
    return cs.price_per_kwh[hour] * (cs.dt_c_min / 60.0) * power_kw;
}

Action OnOffController::decide(const SystemState& s, const PlantParams& pp) {
    if (prev.empty()) prev.assign(pp.zones, 0);
    if (static_cast<int>(prev.size()) != pp.zones)
        throw StructuralError("controller zone count changed mid-run");
    Action a;
    a.level.resize(pp.zones);
    const int max_lvl = pp.flow_count() - 1;
    for (int z = 0; z < pp.zones; ++z) {
        const double t = s.t_in_c[z];
        if (t > pp.comfort_high_c - deadband_c)
            a.level[z] = max_lvl;
        else if (t < pp.comfort_low_c + deadband_c)
            a.level[z] = 0;
        else
            a.level[z] = prev[z];
    }
    prev = a.level;
    return a;
}

}  // namespace hvacft::sim
