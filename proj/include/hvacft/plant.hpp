#pragma once
// Multi-zone thermal plant: explicit Euler on each zone's lumped heat
// balance, a time-of-use energy cost model, and the hysteresis band
// controller used to collect baseline data.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "hvacft/errors.hpp"
#include "hvacft/rng.hpp"
#include "hvacft/weather.hpp"

namespace hvacft::sim {

inline constexpr double kComfortLow_c = 19.0;
inline constexpr double kComfortHigh_c = 24.0;

// Per-zone discrete flow command; values index PlantParams::flow_levels_kgps.
struct Action {
    std::vector<int> level;
};

struct PlantParams {
    int zones = 1;
    double dt_s = 60.0;  // simulation step length

    std::vector<double> mcp_kj_per_k;     // zone thermal mass
    std::vector<double> u_env_kw_per_k;   // zone <-> ambient conductance
    std::vector<std::array<int, 2>> adj;  // inter-zone neighbor pairs
    double u_zone_kw_per_k = 0.05;        // conductance per neighbor pair

    double t_air_c = 10.0;  // supply air temperature (cooling)
    std::vector<double> flow_levels_kgps = {0.0, 0.25};
    double cp_air_kj_per_kg_k = 1.005;

    std::vector<double> solar_m2;           // effective solar aperture per zone
    std::array<double, 24> internal_kw{};   // internal gains by hour, per zone
    double noise_std_c = 0.02;              // process noise per simulation step

    double comfort_low_c = kComfortLow_c;
    double comfort_high_c = kComfortHigh_c;

    int flow_count() const { return static_cast<int>(flow_levels_kgps.size()); }
    double max_flow_kgps() const;
    void validate() const;  // throws ConfigError

    static PlantParams single_zone();
    static PlantParams four_zone();
};

struct SystemState {
    int step = 0;  // simulation step index since run start
    std::vector<double> t_in_c;
    double t_out_c = 0.0;
    double sun_wm2 = 0.0;

    double clock_min(double dt_s = 60.0) const {
        const double m = step * dt_s / 60.0;
        return m - 1440.0 * std::floor(m / 1440.0);
    }
};

SystemState initial_state(const PlantParams& pp, const WeatherSeries& w, double t0_c = 22.0);

// Advances one simulation step.  Any single-step zone temperature change of
// 2 degC or more raises NumericError naming the zone (Euler stability guard).
void step_plant(SystemState& s, const Action& a, const PlantParams& pp,
                const WeatherSeries& w, Rng& rng);

struct CostSchedule {
    std::array<double, 24> price_per_kwh{};  // time-of-use electricity price
    double fan_rated_kw = 0.5;
    double cop = 3.0;
    double dt_c_min = 15.0;  // control period

    static CostSchedule default_tou();
};

// Electric cost ($) of holding `a` for one control period starting at `s`:
//   price(t) * dt_c * sum_i [ fan_rated*(f_i/f_max)^3
//                             + mdot_i*cp*max(T_in_i - T_air, 0)/COP ]
double energy_cost(const SystemState& s, const Action& a, const PlantParams& pp,
                   const CostSchedule& cs);

// Band hysteresis: max flow above comfort_high - deadband, off below
// comfort_low + deadband, otherwise hold the previous level.
struct OnOffController {
    double deadband_c = 0.5;
    std::vector<int> prev;

    Action decide(const SystemState& s, const PlantParams& pp);
};

}  // namespace hvacft::sim
