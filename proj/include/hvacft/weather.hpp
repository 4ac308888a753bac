#pragma once
// Synthetic weather generation and the external weather CSV format
// (header `step,t_out_c,sun_wm2`, one row per simulation step).

#include <cstdint>
#include <string>
#include <vector>

namespace hvacft::sim {

// Outdoor air is kept inside [10, 40] degC everywhere in the toolkit.
inline constexpr double kOutdoorLow_c = 10.0;
inline constexpr double kOutdoorHigh_c = 40.0;

struct WeatherProfile {
    double mean_c = 27.5;        // diurnal mean outdoor temperature
    double amplitude_c = 7.0;    // diurnal sinusoid amplitude
    double peak_min = 900.0;     // clock minute of the warmest point (15:00)
    double daily_var_c = 1.5;    // uniform day-to-day offset applied to the mean
    double sun_peak_wm2 = 900.0;
    double sunrise_min = 360.0;  // 06:00
    double sunset_min = 1200.0;  // 20:00
    double sun_var = 0.15;       // per-day attenuation drawn from [1-sun_var, 1]
};

struct WeatherSeries {
    double dt_min = 1.0;  // resolution; one entry per simulation step
    std::vector<double> t_out_c;
    std::vector<double> sun_wm2;

    int steps() const { return static_cast<int>(t_out_c.size()); }
    // Clamped reads: queries past the horizon return the final entry, so
    // short lookaheads near the end of a run stay well defined.
    double tout(int step) const;
    double sun(int step) const;
};

WeatherSeries generate_weather(int days, const WeatherProfile& profile, std::uint64_t seed);

// Loads/saves the external CSV.  The loader validates the header, column
// arity and numeric ranges and reports offending 1-based line numbers.
WeatherSeries load_weather_csv(const std::string& path);
void save_weather_csv(const WeatherSeries& w, const std::string& path);

}  // namespace hvacft::sim
