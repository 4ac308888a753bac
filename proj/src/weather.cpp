#include "hvacft/weather.hpp"

#include <algorithm>
#include <cmath>

#include "hvacft/csvio.hpp"
#include "hvacft/errors.hpp"
#include "hvacft/rng.hpp"

namespace hvacft::sim {

double WeatherSeries::tout(int step) const {
    if (t_out_c.empty()) throw InputError("weather series is empty");
    return t_out_c[std::clamp<int>(step, 0, steps() - 1)];
}

double WeatherSeries::sun(int step) const {
    if (sun_wm2.empty()) throw InputError("weather series is empty");
    return sun_wm2[std::clamp<int>(step, 0, steps() - 1)];
}

WeatherSeries generate_weather(int days, const WeatherProfile& prof, std::uint64_t seed) {
    if (days <= 0) throw ConfigError("weather horizon must be at least one day");
    Rng rng = make_rng(seed, 0x77656174u /* "weat" */);
    WeatherSeries w;
    const int per_day = 1440;
    w.t_out_c.reserve(static_cast<std::size_t>(days) * per_day);
    w.sun_wm2.reserve(static_cast<std::size_t>(days) * per_day);
    constexpr double two_pi = 6.283185307179586476925286766559;
    for (int d = 0; d < days; ++d) {
        const double offset =
            prof.daily_var_c > 0.0 ? uniform(rng, -prof.daily_var_c, prof.daily_var_c) : 0.0;
        const double atten = prof.sun_var > 0.0 ? uniform(rng, 1.0 - prof.sun_var, 1.0) : 1.0;
        for (int m = 0; m < per_day; ++m) {
            const double t = prof.mean_c + offset +
                             prof.amplitude_c * std::cos(two_pi * (m - prof.peak_min) / 1440.0);
            w.t_out_c.push_back(std::clamp(t, kOutdoorLow_c, kOutdoorHigh_c));
            double sun = 0.0;
            if (m > prof.sunrise_min && m < prof.sunset_min) {
                const double frac = (m - prof.sunrise_min) / (prof.sunset_min - prof.sunrise_min);
                sun = prof.sun_peak_wm2 * atten * std::sin(frac * 3.14159265358979323846);
            }
            w.sun_wm2.push_back(std::max(sun, 0.0));
        }
    }
    return w;
}

WeatherSeries load_weather_csv(const std::string& path) {
    csv::Table t = csv::read_table(path);
    const std::vector<std::string> expect{"step", "t_out_c", "sun_wm2"};
    if (t.header != expect)
        throw InputError(path + ":1: expected header step,t_out_c,sun_wm2");
    WeatherSeries w;
    w.t_out_c.reserve(t.rows.size());
    w.sun_wm2.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string where = path + ":" + std::to_string(r + 2);
        const double step = csv::to_double(t.rows[r][0], where);
        if (step != static_cast<double>(r))
            throw InputError(where + ": step column must count 0,1,2,...");
        const double tout = csv::to_double(t.rows[r][1], where);
        if (tout < kOutdoorLow_c || tout > kOutdoorHigh_c)
            throw InputError(where + ": t_out_c " + t.rows[r][1] + " outside [10,40]");
        const double sun = csv::to_double(t.rows[r][2], where);
        if (sun < 0.0) throw InputError(where + ": negative sun_wm2");
        w.t_out_c.push_back(tout);
        w.sun_wm2.push_back(sun);
    }
    if (w.t_out_c.empty()) throw InputError(path + ": weather CSV has no rows");
    return w;
}

void save_weather_csv(const WeatherSeries& w, const std::string& path) {
    csv::Writer out(path);
    out.row({"step", "t_out_c", "sun_wm2"});
    for (int i = 0; i < w.steps(); ++i)
        out.row({std::to_string(i), csv::num(w.t_out_c[i]), csv::num(w.sun_wm2[i])});
}

}  // namespace hvacft::sim
