#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "hvacft/errors.hpp"
#include "hvacft/plant.hpp"
#include "hvacft/weather.hpp"

using namespace hvacft;
using namespace hvacft::sim;

namespace {

// Single test zone with every coupling switched off unless a test dials it in.
PlantParams bare_zone() {
    PlantParams pp;
    pp.zones = 1;
    pp.mcp_kj_per_k = {600.0};
    pp.u_env_kw_per_k = {0.0};
    pp.solar_m2 = {0.0};
    pp.internal_kw.fill(0.0);
    pp.noise_std_c = 0.0;
    pp.flow_levels_kgps = {0.0, 0.5};
    pp.cp_air_kj_per_kg_k = 1.0;  // makes mdot*cp arithmetic exact in tests
    return pp;
}

WeatherSeries flat_weather(int steps, double tout, double sun = 0.0) {
    WeatherSeries w;
    w.t_out_c.assign(steps, tout);
    w.sun_wm2.assign(steps, sun);
    return w;
}

}  // namespace

TEST_CASE("equilibrium: no flow, no gains, ambient at zone temperature") {
    PlantParams pp = bare_zone();
    pp.u_env_kw_per_k = {0.2};
    WeatherSeries w = flat_weather(10, 25.0);
    SystemState s = initial_state(pp, w, 25.0);
    Rng rng = make_rng(1, 0);
    Action off{{0}};
    for (int i = 0; i < 5; ++i) step_plant(s, off, pp, w, rng);
    CHECK(s.t_in_c[0] == 25.0);  // exact: every flux term is identically zero
}

TEST_CASE("hand Euler step: 600 kJ/K zone, 0.5 kW/K flow, 30 -> 29 degC") {
    PlantParams pp = bare_zone();
    WeatherSeries w = flat_weather(4, 30.0);
    SystemState s = initial_state(pp, w, 30.0);
    Rng rng = make_rng(2, 0);
    Action on{{1}};  // 0.5 kg/s * 1.0 kJ/kg/K = 0.5 kW/K against T_air = 10
    step_plant(s, on, pp, w, rng);
    // dT = 60 s * 0.5 kW/K * (10 - 30) K / 600 kJ/K = -1.0
    CHECK(s.t_in_c[0] == doctest::Approx(29.0).epsilon(1e-14));
    CHECK(s.step == 1);
}

TEST_CASE("higher flow never leaves the zone warmer (supply below zone temp)") {
    for (double tout : {20.0, 30.0, 38.0}) {
        PlantParams pp = bare_zone();
        pp.u_env_kw_per_k = {0.08};
        pp.flow_levels_kgps = {0.0, 0.25};
        WeatherSeries w = flat_weather(4, tout);
        Rng rng_a = make_rng(3, 0), rng_b = make_rng(3, 0);
        SystemState sa = initial_state(pp, w, 26.0);
        SystemState sb = initial_state(pp, w, 26.0);
        step_plant(sa, Action{{0}}, pp, w, rng_a);
        step_plant(sb, Action{{1}}, pp, w, rng_b);
        CHECK(sb.t_in_c[0] < sa.t_in_c[0]);
    }
}

TEST_CASE("free response relaxes monotonically toward ambient") {
    PlantParams pp = bare_zone();
    pp.u_env_kw_per_k = {0.1};
    WeatherSeries w = flat_weather(300, 20.0);
    SystemState s = initial_state(pp, w, 30.0);
    Rng rng = make_rng(4, 0);
    double prev = 30.0;
    for (int i = 0; i < 240; ++i) {
        step_plant(s, Action{{0}}, pp, w, rng);
        CHECK(s.t_in_c[0] < prev);
        CHECK(s.t_in_c[0] > 20.0);
        prev = s.t_in_c[0];
    }
    CHECK(prev < 21.0);  // several time constants in, nearly settled
}

TEST_CASE("euler stability guard names the runaway zone") {
    PlantParams pp = bare_zone();
    pp.u_env_kw_per_k = {40.0};  // absurd conductance: |dT| >= 2 degC in one step
    WeatherSeries w = flat_weather(4, 40.0);
    SystemState s = initial_state(pp, w, 20.0);
    Rng rng = make_rng(5, 0);
    try {
        step_plant(s, Action{{0}}, pp, w, rng);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("zone 0") != std::string::npos);
    }
}

TEST_CASE("four-zone coupling pulls a cold zone toward its warm neighbors") {
    PlantParams pp = PlantParams::four_zone();
    pp.noise_std_c = 0.0;
    pp.internal_kw.fill(0.0);
    for (auto& v : pp.solar_m2) v = 0.0;
    for (auto& v : pp.u_env_kw_per_k) v = 0.0;
    WeatherSeries w = flat_weather(10, 30.0);
    SystemState s = initial_state(pp, w, 24.0);
    s.t_in_c[2] = 18.0;
    Rng rng = make_rng(6, 0);
    Action off{{0, 0, 0, 0}};
    step_plant(s, off, pp, w, rng);
    CHECK(s.t_in_c[2] > 18.0);   // warmed by neighbors
    CHECK(s.t_in_c[0] < 24.0);   // neighbor of the cold zone cools
}

TEST_CASE("energy cost: zero flow costs nothing") {
    PlantParams pp = bare_zone();
    CostSchedule cs;
    cs.price_per_kwh.fill(0.2);
    WeatherSeries w = flat_weather(4, 30.0);
    SystemState s = initial_state(pp, w, 25.0);
    CHECK(energy_cost(s, Action{{0}}, pp, cs) == 0.0);
}

TEST_CASE("energy cost: hand-checked 0.15 dollars for one control period") {
    PlantParams pp = bare_zone();  // cp 1.0, levels {0, 0.5}
    CostSchedule cs;
    cs.price_per_kwh.fill(0.2);
    cs.fan_rated_kw = 1.0;
    cs.cop = 3.0;
    cs.dt_c_min = 15.0;
    WeatherSeries w = flat_weather(4, 30.0);
    SystemState s = initial_state(pp, w, 22.0);
    // fan: 1.0*(0.5/0.5)^3 = 1 kW; coil: 0.5*1.0*(22-10)/3 = 2 kW
    // cost = 0.2 $/kWh * 0.25 h * 3 kW = 0.15 $
    const double c = energy_cost(s, Action{{1}}, pp, cs);
    CHECK(c == doctest::Approx(0.15).epsilon(1e-14));

    CostSchedule dbl = cs;
    for (auto& p : dbl.price_per_kwh) p *= 2.0;
    CHECK(energy_cost(s, Action{{1}}, pp, dbl) == doctest::Approx(2.0 * c).epsilon(1e-14));
}

TEST_CASE("energy cost: coil term clamps at zero when the zone is colder than supply") {
    PlantParams pp = bare_zone();
    CostSchedule cs;
    cs.price_per_kwh.fill(0.2);
    cs.fan_rated_kw = 1.0;
    WeatherSeries w = flat_weather(4, 30.0);
    SystemState s = initial_state(pp, w, 8.0);  // below t_air = 10
    // only the fan term remains: 0.2 * 0.25 * 1 = 0.05
    CHECK(energy_cost(s, Action{{1}}, pp, cs) == doctest::Approx(0.05).epsilon(1e-14));
}

TEST_CASE("band controller: max above 23.5, off below 19.5, hold in between") {
    PlantParams pp = bare_zone();
    pp.flow_levels_kgps = {0.0, 0.25};
    WeatherSeries w = flat_weather(4, 30.0);
    OnOffController ctl;

    SystemState hot = initial_state(pp, w, 30.0);
    CHECK(ctl.decide(hot, pp).level[0] == 1);

    SystemState cold = initial_state(pp, w, 18.0);
    CHECK(ctl.decide(cold, pp).level[0] == 0);

    // hysteresis: entering the dead zone keeps the previous command
    SystemState mid = initial_state(pp, w, 22.0);
    CHECK(ctl.decide(mid, pp).level[0] == 0);
    ctl.prev = {1};
    CHECK(ctl.decide(mid, pp).level[0] == 1);
}

TEST_CASE("eight simulated days under band control stay near the comfort band") {
    PlantParams pp = PlantParams::four_zone();
    CostSchedule cs = CostSchedule::default_tou();
    WeatherSeries w = generate_weather(8, WeatherProfile{}, 11);
    SystemState s = initial_state(pp, w, 22.0);
    Rng rng = make_rng(12, 0);
    OnOffController ctl;
    const int ctrl_every = static_cast<int>(cs.dt_c_min * 60.0 / pp.dt_s);
    Action a{std::vector<int>(4, 0)};
    int in_band = 0, total = 0;
    for (int step = 0; step < 8 * 1440; ++step) {
        if (step % ctrl_every == 0) a = ctl.decide(s, pp);
        step_plant(s, a, pp, w, rng);
        for (int z = 0; z < 4; ++z) {
            ++total;
            if (s.t_in_c[z] >= kComfortLow_c - 1.0 && s.t_in_c[z] <= kComfortHigh_c + 1.0)
                ++in_band;
        }
    }
    CHECK(static_cast<double>(in_band) / total > 0.9);
}

TEST_CASE("plant trajectories replay bit-exactly under the same seed") {
    PlantParams pp = PlantParams::four_zone();
    WeatherSeries w = generate_weather(1, WeatherProfile{}, 7);
    auto run = [&] {
        SystemState s = initial_state(pp, w, 22.0);
        Rng rng = make_rng(13, 0);
        std::vector<double> trace;
        for (int i = 0; i < 200; ++i) {
            step_plant(s, Action{{1, 0, 1, 0}}, pp, w, rng);
            trace.insert(trace.end(), s.t_in_c.begin(), s.t_in_c.end());
        }
        return trace;
    };
    CHECK(run() == run());
}

TEST_CASE("plant parameter validation rejects inconsistent shapes") {
    PlantParams pp = PlantParams::four_zone();
    pp.mcp_kj_per_k.pop_back();
    CHECK_THROWS_AS(pp.validate(), ConfigError);

    PlantParams pp2 = PlantParams::single_zone();
    pp2.flow_levels_kgps = {0.25};  // the zero level must exist
    CHECK_THROWS_AS(pp2.validate(), ConfigError);
}

TEST_CASE("zero-amplitude profile yields constant outdoor temperature") {
    WeatherProfile prof;
    prof.amplitude_c = 0.0;
    prof.daily_var_c = 0.0;
    prof.mean_c = 28.0;
    WeatherSeries w = generate_weather(2, prof, 21);
    for (double t : w.t_out_c) CHECK(t == doctest::Approx(28.0).epsilon(1e-14));
}

TEST_CASE("generated weather respects outdoor bounds and dark midnights") {
    WeatherSeries w = generate_weather(5, WeatherProfile{}, 22);
    REQUIRE(w.steps() == 5 * 1440);
    for (int i = 0; i < w.steps(); ++i) {
        CHECK(w.t_out_c[i] >= kOutdoorLow_c);
        CHECK(w.t_out_c[i] <= kOutdoorHigh_c);
        CHECK(w.sun_wm2[i] >= 0.0);
    }
    for (int d = 0; d < 5; ++d) CHECK(w.sun_wm2[d * 1440] == 0.0);  // midnight
    // the sun does rise
    double peak = 0.0;
    for (double v : w.sun_wm2) peak = std::max(peak, v);
    CHECK(peak > 500.0);
}

TEST_CASE("weather CSV round-trips exactly and validates its schema") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "hvacft_weather_test";
    fs::create_directories(dir);

    WeatherSeries w = generate_weather(1, WeatherProfile{}, 31);
    const std::string path = (dir / "w.csv").string();
    save_weather_csv(w, path);
    WeatherSeries r = load_weather_csv(path);
    REQUIRE(r.steps() == w.steps());
    CHECK(r.t_out_c == w.t_out_c);  // bit-exact round-trip
    CHECK(r.sun_wm2 == w.sun_wm2);

    const std::string bad_header = (dir / "bad1.csv").string();
    std::ofstream(bad_header) << "step,temp,sun\n0,20,0\n";
    CHECK_THROWS_AS(load_weather_csv(bad_header), InputError);

    const std::string bad_arity = (dir / "bad2.csv").string();
    std::ofstream(bad_arity) << "step,t_out_c,sun_wm2\n0,20\n";
    try {
        load_weather_csv(bad_arity);
        FAIL("expected InputError");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find(":2") != std::string::npos);  // line number
    }

    const std::string bad_range = (dir / "bad3.csv").string();
    std::ofstream(bad_range) << "step,t_out_c,sun_wm2\n0,20,0\n1,55,0\n";
    try {
        load_weather_csv(bad_range);
        FAIL("expected InputError");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find(":3") != std::string::npos);
    }
    fs::remove_all(dir);
}
