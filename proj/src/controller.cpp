// Value-network flow control: joint-action indexing, the epsilon-greedy
// policy, replay-based Q-learning on the healthy plant, and the closed-loop
// drivers (plain sensor-fed control and the vetted fault-tolerant loop).

#include "hvacft/controller.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "hvacft/csvio.hpp"

namespace hvacft::ctrl {
namespace {

// Divergence guard: any value-net output or update target beyond this
// magnitude aborts training.
constexpr double kValueCap = 1e6;

int steps_per_period(const sim::PlantParams& pp, const sim::CostSchedule& cs) {
    const double ratio = cs.dt_c_min * 60.0 / pp.dt_s;
    const int n = static_cast<int>(std::lround(ratio));
    if (n < 1 || std::abs(ratio - n) > 1e-9)
        throw ConfigError("control period of " + csv::num(cs.dt_c_min) +
                          " min is not a whole number of " + csv::num(pp.dt_s) +
                          " s simulation steps");
    return n;
}

DrlState make_state(const sim::SystemState& s, const std::vector<double>& t_in_c,
                    const sim::WeatherSeries& w, double dt_s, int spc) {
    DrlState d;
    d.clock_min = s.clock_min(dt_s);
    d.t_in_c = t_in_c;
    d.t_out_c = s.t_out_c;
    d.sun_wm2 = s.sun_wm2;
    for (int j = 0; j < 3; ++j) {
        d.t_out_fc_c[static_cast<std::size_t>(j)] = w.tout(s.step + spc * (j + 1));
        d.sun_fc_wm2[static_cast<std::size_t>(j)] = w.sun(s.step + spc * (j + 1));
    }
    return d;
}

int greedy_index(const std::vector<double>& qv) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(qv.size()); ++i)
        if (qv[static_cast<std::size_t>(i)] > qv[static_cast<std::size_t>(best)]) best = i;
    return best;  // strict comparison: ties stay at the lowest index
}

double band_excess(double t_c, const RewardParams& rp) {
    return std::max(rp.t_low_c - t_c, 0.0) + std::max(t_c - rp.t_high_c, 0.0);
}

void check_value_scale(const std::vector<double>& v, const char* where) {
    for (double x : v)
        if (std::abs(x) > kValueCap)
            throw TrainingError(std::string("value function diverged: |") + where +
                                "| exceeded 1e6");
}

}  // namespace

std::vector<double> DrlState::encode() const {
    std::vector<double> x;
    x.reserve(t_in_c.size() + 9);
    x.push_back(clock_min / hist::kClockScale_min);
    for (double t : t_in_c) x.push_back(t / hist::kTempScale_c);
    x.push_back(t_out_c / hist::kTempScale_c);
    x.push_back(sun_wm2 / kSunScale_wm2);
    for (double t : t_out_fc_c) x.push_back(t / hist::kTempScale_c);
    for (double v : sun_fc_wm2) x.push_back(v / kSunScale_wm2);
    return x;
}

double violation_c(const std::vector<double>& t_in_c, const RewardParams& rp) {
    double v = 0.0;
    for (double t : t_in_c) v += band_excess(t, rp);
    return v;
}

double reward(double cost, const std::vector<double>& t_in_c, const RewardParams& rp) {
    return -(rp.alpha * cost) - rp.beta * violation_c(t_in_c, rp);
}

int action_count(int zones, int levels) {
    if (zones < 1 || levels < 2)
        throw ConfigError("joint actions need at least one zone and two flow levels");
    long long n = 1;
    for (int z = 0; z < zones; ++z) {
        n *= levels;
        if (n > 4096)
            throw ConfigError("joint action head would exceed 4096 outputs (" +
                              std::to_string(zones) + " zones x " + std::to_string(levels) +
                              " levels)");
    }
    return static_cast<int>(n);
}

sim::Action action_from_index(int index, int zones, int levels) {
    const int count = action_count(zones, levels);
    if (index < 0 || index >= count)
        throw ConfigError("joint action index " + std::to_string(index) +
                          " outside [0, " + std::to_string(count) + ")");
    sim::Action a;
    a.level.resize(static_cast<std::size_t>(zones));
    for (int z = 0; z < zones; ++z) {  // zone 0 is the lowest-order digit
        a.level[static_cast<std::size_t>(z)] = index % levels;
        index /= levels;
    }
    return a;
}

int index_from_action(const sim::Action& a, int levels) {
    if (a.level.empty() || levels < 2)
        throw ConfigError("joint actions need at least one zone and two flow levels");
    long long idx = 0;
    for (int z = static_cast<int>(a.level.size()) - 1; z >= 0; --z) {
        const int lvl = a.level[static_cast<std::size_t>(z)];
        if (lvl < 0 || lvl >= levels)
            throw ConfigError("flow level " + std::to_string(lvl) + " outside [0, " +
                              std::to_string(levels) + ")");
        idx = idx * levels + lvl;
    }
    return static_cast<int>(idx);
}

int act(const nn::ParamSet& q, const DrlState& s, double epsilon, Rng& rng) {
    const std::vector<double> x = s.encode();
    if (static_cast<int>(x.size()) != q.spec.input_size())
        throw ConfigError("value net expects input width " +
                          std::to_string(q.spec.input_size()) + ", the state encodes to " +
                          std::to_string(x.size()));
    if (epsilon > 0.0 && uniform(rng, 0.0, 1.0) < epsilon)
        return uniform_index(rng, q.spec.output_size());
    return greedy_index(nn::forward(q, x));
}

ReplayBuffer::ReplayBuffer(int capacity) : cap_(capacity) {
    if (capacity < 1) throw ConfigError("replay capacity must be positive");
    buf_.reserve(static_cast<std::size_t>(capacity));
}

void ReplayBuffer::push(Transition t) {
    if (static_cast<int>(buf_.size()) < cap_) {
        buf_.push_back(std::move(t));
        return;
    }
    buf_[static_cast<std::size_t>(next_)] = std::move(t);
    next_ = (next_ + 1) % cap_;
}

const Transition& ReplayBuffer::sample(Rng& rng) const {
    if (buf_.empty()) throw StructuralError("sampling an empty replay buffer");
    return buf_[static_cast<std::size_t>(uniform_index(rng, static_cast<int>(buf_.size())))];
}

nn::NetSpec DqnConfig::net_spec(int zones, int levels) const {
    std::vector<int> widths;
    widths.push_back(DrlState::width(zones));
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(action_count(zones, levels));
    return nn::dense_net(widths, nn::Act::None);
}

void DqnConfig::validate() const {
    if (episodes < 1) throw ConfigError("episodes must be positive");
    if (episode_days < 1) throw ConfigError("episode_days must be positive");
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (batch < 1) throw ConfigError("batch size must be positive");
    if (replay_capacity < batch)
        throw ConfigError("replay capacity must hold at least one batch");
    if (target_sync < 1) throw ConfigError("target_sync must be positive");
    if (eps_start < 0.0 || eps_start > 1.0 || eps_end < 0.0 || eps_end > eps_start)
        throw ConfigError("exploration range must satisfy 0 <= eps_end <= eps_start <= 1");
    if (eps_frac < 0.0 || eps_frac > 1.0)
        throw ConfigError("eps_frac must lie in [0, 1]");
    if (!(reward.gamma >= 0.0 && reward.gamma < 1.0))
        throw ConfigError("discount must lie in [0, 1)");
    for (int h : hidden)
        if (h < 1) throw ConfigError("hidden widths must be positive");
}

double epsilon_at(long long step, long long total, const DqnConfig& cfg) {
    const double horizon = cfg.eps_frac * static_cast<double>(total);
    if (!(horizon > 0.0) || static_cast<double>(step) >= horizon) return cfg.eps_end;
    return cfg.eps_start +
           (cfg.eps_end - cfg.eps_start) * (static_cast<double>(step) / horizon);
}

nn::ParamSet train_dqn(const sim::PlantParams& pp, const sim::CostSchedule& cs,
                       const sim::WeatherProfile& wp, const DqnConfig& cfg,
                       std::uint64_t seed, std::vector<double>* episode_return) {
    pp.validate();
    cfg.validate();
    const int spc = steps_per_period(pp, cs);
    const int levels = pp.flow_count();
    const nn::NetSpec spec = cfg.net_spec(pp.zones, levels);
    const int in = spec.input_size();
    const int heads = spec.output_size();
    const double nan = std::numeric_limits<double>::quiet_NaN();

    nn::ParamSet q = nn::ParamSet::he_init(spec, derive_seed(seed, 10));
    nn::ParamSet target = q;
    nn::AdamState adam = nn::AdamState::for_params(q);
    nn::ParamSet gscratch = nn::ParamSet::zeros(spec);
    nn::Trace tr, tr2;
    ReplayBuffer replay(cfg.replay_capacity);
    Rng policy = make_rng(seed, 3);

    const int steps_day = static_cast<int>(std::lround(86400.0 / pp.dt_s));
    const int ctrl_per_ep = cfg.episode_days * steps_day / spc;
    const long long total_ctrl = static_cast<long long>(cfg.episodes) * ctrl_per_ep;
    const int warm = std::max(cfg.batch, cfg.update_warmup);

    std::vector<double> X(static_cast<std::size_t>(cfg.batch) * in);
    std::vector<double> X2(static_cast<std::size_t>(cfg.batch) * in);
    std::vector<double> T(static_cast<std::size_t>(cfg.batch) * heads);
    std::vector<int> row_a(static_cast<std::size_t>(cfg.batch));
    std::vector<double> row_r(static_cast<std::size_t>(cfg.batch));

    if (episode_return) episode_return->clear();
    long long global = 0, gsteps = 0;

    for (int ep = 0; ep < cfg.episodes; ++ep) {
        sim::WeatherSeries w =
            sim::generate_weather(cfg.episode_days, wp, derive_seed(seed, 100 + ep));
        sim::SystemState s = sim::initial_state(pp, w, cfg.t0_c);
        Rng prng = make_rng(seed, 200 + static_cast<std::uint64_t>(ep));
        double ret = 0.0;

        for (int t = 0; t < ctrl_per_ep; ++t, ++global) {
            DrlState ds = make_state(s, s.t_in_c, w, pp.dt_s, spc);
            const int ai = act(q, ds, epsilon_at(global, total_ctrl, cfg), policy);
            const sim::Action a = action_from_index(ai, pp.zones, levels);
            const double cost = sim::energy_cost(s, a, pp, cs);
            for (int i = 0; i < spc; ++i) sim::step_plant(s, a, pp, w, prng);
            const double r = reward(cost, s.t_in_c, cfg.reward);
            ret += r;

            Transition tran;
            tran.s = ds.encode();
            tran.a = ai;
            tran.r = r;
            tran.s2 = make_state(s, s.t_in_c, w, pp.dt_s, spc).encode();

            if (cfg.use_replay) {
                replay.push(std::move(tran));
                if (replay.size() < warm) continue;
                for (int b = 0; b < cfg.batch; ++b) {
                    const Transition& tb = replay.sample(policy);
                    std::copy(tb.s.begin(), tb.s.end(),
                              X.begin() + static_cast<std::size_t>(b) * in);
                    std::copy(tb.s2.begin(), tb.s2.end(),
                              X2.begin() + static_cast<std::size_t>(b) * in);
                    row_a[static_cast<std::size_t>(b)] = tb.a;
                    row_r[static_cast<std::size_t>(b)] = tb.r;
                }
                nn::forward_batch(target, X2.data(), nullptr, cfg.batch, tr2);
                check_value_scale(tr2.act.back(), "successor value");
                std::fill(T.begin(), T.end(), nan);
                for (int b = 0; b < cfg.batch; ++b) {
                    const double* q2 = tr2.act.back().data() + static_cast<std::size_t>(b) * heads;
                    const double best = *std::max_element(q2, q2 + heads);
                    T[static_cast<std::size_t>(b) * heads + row_a[static_cast<std::size_t>(b)]] =
                        row_r[static_cast<std::size_t>(b)] + cfg.reward.gamma * best;
                }
                const double loss = nn::train_batch(q, adam, X.data(), nullptr, T.data(),
                                                    cfg.batch, nn::Loss::MaskedMse, cfg.lr,
                                                    tr, gscratch);
                check_value_scale(tr.act.back(), "online value");
                if (!(loss < kValueCap * kValueCap))
                    throw TrainingError("value function diverged: update loss reached " +
                                        csv::num(loss));
                if (++gsteps % cfg.target_sync == 0) target = q;
            } else {
                // plain per-sample update bootstrapped from the online net
                const std::vector<double> q2 = nn::forward(q, tran.s2);
                check_value_scale(q2, "successor value");
                std::vector<double> tgt(static_cast<std::size_t>(heads), nan);
                tgt[static_cast<std::size_t>(tran.a)] =
                    tran.r + cfg.reward.gamma * *std::max_element(q2.begin(), q2.end());
                const double loss =
                    nn::train_batch(q, adam, tran.s.data(), nullptr, tgt.data(), 1,
                                    nn::Loss::MaskedMse, cfg.lr, tr, gscratch);
                check_value_scale(tr.act.back(), "online value");
                if (!(loss < kValueCap * kValueCap))
                    throw TrainingError("value function diverged: update loss reached " +
                                        csv::num(loss));
            }
        }
        if (episode_return) episode_return->push_back(ret);
    }
    return q;
}

RunResult run_ftf(const FtfComponents& parts, const sim::PlantParams& pp,
                  const sim::CostSchedule& cs, const sim::WeatherSeries& w,
                  const RunConfig& cfg, std::uint64_t seed) {
    pp.validate();
    cfg.fault.validate();
    if (cfg.days < 1) throw ConfigError("run length must be at least one day");
    const int spc = steps_per_period(pp, cs);
    const int levels = pp.flow_count();
    const int heads = action_count(pp.zones, levels);

    if (!parts.dqn) throw ConfigError("closed-loop run needs a value net");
    if (parts.dqn->spec.input_size() != DrlState::width(pp.zones))
        throw ConfigError("value net input width " +
                          std::to_string(parts.dqn->spec.input_size()) +
                          " does not match the " + std::to_string(pp.zones) +
                          "-zone state width " + std::to_string(DrlState::width(pp.zones)));
    if (parts.dqn->spec.output_size() != heads)
        throw ConfigError("value net head has " +
                          std::to_string(parts.dqn->spec.output_size()) + " outputs, the plant has " +
                          std::to_string(heads) + " joint actions");

    const bool vetted = cfg.mode != Mode::PlainDqn;
    if (vetted) {
        if (!parts.estimator || !parts.chooser)
            throw ConfigError("vetted modes need both an estimator and a chooser net");
        parts.est_cfg.validate();
        parts.sel_cfg.validate();
        if (parts.est_cfg.k != parts.sel_cfg.k)
            throw ConfigError("estimator window (" + std::to_string(parts.est_cfg.k) +
                              ") and chooser window (" + std::to_string(parts.sel_cfg.k) +
                              ") lengths differ");
        if (parts.estimator->spec != parts.est_cfg.net_spec(pp.zones))
            throw ConfigError("estimator net does not match its config for a " +
                              std::to_string(pp.zones) + "-zone plant");
        if (parts.chooser->spec != parts.sel_cfg.net_spec(pp.zones))
            throw ConfigError("chooser net does not match its config for a " +
                              std::to_string(pp.zones) + "-zone plant");
    }

    const int steps_day = static_cast<int>(std::lround(86400.0 / pp.dt_s));
    const long long sim_steps = static_cast<long long>(cfg.days) * steps_day;
    if (w.steps() < sim_steps)
        throw InputError("weather series covers " + std::to_string(w.steps()) +
                         " steps, the run needs " + std::to_string(sim_steps));
    const int n_ctrl = static_cast<int>(sim_steps / spc);

    sim::SystemState s = sim::initial_state(pp, w, cfg.t0_c);
    Rng prng = make_rng(seed, 1);
    faults::FaultInjector inject(cfg.fault, pp.zones, derive_seed(seed, 2));
    Rng no_rng;  // greedy evaluation consumes no randomness

    hist::Log ring;
    ring.zones = pp.zones;
    ring.f_max_kgps = pp.max_flow_kgps();

    std::unique_ptr<csv::Writer> out;
    if (!cfg.csv_path.empty()) {
        out = std::make_unique<csv::Writer>(cfg.csv_path);
        out->row({"step", "zone", "T_true", "T_sensor", "T_chosen", "action", "cost",
                  "violation"});
    }

    RunResult res;
    res.actions.reserve(static_cast<std::size_t>(n_ctrl));
    for (int t = 0; t < n_ctrl; ++t) {
        const std::vector<double> truth = s.t_in_c;
        const std::vector<double> sensor = inject.inject(truth, t);
        std::vector<double> chosen = sensor;
        if (vetted && ring.size() >= parts.est_cfg.k) {
            const hist::Window win = hist::window_before(ring, ring.size(), parts.est_cfg.k);
            const std::vector<double> est =
                predictor::predict(*parts.estimator, win, ring.f_max_kgps, parts.est_cfg);
            const selector::Choice pick = selector::select(*parts.chooser, win, sensor, est,
                                                           ring.f_max_kgps, parts.sel_cfg);
            if (cfg.mode == Mode::Ftf) chosen = pick.chosen_c;
        }

        const DrlState ds = make_state(s, chosen, w, pp.dt_s, spc);
        const int ai = act(*parts.dqn, ds, 0.0, no_rng);
        const sim::Action a = action_from_index(ai, pp.zones, levels);
        const double cost = sim::energy_cost(s, a, pp, cs);

        if (out) {
            for (int z = 0; z < pp.zones; ++z) {
                const auto zi = static_cast<std::size_t>(z);
                out->row({std::to_string(t), std::to_string(z), csv::num(truth[zi]),
                          csv::num(sensor[zi]), csv::num(chosen[zi]), std::to_string(ai),
                          csv::num(cost), csv::num(band_excess(truth[zi], cfg.reward))});
            }
        }

        hist::Entry e;
        e.clock_min = s.clock_min(pp.dt_s);
        e.t_in_c = sensor;
        e.t_true_c = truth;
        e.t_out_c = s.t_out_c;
        e.sun_wm2 = s.sun_wm2;
        for (int lvl : a.level)
            e.flow_kgps.push_back(pp.flow_levels_kgps[static_cast<std::size_t>(lvl)]);
        ring.entries.push_back(std::move(e));

        for (int i = 0; i < spc; ++i) sim::step_plant(s, a, pp, w, prng);

        const double excess = violation_c(s.t_in_c, cfg.reward);
        res.total_cost += cost;
        res.total_violation_c += excess;
        if (excess > 0.0) ++res.violation_steps;
        res.total_reward += reward(cost, s.t_in_c, cfg.reward);
        res.actions.push_back(ai);
    }
    res.control_steps = n_ctrl;
    res.violation_rate =
        n_ctrl > 0 ? static_cast<double>(res.violation_steps) / n_ctrl : 0.0;
    return res;
}

}  // namespace hvacft::ctrl
