#pragma once
// Value-network flow controller and the closed-loop drivers around it: clean
// episodic training, plain sensor-fed control, and the fault-tolerant loop
// where an estimator and a per-zone chooser vet every reading before it
// reaches the value net.  Rewards and all run metrics are computed from plant
// truth and realized cost; sensor corruption can only influence behaviour
// through the actions it provokes.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hvacft/errors.hpp"
#include "hvacft/faults.hpp"
#include "hvacft/history.hpp"
#include "hvacft/nn.hpp"
#include "hvacft/plant.hpp"
#include "hvacft/predictor.hpp"
#include "hvacft/rng.hpp"
#include "hvacft/selector.hpp"
#include "hvacft/weather.hpp"

namespace hvacft::ctrl {

// Irradiance normalization base for value-net inputs (clear-sky peak order).
inline constexpr double kSunScale_wm2 = 1000.0;

// Everything the value network conditions on at one control step, in
// physical units: wall clock, one indoor temperature per zone (raw reading
// or chooser-vetted), current ambient conditions, and the next three control
// periods' ambient forecast.
struct DrlState {
    double clock_min = 0.0;
    std::vector<double> t_in_c;
    double t_out_c = 0.0;
    double sun_wm2 = 0.0;
    std::array<double, 3> t_out_fc_c{};
    std::array<double, 3> sun_fc_wm2{};

    // Net input row: [clock/1440, T_in/40 .., T_out/40, sun/1000,
    // T_out_fc/40 ..., sun_fc/1000 ...].  Width 9 + zones.
    std::vector<double> encode() const;
    static int width(int zones) { return 9 + zones; }
};

struct RewardParams {
    double alpha = 1e-3;     // energy-cost weight
    double beta = 6.25e-4;   // comfort-violation weight
    double t_low_c = sim::kComfortLow_c;
    double t_high_c = sim::kComfortHigh_c;
    double gamma = 0.99;     // discount
};

// Total band excess over zones, degC (>= 0); the comfort term enters the
// reward as its negative.
double violation_c(const std::vector<double>& t_in_c, const RewardParams& rp);

// reward = alpha * (-cost) + beta * (-violation).  Temperatures here are
// plant truth after the action's control period.
double reward(double cost, const std::vector<double>& t_in_c, const RewardParams& rp);

// Joint action head: one output per flow-level combination, zone 0 the
// lowest-order digit.  action_count guards against heads too large to train.
int action_count(int zones, int levels);  // levels^zones; ConfigError > 4096
sim::Action action_from_index(int index, int zones, int levels);
int index_from_action(const sim::Action& a, int levels);

// Epsilon-greedy over the value net's joint-action head.  Greedy ties go to
// the lowest index, epsilon == 0 consumes no randomness (deterministic
// evaluation), epsilon == 1 is uniform over the head.  ConfigError when the
// encoded state width does not match the net input.
int act(const nn::ParamSet& q, const DrlState& s, double epsilon, Rng& rng);

struct Transition {
    std::vector<double> s;   // encoded state
    int a = 0;
    double r = 0.0;
    std::vector<double> s2;  // encoded successor
};

// Fixed-capacity ring with uniform sampling; once full, each push evicts the
// oldest stored transition.
class ReplayBuffer {
public:
    explicit ReplayBuffer(int capacity);
    void push(Transition t);
    int size() const { return static_cast<int>(buf_.size()); }
    int capacity() const { return cap_; }
    const Transition& at(int i) const { return buf_[static_cast<std::size_t>(i)]; }
    const Transition& sample(Rng& rng) const;

private:
    int cap_ = 0;
    int next_ = 0;
    std::vector<Transition> buf_;
};

struct DqnConfig {
    RewardParams reward;
    int episodes = 60;
    int episode_days = 30;  // one simulated month per episode
    double lr = 1e-4;       // per-step rewards are O(1e-4); coarser steps thrash
    int batch = 32;
    int replay_capacity = 50000;
    int update_warmup = 500;  // stored transitions before updates begin
    int target_sync = 200;    // gradient steps between target-net refreshes
    double eps_start = 1.0;
    double eps_end = 0.05;
    double eps_frac = 0.6;    // fraction of all control steps spent annealing
    bool use_replay = true;   // false: per-sample online updates, no target net
    double t0_c = 22.0;
    std::vector<int> hidden = {50, 100, 200, 400};

    nn::NetSpec net_spec(int zones, int levels) const;  // dense, head levels^zones
    void validate() const;                              // throws ConfigError
};

// Exploration schedule: linear eps_start -> eps_end over the first eps_frac
// of `total` steps, flat eps_end afterwards.
double epsilon_at(long long step, long long total, const DqnConfig& cfg);

// Q-learning on the healthy plant (readings equal truth): per control period
// an epsilon-greedy action is held for the whole period, the transition
// (state, action, reward, successor) is stored, and one batch update fits
// Q(s,a) toward r + gamma * max_a' Q_target(s', a').  Episodes restart the
// plant with freshly drawn weather.  Any value-net output or update target
// beyond |1e6| raises TrainingError.  episode_return, when given, receives
// each episode's summed reward.
nn::ParamSet train_dqn(const sim::PlantParams& pp, const sim::CostSchedule& cs,
                       const sim::WeatherProfile& wp, const DqnConfig& cfg,
                       std::uint64_t seed, std::vector<double>* episode_return = nullptr);

// Closed-loop evaluation flavours:
//   PlainDqn      raw sensor readings feed the value net directly
//   Ftf           estimator + chooser vet each zone's reading first
//   FtfForcedRaw  the full vetting pipeline runs but its choice is pinned to
//                 the raw slot — a transparency check that must reproduce
//                 PlainDqn behaviour exactly when nothing is faulted
enum class Mode { PlainDqn, Ftf, FtfForcedRaw };

// Learned artifacts the loop consumes.  estimator/chooser (and their
// configs) are only read in Ftf / FtfForcedRaw modes.
struct FtfComponents {
    const nn::ParamSet* dqn = nullptr;
    const nn::ParamSet* estimator = nullptr;
    const nn::ParamSet* chooser = nullptr;
    predictor::PredictorConfig est_cfg;
    selector::SelectorConfig sel_cfg;
};

struct RunConfig {
    Mode mode = Mode::PlainDqn;
    int days = 30;
    double t0_c = 22.0;
    faults::FaultConfig fault;  // Kind::None for clean runs
    RewardParams reward;
    std::string csv_path;  // when set, the per-step trace is written here
};

struct RunResult {
    int control_steps = 0;
    int violation_steps = 0;  // control periods whose resulting truth violates
    double violation_rate = 0.0;
    double total_cost = 0.0;
    double total_violation_c = 0.0;  // summed band excess of resulting truth
    double total_reward = 0.0;
    std::vector<int> actions;  // joint action index per control step
};

// Runs `cfg.days` of greedy control.  Per control step: sensors are read
// (fault injection applies here and only here), the mode decides which
// temperatures reach the value net, the greedy action is held while the
// plant advances one control period, and the history ring gains the step's
// record (sensor view + applied flow).  The estimator window needs
// est_cfg.k completed periods, so earlier steps fall back to raw readings.
// Metrics and rewards use plant truth and realized cost throughout.
//
// csv trace: header `step,zone,T_true,T_sensor,T_chosen,action,cost,violation`,
// one row per (control step, zone); T_* are the decision-time values, cost
// and the joint action index repeat across a step's rows, violation is that
// zone's decision-time band excess (truth).  Reruns are byte-identical.
//
// ConfigError: missing/mis-shaped nets, mismatched estimator/chooser window
// lengths, or a control period that is not a whole number of simulation
// steps.  InputError: weather shorter than the run.
RunResult run_ftf(const FtfComponents& parts, const sim::PlantParams& pp,
                  const sim::CostSchedule& cs, const sim::WeatherSeries& w,
                  const RunConfig& cfg, std::uint64_t seed);

}  // namespace hvacft::ctrl
