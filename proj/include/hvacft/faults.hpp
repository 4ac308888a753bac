#pragma once
// Sensor fault injection.  Faults corrupt only the indoor-temperature
// readings that controllers and learned components see; plant truth, actions
// and ambient channels are never touched.

#include <cstdint>
#include <string>
#include <vector>

#include "hvacft/errors.hpp"
#include "hvacft/history.hpp"
#include "hvacft/rng.hpp"

namespace hvacft::faults {

enum class Kind { None, Iid, Continuous };

struct FaultConfig {
    Kind kind = Kind::None;
    double prob = 0.0;  // Iid: per-zone per-step corruption prob; Continuous: onset prob
    int duration = 0;   // Continuous: steps an onset keeps the reading corrupted
    double low_c = 10.0;   // replacement values are uniform in [low, high]
    double high_c = 40.0;
    bool correlated_zones = false;  // one occurrence draw shared by all zones

    void validate() const;
};

struct TraceEntry {
    int step = 0;
    int zone = 0;
    double original_c = 0.0;
    double injected_c = 0.0;
    bool onset = false;  // first step of a continuous run (Iid: always true)
};

// Stateful injector: owns its RNG stream and per-zone continuous-fault
// countdowns, so a run replays exactly from (config, zones, seed).  The
// random draws per step do not depend on the readings, which keeps fault
// streams identical across paired controller runs.
class FaultInjector {
public:
    FaultInjector(const FaultConfig& cfg, int zones, std::uint64_t seed);

    // Returns the corrupted copy of `readings` for this simulation step and
    // appends trace entries for every replaced value.
    std::vector<double> inject(const std::vector<double>& readings, int step);

    const std::vector<TraceEntry>& trace() const { return trace_; }
    void clear_trace() { trace_.clear(); }

private:
    FaultConfig cfg_;
    int zones_ = 0;
    Rng rng_;
    std::vector<int> remaining_;
    std::vector<TraceEntry> trace_;
};

// Independent per-entry corruption of a window's indoor temperatures with
// probability p; all other fields pass through untouched.
hist::Window corrupt_history(const hist::Window& w, double p, Rng& rng,
                             double low_c = 10.0, double high_c = 40.0);

// External trace format: header `step,zone,original,injected`.
void save_fault_trace_csv(const std::vector<TraceEntry>& trace, const std::string& path);

}  // namespace hvacft::faults
