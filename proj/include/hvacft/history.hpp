#pragma once
// Control-period history: the logged record every learned component reads,
// and the fixed window flattening they share.

#include <cstdint>
#include <vector>

#include "hvacft/errors.hpp"

namespace hvacft::hist {

// One control-period record.  `t_in_c` is the sensor view (what components
// see, possibly fault-corrupted); `t_true_c` is plant truth, used only for
// labels and metrics.
struct Entry {
    double clock_min = 0.0;
    std::vector<double> t_in_c;
    double t_out_c = 0.0;
    double sun_wm2 = 0.0;
    std::vector<double> flow_kgps;  // commanded flow held over this period
    std::vector<double> t_true_c;
};

struct Log {
    int zones = 0;
    double f_max_kgps = 0.0;  // normalization base for flows
    std::vector<Entry> entries;

    int size() const { return static_cast<int>(entries.size()); }
};

// A k-step window, oldest step first.  Indoor temperatures here are the
// sensor view; truth never enters a window.
struct WindowStep {
    double clock_min = 0.0;
    std::vector<double> t_in_c;
    double t_out_c = 0.0;
    std::vector<double> flow_kgps;
};

struct Window {
    std::vector<WindowStep> steps;
    int k() const { return static_cast<int>(steps.size()); }
    int zones() const { return steps.empty() ? 0 : static_cast<int>(steps.front().t_in_c.size()); }
};

// Extracts the window covering entries [end - k, end) of the log.
Window window_before(const Log& log, int end, int k);

// Normalization constants shared by every learned component.
inline constexpr double kTempScale_c = 40.0;
inline constexpr double kClockScale_min = 1440.0;

// Flat width: k * (2 + 2*zones).
int window_width(int k, int zones);

// Step-major flattening; per step, in order:
//   [clock/1440, T_in[0..n)/40, T_out/40, flow[0..n)/f_max]
std::vector<double> flatten_window(const Window& w, double f_max_kgps);

// Channel-major layout for convolutional nets: (2+2n) channels of length k,
// channel order identical to the per-step feature order above.
std::vector<double> window_to_channels(const Window& w, double f_max_kgps);

}  // namespace hvacft::hist
