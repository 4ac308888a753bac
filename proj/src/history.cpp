#include "hvacft/history.hpp"

#include <string>

namespace hvacft::hist {

Window window_before(const Log& log, int end, int k) {
    if (k < 1) throw StructuralError("window length must be at least 1");
    if (end < k || end > log.size())
        throw StructuralError("window [" + std::to_string(end - k) + ", " +
                              std::to_string(end) + ") outside log of size " +
                              std::to_string(log.size()));
    Window w;
    w.steps.reserve(k);
    for (int i = end - k; i < end; ++i) {
        const Entry& e = log.entries[i];
        WindowStep ws;
        ws.clock_min = e.clock_min;
        ws.t_in_c = e.t_in_c;
        ws.t_out_c = e.t_out_c;
        ws.flow_kgps = e.flow_kgps;
        w.steps.push_back(std::move(ws));
    }
    return w;
}

int window_width(int k, int zones) { return k * (2 + 2 * zones); }

std::vector<double> flatten_window(const Window& w, double f_max_kgps) {
    const int n = w.zones();
    if (n == 0 || w.steps.empty()) throw StructuralError("cannot flatten an empty window");
    if (f_max_kgps <= 0.0) throw StructuralError("flow normalization base must be positive");
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(window_width(w.k(), n)));
    for (const WindowStep& s : w.steps) {
        if (static_cast<int>(s.t_in_c.size()) != n ||
            static_cast<int>(s.flow_kgps.size()) != n)
            throw StructuralError("ragged window step");
        out.push_back(s.clock_min / kClockScale_min);
        for (double t : s.t_in_c) out.push_back(t / kTempScale_c);
        out.push_back(s.t_out_c / kTempScale_c);
        for (double f : s.flow_kgps) out.push_back(f / f_max_kgps);
    }
    return out;
}

std::vector<double> window_to_channels(const Window& w, double f_max_kgps) {
    const std::vector<double> flat = flatten_window(w, f_max_kgps);
    const int k = w.k();
    const int ch = 2 + 2 * w.zones();
    std::vector<double> out(flat.size());
    for (int s = 0; s < k; ++s)
        for (int c = 0; c < ch; ++c)
            out[static_cast<std::size_t>(c) * k + s] = flat[static_cast<std::size_t>(s) * ch + c];
    return out;
}

}  // namespace hvacft::hist
