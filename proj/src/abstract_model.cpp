#include "hvacft/abstract_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace hvacft::absmodel {

double ZoneModel::error() const {
    if (residuals.empty()) return 0.0;
    double sum = 0.0;
    for (double r : residuals) sum += r;
    return sum / static_cast<double>(residuals.size());
}

namespace {

constexpr int kCoefficients = 3;
constexpr int kMinSamplesPerCoefficient = 10;

// Solves the 3x3 system A*x = b in place with partial pivoting.
std::array<double, 3> solve3(std::array<std::array<double, 3>, 3> a, std::array<double, 3> b,
                             int zone) {
    double scale = 0.0;
    for (const auto& row : a)
        for (double v : row) scale = std::max(scale, std::abs(v));
    for (int col = 0; col < 3; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        if (std::abs(a[pivot][col]) < 1e-9 * std::max(scale, 1.0))
            throw IdentificationError("zone " + std::to_string(zone) +
                                      ": transition history is rank deficient");
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (int r = col + 1; r < 3; ++r) {
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < 3; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::array<double, 3> x{};
    for (int r = 2; r >= 0; --r) {
        double v = b[r];
        for (int c = r + 1; c < 3; ++c) v -= a[r][c] * x[c];
        x[r] = v / a[r][r];
    }
    return x;
}

ZoneModel fit_zone(const std::vector<FitSample>& samples, int zone, int error_window) {
    const int n = static_cast<int>(samples.size());
    if (n < kCoefficients * kMinSamplesPerCoefficient)
        throw IdentificationError("zone " + std::to_string(zone) + ": " + std::to_string(n) +
                                  " transition samples, need at least " +
                                  std::to_string(kCoefficients * kMinSamplesPerCoefficient));

    static const char* const names[3] = {"indoor temperature", "flow", "ambient temperature"};
    for (int c = 0; c < 3; ++c) {
        double lo = 0.0, hi = 0.0;
        for (int i = 0; i < n; ++i) {
            const auto& s = samples[i];
            const double v = c == 0 ? s.t_now_c : c == 1 ? s.mdot_kgps : s.t_out_c;
            if (i == 0) lo = hi = v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi - lo < 1e-9 * std::max(1.0, std::abs(hi)))
            throw IdentificationError("zone " + std::to_string(zone) + ": " + names[c] +
                                      " column has no variation");
    }

    std::array<std::array<double, 3>, 3> ata{};
    std::array<double, 3> atb{};
    for (const auto& s : samples) {
        const double x[3] = {s.t_now_c, s.mdot_kgps, s.t_out_c};
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) ata[r][c] += x[r] * x[c];
            atb[r] += x[r] * s.t_next_c;
        }
    }
    const auto coef = solve3(ata, atb, zone);

    ZoneModel zm;
    zm.alpha = coef[0];
    zm.beta = coef[1];
    zm.gamma = coef[2];
    zm.residuals.assign(static_cast<std::size_t>(error_window), 0.0);
    zm.cursor = 0;
    return zm;
}

}  // namespace

AbstractModel identify(const std::vector<std::vector<FitSample>>& per_zone, int error_window) {
    if (per_zone.empty()) throw IdentificationError("no zones to identify");
    if (error_window < 1) throw ConfigError("error window must be positive");
    AbstractModel m;
    m.error_window = error_window;
    for (int z = 0; z < static_cast<int>(per_zone.size()); ++z)
        m.zone.push_back(fit_zone(per_zone[z], z, error_window));
    return m;
}

AbstractModel identify_from_log(const hist::Log& log, int error_window,
                                bool use_forecast_ambient) {
    if (log.zones < 1) throw StructuralError("log has no zones");
    std::vector<std::vector<FitSample>> per_zone(static_cast<std::size_t>(log.zones));
    for (int i = 0; i + 1 < log.size(); ++i) {
        const auto& now = log.entries[i];
        const auto& next = log.entries[i + 1];
        if (static_cast<int>(now.t_in_c.size()) != log.zones ||
            static_cast<int>(now.flow_kgps.size()) != log.zones ||
            static_cast<int>(next.t_in_c.size()) != log.zones)
            throw StructuralError("log entry " + std::to_string(i) +
                                  " does not match the declared zone count");
        for (int z = 0; z < log.zones; ++z) {
            FitSample s;
            s.t_now_c = now.t_in_c[z];
            s.mdot_kgps = now.flow_kgps[z];
            s.t_out_c = use_forecast_ambient ? next.t_out_c : now.t_out_c;
            s.t_next_c = next.t_in_c[z];
            per_zone[static_cast<std::size_t>(z)].push_back(s);
        }
    }
    AbstractModel m = identify(per_zone, error_window);
    m.use_forecast_ambient = use_forecast_ambient;
    return m;
}

double predict_zone(const AbstractModel& m, int zone, double t_now_c, double mdot_kgps,
                    double t_out_c) {
    if (zone < 0 || zone >= m.zones())
        throw StructuralError("zone index " + std::to_string(zone) + " out of range");
    const ZoneModel& zm = m.zone[static_cast<std::size_t>(zone)];
    return zm.alpha * t_now_c + zm.beta * mdot_kgps + zm.gamma * t_out_c + zm.error();
}

std::vector<double> predict_next(const AbstractModel& m, const std::vector<double>& t_now_c,
                                 const std::vector<double>& mdot_kgps, double t_out_c) {
    if (static_cast<int>(t_now_c.size()) != m.zones() ||
        static_cast<int>(mdot_kgps.size()) != m.zones())
        throw StructuralError("state width does not match the zone count");
    std::vector<double> out(t_now_c.size());
    for (int z = 0; z < m.zones(); ++z)
        out[static_cast<std::size_t>(z)] =
            predict_zone(m, z, t_now_c[static_cast<std::size_t>(z)],
                         mdot_kgps[static_cast<std::size_t>(z)], t_out_c);
    return out;
}

void update_error(AbstractModel& m, int zone, double predicted_c, double measured_c) {
    if (zone < 0 || zone >= m.zones())
        throw StructuralError("zone index " + std::to_string(zone) + " out of range");
    ZoneModel& zm = m.zone[static_cast<std::size_t>(zone)];
    if (zm.residuals.empty()) throw StructuralError("residual window is empty");
    zm.residuals[static_cast<std::size_t>(zm.cursor)] = predicted_c - measured_c;
    zm.cursor = (zm.cursor + 1) % static_cast<int>(zm.residuals.size());
}

}  // namespace hvacft::absmodel
