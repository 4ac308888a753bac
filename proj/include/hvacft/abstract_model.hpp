#pragma once
// Low-order per-zone surrogate of the plant, fit by least squares on logged
// control-period transitions:
//
//   T_hat[t+1] = alpha*T[t] + beta*mdot + gamma*T_out + e
//
// where mdot and T_out are the drivers of the transition (flow commanded
// over the period; ambient at its start, or the next-step ambient when
// use_forecast_ambient is set) and e is the running mean of a fixed-length
// residual window (predicted - measured), initialized to zeros.

#include <cstdint>
#include <vector>

#include "hvacft/errors.hpp"
#include "hvacft/history.hpp"

namespace hvacft::absmodel {

struct ZoneModel {
    double alpha = 1.0;
    double beta = 0.0;
    double gamma = 0.0;
    std::vector<double> residuals;  // ring buffer, zero-initialized
    int cursor = 0;

    double error() const;  // mean over the residual window
};

struct AbstractModel {
    std::vector<ZoneModel> zone;
    int error_window = 12;
    bool use_forecast_ambient = false;

    int zones() const { return static_cast<int>(zone.size()); }
};

// One logged transition for a zone.
struct FitSample {
    double t_now_c = 0.0;
    double mdot_kgps = 0.0;
    double t_out_c = 0.0;
    double t_next_c = 0.0;
};

// Least-squares identification; requires at least 10 samples per coefficient
// (30) per zone.  A regressor column without variation (e.g. constant flow)
// or a rank-deficient system raises IdentificationError.
AbstractModel identify(const std::vector<std::vector<FitSample>>& per_zone,
                       int error_window = 12);

// Builds per-zone samples from consecutive log entries and identifies.
AbstractModel identify_from_log(const hist::Log& log, int error_window = 12,
                                bool use_forecast_ambient = false);

double predict_zone(const AbstractModel& m, int zone, double t_now_c, double mdot_kgps,
                    double t_out_c);
std::vector<double> predict_next(const AbstractModel& m, const std::vector<double>& t_now_c,
                                 const std::vector<double>& mdot_kgps, double t_out_c);

// Pushes (predicted - measured) into the zone's residual window.
void update_error(AbstractModel& m, int zone, double predicted_c, double measured_c);

}  // namespace hvacft::absmodel
