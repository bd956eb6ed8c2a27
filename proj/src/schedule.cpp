#include "lpnsr/schedule.hpp"

#include <cmath>
#include <string>

namespace lpnsr {

void DiffusionSchedule::validate() const {
    if (T < 1) throw ConfigError("schedule: T must be >= 1");
    if (kappa <= 0.0) throw ConfigError("schedule: kappa must be > 0");
    if (eta.size() != static_cast<std::size_t>(T) + 1)
        throw ConfigError("schedule: eta must have length T+1");
    if (eta[0] != 0.0) throw ConfigError("schedule: eta[0] must be exactly 0");
    if (eta[1] <= 0.0) throw ConfigError("schedule: eta[1] must be > 0");
    if (eta[T] >= 1.0) throw ConfigError("schedule: eta[T] must be < 1");
    for (int t = 1; t <= T; ++t)
        if (eta[t] <= eta[t - 1])
            throw ConfigError("schedule: eta must be strictly increasing (violation at t=" +
                              std::to_string(t) + ")");
}

DiffusionSchedule build_schedule(int T, double eta_min, double eta_max, double kappa) {
    if (T < 1) throw ConfigError("schedule: T must be >= 1, got " + std::to_string(T));
    if (eta_min <= 0.0) throw ConfigError("schedule: eta_min must be > 0, got " + std::to_string(eta_min));
    if (eta_max >= 1.0) throw ConfigError("schedule: eta_max must be < 1, got " + std::to_string(eta_max));
    if (eta_min >= eta_max)
        throw ConfigError("schedule: eta_min must be < eta_max");
    if (kappa <= 0.0) throw ConfigError("schedule: kappa must be > 0, got " + std::to_string(kappa));

    DiffusionSchedule s;
    s.T = T;
    s.kappa = kappa;
    s.eta.resize(static_cast<std::size_t>(T) + 1);
    s.eta[0] = 0.0;
    if (T == 1) {
        s.eta[1] = eta_max;
    } else {
        const double ratio = eta_max / eta_min;
        for (int t = 1; t <= T; ++t)
            s.eta[t] = eta_min * std::pow(ratio, static_cast<double>(t - 1) / (T - 1));
    }
    s.validate();
    return s;
}

}  // namespace lpnsr
