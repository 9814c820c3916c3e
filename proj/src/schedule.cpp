#include "mgrpo/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace mgrpo {

double NoiseSchedule::alpha(double t) const {
    if (t < 0.0 || t > 1.0) {
        throw std::domain_error("alpha: t outside [0,1]");
    }
    switch (kind) {
        case ScheduleKind::linear:
            return 1.0 - t;
        case ScheduleKind::cosine:
            if (t == 0.0) {
                return 1.0;
            }
            if (t == 1.0) {
                return 0.0;
            }
            return std::cos(1.5707963267948966192 * t);
    }
    throw std::logic_error("alpha: unknown schedule");
}

std::string schedule_name(ScheduleKind kind) {
    return kind == ScheduleKind::linear ? "linear" : "cosine";
}

ScheduleKind schedule_from_name(const std::string& name) {
    if (name == "linear") {
        return ScheduleKind::linear;
    }
    if (name == "cosine") {
        return ScheduleKind::cosine;
    }
    throw std::invalid_argument("unknown schedule: " + name);
}

}  // namespace mgrpo
