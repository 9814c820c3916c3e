#pragma once

#include <string>

namespace mgrpo {

enum class ScheduleKind { linear, cosine };

/// Noise schedule: the survival probability alpha(t) that a token is still
/// uncorrupted at time t. alpha(0) = 1, alpha(1) = 0, strictly decreasing.
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::linear;

    double alpha(double t) const;
};

std::string schedule_name(ScheduleKind kind);
ScheduleKind schedule_from_name(const std::string& name);

}  // namespace mgrpo
